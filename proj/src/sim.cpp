#include "fedplane/sim.hpp"

#include <algorithm>

namespace fedplane::sim {

const char* to_string(EventKind k) noexcept {
  switch (k) {
    case EventKind::HeartbeatDue: return "HeartbeatDue";
    case EventKind::BookingExpiry: return "BookingExpiry";
    case EventKind::PollDue: return "PollDue";
    case EventKind::PartitionStart: return "PartitionStart";
    case EventKind::PartitionEnd: return "PartitionEnd";
    case EventKind::Custom: return "Custom";
  }
  return "?";
}

void SimClock::advance(Timestamp t) {
  if (t < now_) {
    throw SimFault("clock cannot move backwards from " + std::to_string(now_) + " to " +
                   std::to_string(t));
  }
  now_ = t;
}

std::uint64_t Simulator::schedule(SimEvent event) {
  if (event.at < clock_.now()) {
    throw SimFault(std::string("event ") + to_string(event.kind) + " scheduled at " +
                   std::to_string(event.at) + " before now " + std::to_string(clock_.now()));
  }
  event.seq = clock_.next_seq();
  auto seq = event.seq;
  queue_.push(std::move(event));
  return seq;
}

std::vector<SimEvent> Simulator::advance_to(Timestamp t) {
  if (t < clock_.now()) {
    throw SimFault("advance_to(" + std::to_string(t) + ") is before now " +
                   std::to_string(clock_.now()));
  }
  std::vector<SimEvent> fired;
  while (!queue_.empty() && queue_.top().at <= t) {
    SimEvent ev = queue_.top();
    queue_.pop();
    clock_.advance(ev.at);
    if (auto it = handlers_.find(ev.kind); it != handlers_.end()) it->second(ev);
    fired.push_back(std::move(ev));
  }
  clock_.advance(t);
  return fired;
}

Interval PartitionTable::add(const ClusterId& cluster, Timestamp from, Timestamp to) {
  if (from >= to) {
    throw Error(ErrorCode::Validation, "partition needs from < to (got [" + std::to_string(from) +
                                           "," + std::to_string(to) + "))");
  }
  auto& list = table_[cluster];
  Interval merged{from, to};
  std::vector<Interval> kept;
  for (const auto& iv : list) {
    if (iv.end < merged.start || merged.end < iv.start) {
      kept.push_back(iv);
    } else {
      merged.start = std::min(merged.start, iv.start);
      merged.end = std::max(merged.end, iv.end);
    }
  }
  kept.push_back(merged);
  std::sort(kept.begin(), kept.end(),
            [](const Interval& a, const Interval& b) { return a.start < b.start; });
  list = std::move(kept);
  return merged;
}

bool PartitionTable::cut_off(const ClusterId& cluster, Timestamp t) const {
  auto it = table_.find(cluster);
  if (it == table_.end()) return false;
  return std::any_of(it->second.begin(), it->second.end(),
                     [t](const Interval& iv) { return iv.start < t && t < iv.end; });
}

bool PartitionTable::ends_at(const ClusterId& cluster, Timestamp t) const {
  auto it = table_.find(cluster);
  if (it == table_.end()) return false;
  return std::any_of(it->second.begin(), it->second.end(),
                     [t](const Interval& iv) { return iv.end == t; });
}

const std::vector<Interval>& PartitionTable::intervals(const ClusterId& cluster) const {
  static const std::vector<Interval> kNone;
  auto it = table_.find(cluster);
  return it == table_.end() ? kNone : it->second;
}

}  // namespace fedplane::sim
