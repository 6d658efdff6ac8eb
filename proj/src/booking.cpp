#include "fedplane/booking.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <tuple>
#include <utility>

namespace fedplane {

namespace {

std::string sequence_id(const char* prefix, std::uint64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%06llu", prefix, static_cast<unsigned long long>(n));
  return buf;
}

}  // namespace

Booking& BookingCalendar::entry(const BookingId& id) {
  auto it = entries_.find(id);
  if (it == entries_.end()) throw Error(ErrorCode::NotFound, "booking " + id.str() + " not found");
  return it->second;
}

void BookingCalendar::insert(Booking booking) {
  auto id = booking.id;
  entries_.emplace(std::move(id), std::move(booking));
}

Booking BookingCalendar::remove(const BookingId& id) {
  auto node = entries_.extract(id);
  if (node.empty()) throw Error(ErrorCode::NotFound, "booking " + id.str() + " not found");
  return std::move(node.mapped());
}

std::vector<OverlapSegment> overlap_profile(const BookingCalendar& cal, const Interval& window) {
  std::vector<OverlapSegment> out;
  if (window.start >= window.end) return out;

  std::map<Timestamp, std::int64_t> deltas;
  deltas[window.start] += 0;
  for (const auto& [_, b] : cal.entries()) {
    if (!b.interval.overlaps(window)) continue;
    auto c = static_cast<std::int64_t>(b.gpu_count);
    deltas[std::max(b.interval.start, window.start)] += c;
    deltas[std::min(b.interval.end, window.end)] -= c;
  }
  deltas[window.end] += 0;

  std::int64_t running = 0;
  for (auto it = deltas.begin(); it != deltas.end(); ++it) {
    running += it->second;
    auto next = std::next(it);
    if (next == deltas.end()) break;
    out.push_back({{it->first, next->first}, static_cast<std::uint64_t>(running)});
  }
  return out;
}

std::uint64_t max_overlap(const BookingCalendar& cal, const Interval& window) {
  std::uint64_t peak = 0;
  for (const auto& seg : overlap_profile(cal, window)) peak = std::max(peak, seg.gpus);
  return peak;
}

Booking request_booking(BookingCalendar& cal, BookingId id, const BookingRequest& req,
                        Timestamp now, const ProjectStore& projects,
                        const BookingLimits& limits) {
  if (req.gpu_count < 1) throw Error(ErrorCode::Validation, "gpu_count must be at least 1");
  if (req.interval.start >= req.interval.end) {
    throw Error(ErrorCode::Validation, "booking interval must satisfy start < end");
  }
  if (req.interval.start < now) {
    throw Error(ErrorCode::Validation, "booking starts in the past (start " +
                                           std::to_string(req.interval.start) + " < now " +
                                           std::to_string(now) + ")");
  }
  if (req.interval.length() > limits.max_duration) {
    throw Error(ErrorCode::Validation,
                "booking longer than " + std::to_string(limits.max_duration) + " seconds");
  }
  if (auto d = authorize(req.user, req.project, "book", projects); !d.allowed()) {
    throw Error(ErrorCode::Unauthorized, d.reason);
  }

  const auto capacity = cal.bookable_capacity();
  auto profile = overlap_profile(cal, req.interval);
  for (std::size_t i = 0; i < profile.size(); ++i) {
    if (profile[i].gpus + req.gpu_count <= capacity) continue;
    auto start = profile[i].span.start;
    auto end = profile[i].span.end;
    auto peak = profile[i].gpus + req.gpu_count;
    for (++i; i < profile.size() && profile[i].gpus + req.gpu_count > capacity; ++i) {
      end = profile[i].span.end;
      peak = std::max(peak, profile[i].gpus + req.gpu_count);
    }
    throw BookingConflict(start, end, static_cast<std::int64_t>(peak),
                          static_cast<std::int64_t>(capacity));
  }

  Booking b{std::move(id), req.user, req.project, cal.cluster(), req.gpu_count, req.interval,
            BookingStatus::Granted};
  cal.insert(b);
  return b;
}

const char* to_string(AdmissionVerdict v) noexcept {
  switch (v) {
    case AdmissionVerdict::GrantGpu: return "GrantGpu";
    case AdmissionVerdict::GrantNoGpu: return "GrantNoGpu";
    case AdmissionVerdict::Reject: return "Reject";
  }
  return "?";
}

AdmissionResult admit(const AdmissionRequest& req, BookingCalendar& cal) {
  if (cal.cluster() != req.cluster) {
    throw Error(ErrorCode::NotFound, "no calendar for cluster " + req.cluster.str());
  }
  AdmissionResult result;
  if (!req.wants_gpu) {
    result.verdict = AdmissionVerdict::GrantNoGpu;
    return result;
  }

  const Booking* chosen = nullptr;
  auto key = [](const Booking& b) {
    return std::tie(b.interval.end, b.interval.start, b.id);
  };
  for (const auto& [_, b] : cal.entries()) {
    if (b.user != req.user || b.project != req.project || !b.live()) continue;
    if (!b.interval.contains(req.now)) continue;
    if (chosen == nullptr || key(b) < key(*chosen)) chosen = &b;
  }
  if (chosen == nullptr) {
    result.reason = "no valid booking";
    return result;
  }

  auto& booking = cal.entry(chosen->id);
  if (booking.status == BookingStatus::Granted) booking.transition(BookingStatus::Active);
  result.verdict = AdmissionVerdict::GrantGpu;
  result.booking = booking.id;
  result.gpus = booking.gpu_count;
  return result;
}

// ---------------------------------------------------------------------------

void BookingLedger::add_calendar(const ClusterId& cluster, std::uint64_t bookable_capacity) {
  if (calendars_.contains(cluster)) {
    throw Error(ErrorCode::Conflict, "calendar for " + cluster.str() + " already exists");
  }
  calendars_.emplace(cluster, BookingCalendar(cluster, bookable_capacity));
}

const BookingCalendar& BookingLedger::calendar(const ClusterId& cluster) const {
  auto it = calendars_.find(cluster);
  if (it == calendars_.end()) {
    throw Error(ErrorCode::NotFound, "cluster " + cluster.str() + " not found");
  }
  return it->second;
}

BookingCalendar& BookingLedger::calendar(const ClusterId& cluster) {
  return const_cast<BookingCalendar&>(std::as_const(*this).calendar(cluster));
}

const Booking& BookingLedger::booking(const BookingId& id) const {
  for (const auto& [_, cal] : calendars_) {
    if (auto it = cal.entries().find(id); it != cal.entries().end()) return it->second;
  }
  if (auto it = closed_.find(id); it != closed_.end()) return it->second;
  throw Error(ErrorCode::NotFound, "booking " + id.str() + " not found");
}

std::vector<Booking> BookingLedger::all_bookings() const {
  std::vector<Booking> out;
  for (const auto& [_, cal] : calendars_) {
    for (const auto& [__, b] : cal.entries()) out.push_back(b);
  }
  for (const auto& [_, b] : closed_) out.push_back(b);
  std::sort(out.begin(), out.end(), [](const Booking& a, const Booking& b) { return a.id < b.id; });
  return out;
}

Booking BookingLedger::request(const ClusterId& cluster, const BookingRequest& req,
                               Timestamp now, const ProjectStore& projects) {
  auto& cal = calendar(cluster);
  std::size_t future = 0;
  for (const auto& [_, c] : calendars_) {
    for (const auto& [__, b] : c.entries()) {
      if (b.user == req.user && b.live() && b.interval.end > now) ++future;
    }
  }
  if (future >= limits_.max_future_per_user) {
    throw Error(ErrorCode::Conflict, "user " + req.user.str() + " already holds " +
                                         std::to_string(future) + " future bookings");
  }
  auto b = request_booking(cal, BookingId(sequence_id("bk", next_booking_)), req, now, projects,
                           limits_);
  ++next_booking_;
  return b;
}

PodId BookingLedger::new_pod_id() { return PodId(sequence_id("pod", next_pod_++)); }

std::pair<AdmissionResult, std::optional<PodId>> BookingLedger::spawn(
    const AdmissionRequest& req) {
  auto result = admit(req, calendar(req.cluster));
  if (result.verdict == AdmissionVerdict::Reject) return {result, std::nullopt};

  for (auto& [_, pod] : pods_) {
    if (pod.live() && pod.user == req.user && pod.project == req.project &&
        pod.cluster == req.cluster) {
      pod.phase = PodPhase::Terminating;
      pod.gpu_grant.reset();
    }
  }
  WorkspacePod pod;
  pod.id = new_pod_id();
  pod.user = req.user;
  pod.project = req.project;
  pod.cluster = req.cluster;
  pod.phase = PodPhase::Running;
  pod.started_at = req.now;
  if (result.verdict == AdmissionVerdict::GrantGpu) {
    pod.gpu_grant = GpuGrant{*result.booking, result.gpus};
  }
  auto id = pod.id;
  pods_.emplace(id, std::move(pod));
  return {result, id};
}

RespawnAction BookingLedger::respawn(WorkspacePod& pod, Timestamp at, const std::string& cause) {
  RespawnAction action;
  action.terminated = pod.id;
  action.booking = pod.gpu_grant ? pod.gpu_grant->booking : BookingId{};
  action.at = at;
  action.cause = cause;

  pod.phase = PodPhase::Terminating;
  pod.gpu_grant.reset();

  WorkspacePod next;
  next.id = new_pod_id();
  next.user = pod.user;
  next.project = pod.project;
  next.cluster = pod.cluster;
  next.phase = PodPhase::Respawned;
  next.started_at = at;
  next.respawned_from = pod.id;
  action.respawned = next.id;
  auto id = next.id;
  pods_.emplace(id, std::move(next));
  return action;
}

std::vector<RespawnAction> BookingLedger::sweep(Timestamp now) {
  std::set<BookingId> expired;
  for (auto& [_, cal] : calendars_) {
    std::vector<BookingId> due;
    for (const auto& [id, b] : cal.entries()) {
      if (b.interval.end <= now) due.push_back(id);
    }
    for (const auto& id : due) {
      auto b = cal.remove(id);
      b.transition(BookingStatus::Expired);
      expired.insert(id);
      closed_.emplace(id, std::move(b));
    }
  }

  std::vector<RespawnAction> actions;
  if (expired.empty()) return actions;
  std::vector<PodId> holders;
  for (const auto& [id, pod] : pods_) {
    if (pod.live() && pod.gpu_grant && expired.contains(pod.gpu_grant->booking)) {
      holders.push_back(id);
    }
  }
  for (const auto& id : holders) actions.push_back(respawn(pods_.at(id), now, "expired"));
  return actions;
}

Booking BookingLedger::cancel(const BookingId& id, const UserId& by, bool by_admin,
                              const ProjectStore& projects, Timestamp now,
                              std::vector<RespawnAction>* respawns) {
  BookingCalendar* owner = nullptr;
  for (auto& [_, cal] : calendars_) {
    if (cal.contains(id)) owner = &cal;
  }
  auto closed = closed_.find(id);
  if (owner == nullptr && closed == closed_.end()) {
    throw Error(ErrorCode::NotFound, "booking " + id.str() + " not found");
  }

  // Authorize before revealing anything about the booking's state.
  const auto& current = owner != nullptr ? owner->entry(id) : closed->second;
  bool member = false;
  if (auto p = projects.find(current.project); p != projects.end()) member = p->second.has_member(by);
  if (!by_admin && by != current.user && !member) {
    throw Error(ErrorCode::Unauthorized, "not a member");
  }
  if (owner == nullptr) {
    throw Error(ErrorCode::InvalidTransition, "booking " + id.str() + " is already " +
                                                  to_string(current.status));
  }

  auto b = owner->remove(id);
  b.transition(BookingStatus::Cancelled);
  closed_.emplace(id, b);

  std::vector<PodId> holders;
  for (const auto& [pid, pod] : pods_) {
    if (pod.live() && pod.gpu_grant && pod.gpu_grant->booking == id) holders.push_back(pid);
  }
  for (const auto& pid : holders) {
    auto action = respawn(pods_.at(pid), now, "cancelled");
    if (respawns != nullptr) respawns->push_back(std::move(action));
  }
  return b;
}

void BookingLedger::purge_project(const ProjectId& project, Timestamp,
                                  const std::optional<ClusterId>& cluster) {
  for (auto& [cid, cal] : calendars_) {
    if (cluster && cid != *cluster) continue;
    std::vector<BookingId> ids;
    for (const auto& [id, b] : cal.entries()) {
      if (b.project == project) ids.push_back(id);
    }
    for (const auto& id : ids) {
      auto b = cal.remove(id);
      b.transition(BookingStatus::Cancelled);
      closed_.emplace(id, std::move(b));
    }
  }
  for (auto& [_, pod] : pods_) {
    if (pod.project != project || !pod.live()) continue;
    if (cluster && pod.cluster != *cluster) continue;
    pod.phase = PodPhase::Terminating;
    pod.gpu_grant.reset();
  }
}

std::uint64_t BookingLedger::booked_gpu_seconds(const ClusterId& cluster,
                                                const Interval& window) const {
  std::uint64_t total = 0;
  auto add = [&](const Booking& b) {
    if (b.cluster != cluster || b.status == BookingStatus::Cancelled) return;
    auto lo = std::max(b.interval.start, window.start);
    auto hi = std::min(b.interval.end, window.end);
    if (hi > lo) total += b.gpu_count * static_cast<std::uint64_t>(hi - lo);
  };
  if (auto it = calendars_.find(cluster); it != calendars_.end()) {
    for (const auto& [_, b] : it->second.entries()) add(b);
  }
  for (const auto& [_, b] : closed_) add(b);
  return total;
}

std::uint64_t BookingLedger::granted_gpus(const ClusterId& cluster) const {
  std::uint64_t total = 0;
  for (const auto& [_, pod] : pods_) {
    if (pod.live() && pod.cluster == cluster && pod.gpu_grant) total += pod.gpu_grant->gpus;
  }
  return total;
}

void BookingLedger::restore(std::map<ClusterId, BookingCalendar> calendars,
                            std::map<BookingId, Booking> closed, PodStore pods,
                            std::uint64_t next_booking, std::uint64_t next_pod) {
  calendars_ = std::move(calendars);
  closed_ = std::move(closed);
  pods_ = std::move(pods);
  next_booking_ = next_booking;
  next_pod_ = next_pod;
}

}  // namespace fedplane
