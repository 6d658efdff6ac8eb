#pragma once

// Deterministic discrete-event core. One event fires at a time, in (at, seq)
// order; handlers may schedule further events but never in the past.

#include <cstdint>
#include <functional>
#include <map>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedplane/model.hpp"

namespace fedplane::sim {

/// Programming error inside the simulator (e.g. scheduling into the past).
class SimFault : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class EventKind { HeartbeatDue, BookingExpiry, PollDue, PartitionStart, PartitionEnd, Custom };
const char* to_string(EventKind k) noexcept;

struct SimEvent {
  Timestamp at = 0;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::Custom;
  ClusterId cluster;   // HeartbeatDue, PollDue, Partition*
  BookingId booking;   // BookingExpiry
  std::string label;   // Custom
  Timestamp nominal = 0;  // heartbeat send time or poll instant, before delay
};

class SimClock {
 public:
  Timestamp now() const noexcept { return now_; }
  std::uint64_t next_seq() noexcept { return ++seq_; }
  std::uint64_t last_seq() const noexcept { return seq_; }
  void advance(Timestamp t);

 private:
  Timestamp now_ = 0;
  std::uint64_t seq_ = 0;
};

class Simulator {
 public:
  using Handler = std::function<void(const SimEvent&)>;

  Timestamp now() const noexcept { return clock_.now(); }
  SimClock& clock() noexcept { return clock_; }

  /// Assigns the next sequence number and queues the event. Throws SimFault if
  /// `event.at` is before now.
  std::uint64_t schedule(SimEvent event);

  void on(EventKind kind, Handler handler) { handlers_[kind] = std::move(handler); }

  /// Fires every queued event with at <= t in (at, seq) order, then sets the
  /// clock to t. Returns the fired events. Throws SimFault if t < now.
  std::vector<SimEvent> advance_to(Timestamp t);

  std::size_t pending() const noexcept { return queue_.size(); }

 private:
  struct Later {
    bool operator()(const SimEvent& a, const SimEvent& b) const noexcept {
      return a.at != b.at ? a.at > b.at : a.seq > b.seq;
    }
  };

  SimClock clock_;
  std::priority_queue<SimEvent, std::vector<SimEvent>, Later> queue_;
  std::map<EventKind, Handler> handlers_;
};

/// Per-cluster partition intervals. Overlapping or touching intervals merge.
/// A cluster is cut off strictly inside an interval: traffic due exactly at
/// `from` still gets through, and the cluster rejoins at `to`.
class PartitionTable {
 public:
  /// Adds [from, to) and returns the merged interval containing it. Throws
  /// Validation if from >= to.
  Interval add(const ClusterId& cluster, Timestamp from, Timestamp to);
  bool cut_off(const ClusterId& cluster, Timestamp t) const;
  /// The merged interval that ends exactly at `t`, if any.
  bool ends_at(const ClusterId& cluster, Timestamp t) const;
  const std::vector<Interval>& intervals(const ClusterId& cluster) const;

 private:
  std::map<ClusterId, std::vector<Interval>> table_;
};

}  // namespace fedplane::sim
