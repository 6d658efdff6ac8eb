#pragma once

// Cluster monitoring: heartbeat ingestion, the missed-heartbeat availability
// detector, and the point-in-time federation status view.

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedplane/booking.hpp"
#include "fedplane/model.hpp"
#include "fedplane/scheduler.hpp"

namespace fedplane {

struct HeartbeatMetrics {
  std::uint64_t gpus_in_use = 0;
  std::uint64_t pods_running = 0;
  ResourceVector committed;
  friend bool operator==(const HeartbeatMetrics&, const HeartbeatMetrics&) = default;
};

struct Heartbeat {
  ClusterId cluster;
  Timestamp at = 0;
  HeartbeatMetrics metrics;
};

struct AvailabilityPolicy {
  Timestamp interval = 10;
  std::int64_t miss_threshold = 3;

  /// Throws Validation unless interval > 0 and miss_threshold >= 1.
  void validate() const;
  Timestamp tolerance() const noexcept { return interval * miss_threshold; }
};

inline constexpr std::size_t kHeartbeatHistory = 1000;

struct HeartbeatOutcome {
  bool accepted = false;
  std::string reason;  // "stale" when dropped
};

class MonitorStore {
 public:
  struct Record {
    std::optional<Timestamp> last_heartbeat;
    std::optional<HeartbeatMetrics> latest;
    std::deque<Heartbeat> history;  // newest last, at most kHeartbeatHistory
  };

  void register_cluster(const ClusterId& cluster);
  bool knows(const ClusterId& cluster) const { return records_.contains(cluster); }
  const Record& record(const ClusterId& cluster) const;
  const std::map<ClusterId, Record>& records() const noexcept { return records_; }

  /// Accepts iff hb.at is newer than the last accepted heartbeat of the cluster.
  /// Throws NotFound for an unregistered cluster.
  HeartbeatOutcome record_heartbeat(const Heartbeat& hb);

  void restore(std::map<ClusterId, Record> records) { records_ = std::move(records); }

 private:
  std::map<ClusterId, Record> records_;
};

/// Unavailable iff no heartbeat was ever accepted or now - last_heartbeat
/// exceeds interval * miss_threshold.
Availability availability(const ClusterId& cluster, Timestamp now,
                          const AvailabilityPolicy& policy, const MonitorStore& store);

struct ClusterStatus {
  ClusterId cluster;
  std::string display_name;
  Availability availability = Availability::Unavailable;
  ResourceVector capacity;
  ResourceVector committed;
  ResourceVector free;
  std::uint64_t bookable_gpus = 0;
  std::uint64_t gpus_granted = 0;
  /// Reserved gpu-seconds over the utilization window divided by
  /// bookable_gpus * window; 0 when nothing is bookable.
  double bookable_utilization = 0.0;
  std::optional<Timestamp> last_heartbeat;
  std::optional<Timestamp> staleness;  // now - last_heartbeat
  std::optional<HeartbeatMetrics> last_metrics;
};

struct ProjectStatus {
  ProjectId project;
  std::string name;
  ProjectState state = ProjectState::Pending;
  std::optional<ClusterId> placement;
  std::map<std::string, AppInstance> apps;
};

struct FederationStatus {
  Timestamp at = 0;
  std::uint64_t version = 0;
  std::vector<ClusterStatus> clusters;
  std::vector<ProjectStatus> projects;
};

inline constexpr Timestamp kUtilizationWindow = 3600;

/// Consistent snapshot of every cluster and project. The caller guarantees the
/// stores are not mutated during the call.
FederationStatus federation_snapshot(Timestamp now, const FederationStore& federation,
                                     const BookingLedger& bookings, const MonitorStore& monitor,
                                     const AvailabilityPolicy& policy,
                                     Timestamp utilization_window = kUtilizationWindow);

}  // namespace fedplane
