#include "fedplane/monitor.hpp"

namespace fedplane {

void AvailabilityPolicy::validate() const {
  if (interval <= 0) throw Error(ErrorCode::Validation, "heartbeat interval must be positive");
  if (miss_threshold < 1) throw Error(ErrorCode::Validation, "miss threshold must be at least 1");
}

void MonitorStore::register_cluster(const ClusterId& cluster) { records_.try_emplace(cluster); }

const MonitorStore::Record& MonitorStore::record(const ClusterId& cluster) const {
  auto it = records_.find(cluster);
  if (it == records_.end()) {
    throw Error(ErrorCode::NotFound, "cluster " + cluster.str() + " not found");
  }
  return it->second;
}

HeartbeatOutcome MonitorStore::record_heartbeat(const Heartbeat& hb) {
  auto it = records_.find(hb.cluster);
  if (it == records_.end()) {
    throw Error(ErrorCode::NotFound, "cluster " + hb.cluster.str() + " not found");
  }
  auto& rec = it->second;
  if (rec.last_heartbeat && hb.at <= *rec.last_heartbeat) return {false, "stale"};
  rec.last_heartbeat = hb.at;
  rec.latest = hb.metrics;
  rec.history.push_back(hb);
  while (rec.history.size() > kHeartbeatHistory) rec.history.pop_front();
  return {true, {}};
}

Availability availability(const ClusterId& cluster, Timestamp now,
                          const AvailabilityPolicy& policy, const MonitorStore& store) {
  const auto& rec = store.record(cluster);
  if (!rec.last_heartbeat) return Availability::Unavailable;
  return now - *rec.last_heartbeat > policy.tolerance() ? Availability::Unavailable
                                                         : Availability::Available;
}

FederationStatus federation_snapshot(Timestamp now, const FederationStore& federation,
                                     const BookingLedger& bookings, const MonitorStore& monitor,
                                     const AvailabilityPolicy& policy,
                                     Timestamp utilization_window) {
  FederationStatus out;
  out.at = now;
  out.version = federation.version();
  for (const auto& [id, c] : federation.clusters()) {
    ClusterStatus s;
    s.cluster = id;
    s.display_name = c.display_name;
    s.availability = availability(id, now, policy, monitor);
    s.capacity = c.capacity;
    s.committed = federation.committed(id);
    s.free = c.capacity - s.committed;
    s.bookable_gpus = c.bookable_gpus;
    s.gpus_granted = bookings.granted_gpus(id);
    if (c.bookable_gpus > 0 && utilization_window > 0) {
      auto used = bookings.booked_gpu_seconds(id, {now - utilization_window, now});
      s.bookable_utilization = static_cast<double>(used) /
                               static_cast<double>(c.bookable_gpus * utilization_window);
    }
    const auto& rec = monitor.record(id);
    s.last_heartbeat = rec.last_heartbeat;
    if (rec.last_heartbeat) s.staleness = now - *rec.last_heartbeat;
    s.last_metrics = rec.latest;
    out.clusters.push_back(std::move(s));
  }
  for (const auto& [id, p] : federation.projects()) {
    ProjectStatus s{id, p.name, p.state, p.placement, {}};
    if (auto ns = federation.namespaces().find(id); ns != federation.namespaces().end()) {
      s.apps = ns->second.apps;
    }
    out.projects.push_back(std::move(s));
  }
  return out;
}

}  // namespace fedplane
