#pragma once

// The control plane: every store of the federation behind a single command
// entry point. Both the gateway and the simulator drive it, and the event log
// replays it, so every mutation goes through apply().

#include <cstdint>
#include <map>
#include <set>
#include <string>

#include "fedplane/booking.hpp"
#include "fedplane/model.hpp"
#include "fedplane/monitor.hpp"
#include "fedplane/release.hpp"
#include "fedplane/scheduler.hpp"
#include "fedplane/serialize.hpp"

namespace fedplane {

/// Actor used by the simulator and internal timers. Holds admin rights.
inline const UserId kSystemActor{"system"};

struct PlaneConfig {
  AvailabilityPolicy monitor;
  SyncPolicy sync;
  BookingLimits limits;
  std::set<UserId> admins;
  Timestamp utilization_window = kUtilizationWindow;

  void validate() const;
};

bool operator==(const PlaneConfig& a, const PlaneConfig& b);
void to_json(json& j, const PlaneConfig& v);
void from_json(const json& j, PlaneConfig& v);

/// Builds a config from textual key=value settings over `base`, as found in
/// config files and scenario headers. Unknown keys are rejected.
PlaneConfig plane_config_from_strings(const std::map<std::string, std::string>& settings,
                                      const PlaneConfig& base = {});

/// A validated mutation. `at` must not precede the plane's current time.
struct Command {
  std::string kind;
  Timestamp at = 0;
  UserId actor;
  json payload = json::object();
};

void to_json(json& j, const Command& v);
void from_json(const json& j, Command& v);

/// Command kinds accepted by ControlPlane::apply.
namespace cmd {
inline constexpr const char* kConfigure = "configure";
inline constexpr const char* kAddCluster = "add-cluster";
inline constexpr const char* kHeartbeat = "heartbeat";
inline constexpr const char* kRegisterProject = "register-project";
inline constexpr const char* kChangeQuota = "change-quota";
inline constexpr const char* kDeleteProject = "delete-project";
inline constexpr const char* kCreateBooking = "create-booking";
inline constexpr const char* kCancelBooking = "cancel-booking";
inline constexpr const char* kSpawnWorkspace = "spawn-workspace";
inline constexpr const char* kPublishRelease = "publish-release";
inline constexpr const char* kPoll = "poll";
inline constexpr const char* kSweep = "sweep";
}  // namespace cmd

class ControlPlane {
 public:
  explicit ControlPlane(PlaneConfig config = {});

  /// Applies one command and returns its result document. Every command first
  /// runs the expiry sweep at `at`, so expiries at an instant always precede
  /// admissions at that instant.
  ///
  /// Throws Error; on throw the plane may hold the effects of that implicit
  /// sweep but nothing else.
  json apply(const Command& command);

  Timestamp now() const noexcept { return now_; }
  std::uint64_t applied() const noexcept { return applied_; }
  const PlaneConfig& config() const noexcept { return config_; }
  bool is_admin(const UserId& user) const;

  const FederationStore& federation() const noexcept { return federation_; }
  const BookingLedger& bookings() const noexcept { return bookings_; }
  const MonitorStore& monitor() const noexcept { return monitor_; }
  const ReleaseRegistry& registry() const noexcept { return registry_; }

  Availability availability(const ClusterId& cluster, Timestamp now) const;
  FederationStatus status(Timestamp now) const;

  /// Metrics a cluster would report about itself right now.
  HeartbeatMetrics observed_metrics(const ClusterId& cluster) const;

  /// Throws Unauthorized unless `user` is a member of `project`.
  void require_member(const UserId& user, const ProjectId& project,
                      std::string_view action) const;

  /// Canonical document of the whole state; digest() hashes it.
  json state_json() const;
  std::string digest() const;

  /// Digest of everything keyed by one project: the project, its namespace,
  /// its bookings and its pods.
  std::string project_digest(const ProjectId& project) const;

  static ControlPlane from_state_json(const json& state);

 private:
  json configure(const Command& c);
  json add_cluster(const Command& c);
  json heartbeat(const Command& c);
  json register_project(const Command& c);
  json change_quota(const Command& c);
  json delete_project(const Command& c);
  json create_booking(const Command& c);
  json cancel_booking(const Command& c);
  json spawn_workspace(const Command& c);
  json publish_release(const Command& c);
  json poll_cluster(const Command& c);

  void require_admin(const UserId& actor) const;
  json sweep_at(Timestamp now);
  json reconcile_namespaces(const ClusterId& cluster);
  void sync_namespace_versions(const ClusterId& cluster);
  FederationStore::AvailabilityFn availability_at(Timestamp now) const;

  PlaneConfig config_;
  FederationStore federation_;
  BookingLedger bookings_;
  MonitorStore monitor_;
  ReleaseRegistry registry_;
  Timestamp now_ = 0;
  std::uint64_t applied_ = 0;
  std::uint64_t next_project_ = 1;
};

}  // namespace fedplane
