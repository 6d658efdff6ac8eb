#pragma once

// Release registry and per-cluster reconcilers that pull new application
// versions, either on every poll or only at scheduled instants.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fedplane/model.hpp"

namespace fedplane {

struct Release {
  std::string app;
  SemVer version;
  std::string digest;
  Timestamp published_at = 0;
};

class ReleaseRegistry {
 public:
  /// Appends a release. The version must be strictly greater than the app's
  /// latest; duplicates and non-monotone versions are rejected with Conflict.
  const Release& publish(const std::string& app, const SemVer& version, const std::string& digest,
                         Timestamp at);

  std::optional<SemVer> latest(std::string_view app) const;

  /// Releases of one app in publish (= version) order.
  const std::vector<Release>& history(std::string_view app) const;
  const std::map<std::string, std::vector<Release>, std::less<>>& apps() const noexcept {
    return apps_;
  }

  /// Number of published versions of `app` strictly newer than `installed`.
  std::size_t newer_than(std::string_view app, const SemVer& installed) const;

 private:
  std::map<std::string, std::vector<Release>, std::less<>> apps_;
};

enum class SyncMode { Auto, Scheduled };

struct SyncPolicy {
  SyncMode mode = SyncMode::Auto;
  Timestamp period = 0;  // Scheduled only
  Timestamp poll_interval = 30;

  /// poll_interval > 0; Scheduled requires period >= poll_interval.
  void validate() const;
  /// Gap between consecutive reconciler wake-ups.
  Timestamp cadence() const noexcept { return mode == SyncMode::Auto ? poll_interval : period; }
  /// Whether upgrades may be applied at `now`.
  bool upgrades_allowed_at(Timestamp now) const noexcept {
    return mode == SyncMode::Auto || (period > 0 && now % period == 0);
  }
};

struct UpgradeAction {
  ClusterId cluster;
  std::string app;
  std::optional<SemVer> from;
  SemVer to;
  Timestamp applied_at = 0;
};

/// One reconciler pass for `cluster`. Every installed app that is behind the
/// registry jumps straight to latest. Unavailable clusters and non-scheduled
/// instants yield no actions. Never downgrades.
std::vector<UpgradeAction> poll(Cluster& cluster, const ReleaseRegistry& registry,
                                const SyncPolicy& policy, Timestamp now,
                                Availability availability);

struct DriftEntry {
  SemVer installed;
  SemVer latest;
  std::size_t behind_by = 0;
  friend bool operator==(const DriftEntry&, const DriftEntry&) = default;
};

using ClusterDrift = std::map<std::string, DriftEntry>;

/// Drift of the apps installed on one cluster that the registry knows about.
ClusterDrift cluster_drift(const ReleaseRegistry& registry, const Cluster& cluster);

std::map<ClusterId, ClusterDrift> drift_report(const ReleaseRegistry& registry,
                                               const std::map<ClusterId, Cluster>& clusters);

}  // namespace fedplane
