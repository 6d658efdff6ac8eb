#include "fedplane/release.hpp"

#include <algorithm>

namespace fedplane {

const Release& ReleaseRegistry::publish(const std::string& app, const SemVer& version,
                                        const std::string& digest, Timestamp at) {
  if (auto why = identifier_violation(app); !why.empty()) {
    throw Error(ErrorCode::Validation, "invalid application name: " + why);
  }
  if (digest.empty()) throw Error(ErrorCode::Validation, "release digest is empty");
  auto& list = apps_[app];
  if (!list.empty()) {
    const auto& last = list.back().version;
    if (version == last) {
      throw Error(ErrorCode::Conflict, app + " " + version.str() + " already published");
    }
    if (version < last) {
      throw Error(ErrorCode::Conflict, app + " " + version.str() +
                                           " is not newer than latest " + last.str());
    }
  }
  list.push_back({app, version, digest, at});
  return list.back();
}

std::optional<SemVer> ReleaseRegistry::latest(std::string_view app) const {
  auto it = apps_.find(app);
  if (it == apps_.end() || it->second.empty()) return std::nullopt;
  return it->second.back().version;
}

const std::vector<Release>& ReleaseRegistry::history(std::string_view app) const {
  static const std::vector<Release> kEmpty;
  auto it = apps_.find(app);
  return it == apps_.end() ? kEmpty : it->second;
}

std::size_t ReleaseRegistry::newer_than(std::string_view app, const SemVer& installed) const {
  const auto& list = history(app);
  return static_cast<std::size_t>(std::count_if(
      list.begin(), list.end(), [&](const Release& r) { return r.version > installed; }));
}

void SyncPolicy::validate() const {
  if (poll_interval <= 0) throw Error(ErrorCode::Validation, "poll_interval must be positive");
  if (mode == SyncMode::Scheduled && period < poll_interval) {
    throw Error(ErrorCode::Validation, "scheduled period must be at least poll_interval");
  }
}

std::vector<UpgradeAction> poll(Cluster& cluster, const ReleaseRegistry& registry,
                                const SyncPolicy& policy, Timestamp now,
                                Availability availability) {
  std::vector<UpgradeAction> actions;
  if (availability != Availability::Available) return actions;
  if (!policy.upgrades_allowed_at(now)) return actions;

  for (auto& [app, installed] : cluster.installed) {
    auto latest = registry.latest(app);
    if (!latest || *latest <= installed) continue;
    actions.push_back({cluster.id, app, installed, *latest, now});
    installed = *latest;
  }
  return actions;
}

ClusterDrift cluster_drift(const ReleaseRegistry& registry, const Cluster& cluster) {
  ClusterDrift out;
  for (const auto& [app, installed] : cluster.installed) {
    auto latest = registry.latest(app);
    if (!latest) continue;
    out.emplace(app, DriftEntry{installed, *latest, registry.newer_than(app, installed)});
  }
  return out;
}

std::map<ClusterId, ClusterDrift> drift_report(const ReleaseRegistry& registry,
                                               const std::map<ClusterId, Cluster>& clusters) {
  std::map<ClusterId, ClusterDrift> out;
  for (const auto& [id, c] : clusters) out.emplace(id, cluster_drift(registry, c));
  return out;
}

}  // namespace fedplane
