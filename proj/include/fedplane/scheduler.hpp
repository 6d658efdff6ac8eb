#pragma once

// Federation-level placement: picks the cluster that hosts a newly registered
// project, exactly once, from its resource request.

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "fedplane/model.hpp"

namespace fedplane {

struct ClusterLoadView {
  ClusterId cluster;
  ResourceVector capacity;
  ResourceVector committed;  // sum of requests of projects placed here
  ResourceVector free;       // capacity - committed
  bool available = false;
};

/// Builds a view with free = capacity - committed. Requires committed <= capacity.
ClusterLoadView make_load_view(ClusterId cluster, const ResourceVector& capacity,
                               const ResourceVector& committed, bool available);

struct ScoreEntry {
  ClusterId cluster;
  bool feasible = false;
  ResourceVector leftover;  // free - request, saturated at zero when infeasible
  std::string blocked_by;   // empty when feasible
};

enum class PlacementOutcome { Placed, Infeasible };

struct PlacementDecision {
  ProjectId project;
  ResourceVector request;
  PlacementOutcome outcome = PlacementOutcome::Infeasible;
  std::optional<ClusterId> cluster;  // set iff Placed
  std::string reason;                // set iff Infeasible
  std::vector<ScoreEntry> score_trace;
  std::uint64_t state_version = 0;

  bool placed() const noexcept { return outcome == PlacementOutcome::Placed; }
};

/// Clusters that are available and whose free capacity covers the request, in
/// input order.
std::vector<ClusterId> feasible_clusters(std::span<const ClusterLoadView> views,
                                         const ResourceVector& request);

/// Best-fit placement. Among feasible clusters minimize leftover gpus, then
/// leftover memory, then leftover cpu cores, then the cluster id. When nothing
/// is feasible the reason names the dimension that blocks the most available
/// clusters (ties broken gpus, memory_gib, cpu_cores).
///
/// `pin` restricts the choice to one cluster; it skips scoring but not the
/// feasibility check. Throws NotFound if the pinned cluster is not in `views`.
PlacementDecision place_project(std::span<const ClusterLoadView> views,
                                const Project& project,
                                const std::optional<ClusterId>& pin = std::nullopt);

struct ReconcileIntent {
  ProjectId project;
  ClusterId cluster;
};

/// Clusters, projects, namespaces and request-based committed accounting.
/// Mutations that affect placement bump `version()`; commits are checked
/// against the version their decision was scored at.
class FederationStore {
 public:
  using AvailabilityFn = std::function<bool(const ClusterId&)>;

  void add_cluster(Cluster cluster);
  bool has_cluster(const ClusterId& id) const { return clusters_.contains(id); }
  const Cluster& cluster(const ClusterId& id) const;
  Cluster& cluster(const ClusterId& id);
  const std::map<ClusterId, Cluster>& clusters() const noexcept { return clusters_; }
  std::map<ClusterId, Cluster>& clusters() noexcept { return clusters_; }

  /// Adds a Pending project. Rejects duplicate or retired ids and duplicate names.
  void add_project(Project project);
  const Project& project(const ProjectId& id) const;
  Project& project(const ProjectId& id);
  const ProjectStore& projects() const noexcept { return projects_; }
  ProjectStore& projects() noexcept { return projects_; }

  /// Removes a project and frees its placement. Its id is never reused.
  void remove_project(const ProjectId& id);

  const std::map<ProjectId, Namespace>& namespaces() const noexcept { return namespaces_; }
  std::map<ProjectId, Namespace>& namespaces() noexcept { return namespaces_; }

  ResourceVector committed(const ClusterId& id) const;
  std::uint64_t version() const noexcept { return version_; }

  std::vector<ClusterLoadView> load_views(const AvailabilityFn& available) const;

  /// Scores `project` against the current state and stamps the state version.
  PlacementDecision score(const ProjectId& project, const AvailabilityFn& available,
                          const std::optional<ClusterId>& pin = std::nullopt) const;

  /// Applies a Placed decision: marks the project Placed, adds its request to
  /// the cluster's committed total, creates its namespace and enqueues a
  /// reconciliation intent.
  ///
  /// Throws Precondition for an Infeasible decision or a non-Pending project,
  /// Conflict if the cluster can no longer hold the request, and StaleConflict
  /// if the state changed since the decision was scored.
  void commit_placement(const PlacementDecision& decision);

  /// Marks a project Rejected after an Infeasible decision.
  void reject(const PlacementDecision& decision);

  /// Frees a placed project's committed resources and namespace; the project
  /// returns to Pending.
  void release_placement(const ProjectId& id);

  /// Updates the request of a placed project in place. Requires the current
  /// cluster to fit the new request.
  void resize_in_place(const ProjectId& id, const ResourceVector& request);

  std::deque<ReconcileIntent>& intents() noexcept { return intents_; }
  const std::deque<ReconcileIntent>& intents() const noexcept { return intents_; }

  const std::set<ProjectId>& retired_projects() const noexcept { return retired_; }

  /// Rebuilds internal accounting after a snapshot load.
  void restore(std::map<ClusterId, Cluster> clusters, ProjectStore projects,
               std::map<ProjectId, Namespace> namespaces, std::deque<ReconcileIntent> intents,
               std::set<ProjectId> retired, std::uint64_t version);

 private:
  std::map<ClusterId, Cluster> clusters_;
  ProjectStore projects_;
  std::map<ProjectId, Namespace> namespaces_;
  std::map<ClusterId, ResourceVector> committed_;
  std::deque<ReconcileIntent> intents_;
  std::set<ProjectId> retired_;
  std::uint64_t version_ = 0;
};

}  // namespace fedplane
