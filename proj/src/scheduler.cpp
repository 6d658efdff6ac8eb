#include "fedplane/scheduler.hpp"

#include <algorithm>
#include <array>
#include <tuple>
#include <utility>

namespace fedplane {

namespace {

std::uint64_t saturating_sub(std::uint64_t a, std::uint64_t b) { return a > b ? a - b : 0; }

// Blocking dimensions in tie-break priority order.
constexpr std::array<const char*, 3> kDimensions = {"gpus", "memory_gib", "cpu_cores"};

std::array<bool, 3> blocked_dimensions(const ResourceVector& request,
                                       const ResourceVector& free) {
  return {request.gpus > free.gpus, request.memory_gib > free.memory_gib,
          request.cpu_cores > free.cpu_cores};
}

ScoreEntry score_one(const ClusterLoadView& view, const ResourceVector& request) {
  ScoreEntry e;
  e.cluster = view.cluster;
  e.leftover = {saturating_sub(view.free.gpus, request.gpus),
                saturating_sub(view.free.cpu_cores, request.cpu_cores),
                saturating_sub(view.free.memory_gib, request.memory_gib)};
  if (!view.available) {
    e.blocked_by = "unavailable";
    return e;
  }
  auto blocked = blocked_dimensions(request, view.free);
  for (std::size_t i = 0; i < blocked.size(); ++i) {
    if (blocked[i]) {
      e.blocked_by = kDimensions[i];
      return e;
    }
  }
  e.feasible = true;
  return e;
}

std::string dominant_blocker(std::span<const ClusterLoadView> views,
                             const ResourceVector& request) {
  std::array<int, 3> counts{};
  bool any_available = false;
  for (const auto& v : views) {
    if (!v.available) continue;
    any_available = true;
    auto blocked = blocked_dimensions(request, v.free);
    for (std::size_t i = 0; i < blocked.size(); ++i) counts[i] += blocked[i] ? 1 : 0;
  }
  if (!any_available) return "no available clusters";
  auto best = std::max_element(counts.begin(), counts.end());  // first max wins ties
  return kDimensions[static_cast<std::size_t>(best - counts.begin())];
}

}  // namespace

ClusterLoadView make_load_view(ClusterId cluster, const ResourceVector& capacity,
                               const ResourceVector& committed, bool available) {
  if (!fits_within(committed, capacity)) {
    throw Error(ErrorCode::Precondition,
                "committed exceeds capacity on cluster " + cluster.str());
  }
  return {std::move(cluster), capacity, committed, capacity - committed, available};
}

std::vector<ClusterId> feasible_clusters(std::span<const ClusterLoadView> views,
                                         const ResourceVector& request) {
  std::vector<ClusterId> out;
  for (const auto& v : views) {
    if (v.available && fits_within(request, v.free)) out.push_back(v.cluster);
  }
  return out;
}

PlacementDecision place_project(std::span<const ClusterLoadView> views,
                                const Project& project,
                                const std::optional<ClusterId>& pin) {
  PlacementDecision d;
  d.project = project.id;
  d.request = project.request;

  if (views.empty()) {
    d.reason = "no clusters registered";
    return d;
  }

  if (pin) {
    auto it = std::find_if(views.begin(), views.end(),
                           [&](const ClusterLoadView& v) { return v.cluster == *pin; });
    if (it == views.end()) {
      throw Error(ErrorCode::NotFound, "pinned cluster " + pin->str() + " not found");
    }
    d.score_trace.push_back(score_one(*it, project.request));
    const auto& entry = d.score_trace.back();
    if (entry.feasible) {
      d.outcome = PlacementOutcome::Placed;
      d.cluster = *pin;
    } else {
      d.reason = entry.blocked_by;
    }
    return d;
  }

  const ScoreEntry* best = nullptr;
  auto key = [](const ScoreEntry& e) {
    return std::tie(e.leftover.gpus, e.leftover.memory_gib, e.leftover.cpu_cores, e.cluster);
  };
  d.score_trace.reserve(views.size());
  for (const auto& v : views) d.score_trace.push_back(score_one(v, project.request));
  for (const auto& e : d.score_trace) {
    if (e.feasible && (best == nullptr || key(e) < key(*best))) best = &e;
  }

  if (best != nullptr) {
    d.outcome = PlacementOutcome::Placed;
    d.cluster = best->cluster;
  } else {
    d.reason = dominant_blocker(views, project.request);
  }
  return d;
}

// ---------------------------------------------------------------------------

void FederationStore::add_cluster(Cluster cluster) {
  if (auto why = identifier_violation(cluster.id.str()); !why.empty()) {
    throw Error(ErrorCode::Validation, "invalid cluster id: " + why);
  }
  if (clusters_.contains(cluster.id)) {
    throw Error(ErrorCode::Conflict, "cluster " + cluster.id.str() + " already registered");
  }
  if (auto v = validate_resource_vector(cluster.capacity); !v.empty()) {
    throw Error(ErrorCode::Validation, "invalid capacity: " + v.front());
  }
  if (cluster.bookable_gpus > cluster.capacity.gpus) {
    throw Error(ErrorCode::Validation, "bookable_gpus exceeds capacity gpus");
  }
  committed_[cluster.id] = {};
  clusters_.emplace(cluster.id, std::move(cluster));
  ++version_;
}

const Cluster& FederationStore::cluster(const ClusterId& id) const {
  auto it = clusters_.find(id);
  if (it == clusters_.end()) throw Error(ErrorCode::NotFound, "cluster " + id.str() + " not found");
  return it->second;
}

Cluster& FederationStore::cluster(const ClusterId& id) {
  return const_cast<Cluster&>(std::as_const(*this).cluster(id));
}

void FederationStore::add_project(Project project) {
  if (auto why = identifier_violation(project.id.str()); !why.empty()) {
    throw Error(ErrorCode::Validation, "invalid project id: " + why);
  }
  if (project.name.empty()) throw Error(ErrorCode::Validation, "project name is empty");
  if (project.members.empty()) throw Error(ErrorCode::Validation, "project has no members");
  for (const auto& m : project.members) {
    if (auto why = identifier_violation(m.str()); !why.empty()) {
      throw Error(ErrorCode::Validation, "invalid member id: " + why);
    }
  }
  if (auto v = validate_resource_vector(project.request); !v.empty()) {
    throw Error(ErrorCode::Validation, "invalid request: " + v.front());
  }
  if (projects_.contains(project.id) || retired_.contains(project.id)) {
    throw Error(ErrorCode::Conflict, "project id " + project.id.str() + " already used");
  }
  for (const auto& [_, p] : projects_) {
    if (p.name == project.name) {
      throw Error(ErrorCode::Conflict, "project name '" + project.name + "' already used");
    }
  }
  project.state = ProjectState::Pending;
  project.placement.reset();
  projects_.emplace(project.id, std::move(project));
}

const Project& FederationStore::project(const ProjectId& id) const {
  auto it = projects_.find(id);
  if (it == projects_.end()) throw Error(ErrorCode::NotFound, "project " + id.str() + " not found");
  return it->second;
}

Project& FederationStore::project(const ProjectId& id) {
  return const_cast<Project&>(std::as_const(*this).project(id));
}

void FederationStore::remove_project(const ProjectId& id) {
  if (project(id).state == ProjectState::Placed) release_placement(id);
  projects_.erase(id);
  retired_.insert(id);
  std::erase_if(intents_, [&](const ReconcileIntent& i) { return i.project == id; });
}

ResourceVector FederationStore::committed(const ClusterId& id) const {
  auto it = committed_.find(id);
  if (it == committed_.end()) throw Error(ErrorCode::NotFound, "cluster " + id.str() + " not found");
  return it->second;
}

std::vector<ClusterLoadView> FederationStore::load_views(const AvailabilityFn& available) const {
  std::vector<ClusterLoadView> out;
  out.reserve(clusters_.size());
  for (const auto& [id, c] : clusters_) {
    out.push_back(make_load_view(id, c.capacity, committed_.at(id), available(id)));
  }
  return out;
}

PlacementDecision FederationStore::score(const ProjectId& id, const AvailabilityFn& available,
                                         const std::optional<ClusterId>& pin) const {
  auto views = load_views(available);
  auto d = place_project(views, project(id), pin);
  d.state_version = version_;
  return d;
}

void FederationStore::commit_placement(const PlacementDecision& decision) {
  if (!decision.placed() || !decision.cluster) {
    throw Error(ErrorCode::Precondition, "cannot commit an Infeasible decision");
  }
  auto& p = project(decision.project);
  if (p.state != ProjectState::Pending) {
    throw Error(ErrorCode::Precondition, "project " + p.id.str() + " is not Pending");
  }
  const auto& target = *decision.cluster;
  const auto& c = cluster(target);
  auto& committed = committed_.at(target);
  if (!fits_within(committed + p.request, c.capacity)) {
    throw Error(ErrorCode::Conflict,
                "cluster " + target.str() + " can no longer hold " + to_string(p.request));
  }
  if (decision.state_version != version_) {
    throw Error(ErrorCode::StaleConflict, "placement decision is stale (scored at version " +
                                              std::to_string(decision.state_version) +
                                              ", now " + std::to_string(version_) + ")");
  }

  committed += p.request;
  p.state = ProjectState::Placed;
  p.placement = target;

  Namespace ns{p.id, target, p.request, {}};
  for (auto slot : kDefaultAppSlots) {
    ns.apps.emplace(std::string(slot), AppInstance{std::string(slot), {}, AppState::Deploying});
  }
  namespaces_[p.id] = std::move(ns);
  intents_.push_back({p.id, target});
  ++version_;
}

void FederationStore::reject(const PlacementDecision& decision) {
  auto& p = project(decision.project);
  if (p.state != ProjectState::Pending) {
    throw Error(ErrorCode::Precondition, "project " + p.id.str() + " is not Pending");
  }
  p.state = ProjectState::Rejected;
}

void FederationStore::release_placement(const ProjectId& id) {
  auto& p = project(id);
  if (p.state != ProjectState::Placed || !p.placement) {
    throw Error(ErrorCode::Precondition, "project " + id.str() + " is not Placed");
  }
  auto& committed = committed_.at(*p.placement);
  committed = committed - p.request;
  namespaces_.erase(id);
  std::erase_if(intents_, [&](const ReconcileIntent& i) { return i.project == id; });
  p.placement.reset();
  p.state = ProjectState::Pending;
  ++version_;
}

void FederationStore::resize_in_place(const ProjectId& id, const ResourceVector& request) {
  auto& p = project(id);
  if (p.state != ProjectState::Placed || !p.placement) {
    throw Error(ErrorCode::Precondition, "project " + id.str() + " is not Placed");
  }
  auto& committed = committed_.at(*p.placement);
  auto without = committed - p.request;
  if (!fits_within(without + request, cluster(*p.placement).capacity)) {
    throw Error(ErrorCode::Conflict, "cluster " + p.placement->str() + " cannot hold " +
                                         to_string(request));
  }
  committed = without + request;
  p.request = request;
  namespaces_.at(id).quota = request;
  ++version_;
}

void FederationStore::restore(std::map<ClusterId, Cluster> clusters, ProjectStore projects,
                              std::map<ProjectId, Namespace> namespaces,
                              std::deque<ReconcileIntent> intents, std::set<ProjectId> retired,
                              std::uint64_t version) {
  clusters_ = std::move(clusters);
  projects_ = std::move(projects);
  namespaces_ = std::move(namespaces);
  intents_ = std::move(intents);
  retired_ = std::move(retired);
  version_ = version;
  committed_.clear();
  for (const auto& [id, _] : clusters_) committed_[id] = {};
  for (const auto& [_, p] : projects_) {
    if (p.state == ProjectState::Placed && p.placement) committed_.at(*p.placement) += p.request;
  }
}

}  // namespace fedplane
