#include "fedplane/serialize.hpp"

namespace fedplane {

namespace {

template <class Enum, std::size_t N>
Enum enum_from_string(const std::string& s, const std::array<Enum, N>& values,
                      const char* what) {
  for (auto v : values) {
    if (s == to_string(v)) return v;
  }
  throw Error(ErrorCode::Validation, std::string("unknown ") + what + " '" + s + "'");
}

std::int64_t signed_component(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return 0;
  const auto& v = j.at(key);
  if (!v.is_number_integer()) {
    throw Error(ErrorCode::Validation, std::string("field '") + key + "' must be an integer");
  }
  if (v.is_number_unsigned()) {
    auto u = v.get<std::uint64_t>();
    if (u > kMaxResourceComponent) return static_cast<std::int64_t>(kMaxResourceComponent) + 1;
    return static_cast<std::int64_t>(u);
  }
  return v.get<std::int64_t>();
}

}  // namespace

ProjectState project_state_from_string(const std::string& s) {
  return enum_from_string(
      s, std::array{ProjectState::Pending, ProjectState::Placed, ProjectState::Rejected},
      "project state");
}

BookingStatus booking_status_from_string(const std::string& s) {
  return enum_from_string(s,
                          std::array{BookingStatus::Granted, BookingStatus::Active,
                                     BookingStatus::Expired, BookingStatus::Cancelled},
                          "booking status");
}

PodPhase pod_phase_from_string(const std::string& s) {
  return enum_from_string(
      s, std::array{PodPhase::Running, PodPhase::Terminating, PodPhase::Respawned}, "pod phase");
}

AppState app_state_from_string(const std::string& s) {
  return enum_from_string(s, std::array{AppState::Deploying, AppState::Ready}, "app state");
}

void to_json(json& j, const ResourceVector& v) {
  j = json{{"gpus", v.gpus}, {"cpu", v.cpu_cores}, {"mem", v.memory_gib}};
}

void from_json(const json& j, ResourceVector& v) {
  if (!j.is_object()) throw Error(ErrorCode::Validation, "resource vector must be an object");
  v = resource_vector_from_signed(signed_component(j, "gpus"), signed_component(j, "cpu"),
                                  signed_component(j, "mem"));
}

void to_json(json& j, const SemVer& v) { j = v.str(); }
void from_json(const json& j, SemVer& v) {
  if (!j.is_string()) throw Error(ErrorCode::Validation, "version must be a string");
  v = SemVer::parse(j.get<std::string>());
}

void to_json(json& j, const Interval& v) { j = json{{"start", v.start}, {"end", v.end}}; }
void from_json(const json& j, Interval& v) {
  v.start = required<Timestamp>(j, "start");
  v.end = required<Timestamp>(j, "end");
}

void to_json(json& j, const Cluster& v) {
  j = json{{"id", v.id},
           {"display_name", v.display_name},
           {"capacity", v.capacity},
           {"bookable_gpus", v.bookable_gpus},
           {"last_heartbeat", v.last_heartbeat ? json(*v.last_heartbeat) : json(nullptr)},
           {"installed", v.installed}};
}

void from_json(const json& j, Cluster& v) {
  v.id = required<ClusterId>(j, "id");
  v.display_name = optional_field<std::string>(j, "display_name", v.id.str());
  v.capacity = required<ResourceVector>(j, "capacity");
  auto bookable = optional_field<std::int64_t>(j, "bookable_gpus", 0);
  if (bookable < 0) throw Error(ErrorCode::Validation, "bookable_gpus is negative");
  v.bookable_gpus = static_cast<std::uint64_t>(bookable);
  if (j.contains("last_heartbeat") && !j.at("last_heartbeat").is_null()) {
    v.last_heartbeat = j.at("last_heartbeat").get<Timestamp>();
  }
  v.installed.clear();
  if (j.contains("installed")) {
    for (const auto& [app, ver] : j.at("installed").items()) {
      v.installed.emplace(app, ver.get<SemVer>());
    }
  }
}

void to_json(json& j, const Project& v) {
  j = json{{"id", v.id},
           {"name", v.name},
           {"members", v.members},
           {"request", v.request},
           {"placement", v.placement ? json(*v.placement) : json(nullptr)},
           {"state", to_string(v.state)}};
}

void from_json(const json& j, Project& v) {
  v.id = required<ProjectId>(j, "id");
  v.name = required<std::string>(j, "name");
  v.members = required<std::set<UserId>>(j, "members");
  v.request = required<ResourceVector>(j, "request");
  v.placement.reset();
  if (j.contains("placement") && !j.at("placement").is_null()) {
    v.placement = j.at("placement").get<ClusterId>();
  }
  v.state = project_state_from_string(optional_field<std::string>(j, "state", "Pending"));
}

void to_json(json& j, const AppInstance& v) {
  j = json{{"name", v.name}, {"version", v.version}, {"state", to_string(v.state)}};
}
void from_json(const json& j, AppInstance& v) {
  v.name = required<std::string>(j, "name");
  v.version = required<SemVer>(j, "version");
  v.state = app_state_from_string(required<std::string>(j, "state"));
}

void to_json(json& j, const Namespace& v) {
  j = json{{"project", v.project}, {"cluster", v.cluster}, {"quota", v.quota}, {"apps", v.apps}};
}
void from_json(const json& j, Namespace& v) {
  v.project = required<ProjectId>(j, "project");
  v.cluster = required<ClusterId>(j, "cluster");
  v.quota = required<ResourceVector>(j, "quota");
  v.apps = required<std::map<std::string, AppInstance>>(j, "apps");
}

void to_json(json& j, const Booking& v) {
  j = json{{"id", v.id},          {"user", v.user},
           {"project", v.project}, {"cluster", v.cluster},
           {"gpus", v.gpu_count},  {"start", v.interval.start},
           {"end", v.interval.end}, {"status", to_string(v.status)}};
}
void from_json(const json& j, Booking& v) {
  v.id = required<BookingId>(j, "id");
  v.user = required<UserId>(j, "user");
  v.project = required<ProjectId>(j, "project");
  v.cluster = required<ClusterId>(j, "cluster");
  v.gpu_count = required<std::uint64_t>(j, "gpus");
  v.interval = {required<Timestamp>(j, "start"), required<Timestamp>(j, "end")};
  v.status = booking_status_from_string(required<std::string>(j, "status"));
}

void to_json(json& j, const GpuGrant& v) { j = json{{"booking", v.booking}, {"gpus", v.gpus}}; }
void from_json(const json& j, GpuGrant& v) {
  v.booking = required<BookingId>(j, "booking");
  v.gpus = required<std::uint64_t>(j, "gpus");
}

void to_json(json& j, const WorkspacePod& v) {
  j = json{{"id", v.id},
           {"user", v.user},
           {"project", v.project},
           {"cluster", v.cluster},
           {"gpu_grant", v.gpu_grant ? json(*v.gpu_grant) : json(nullptr)},
           {"phase", to_string(v.phase)},
           {"started_at", v.started_at},
           {"respawned_from", v.respawned_from ? json(*v.respawned_from) : json(nullptr)}};
}
void from_json(const json& j, WorkspacePod& v) {
  v.id = required<PodId>(j, "id");
  v.user = required<UserId>(j, "user");
  v.project = required<ProjectId>(j, "project");
  v.cluster = required<ClusterId>(j, "cluster");
  v.gpu_grant.reset();
  if (j.contains("gpu_grant") && !j.at("gpu_grant").is_null()) {
    v.gpu_grant = j.at("gpu_grant").get<GpuGrant>();
  }
  v.phase = pod_phase_from_string(required<std::string>(j, "phase"));
  v.started_at = optional_field<Timestamp>(j, "started_at", 0);
  v.respawned_from.reset();
  if (j.contains("respawned_from") && !j.at("respawned_from").is_null()) {
    v.respawned_from = j.at("respawned_from").get<PodId>();
  }
}

void to_json(json& j, const ScoreEntry& v) {
  j = json{{"cluster", v.cluster}, {"feasible", v.feasible}, {"leftover", v.leftover}};
  if (!v.blocked_by.empty()) j["blocked_by"] = v.blocked_by;
}

void to_json(json& j, const PlacementDecision& v) {
  j = json{{"project", v.project},
           {"request", v.request},
           {"outcome", v.placed() ? "Placed" : "Infeasible"},
           {"score_trace", v.score_trace},
           {"state_version", v.state_version}};
  if (v.cluster) j["cluster"] = *v.cluster;
  if (!v.reason.empty()) j["reason"] = v.reason;
}

void to_json(json& j, const AdmissionResult& v) {
  j = json{{"verdict", to_string(v.verdict)}};
  if (v.booking) {
    j["booking"] = *v.booking;
    j["gpus"] = v.gpus;
  }
  if (!v.reason.empty()) j["reason"] = v.reason;
}

void to_json(json& j, const RespawnAction& v) {
  j = json{{"terminated", v.terminated},
           {"respawned", v.respawned},
           {"booking", v.booking},
           {"at", v.at},
           {"cause", v.cause}};
}

void to_json(json& j, const UpgradeAction& v) {
  j = json{{"cluster", v.cluster},
           {"app", v.app},
           {"from", v.from ? json(*v.from) : json(nullptr)},
           {"to", v.to},
           {"applied_at", v.applied_at}};
}

void to_json(json& j, const Release& v) {
  j = json{{"app", v.app},
           {"version", v.version},
           {"digest", v.digest},
           {"published_at", v.published_at}};
}
void from_json(const json& j, Release& v) {
  v.app = required<std::string>(j, "app");
  v.version = required<SemVer>(j, "version");
  v.digest = required<std::string>(j, "digest");
  v.published_at = optional_field<Timestamp>(j, "published_at", 0);
}

void to_json(json& j, const DriftEntry& v) {
  j = json{{"installed", v.installed}, {"latest", v.latest}, {"behind_by", v.behind_by}};
}

void to_json(json& j, const HeartbeatMetrics& v) {
  j = json{{"gpus_in_use", v.gpus_in_use},
           {"pods_running", v.pods_running},
           {"committed", v.committed}};
}
void from_json(const json& j, HeartbeatMetrics& v) {
  v.gpus_in_use = optional_field<std::uint64_t>(j, "gpus_in_use", 0);
  v.pods_running = optional_field<std::uint64_t>(j, "pods_running", 0);
  v.committed = optional_field<ResourceVector>(j, "committed", {});
}

void to_json(json& j, const Heartbeat& v) {
  j = json{{"cluster", v.cluster}, {"at", v.at}, {"metrics", v.metrics}};
}
void from_json(const json& j, Heartbeat& v) {
  v.cluster = required<ClusterId>(j, "cluster");
  v.at = required<Timestamp>(j, "at");
  v.metrics = optional_field<HeartbeatMetrics>(j, "metrics", {});
}

void to_json(json& j, const ClusterStatus& v) {
  j = json{{"id", v.cluster},
           {"display_name", v.display_name},
           {"availability", to_string(v.availability)},
           {"capacity", v.capacity},
           {"committed", v.committed},
           {"free", v.free},
           {"bookable_gpus", v.bookable_gpus},
           {"gpus_granted", v.gpus_granted},
           {"bookable_utilization", v.bookable_utilization},
           {"last_heartbeat", v.last_heartbeat ? json(*v.last_heartbeat) : json(nullptr)},
           {"staleness", v.staleness ? json(*v.staleness) : json(nullptr)},
           {"last_metrics", v.last_metrics ? json(*v.last_metrics) : json(nullptr)}};
}

void to_json(json& j, const ProjectStatus& v) {
  j = json{{"id", v.project},
           {"name", v.name},
           {"state", to_string(v.state)},
           {"placement", v.placement ? json(*v.placement) : json(nullptr)},
           {"apps", v.apps}};
}

void to_json(json& j, const FederationStatus& v) {
  j = json{{"at", v.at}, {"version", v.version}, {"clusters", v.clusters}, {"projects", v.projects}};
}

}  // namespace fedplane
