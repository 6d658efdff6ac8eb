#pragma once

// JSON forms of the domain types. Used by the HTTP API, the event log,
// snapshots and simulator traces. nlohmann::json objects keep keys sorted, so
// dump() output is canonical and safe to hash.

#include <json.hpp>

#include "fedplane/booking.hpp"
#include "fedplane/model.hpp"
#include "fedplane/monitor.hpp"
#include "fedplane/release.hpp"
#include "fedplane/scheduler.hpp"

namespace fedplane {

using json = nlohmann::json;

template <class Tag>
void to_json(json& j, const Id<Tag>& id) {
  j = id.str();
}
template <class Tag>
void from_json(const json& j, Id<Tag>& id) {
  id = make_id<Id<Tag>>(j.get<std::string>());
}

void to_json(json& j, const ResourceVector& v);
/// Accepts {"gpus","cpu","mem"}; missing keys are zero, negatives are rejected.
void from_json(const json& j, ResourceVector& v);

void to_json(json& j, const SemVer& v);
void from_json(const json& j, SemVer& v);

void to_json(json& j, const Interval& v);
void from_json(const json& j, Interval& v);

void to_json(json& j, const Cluster& v);
void from_json(const json& j, Cluster& v);

void to_json(json& j, const Project& v);
void from_json(const json& j, Project& v);

void to_json(json& j, const AppInstance& v);
void from_json(const json& j, AppInstance& v);

void to_json(json& j, const Namespace& v);
void from_json(const json& j, Namespace& v);

void to_json(json& j, const Booking& v);
void from_json(const json& j, Booking& v);

void to_json(json& j, const GpuGrant& v);
void from_json(const json& j, GpuGrant& v);

void to_json(json& j, const WorkspacePod& v);
void from_json(const json& j, WorkspacePod& v);

void to_json(json& j, const ScoreEntry& v);
void to_json(json& j, const PlacementDecision& v);

void to_json(json& j, const AdmissionResult& v);
void to_json(json& j, const RespawnAction& v);
void to_json(json& j, const UpgradeAction& v);
void to_json(json& j, const Release& v);
void from_json(const json& j, Release& v);
void to_json(json& j, const DriftEntry& v);

void to_json(json& j, const HeartbeatMetrics& v);
void from_json(const json& j, HeartbeatMetrics& v);
void to_json(json& j, const Heartbeat& v);
void from_json(const json& j, Heartbeat& v);

void to_json(json& j, const ClusterStatus& v);
void to_json(json& j, const ProjectStatus& v);
void to_json(json& j, const FederationStatus& v);

ProjectState project_state_from_string(const std::string& s);
BookingStatus booking_status_from_string(const std::string& s);
PodPhase pod_phase_from_string(const std::string& s);
AppState app_state_from_string(const std::string& s);

/// Required member of a JSON object, with a Validation error naming the key
/// when it is missing or has the wrong type.
template <class T>
T required(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(ErrorCode::Validation, std::string("missing field '") + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::Validation, std::string("field '") + key + "' has the wrong type");
  }
}

template <class T>
T optional_field(const json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::Validation, std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace fedplane
