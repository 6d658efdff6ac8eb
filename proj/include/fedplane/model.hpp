#pragma once

// Shared domain types for the federation control plane. Every other module
// builds on these and nothing here depends on another module.

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "fedplane/error.hpp"

namespace fedplane {

/// Simulated (or wall-truncated) time in integer seconds.
using Timestamp = std::int64_t;

/// Half-open time interval [start, end).
struct Interval {
  Timestamp start = 0;
  Timestamp end = 0;

  bool contains(Timestamp t) const noexcept { return start <= t && t < end; }
  bool overlaps(const Interval& o) const noexcept {
    return start < o.end && o.start < end;
  }
  Timestamp length() const noexcept { return end - start; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

// ---------------------------------------------------------------------------
// Identifiers

inline constexpr std::size_t kMaxIdentifierLength = 63;

/// Empty string when `value` is a legal identifier, otherwise the violation.
std::string identifier_violation(std::string_view value);

/// Opaque, case-sensitive identifier. The tag keeps cluster, project, user,
/// booking and pod ids from being mixed up.
template <class Tag>
class Id {
 public:
  Id() = default;
  explicit Id(std::string value) : value_(std::move(value)) {}

  const std::string& str() const noexcept { return value_; }
  bool empty() const noexcept { return value_.empty(); }

  friend auto operator<=>(const Id&, const Id&) = default;

 private:
  std::string value_;
};

struct ClusterTag {};
struct ProjectTag {};
struct UserTag {};
struct BookingTag {};
struct PodTag {};

using ClusterId = Id<ClusterTag>;
using ProjectId = Id<ProjectTag>;
using UserId = Id<UserTag>;
using BookingId = Id<BookingTag>;
using PodId = Id<PodTag>;

/// Constructs an id, throwing a validation error if the value is illegal.
template <class IdT>
IdT make_id(std::string value) {
  if (auto why = identifier_violation(value); !why.empty()) {
    throw Error(ErrorCode::Validation, "invalid identifier '" + value + "': " + why);
  }
  return IdT(std::move(value));
}

// ---------------------------------------------------------------------------
// Resources

/// Upper bound per component; keeps sums of many requests far from overflow.
inline constexpr std::uint64_t kMaxResourceComponent = 1'000'000;

struct ResourceVector {
  std::uint64_t gpus = 0;
  std::uint64_t cpu_cores = 0;
  std::uint64_t memory_gib = 0;

  friend bool operator==(const ResourceVector&, const ResourceVector&) = default;

  ResourceVector& operator+=(const ResourceVector& o) noexcept {
    gpus += o.gpus;
    cpu_cores += o.cpu_cores;
    memory_gib += o.memory_gib;
    return *this;
  }
  friend ResourceVector operator+(ResourceVector a, const ResourceVector& b) noexcept {
    return a += b;
  }
  /// Componentwise difference. Requires b <= a componentwise.
  friend ResourceVector operator-(const ResourceVector& a, const ResourceVector& b) {
    return {a.gpus - b.gpus, a.cpu_cores - b.cpu_cores, a.memory_gib - b.memory_gib};
  }
};

/// Componentwise partial order: every component of a is <= that of b.
constexpr bool fits_within(const ResourceVector& a, const ResourceVector& b) noexcept {
  return a.gpus <= b.gpus && a.cpu_cores <= b.cpu_cores && a.memory_gib <= b.memory_gib;
}

/// Every violated constraint; empty means ok. The zero vector is legal.
std::vector<std::string> validate_resource_vector(const ResourceVector& v);

/// Builds a vector from signed inputs, reporting negatives as violations.
/// Throws a validation error listing every violation.
ResourceVector resource_vector_from_signed(std::int64_t gpus, std::int64_t cpu_cores,
                                           std::int64_t memory_gib);

std::string to_string(const ResourceVector& v);

// ---------------------------------------------------------------------------
// Semantic versions

struct SemVer {
  std::uint64_t major = 0;
  std::uint64_t minor = 0;
  std::uint64_t patch = 0;

  friend auto operator<=>(const SemVer&, const SemVer&) = default;

  /// Parses "MAJOR.MINOR.PATCH" with decimal components and no leading zeros.
  static SemVer parse(std::string_view text);
  std::string str() const;
};

// ---------------------------------------------------------------------------
// Clusters

enum class Availability { Available, Unavailable };
const char* to_string(Availability a) noexcept;

struct Cluster {
  ClusterId id;
  std::string display_name;
  ResourceVector capacity;
  std::uint64_t bookable_gpus = 0;
  std::optional<Timestamp> last_heartbeat;
  std::map<std::string, SemVer> installed;
};

// ---------------------------------------------------------------------------
// Projects and namespaces

enum class ProjectState { Pending, Placed, Rejected };
const char* to_string(ProjectState s) noexcept;

struct Project {
  ProjectId id;
  std::string name;
  std::set<UserId> members;
  ResourceVector request;
  std::optional<ClusterId> placement;
  ProjectState state = ProjectState::Pending;

  bool has_member(const UserId& u) const { return members.contains(u); }
};

enum class AppState { Deploying, Ready };
const char* to_string(AppState s) noexcept;

struct AppInstance {
  std::string name;
  SemVer version;
  AppState state = AppState::Deploying;
  friend bool operator==(const AppInstance&, const AppInstance&) = default;
};

/// Application slots every namespace is created with. Each slot hosts the
/// application of the same name.
inline constexpr std::array<std::string_view, 6> kDefaultAppSlots = {
    "workspace", "experiment-tracker", "object-store",
    "image-archive", "annotation", "pipeline-engine"};

struct Namespace {
  ProjectId project;
  ClusterId cluster;
  ResourceVector quota;
  std::map<std::string, AppInstance> apps;  // slot -> app
};

// ---------------------------------------------------------------------------
// Bookings and pods

enum class BookingStatus { Granted, Active, Expired, Cancelled };
const char* to_string(BookingStatus s) noexcept;

/// Granted->Active, Granted->Cancelled, Granted->Expired, Active->Expired,
/// Active->Cancelled.
bool is_legal_transition(BookingStatus from, BookingStatus to) noexcept;

struct Booking {
  BookingId id;
  UserId user;
  ProjectId project;
  ClusterId cluster;
  std::uint64_t gpu_count = 0;
  Interval interval;
  BookingStatus status = BookingStatus::Granted;

  bool live() const noexcept {
    return status == BookingStatus::Granted || status == BookingStatus::Active;
  }
  /// Applies a lifecycle transition or throws InvalidTransition.
  void transition(BookingStatus to);
};

enum class PodPhase { Running, Terminating, Respawned };
const char* to_string(PodPhase p) noexcept;

struct GpuGrant {
  BookingId booking;
  std::uint64_t gpus = 0;
  friend bool operator==(const GpuGrant&, const GpuGrant&) = default;
};

struct WorkspacePod {
  PodId id;
  UserId user;
  ProjectId project;
  ClusterId cluster;
  std::optional<GpuGrant> gpu_grant;
  PodPhase phase = PodPhase::Running;
  Timestamp started_at = 0;
  std::optional<PodId> respawned_from;

  /// Running and Respawned pods are live workspaces; Terminating is history.
  bool live() const noexcept { return phase != PodPhase::Terminating; }
};

// ---------------------------------------------------------------------------
// Authorization

enum class Verdict { Allow, Deny };

struct AuthDecision {
  Verdict verdict = Verdict::Deny;
  std::string reason;

  bool allowed() const noexcept { return verdict == Verdict::Allow; }
  static AuthDecision allow() { return {Verdict::Allow, {}}; }
  static AuthDecision deny(std::string why) { return {Verdict::Deny, std::move(why)}; }
};

using ProjectStore = std::map<ProjectId, Project>;

/// Every action that is scoped to a single project. All members hold the same
/// privileges, so the action never changes the verdict.
inline constexpr std::array<std::string_view, 9> kProjectScopedActions = {
    "read-project",   "change-quota",  "book",          "cancel-booking",
    "list-bookings",  "spawn-workspace", "list-workspaces", "read-data",
    "write-data"};

/// Allow iff `user` is a member of `project`. Throws NotFound for an unknown
/// project (that is not a Deny).
AuthDecision authorize(const UserId& user, const ProjectId& project,
                       std::string_view action, const ProjectStore& projects);

}  // namespace fedplane

template <class Tag>
struct std::hash<fedplane::Id<Tag>> {
  std::size_t operator()(const fedplane::Id<Tag>& id) const noexcept {
    return std::hash<std::string>{}(id.str());
  }
};
