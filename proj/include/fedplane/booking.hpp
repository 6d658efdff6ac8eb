#pragma once

// GPU booking: per-cluster reservation calendars, the admission controller
// consulted when a workspace pod is spawned, and the expiry sweep that
// terminates GPU pods and respawns them without GPU access.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedplane/model.hpp"

namespace fedplane {

inline constexpr Timestamp kSecondsPerDay = 86'400;

struct BookingLimits {
  Timestamp max_duration = 14 * kSecondsPerDay;
  /// Live (Granted or Active) bookings per user that have not yet ended.
  std::size_t max_future_per_user = 4;
};

/// Granted and Active bookings of one cluster. For every instant the summed
/// gpu_count of covering entries never exceeds the bookable capacity.
class BookingCalendar {
 public:
  BookingCalendar() = default;
  BookingCalendar(ClusterId cluster, std::uint64_t bookable_capacity)
      : cluster_(std::move(cluster)), capacity_(bookable_capacity) {}

  const ClusterId& cluster() const noexcept { return cluster_; }
  std::uint64_t bookable_capacity() const noexcept { return capacity_; }
  const std::map<BookingId, Booking>& entries() const noexcept { return entries_; }

  bool contains(const BookingId& id) const { return entries_.contains(id); }
  Booking& entry(const BookingId& id);
  void insert(Booking booking);
  Booking remove(const BookingId& id);

 private:
  ClusterId cluster_;
  std::uint64_t capacity_ = 0;
  std::map<BookingId, Booking> entries_;
};

/// Maximum over t in `window` of the gpus booked at t. Computed by a sweep over
/// entry endpoints clipped to the window.
std::uint64_t max_overlap(const BookingCalendar& cal, const Interval& window);

/// One piece of the booked-gpus step function: `gpus` are booked on `span`.
struct OverlapSegment {
  Interval span;
  std::uint64_t gpus = 0;
};

/// The booked-gpus step function restricted to `window`, as consecutive
/// segments covering it exactly.
std::vector<OverlapSegment> overlap_profile(const BookingCalendar& cal, const Interval& window);

struct BookingRequest {
  UserId user;
  ProjectId project;
  std::uint64_t gpu_count = 0;
  Interval interval;
};

/// Validates and inserts a Granted booking with id `id`.
///
/// Throws Validation for gpu_count 0, start >= end, start < now, or a duration
/// above `limits.max_duration`; Unauthorized if the user is not a project
/// member; BookingConflict naming the earliest over-committed sub-interval.
Booking request_booking(BookingCalendar& cal, BookingId id, const BookingRequest& req,
                        Timestamp now, const ProjectStore& projects,
                        const BookingLimits& limits = {});

struct AdmissionRequest {
  UserId user;
  ProjectId project;
  ClusterId cluster;
  bool wants_gpu = false;
  Timestamp now = 0;
};

enum class AdmissionVerdict { GrantGpu, GrantNoGpu, Reject };
const char* to_string(AdmissionVerdict v) noexcept;

struct AdmissionResult {
  AdmissionVerdict verdict = AdmissionVerdict::Reject;
  std::optional<BookingId> booking;  // set iff GrantGpu
  std::uint64_t gpus = 0;
  std::string reason;                // set iff Reject
};

/// Admission controller. A GPU request is granted against the user's own
/// booking for the project that covers `now`, preferring the earliest end; the
/// booking becomes Active. Requests without GPU are always granted.
AdmissionResult admit(const AdmissionRequest& req, BookingCalendar& cal);

struct RespawnAction {
  PodId terminated;
  PodId respawned;
  BookingId booking;
  Timestamp at = 0;
  std::string cause;  // "expired" or "cancelled"
};

using PodStore = std::map<PodId, WorkspacePod>;

/// Every calendar, the closed (Expired or Cancelled) bookings, and the pods.
class BookingLedger {
 public:
  explicit BookingLedger(BookingLimits limits = {}) : limits_(limits) {}

  const BookingLimits& limits() const noexcept { return limits_; }
  void set_limits(const BookingLimits& limits) { limits_ = limits; }

  void add_calendar(const ClusterId& cluster, std::uint64_t bookable_capacity);
  const BookingCalendar& calendar(const ClusterId& cluster) const;
  BookingCalendar& calendar(const ClusterId& cluster);
  const std::map<ClusterId, BookingCalendar>& calendars() const noexcept { return calendars_; }

  /// Any booking, live or closed.
  const Booking& booking(const BookingId& id) const;
  const std::map<BookingId, Booking>& closed() const noexcept { return closed_; }
  std::vector<Booking> all_bookings() const;

  const PodStore& pods() const noexcept { return pods_; }

  /// Grants a booking on `cluster`, enforcing the per-user future-booking cap.
  Booking request(const ClusterId& cluster, const BookingRequest& req, Timestamp now,
                  const ProjectStore& projects);

  /// Runs admission and, unless rejected, replaces the user's live pod for the
  /// project on that cluster with a new Running pod. Returns the admission
  /// result and the new pod id (when admitted).
  std::pair<AdmissionResult, std::optional<PodId>> spawn(const AdmissionRequest& req);

  /// Expires every live booking with end <= now, returning its gpus to the
  /// pool, and respawns without GPU each pod that held one of them.
  /// Idempotent at fixed `now`.
  std::vector<RespawnAction> sweep(Timestamp now);

  /// Cancels a Granted or Active booking. `by` must be the booking's user, a
  /// member of its project, or a federation admin; otherwise Unauthorized.
  /// Closed bookings raise InvalidTransition. Pods holding the booking are
  /// respawned without GPU and reported in `respawns`.
  Booking cancel(const BookingId& id, const UserId& by, bool by_admin,
                 const ProjectStore& projects, Timestamp now,
                 std::vector<RespawnAction>* respawns = nullptr);

  /// Cancels every live booking and terminates every live pod of a project,
  /// optionally restricted to one cluster.
  void purge_project(const ProjectId& project, Timestamp now,
                     const std::optional<ClusterId>& cluster = std::nullopt);

  /// GPU-seconds reserved on `cluster` within `window` by bookings that were
  /// not cancelled.
  std::uint64_t booked_gpu_seconds(const ClusterId& cluster, const Interval& window) const;

  /// Sum of gpu grants held by live pods on `cluster`.
  std::uint64_t granted_gpus(const ClusterId& cluster) const;

  std::uint64_t next_booking_seq() const noexcept { return next_booking_; }
  std::uint64_t next_pod_seq() const noexcept { return next_pod_; }

  void restore(std::map<ClusterId, BookingCalendar> calendars,
               std::map<BookingId, Booking> closed, PodStore pods, std::uint64_t next_booking,
               std::uint64_t next_pod);

 private:
  RespawnAction respawn(WorkspacePod& pod, Timestamp at, const std::string& cause);
  PodId new_pod_id();

  BookingLimits limits_;
  std::map<ClusterId, BookingCalendar> calendars_;
  std::map<BookingId, Booking> closed_;
  PodStore pods_;
  std::uint64_t next_booking_ = 1;
  std::uint64_t next_pod_ = 1;
};

}  // namespace fedplane
