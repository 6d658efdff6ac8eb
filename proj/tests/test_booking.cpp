#include <gtest/gtest.h>

#include <random>

#include "fedplane/booking.hpp"
#include "oracles.hpp"

using namespace fedplane;

namespace {

const ClusterId kKuh("kuh");

ProjectStore projects() {
  ProjectStore store;
  Project p;
  p.id = ProjectId("ms");
  p.name = "ms";
  p.members = {UserId("u1"), UserId("u2"), UserId("u3")};
  store.emplace(p.id, p);
  Project q;
  q.id = ProjectId("other");
  q.name = "other";
  q.members = {UserId("u9")};
  store.emplace(q.id, q);
  return store;
}

BookingRequest req(const char* user, std::uint64_t gpus, Timestamp start, Timestamp end) {
  return {UserId(user), ProjectId("ms"), gpus, {start, end}};
}

std::vector<oracle::Span> spans_of(const BookingCalendar& cal) {
  std::vector<oracle::Span> out;
  for (const auto& [id, b] : cal.entries()) out.push_back({b.interval.start, b.interval.end, b.gpu_count});
  return out;
}

AdmissionRequest gpu_spawn(const char* user, Timestamp now) {
  return {UserId(user), ProjectId("ms"), kKuh, true, now};
}

}  // namespace

TEST(RequestBooking, EmptyCalendarGrants) {
  BookingCalendar cal(kKuh, 2);
  auto b = request_booking(cal, BookingId("b1"), req("u1", 1, 0, 10), 0, projects());
  EXPECT_EQ(b.status, BookingStatus::Granted);
  EXPECT_TRUE(cal.contains(BookingId("b1")));
}

TEST(RequestBooking, ConflictNamesEarliestOvercommittedSubinterval) {
  BookingCalendar cal(kKuh, 2);
  auto ps = projects();
  request_booking(cal, BookingId("a"), req("u1", 1, 0, 10), 0, ps);
  request_booking(cal, BookingId("b"), req("u2", 1, 5, 15), 0, ps);
  auto oracle_run = oracle::first_overload_by_scan(spans_of(cal), 6, 9, 1, 2);
  ASSERT_TRUE(oracle_run);
  try {
    request_booking(cal, BookingId("c"), req("u3", 1, 6, 9), 0, ps);
    FAIL() << "expected a conflict";
  } catch (const BookingConflict& e) {
    EXPECT_EQ(e.code(), ErrorCode::Conflict);
    EXPECT_EQ(e.conflict_start(), 6);
    EXPECT_EQ(e.conflict_end(), 9);
    EXPECT_EQ(e.conflict_start(), oracle_run->first);
    EXPECT_EQ(e.conflict_end(), oracle_run->second);
    EXPECT_EQ(e.peak(), 3);
    EXPECT_EQ(e.capacity(), 2);
  }
  EXPECT_FALSE(cal.contains(BookingId("c")));
}

TEST(RequestBooking, HalfOpenIntervalsAbut) {
  BookingCalendar cal(kKuh, 2);
  auto ps = projects();
  request_booking(cal, BookingId("a"), req("u1", 2, 0, 10), 0, ps);
  EXPECT_NO_THROW(request_booking(cal, BookingId("b"), req("u2", 2, 10, 20), 0, ps));
}

TEST(RequestBooking, ValidationAndAuthorization) {
  BookingCalendar cal(kKuh, 2);
  auto ps = projects();
  auto code = [&](BookingRequest r, Timestamp now, BookingLimits limits = {}) {
    try {
      request_booking(cal, BookingId("x"), r, now, ps, limits);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Corruption;  // sentinel: no error
  };
  EXPECT_EQ(code(req("u1", 0, 0, 10), 0), ErrorCode::Validation);
  EXPECT_EQ(code(req("u1", 1, 10, 10), 0), ErrorCode::Validation);
  EXPECT_EQ(code(req("u1", 1, 20, 10), 0), ErrorCode::Validation);
  EXPECT_EQ(code(req("u1", 1, 5, 10), 6), ErrorCode::Validation);
  EXPECT_EQ(code(req("u1", 1, 0, 101), 0, BookingLimits{100, 4}), ErrorCode::Validation);
  EXPECT_EQ(code(req("u9", 1, 0, 10), 0), ErrorCode::Unauthorized);
  EXPECT_EQ(code(req("u1", 3, 0, 10), 0), ErrorCode::Conflict);
}

TEST(RequestBooking, FutureBookingCapPerUser) {
  BookingLedger ledger(BookingLimits{kSecondsPerDay, 2});
  ledger.add_calendar(kKuh, 8);
  auto ps = projects();
  ledger.request(kKuh, req("u1", 1, 0, 10), 0, ps);
  ledger.request(kKuh, req("u1", 1, 10, 20), 0, ps);
  EXPECT_THROW(ledger.request(kKuh, req("u1", 1, 20, 30), 0, ps), Error);
  EXPECT_NO_THROW(ledger.request(kKuh, req("u2", 1, 20, 30), 0, ps));
}

TEST(MaxOverlap, Examples) {
  BookingCalendar empty(kKuh, 4);
  EXPECT_EQ(max_overlap(empty, {0, 100}), 0u);

  BookingCalendar cal(kKuh, 4);
  auto ps = projects();
  request_booking(cal, BookingId("a"), req("u1", 1, 0, 10), 0, ps);
  request_booking(cal, BookingId("b"), req("u2", 2, 5, 15), 0, ps);
  EXPECT_EQ(max_overlap(cal, {0, 15}), 3u);
  EXPECT_EQ(max_overlap(cal, {0, 15}), oracle::peak(spans_of(cal), 0, 15));

  BookingCalendar abut(kKuh, 4);
  request_booking(abut, BookingId("a"), req("u1", 1, 0, 5), 0, ps);
  request_booking(abut, BookingId("b"), req("u2", 1, 5, 10), 0, ps);
  EXPECT_EQ(max_overlap(abut, {0, 10}), 1u);
}

TEST(MaxOverlap, ProfileCoversWindow) {
  BookingCalendar cal(kKuh, 4);
  auto ps = projects();
  request_booking(cal, BookingId("a"), req("u1", 1, 0, 10), 0, ps);
  request_booking(cal, BookingId("b"), req("u2", 2, 5, 15), 0, ps);
  auto prof = overlap_profile(cal, {2, 20});
  ASSERT_FALSE(prof.empty());
  EXPECT_EQ(prof.front().span.start, 2);
  EXPECT_EQ(prof.back().span.end, 20);
  for (std::size_t i = 1; i < prof.size(); ++i) EXPECT_EQ(prof[i - 1].span.end, prof[i].span.start);
  for (const auto& seg : prof) EXPECT_EQ(seg.gpus, oracle::load_at(spans_of(cal), seg.span.start));
}

TEST(Admit, CoveringBookingIsGrantedAndActivated) {
  BookingLedger ledger;
  ledger.add_calendar(kKuh, 2);
  auto ps = projects();
  auto b = ledger.request(kKuh, req("u1", 2, 100, 200), 0, ps);
  auto [res, pod] = ledger.spawn(gpu_spawn("u1", 150));
  EXPECT_EQ(res.verdict, AdmissionVerdict::GrantGpu);
  EXPECT_EQ(res.booking, b.id);
  EXPECT_EQ(res.gpus, 2u);
  EXPECT_EQ(ledger.booking(b.id).status, BookingStatus::Active);
  ASSERT_TRUE(pod);
  EXPECT_EQ(ledger.pods().at(*pod).gpu_grant, (GpuGrant{b.id, 2}));
}

TEST(Admit, NoBookingRejects) {
  BookingCalendar cal(kKuh, 2);
  auto res = admit(gpu_spawn("u1", 150), cal);
  EXPECT_EQ(res.verdict, AdmissionVerdict::Reject);
  EXPECT_EQ(res.reason, "no valid booking");
  AdmissionRequest cpu_only = gpu_spawn("u1", 150);
  cpu_only.wants_gpu = false;
  EXPECT_EQ(admit(cpu_only, cal).verdict, AdmissionVerdict::GrantNoGpu);
}

TEST(Admit, EarliestEndingCoveringBookingWins) {
  BookingCalendar cal(kKuh, 2);
  auto ps = projects();
  request_booking(cal, BookingId("long"), req("u1", 1, 100, 200), 0, ps);
  request_booking(cal, BookingId("short"), req("u1", 1, 140, 160), 0, ps);
  auto res = admit(gpu_spawn("u1", 150), cal);
  EXPECT_EQ(res.verdict, AdmissionVerdict::GrantGpu);
  EXPECT_EQ(res.booking, BookingId("short"));
}

TEST(Admit, OtherUsersBookingDoesNotCount) {
  BookingCalendar cal(kKuh, 2);
  request_booking(cal, BookingId("b"), req("u2", 1, 100, 200), 0, projects());
  EXPECT_EQ(admit(gpu_spawn("u1", 150), cal).verdict, AdmissionVerdict::Reject);
  EXPECT_EQ(admit(gpu_spawn("u2", 199), cal).verdict, AdmissionVerdict::GrantGpu);
  EXPECT_EQ(admit(gpu_spawn("u2", 200), cal).verdict, AdmissionVerdict::Reject);
}

TEST(Sweep, ExpiresAtEndNotBefore) {
  BookingLedger ledger;
  ledger.add_calendar(kKuh, 2);
  auto b = ledger.request(kKuh, req("u1", 2, 100, 200), 0, projects());
  auto pod = *ledger.spawn(gpu_spawn("u1", 150)).second;

  EXPECT_TRUE(ledger.sweep(199).empty());
  EXPECT_EQ(ledger.booking(b.id).status, BookingStatus::Active);

  auto actions = ledger.sweep(200);
  ASSERT_EQ(actions.size(), 1u);
  EXPECT_EQ(actions[0].terminated, pod);
  EXPECT_EQ(actions[0].cause, "expired");
  EXPECT_EQ(ledger.booking(b.id).status, BookingStatus::Expired);
  EXPECT_EQ(ledger.pods().at(pod).phase, PodPhase::Terminating);
  const auto& fresh = ledger.pods().at(actions[0].respawned);
  EXPECT_EQ(fresh.phase, PodPhase::Respawned);
  EXPECT_FALSE(fresh.gpu_grant);
  EXPECT_EQ(fresh.respawned_from, pod);
  EXPECT_EQ(ledger.granted_gpus(kKuh), 0u);
  EXPECT_EQ(max_overlap(ledger.calendar(kKuh), {0, 1000}), 0u);
}

TEST(Sweep, IdempotentAtFixedNow) {
  BookingLedger ledger;
  ledger.add_calendar(kKuh, 2);
  ledger.request(kKuh, req("u1", 1, 100, 200), 0, projects());
  ledger.request(kKuh, req("u2", 1, 100, 300), 0, projects());
  ledger.spawn(gpu_spawn("u1", 100));
  ledger.spawn(gpu_spawn("u2", 100));
  ledger.sweep(200);
  auto once_pods = ledger.pods().size();
  auto once_closed = ledger.closed().size();
  EXPECT_TRUE(ledger.sweep(200).empty());
  EXPECT_EQ(ledger.pods().size(), once_pods);
  EXPECT_EQ(ledger.closed().size(), once_closed);
}

TEST(Sweep, ExpiredCapacityGrantableAtSameInstant) {
  BookingLedger ledger;
  ledger.add_calendar(kKuh, 2);
  auto ps = projects();
  ledger.request(kKuh, req("u1", 2, 0, 200), 0, ps);
  ledger.spawn(gpu_spawn("u1", 0));
  auto second = ledger.request(kKuh, req("u2", 2, 200, 300), 0, ps);
  ledger.sweep(200);
  auto [res, pod] = ledger.spawn(gpu_spawn("u2", 200));
  EXPECT_EQ(res.verdict, AdmissionVerdict::GrantGpu);
  EXPECT_EQ(res.booking, second.id);
  EXPECT_EQ(ledger.granted_gpus(kKuh), 2u);
}

TEST(Cancel, GrantedFutureBookingRestoresCapacity) {
  BookingLedger ledger;
  ledger.add_calendar(kKuh, 2);
  auto ps = projects();
  auto b = ledger.request(kKuh, req("u1", 2, 100, 200), 0, ps);
  auto c = ledger.cancel(b.id, UserId("u1"), false, ps, 10);
  EXPECT_EQ(c.status, BookingStatus::Cancelled);
  EXPECT_NO_THROW(ledger.request(kKuh, req("u2", 2, 100, 200), 10, ps));
}

TEST(Cancel, ActiveBookingRespawnsPod) {
  BookingLedger ledger;
  ledger.add_calendar(kKuh, 2);
  auto ps = projects();
  auto b = ledger.request(kKuh, req("u1", 1, 100, 200), 0, ps);
  auto pod = *ledger.spawn(gpu_spawn("u1", 120)).second;
  std::vector<RespawnAction> respawns;
  ledger.cancel(b.id, UserId("u2"), false, ps, 130, &respawns);
  ASSERT_EQ(respawns.size(), 1u);
  EXPECT_EQ(respawns[0].terminated, pod);
  EXPECT_EQ(respawns[0].cause, "cancelled");
  EXPECT_FALSE(ledger.pods().at(respawns[0].respawned).gpu_grant);
}

TEST(Cancel, OutsiderDeniedAndClosedRejected) {
  BookingLedger ledger;
  ledger.add_calendar(kKuh, 2);
  auto ps = projects();
  auto b = ledger.request(kKuh, req("u1", 1, 100, 200), 0, ps);
  try {
    ledger.cancel(b.id, UserId("u9"), false, ps, 10);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Unauthorized);
  }
  EXPECT_NO_THROW(ledger.cancel(b.id, UserId("admin"), true, ps, 10));
  try {
    ledger.cancel(b.id, UserId("u1"), false, ps, 11);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidTransition);
  }
  // A closed booking tells an outsider nothing about its state.
  try {
    ledger.cancel(b.id, UserId("u9"), false, ps, 12);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Unauthorized);
  }
}

// Random request/cancel/spawn/sweep traffic. Every grant decision is checked
// against the brute-force overlap oracle, and the calendar, expiry and
// conservation invariants are checked after every step.
TEST(BookingLedgerProperty, RandomTrafficKeepsInvariants) {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    std::mt19937_64 rng(seed);
    BookingLedger ledger(BookingLimits{1000, 6});
    ledger.add_calendar(kKuh, 3);
    auto ps = projects();
    const std::vector<const char*> users = {"u1", "u2", "u3"};
    Timestamp now = 0;
    std::uniform_int_distribution<int> op(0, 9), len(1, 60), ahead(0, 80), gpus(1, 3), who(0, 2);

    for (int step = 0; step < 600; ++step) {
      int o = op(rng);
      if (o < 5) {
        Timestamp s = now + ahead(rng);
        Timestamp e = s + len(rng);
        std::uint64_t g = static_cast<std::uint64_t>(gpus(rng));
        auto before = spans_of(ledger.calendar(kKuh));
        bool fits = oracle::peak(before, s, e) + g <= 3;
        try {
          ledger.request(kKuh, req(users[static_cast<std::size_t>(who(rng))], g, s, e), now, ps);
          EXPECT_TRUE(fits) << "granted over capacity, seed " << seed << " step " << step;
        } catch (const BookingConflict& c) {
          EXPECT_FALSE(fits);
          auto run = oracle::first_overload_by_scan(before, s, e, g, 3);
          ASSERT_TRUE(run);
          EXPECT_EQ(c.conflict_start(), run->first);
          EXPECT_EQ(c.conflict_end(), run->second);
        } catch (const Error& e) {
          EXPECT_NE(e.code(), ErrorCode::Conflict) << e.what();  // per-user cap only
        }
      } else if (o < 6) {
        auto live = ledger.calendar(kKuh).entries();
        if (!live.empty()) {
          std::uniform_int_distribution<std::size_t> pick(0, live.size() - 1);
          auto it = std::next(live.begin(), static_cast<std::ptrdiff_t>(pick(rng)));
          ledger.cancel(it->first, it->second.user, false, ps, now);
        }
      } else if (o < 8) {
        auto [res, pod] = ledger.spawn(gpu_spawn(users[static_cast<std::size_t>(who(rng))], now));
        if (res.verdict == AdmissionVerdict::GrantGpu) {
          const auto& b = ledger.booking(*res.booking);
          EXPECT_TRUE(b.interval.contains(now));
          EXPECT_EQ(b.user, ledger.pods().at(*pod).user);
        }
      } else {
        now += len(rng);
        ledger.sweep(now);
      }

      const auto& cal = ledger.calendar(kKuh);
      auto spans = spans_of(cal);
      EXPECT_LE(oracle::peak(spans, 0, now + 1000), 3u);
      std::uint64_t active = 0;
      for (const auto& [id, b] : cal.entries()) {
        if (b.status == BookingStatus::Active) active += b.gpu_count;
      }
      std::uint64_t granted = 0;
      for (const auto& [id, pod] : ledger.pods()) {
        if (!pod.gpu_grant) continue;
        ASSERT_EQ(pod.phase, PodPhase::Running);
        granted += pod.gpu_grant->gpus;
        const auto& b = ledger.booking(pod.gpu_grant->booking);
        EXPECT_EQ(b.status, BookingStatus::Active);
        EXPECT_GT(b.interval.end, now);
      }
      EXPECT_LE(granted, active);
      EXPECT_LE(active, 3u);
    }
  }
}
