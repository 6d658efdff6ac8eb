#include <gtest/gtest.h>

#include <random>

#include "fedplane/scheduler.hpp"
#include "placement_enum.hpp"

using namespace fedplane;

namespace {

ClusterLoadView free_view(const char* id, ResourceVector free, bool available = true) {
  return make_load_view(ClusterId(id), free, {}, available);
}

Project pending(const char* id, ResourceVector request) {
  Project p;
  p.id = ProjectId(id);
  p.name = id;
  p.members = {UserId("u1")};
  p.request = request;
  return p;
}

Cluster cluster(const char* id, ResourceVector capacity) {
  Cluster c;
  c.id = ClusterId(id);
  c.display_name = id;
  c.capacity = capacity;
  c.bookable_gpus = capacity.gpus;
  return c;
}

const auto kAllUp = [](const ClusterId&) { return true; };

}  // namespace

TEST(FeasibleClusters, SingleCluster) {
  std::vector<ClusterLoadView> v = {free_view("kuh", {2, 64, 388})};
  EXPECT_EQ(feasible_clusters(v, {2, 16, 64}), std::vector<ClusterId>{ClusterId("kuh")});
}

TEST(FeasibleClusters, GpuComponentExcludesA) {
  std::vector<ClusterLoadView> v = {free_view("A", {1, 8, 32}), free_view("B", {4, 32, 128})};
  EXPECT_EQ(feasible_clusters(v, {2, 4, 16}), std::vector<ClusterId>{ClusterId("B")});
}

TEST(FeasibleClusters, ZeroRequestFitsEverywhereInInputOrder) {
  std::vector<ClusterLoadView> v = {free_view("B", {0, 0, 0}), free_view("A", {1, 1, 1}),
                                    free_view("C", {5, 5, 5}, false)};
  EXPECT_EQ(feasible_clusters(v, {0, 0, 0}), (std::vector<ClusterId>{ClusterId("B"), ClusterId("A")}));
}

TEST(PlaceProject, FewestLeftoverGpusWins) {
  std::vector<ClusterLoadView> v = {free_view("A", {2, 64, 388}), free_view("B", {4, 64, 388})};
  auto d = place_project(v, pending("p", {2, 16, 64}));
  ASSERT_TRUE(d.placed());
  EXPECT_EQ(*d.cluster, ClusterId("A"));
  ASSERT_EQ(d.score_trace.size(), 2u);
  EXPECT_EQ(d.score_trace[0].leftover, (ResourceVector{0, 48, 324}));
  EXPECT_EQ(d.score_trace[1].leftover, (ResourceVector{2, 48, 324}));
}

TEST(PlaceProject, MemoryBreaksGpuTie) {
  std::vector<ClusterLoadView> v = {free_view("B", {2, 64, 388}), free_view("A", {2, 64, 100})};
  auto d = place_project(v, pending("p", {2, 16, 64}));
  ASSERT_TRUE(d.placed());
  EXPECT_EQ(*d.cluster, ClusterId("A"));
  EXPECT_EQ(d.score_trace[1].leftover.memory_gib, 36u);
  EXPECT_EQ(d.score_trace[0].leftover.memory_gib, 324u);
}

TEST(PlaceProject, CpuThenIdBreakRemainingTies) {
  std::vector<ClusterLoadView> v = {free_view("c", {1, 9, 10}), free_view("b", {1, 8, 10}),
                                    free_view("a", {1, 8, 10})};
  EXPECT_EQ(*place_project(v, pending("p", {1, 1, 1})).cluster, ClusterId("a"));
  v.pop_back();
  EXPECT_EQ(*place_project(v, pending("p", {1, 1, 1})).cluster, ClusterId("b"));
}

TEST(PlaceProject, InfeasibleNamesBlockingDimension) {
  std::vector<ClusterLoadView> v = {free_view("A", {1, 64, 388})};
  auto d = place_project(v, pending("p", {2, 16, 64}));
  EXPECT_FALSE(d.placed());
  EXPECT_EQ(d.reason, "gpus");
  EXPECT_EQ(d.score_trace.at(0).blocked_by, "gpus");

  v = {free_view("A", {4, 2, 10}), free_view("B", {4, 64, 10}), free_view("C", {0, 1, 1000})};
  EXPECT_EQ(place_project(v, pending("p", {1, 8, 64})).reason, "memory_gib");
}

TEST(PlaceProject, EmptyAndUnavailableFederations) {
  std::vector<ClusterLoadView> none;
  EXPECT_EQ(place_project(none, pending("p", {})).reason, "no clusters registered");
  std::vector<ClusterLoadView> down = {free_view("A", {8, 8, 8}, false)};
  auto d = place_project(down, pending("p", {1, 1, 1}));
  EXPECT_EQ(d.reason, "no available clusters");
  EXPECT_EQ(d.score_trace.at(0).blocked_by, "unavailable");
}

TEST(PlaceProject, PinSkipsScoringButNotFeasibility) {
  std::vector<ClusterLoadView> v = {free_view("A", {2, 64, 388}), free_view("B", {4, 64, 388})};
  auto d = place_project(v, pending("p", {2, 16, 64}), ClusterId("B"));
  ASSERT_TRUE(d.placed());
  EXPECT_EQ(*d.cluster, ClusterId("B"));
  EXPECT_FALSE(place_project(v, pending("p", {3, 16, 64}), ClusterId("A")).placed());
  EXPECT_THROW(place_project(v, pending("p", {}), ClusterId("Z")), Error);
}

TEST(PlaceProject, MatchesOracleOnSmallEnumeration) {
  enumeration::Tally tally;
  for (const auto& s : enumeration::quick_shapes()) enumeration::run_shape(s, tally);
  EXPECT_GT(tally.cases, 10'000u);
  EXPECT_EQ(tally.mismatches, 0u) << tally.first_mismatch;
}

TEST(PlaceProject, Deterministic) {
  std::vector<ClusterLoadView> v = {free_view("x", {3, 3, 3}), free_view("y", {3, 3, 3})};
  auto a = place_project(v, pending("p", {1, 1, 1}));
  auto b = place_project(v, pending("p", {1, 1, 1}));
  EXPECT_EQ(a.cluster, b.cluster);
  ASSERT_EQ(a.score_trace.size(), b.score_trace.size());
  for (std::size_t i = 0; i < a.score_trace.size(); ++i) {
    EXPECT_EQ(a.score_trace[i].cluster, b.score_trace[i].cluster);
    EXPECT_EQ(a.score_trace[i].leftover, b.score_trace[i].leftover);
  }
}

TEST(CommitPlacement, UncontendedCommitAddsRequest) {
  FederationStore fed;
  fed.add_cluster(cluster("A", {4, 64, 256}));
  fed.add_project(pending("p", {2, 16, 64}));
  auto d = fed.score(ProjectId("p"), kAllUp);
  fed.commit_placement(d);
  EXPECT_EQ(fed.committed(ClusterId("A")), (ResourceVector{2, 16, 64}));
  EXPECT_EQ(fed.project(ProjectId("p")).state, ProjectState::Placed);
  ASSERT_EQ(fed.namespaces().count(ProjectId("p")), 1u);
  EXPECT_EQ(fed.namespaces().at(ProjectId("p")).apps.size(), kDefaultAppSlots.size());
  EXPECT_EQ(fed.intents().size(), 1u);
}

TEST(CommitPlacement, RacingDecisionsForLastGpusOneWinsInEitherOrder) {
  for (int order = 0; order < 2; ++order) {
    FederationStore fed;
    fed.add_cluster(cluster("A", {2, 64, 256}));
    fed.add_project(pending("p", {2, 1, 1}));
    fed.add_project(pending("q", {2, 1, 1}));
    auto dp = fed.score(ProjectId("p"), kAllUp);
    auto dq = fed.score(ProjectId("q"), kAllUp);
    ASSERT_TRUE(dp.placed() && dq.placed());
    const auto& first = order == 0 ? dp : dq;
    const auto& second = order == 0 ? dq : dp;
    EXPECT_NO_THROW(fed.commit_placement(first));
    try {
      fed.commit_placement(second);
      FAIL() << "second commit must fail";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::Conflict);
    }
    EXPECT_EQ(fed.committed(ClusterId("A")).gpus, 2u);
  }
}

TEST(CommitPlacement, StaleDecisionIsRetriable) {
  FederationStore fed;
  fed.add_cluster(cluster("A", {8, 64, 256}));
  fed.add_project(pending("p", {1, 1, 1}));
  auto d = fed.score(ProjectId("p"), kAllUp);
  fed.add_cluster(cluster("B", {8, 64, 256}));
  try {
    fed.commit_placement(d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::StaleConflict);
    EXPECT_TRUE(e.retriable());
  }
  EXPECT_NO_THROW(fed.commit_placement(fed.score(ProjectId("p"), kAllUp)));
}

TEST(CommitPlacement, InfeasibleDecisionIsPrecondition) {
  FederationStore fed;
  fed.add_cluster(cluster("A", {1, 1, 1}));
  fed.add_project(pending("p", {2, 1, 1}));
  auto d = fed.score(ProjectId("p"), kAllUp);
  try {
    fed.commit_placement(d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Precondition);
  }
}

TEST(FederationStoreTest, RejectsDuplicateAndRetiredIds) {
  FederationStore fed;
  fed.add_cluster(cluster("A", {8, 64, 256}));
  fed.add_project(pending("p", {1, 1, 1}));
  EXPECT_THROW(fed.add_project(pending("p", {1, 1, 1})), Error);
  fed.remove_project(ProjectId("p"));
  EXPECT_THROW(fed.add_project(pending("p", {1, 1, 1})), Error);
}

TEST(FederationStoreTest, CommittedNeverExceedsCapacityUnderRandomWorkload) {
  std::mt19937_64 rng(5);
  FederationStore fed;
  fed.add_cluster(cluster("A", {4, 32, 128}));
  fed.add_cluster(cluster("B", {8, 16, 64}));
  fed.add_cluster(cluster("C", {2, 64, 388}));
  std::uniform_int_distribution<int> op(0, 9);
  std::uniform_int_distribution<std::uint64_t> g(0, 4), c(0, 24), m(0, 160);
  int next = 0;
  std::vector<ProjectId> live;
  for (int step = 0; step < 3000; ++step) {
    if (op(rng) < 7 || live.empty()) {
      auto id = "p" + std::to_string(next++);
      fed.add_project(pending(id.c_str(), {g(rng), c(rng), m(rng)}));
      auto d = fed.score(ProjectId(id), [&](const ClusterId& cid) { return cid.str() != "B" || step % 50 < 25; });
      if (d.placed()) {
        fed.commit_placement(d);
        live.push_back(ProjectId(id));
        // Placed onto an available cluster only.
        EXPECT_TRUE(d.cluster->str() != "B" || step % 50 < 25);
      } else {
        fed.reject(d);
      }
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, live.size() - 1);
      auto i = pick(rng);
      fed.remove_project(live[i]);
      live.erase(live.begin() + static_cast<std::ptrdiff_t>(i));
    }
    for (const auto& [id, cl] : fed.clusters()) {
      ASSERT_TRUE(fits_within(fed.committed(id), cl.capacity)) << id.str() << " at step " << step;
    }
  }
}
