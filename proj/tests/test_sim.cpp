#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "fedplane/scenario.hpp"
#include "oracles.hpp"

using namespace fedplane;
using namespace fedplane::sim;

namespace {

const char* kOneCluster =
    "seed 1\n"
    "config heartbeat_interval=10 miss_threshold=3 poll_interval=30\n"
    "cluster kuh gpus=2 cpu=64 mem=388 bookable=2 install=workspace@1.0.0\n";

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t index_of(const Trace& t, const std::string& needle) {
  for (std::size_t i = 0; i < t.records.size(); ++i) {
    if (t.records[i].find(needle) != std::string::npos) return i;
  }
  return t.records.size();
}

}  // namespace

TEST(Simulator, EmptyQueueAdvancesClock) {
  Simulator s;
  EXPECT_TRUE(s.advance_to(100).empty());
  EXPECT_EQ(s.now(), 100);
  EXPECT_THROW(s.advance_to(99), SimFault);
}

TEST(Simulator, TiesFireInSequenceOrder) {
  Simulator s;
  std::vector<std::string> fired;
  s.on(EventKind::Custom, [&](const SimEvent& e) { fired.push_back(e.label); });
  s.schedule({.at = 5, .label = "first"});
  s.schedule({.at = 5, .label = "second"});
  s.schedule({.at = 3, .label = "earliest"});
  auto events = s.advance_to(5);
  EXPECT_EQ(fired, (std::vector<std::string>{"earliest", "first", "second"}));
  ASSERT_EQ(events.size(), 3u);
  EXPECT_LT(events[1].seq, events[2].seq);
}

TEST(Simulator, HandlersMayChainButNotScheduleIntoThePast) {
  Simulator s;
  int chained = 0;
  s.on(EventKind::Custom, [&](const SimEvent& e) {
    if (e.label == "again" && ++chained < 3) s.schedule({.at = e.at + 1, .label = "again"});
    if (e.label == "bad") s.schedule({.at = e.at - 1, .label = "x"});
  });
  s.schedule({.at = 1, .label = "again"});
  s.advance_to(10);
  EXPECT_EQ(chained, 3);
  s.schedule({.at = 11, .label = "bad"});
  EXPECT_THROW(s.advance_to(20), SimFault);
}

TEST(PartitionTableTest, MergesAndRejectsEmpty) {
  PartitionTable t;
  ClusterId c("kuh");
  EXPECT_THROW(t.add(c, 100, 100), Error);
  t.add(c, 100, 200);
  auto merged = t.add(c, 150, 250);
  EXPECT_EQ(merged, (Interval{100, 250}));
  EXPECT_EQ(t.intervals(c).size(), 1u);
  EXPECT_FALSE(t.cut_off(c, 100));
  EXPECT_TRUE(t.cut_off(c, 101));
  EXPECT_FALSE(t.cut_off(c, 250));
  EXPECT_TRUE(t.ends_at(c, 250));
}

TEST(FederationSimTest, PartitionFlipsAvailabilityAtToleranceAndRejoins) {
  auto scenario = Scenario::parse(kOneCluster);
  FederationSim fs(scenario);
  fs.partition(ClusterId("kuh"), 100, 200);
  for (Timestamp t = 1; t <= 300; ++t) {
    fs.run_until(t);
    bool up = fs.plane().availability(ClusterId("kuh"), t) == Availability::Available;
    bool want = t <= 130 || t >= 200;
    ASSERT_EQ(up, want) << "t=" << t;
    auto last = fs.plane().monitor().record(ClusterId("kuh")).last_heartbeat;
    ASSERT_EQ(up, oracle::available(last, t, 10, 3)) << "t=" << t;
  }
}

TEST(FederationSimTest, SnapshotDuringPartitionShowsStaleness) {
  auto scenario = Scenario::parse(kOneCluster);
  FederationSim fs(scenario);
  fs.partition(ClusterId("kuh"), 100, 200);
  fs.run_until(150);
  auto st = fs.plane().status(150);
  ASSERT_EQ(st.clusters.size(), 1u);
  EXPECT_EQ(st.clusters[0].availability, Availability::Unavailable);
  EXPECT_EQ(st.clusters[0].last_heartbeat, 100);
  EXPECT_EQ(st.clusters[0].staleness, 50);
  EXPECT_TRUE(st.clusters[0].last_metrics);
}

TEST(FederationSimTest, PartitionRejectsBadIntervals) {
  auto scenario = Scenario::parse(kOneCluster);
  FederationSim fs(scenario);
  EXPECT_THROW(fs.partition(ClusterId("kuh"), 100, 100), Error);
  fs.run_until(50);
  EXPECT_THROW(fs.partition(ClusterId("kuh"), 10, 100), Error);
}

TEST(RunScenario, EmptyScenarioHasOnlyInitRecords) {
  auto trace = run_scenario(Scenario::parse("seed 3\n"));
  EXPECT_FALSE(trace.failed);
  ASSERT_FALSE(trace.records.empty());
  for (const auto& r : trace.records) EXPECT_NE(r.find(" init "), std::string::npos) << r;
}

TEST(RunScenario, KuhTraceGrantsThenRespawnsWithoutGpu) {
  auto trace = run_scenario(Scenario::load(FEDPLANE_SCENARIO_DIR "/kuh.scn"));
  ASSERT_FALSE(trace.failed) << trace.failure;
  auto grant = index_of(trace, "\"verdict\":\"GrantGpu\"");
  auto respawn = index_of(trace, "\"cause\":\"expired\"");
  ASSERT_LT(grant, trace.records.size());
  ASSERT_LT(respawn, trace.records.size());
  EXPECT_LT(grant, respawn);
}

TEST(RunScenario, KuhTraceMatchesGoldenFile) {
  auto trace = run_scenario(Scenario::load(FEDPLANE_SCENARIO_DIR "/kuh.scn"));
  EXPECT_EQ(trace.text(), read_file(FEDPLANE_SCENARIO_DIR "/kuh.trace"));
}

TEST(RunScenario, SameScenarioTwiceIsByteIdentical) {
  std::string text = std::string(kOneCluster) +
                     "cluster far gpus=4 cpu=32 mem=128 bookable=4 delay=2\n"
                     "0 register p members=u1,u2 gpus=1 cpu=1 mem=1\n"
                     "20 workload ops=200 span=2000\n";
  auto scenario = Scenario::parse(text);
  auto a = run_scenario(scenario);
  auto b = run_scenario(scenario);
  EXPECT_FALSE(a.failed) << a.failure;
  EXPECT_EQ(a.text(), b.text());
  EXPECT_EQ(a.final_digest, b.final_digest);
  scenario.seed = 2;
  EXPECT_NE(run_scenario(scenario).text(), a.text());
}

TEST(RunScenario, ExpiryPrecedesAdmissionAtTheSameInstant) {
  // Both orderings: an explicit sweep before the spawn, and none. The spawn
  // at 200 must be granted either way, and the expiry must appear first.
  std::string base = std::string(kOneCluster) +
                     "0 register p members=u1,u2 gpus=2 cpu=1 mem=1\n"
                     "10 book a user=u1 project=p gpus=2 start=100 end=200\n"
                     "10 book b user=u2 project=p gpus=2 start=200 end=300\n"
                     "100 spawn w1 user=u1 project=p gpu=yes\n";
  for (const char* middle : {"", "200 sweep\n"}) {
    auto trace = run_scenario(Scenario::parse(base + middle +
                                              "200 spawn w2 user=u2 project=p gpu=yes expect=ok\n"
                                              "200 assert workspace user=u2 project=p gpus=2\n"
                                              "200 assert workspace user=u1 project=p gpus=0 phase=Respawned\n"));
    ASSERT_FALSE(trace.failed) << trace.failure;
    auto expiry = index_of(trace, "\"cause\":\"expired\"");
    auto spawn = index_of(trace, "\"booking\":\"bk-000002\",\"gpus\":2,\"verdict\":\"GrantGpu\"");
    EXPECT_LT(expiry, spawn);
  }
}

TEST(RunScenario, FailedAssertMarksTraceWithDigest) {
  auto trace = run_scenario(Scenario::parse(std::string(kOneCluster) +
                                            "0 register p members=u1 gpus=1\n"
                                            "5 assert project p state=Rejected\n"
                                            "9 assert project p state=Placed\n"));
  EXPECT_TRUE(trace.failed);
  EXPECT_NE(trace.failure.find("line"), std::string::npos);
  EXPECT_NE(trace.records.back().find("ASSERT-FAILED"), std::string::npos);
  EXPECT_NE(trace.records.back().find("digest"), std::string::npos);
}

TEST(ScenarioParse, RejectsMalformedInput) {
  EXPECT_THROW(Scenario::parse("cluster a gpus=1 cpu=1 mem=1\ncluster a gpus=1 cpu=1 mem=1\n"), Error);
  EXPECT_THROW(Scenario::parse("10 sweep\n5 sweep\n"), Error);
  EXPECT_THROW(Scenario::parse("config nonsense=1\n"), Error);
  EXPECT_THROW(Scenario::parse("x sweep\n"), Error);
}
