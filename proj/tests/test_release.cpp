#include <gtest/gtest.h>

#include <random>

#include "fedplane/release.hpp"
#include "oracles.hpp"

using namespace fedplane;

namespace {

SemVer v(const char* s) { return SemVer::parse(s); }

Cluster with_workspace(const char* version) {
  Cluster c;
  c.id = ClusterId("kuh");
  c.display_name = "kuh";
  c.installed["workspace"] = v(version);
  return c;
}

const SyncPolicy kAuto{SyncMode::Auto, 0, 30};

}  // namespace

TEST(Publish, LatestFollowsSemanticPrecedence) {
  ReleaseRegistry reg;
  EXPECT_FALSE(reg.latest("workspace"));
  reg.publish("workspace", v("1.0.0"), "sha256:a", 0);
  EXPECT_EQ(reg.latest("workspace"), v("1.0.0"));
  EXPECT_THROW(reg.publish("workspace", v("1.0.0"), "sha256:a", 1), Error);
  reg.publish("workspace", v("1.2.0"), "sha256:b", 2);
  reg.publish("workspace", v("1.10.0"), "sha256:c", 3);
  EXPECT_EQ(reg.latest("workspace"), v("1.10.0"));
  try {
    reg.publish("workspace", v("1.9.9"), "sha256:d", 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Conflict);
  }
  EXPECT_EQ(reg.history("workspace").size(), 3u);
}

TEST(Poll, AutoUpgradesStraightToLatest) {
  ReleaseRegistry reg;
  for (const char* ver : {"1.0.0", "1.1.0", "1.2.0"}) reg.publish("workspace", v(ver), "d", 0);
  auto c = with_workspace("1.0.0");
  auto actions = poll(c, reg, kAuto, 30, Availability::Available);
  ASSERT_EQ(actions.size(), 1u);
  EXPECT_EQ(actions[0].from, v("1.0.0"));
  EXPECT_EQ(actions[0].to, v("1.2.0"));
  EXPECT_EQ(actions[0].applied_at, 30);
  EXPECT_EQ(c.installed.at("workspace"), v("1.2.0"));
}

TEST(Poll, FixpointIsIdempotent) {
  ReleaseRegistry reg;
  reg.publish("workspace", v("1.0.0"), "d", 0);
  auto c = with_workspace("1.0.0");
  EXPECT_TRUE(poll(c, reg, kAuto, 30, Availability::Available).empty());
  EXPECT_EQ(c.installed.at("workspace"), v("1.0.0"));
}

TEST(Poll, UnavailableClusterSkips) {
  ReleaseRegistry reg;
  reg.publish("workspace", v("2.0.0"), "d", 0);
  auto c = with_workspace("1.0.0");
  EXPECT_TRUE(poll(c, reg, kAuto, 30, Availability::Unavailable).empty());
  EXPECT_EQ(c.installed.at("workspace"), v("1.0.0"));
}

TEST(Poll, ScheduledOnlyAtPeriodMultiples) {
  ReleaseRegistry reg;
  reg.publish("workspace", v("1.1.0"), "d", 0);
  auto c = with_workspace("1.0.0");
  SyncPolicy scheduled{SyncMode::Scheduled, 100, 30};
  EXPECT_TRUE(poll(c, reg, scheduled, 150, Availability::Available).empty());
  EXPECT_EQ(poll(c, reg, scheduled, 200, Availability::Available).size(), 1u);
  EXPECT_EQ(scheduled.cadence(), 100);
}

TEST(Poll, NeverDowngradesOrInstallsUnhostedApps) {
  ReleaseRegistry reg;
  reg.publish("workspace", v("1.0.0"), "d", 0);
  reg.publish("annotation", v("3.0.0"), "d", 0);
  auto c = with_workspace("2.0.0");
  EXPECT_TRUE(poll(c, reg, kAuto, 30, Availability::Available).empty());
  EXPECT_EQ(c.installed.at("workspace"), v("2.0.0"));
  EXPECT_FALSE(c.installed.contains("annotation"));
}

TEST(SyncPolicyTest, Validation) {
  EXPECT_THROW((SyncPolicy{SyncMode::Auto, 0, 0}.validate()), Error);
  EXPECT_THROW((SyncPolicy{SyncMode::Scheduled, 10, 30}.validate()), Error);
  EXPECT_NO_THROW((SyncPolicy{SyncMode::Scheduled, 30, 30}.validate()));
}

TEST(Drift, BehindByCountsNewerVersions) {
  ReleaseRegistry reg;
  for (const char* ver : {"1.0.0", "1.1.0", "1.2.0"}) reg.publish("workspace", v(ver), "d", 0);
  auto behind = with_workspace("1.0.0");
  auto converged = with_workspace("1.2.0");
  converged.id = ClusterId("other");
  std::map<ClusterId, Cluster> clusters{{behind.id, behind}, {converged.id, converged}};
  auto report = drift_report(reg, clusters);
  EXPECT_EQ(report.at(behind.id).at("workspace").behind_by, 2u);
  EXPECT_EQ(report.at(converged.id).at("workspace").behind_by, 0u);
  EXPECT_FALSE(report.at(behind.id).contains("annotation"));
}

TEST(Drift, BehindByMatchesCountingOracle) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> d(0, 12);
  for (int round = 0; round < 50; ++round) {
    std::vector<std::string> published;
    ReleaseRegistry reg;
    SemVer last{0, 0, 0};
    for (int i = 0; i < 8; ++i) {
      SemVer next{last.major, last.minor + static_cast<std::uint64_t>(d(rng)) + 1, 0};
      reg.publish("workspace", next, "d", i);
      published.push_back(next.str());
      last = next;
    }
    std::string installed = published[static_cast<std::size_t>(d(rng)) % published.size()];
    std::size_t want = 0;
    for (const auto& p : published) want += oracle::semver_compare(p, installed) > 0;
    auto c = with_workspace(installed.c_str());
    EXPECT_EQ(cluster_drift(reg, c).at("workspace").behind_by, want);
  }
}
