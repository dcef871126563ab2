#include "dmpc/scenario_config.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <string>

using namespace dmpc;

namespace {

bool contains(const std::string& s, const std::string& sub) { return s.find(sub) != std::string::npos; }

int count_containing(const std::vector<std::string>& v, const std::string& sub) {
  return static_cast<int>(std::count_if(v.begin(), v.end(), [&](const std::string& s) { return contains(s, sub); }));
}

std::string parse_error(const std::string& text) {
  try {
    (void)parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Preset, MatchesPublishedParameters) {
  const ScenarioConfig c = paper_sec6_preset();
  EXPECT_EQ(c.followers.count, 6);
  EXPECT_EQ(c.horizon, 20);
  EXPECT_DOUBLE_EQ(c.dt, 0.2);
  Vec qf(9);
  qf << 10, 10, 5, 1, 1, 1, 1, 1, 1;
  EXPECT_EQ(Vec(c.followers.Q.diagonal()), qf);
  Vec ql(6);
  ql << 10, 10, 10, 1, 1, 1;
  EXPECT_EQ(Vec(c.leader.Q.diagonal()), ql);
  EXPECT_DOUBLE_EQ(c.landing.safe_radius, 0.5);
  EXPECT_DOUBLE_EQ(c.collision.params.min_distance, 2 * c.landing.safe_radius);
  EXPECT_DOUBLE_EQ(c.landing.platform_radius, 2.5);
  EXPECT_DOUBLE_EQ(c.landing.offset_radius, 1.5);
  EXPECT_DOUBLE_EQ(c.predictor.confidence, 0.95);
  EXPECT_EQ(c.step_cap, 40);
  ASSERT_TRUE(c.seed.has_value());
  EXPECT_EQ(preset_by_name("paper-sec6").name, c.name);
  EXPECT_THROW((void)preset_by_name("nope"), ConfigError);

  // leader mute from t = 0, f1 cut off from t = 10
  const LossSchedule s{c.comm.links, *c.seed};
  EXPECT_FALSE(s.delivers(0, 3, 0));
  EXPECT_TRUE(s.delivers(1, 2, 9));
  EXPECT_FALSE(s.delivers(1, 2, 10));
  EXPECT_FALSE(s.delivers(2, 1, 10));
  EXPECT_TRUE(s.delivers(2, 3, 30));
}

TEST(Preset, ValidatesWithHorizonAdvisory) {
  const ValidationReport r = validate_config(paper_sec6_preset());
  EXPECT_TRUE(r.ok());
  EXPECT_EQ(count_containing(r.advisories, "N0 = 19.9 < N = 20"), 1);
  EXPECT_EQ(count_containing(r.advisories, "0.166904"), 1);
}

TEST(ScenarioConfig, RoundTripIsStable) {
  const ScenarioConfig a = paper_sec6_preset();
  const std::string text = dump_config(a);
  const ScenarioConfig b = parse_config(text);
  EXPECT_EQ(dump_config(b), text);
  EXPECT_EQ(b.seed, a.seed);
  EXPECT_EQ(b.comm.links.size(), a.comm.links.size());
  EXPECT_EQ(b.followers.Q, a.followers.Q);

  ScenarioConfig c = a;
  c.name = "custom";
  c.landing.offsets = make_hexagon_offsets(6, 1.2);
  c.disturbance.kind = DisturbanceKind::Seeded;
  c.disturbance.leader_bound = Vec::Constant(6, 0.01);
  c.disturbance.follower_bound = Vec::Constant(9, 0.02);
  c.analysis.gamma_bar.reset();
  c.leader.track.kind = LeaderTrackKind::Decelerate;
  c.leader.track.deceleration = 0.05;
  const std::string t2 = dump_config(c);
  const ScenarioConfig d = parse_config(t2);
  EXPECT_EQ(dump_config(d), t2);
  EXPECT_EQ(d.landing.offsets.size(), 6u);
  EXPECT_EQ(d.disturbance.kind, DisturbanceKind::Seeded);
  EXPECT_FALSE(d.analysis.gamma_bar.has_value());
  EXPECT_EQ(d.leader.track.kind, LeaderTrackKind::Decelerate);
}

TEST(ScenarioConfig, SyntaxErrorNamesLine) {
  const std::string e = parse_error("{\n  \"name\": \"x\",\n  \"horizon\": 20,,\n}\n");
  EXPECT_TRUE(contains(e, "line 3")) << e;
}

TEST(ScenarioConfig, FieldErrorsNameTheField) {
  std::string e = parse_error(R"({"horizon": "twenty"})");
  EXPECT_TRUE(contains(e, "'horizon'")) << e;
  EXPECT_TRUE(contains(e, "integer")) << e;

  e = parse_error(R"({"followers": {"cuont": 3}})");
  EXPECT_TRUE(contains(e, "'followers.cuont'")) << e;
  EXPECT_TRUE(contains(e, "unknown field")) << e;

  e = parse_error(R"({"followers": {"Q": [1, 2, 3]}})");
  EXPECT_TRUE(contains(e, "'followers.Q'")) << e;

  e = parse_error(R"({"comm": {"links": [{"from": "f9", "to": "*"}]}})");
  EXPECT_TRUE(contains(e, "comm.links")) << e;

  e = parse_error(R"({"disturbance": {"kind": "gusty"}})");
  EXPECT_TRUE(contains(e, "'disturbance.kind'")) << e;

  e = parse_error(R"([1, 2])");
  EXPECT_FALSE(e.empty());
}

TEST(ScenarioConfig, CollisionRadiusTooLargeListsEveryPair) {
  ScenarioConfig c = paper_sec6_preset();
  c.collision.params.min_distance = 2.0;
  const ValidationReport r = validate_config(c);
  EXPECT_FALSE(r.ok());
  // adjacent hexagon offsets are 1.5 m apart; the next ring is 1.5 sqrt(3) > 2
  EXPECT_EQ(count_containing(r.errors, "infeasible geometry: landing offsets of"), 6);
  EXPECT_EQ(count_containing(r.errors, "f1 and f2"), 1);
  EXPECT_EQ(count_containing(r.errors, "f1 and f3"), 0);
}

TEST(ScenarioConfig, StochasticConfigNeedsSeed) {
  ScenarioConfig c = paper_sec6_preset();
  c.seed.reset();
  c.predictor.measurement_sigma = 0.0;
  EXPECT_TRUE(validate_config(c).ok());
  c.disturbance.kind = DisturbanceKind::Seeded;
  c.disturbance.leader_bound = Vec::Constant(6, 0.01);
  c.disturbance.follower_bound = Vec::Constant(9, 0.01);
  const ValidationReport r = validate_config(c);
  EXPECT_FALSE(r.ok());
  EXPECT_EQ(count_containing(r.errors, "seed"), 1);
  c.seed = 3;
  EXPECT_TRUE(validate_config(c).ok());
}

TEST(ScenarioConfig, OffsetOutsidePlatformIsRejected) {
  ScenarioConfig c = paper_sec6_preset();
  c.landing.offset_radius = 2.2;
  const ValidationReport r = validate_config(c);
  EXPECT_EQ(count_containing(r.errors, "outside the platform margin"), 6);
}

TEST(ScenarioConfig, InitialFunnelViolationIsRejected) {
  ScenarioConfig c = paper_sec6_preset();
  c.followers.altitude = 0.5;
  c.followers.ring_radius = 3.0;
  const ValidationReport r = validate_config(c);
  EXPECT_GE(count_containing(r.errors, "violates the funnel constraint"), 1);
}

TEST(ScenarioConfig, RangeChecks) {
  ScenarioConfig c = paper_sec6_preset();
  c.horizon = 0;
  EXPECT_FALSE(validate_config(c).ok());
  c = paper_sec6_preset();
  c.followers.Q(0, 0) = -1.0;
  EXPECT_EQ(count_containing(validate_config(c).errors, "followers.Q"), 1);
  c = paper_sec6_preset();
  c.analysis.gamma_bar = 0.5;
  EXPECT_FALSE(validate_config(c).ok());
  c = paper_sec6_preset();
  c.safety_gate.confidence = 1.0;
  EXPECT_FALSE(validate_config(c).ok());
}

TEST(AgentNames, MapBothWays) {
  EXPECT_EQ(agent_id_from_name("leader", 6), 0);
  EXPECT_EQ(agent_id_from_name("f3", 6), 3);
  EXPECT_EQ(agent_id_from_name("*", 6), kAnyAgent);
  EXPECT_THROW((void)agent_id_from_name("f7", 6), ConfigError);
  EXPECT_THROW((void)agent_id_from_name("boat", 6), ConfigError);
  EXPECT_EQ(agent_name(0), "leader");
  EXPECT_EQ(agent_name(4), "f4");
}

TEST(ScenarioConfig, InitialStatesOnRing) {
  const ScenarioConfig c = paper_sec6_preset();
  const std::vector<Vec> x0 = c.follower_initial_states();
  ASSERT_EQ(x0.size(), 6u);
  for (const Vec& x : x0) {
    EXPECT_NEAR(x.head<2>().norm(), 5.0, 1e-12);
    EXPECT_DOUBLE_EQ(x[2], 10.0);
  }
  const std::vector<Vec3> off = c.landing_offsets();
  for (std::size_t i = 0; i < off.size(); ++i) {
    // each follower lands on the slot opposite its start
    EXPECT_LT(off[i].head<2>().dot(x0[i].head<2>()), 0.0);
  }
}

TEST(ScenarioConfig, LoadMissingFileFails) {
  EXPECT_THROW((void)load_config("/nonexistent/scenario.json"), ConfigError);
}
