#pragma once

// Scenario variants shared by the tests and the acceptance run.

#include "dmpc/scenario_config.hpp"

namespace dmpc::testing {

/// One follower, full communication, no disturbance and a leader that slows
/// to a stop. Q = I and N = 40 keep alpha_N positive for the measured rho.
inline ScenarioConfig nominal_single_follower() {
  ScenarioConfig c = paper_sec6_preset();
  c.name = "nominal-single";
  c.followers.count = 1;
  c.followers.ring_radius = 5.0;
  c.followers.altitude = 10.0;
  c.followers.Q = Mat::Identity(9, 9);
  c.landing.offset_radius = 0.0;
  c.landing.offsets.clear();
  c.comm.links.clear();
  c.horizon = 40;
  c.step_cap = 200;
  c.threads = 1;
  c.leader.track.kind = LeaderTrackKind::Decelerate;
  c.leader.track.speed = 0.3;
  c.leader.track.deceleration = 0.1;
  c.predictor.leader_process *= 0.1;
  c.analysis.v_n_max = 1000.0;
  c.analysis.gamma_bar.reset();
  return c;
}

/// Two followers whose straight paths to their landing slots cross above the
/// platform centre.
inline ScenarioConfig crossing_pair(bool collision_constraints) {
  ScenarioConfig c = paper_sec6_preset();
  c.name = collision_constraints ? "crossing" : "crossing-ablation";
  c.followers.count = 2;
  c.followers.ring_radius = 5.0;
  c.followers.altitude = 6.0;
  c.landing.offsets = {Vec3(-1.5, 0, 0), Vec3(1.5, 0, 0)};
  c.followers.initial_states = {Vec::Zero(9), Vec::Zero(9)};
  c.followers.initial_states[0].head<3>() << 5.0, 0.0, 6.0;
  c.followers.initial_states[1].head<3>() << -5.0, 0.0, 6.0;
  c.comm.links.clear();
  c.leader.track.kind = LeaderTrackKind::Static;
  c.leader.track.speed = 0.0;
  c.collision.enabled = collision_constraints;
  c.step_cap = 60;
  c.threads = 1;
  return c;
}

}  // namespace dmpc::testing
