#pragma once

/**
 * @file scenario_config.hpp
 * @brief Scenario description, JSON (de)serialization, validation and the
 * built-in paper-sec6 preset.
 */

#include "dmpc/comm_fabric.hpp"
#include "dmpc/convergence_analysis.hpp"
#include "dmpc/docp_solver.hpp"
#include "dmpc/safety_constraints.hpp"
#include "dmpc/vehicle_models.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dmpc {

enum class LeaderTrackKind { Static, Line, Decelerate };

/// Exogenous leader reference: straight line through the initial position.
struct LeaderTrack {
  LeaderTrackKind kind = LeaderTrackKind::Line;
  double speed = 0.5;          ///< initial speed along the heading, m/s
  double heading = 0.0;        ///< rad
  double deceleration = 0.0;   ///< m/s^2, Decelerate only

  /// Reference state [p, psi, nu, r] at time `time` (s), relative to `origin`.
  [[nodiscard]] Vec state_at(double time, const Vec3& origin) const;
};

struct LeaderConfig {
  LeaderParams model;
  Vec initial_state = Vec::Zero(6);
  Mat Q;
  LeaderTrack track;
};

struct FollowerConfig {
  FollowerParams model;
  int count = 6;
  double ring_radius = 5.0;
  double altitude = 10.0;
  Mat Q;
  Mat R;  ///< input weight, empty = none
  std::vector<Vec> initial_states;  ///< optional explicit override
};

struct LandingConfig {
  double platform_radius = 2.5;
  double safe_radius = 0.5;
  double offset_radius = 1.5;
  std::vector<Vec3> offsets;  ///< optional explicit override
};

struct FunnelConfig {
  bool enabled = true;
  double safety_height = 2.0;
  double slope = 1.0;
  double margin = 0.0;              ///< planner requires h_C >= margin
  double robust_radius_cap = 0.1;   ///< cap on the per-stage centre uncertainty
};

struct CollisionConfig {
  bool enabled = true;
  CollisionParams params;
  double inflation_ceiling = 0.25;
};

struct PredictorConfig {
  double measurement_sigma = 0.05;
  double confidence = 0.95;
  Vec leader_process;   ///< diagonal of Q_process for the leader model (6)
  Vec leader_initial;   ///< diagonal of the initial covariance (6)
  Vec peer_process;     ///< constant-velocity peer model (6)
  Vec peer_initial;
};

struct CommConfig {
  std::vector<LinkRule> links;
};

enum class DisturbanceKind { None, Seeded, Replay };

struct DisturbanceConfig {
  DisturbanceKind kind = DisturbanceKind::None;
  Vec leader_bound;    ///< |w| <= bound per entry (6), Seeded only
  Vec follower_bound;  ///< (9), Seeded only
  std::string replay_file;  ///< CSV t,p_x,p_y,psi, Replay only
};

struct DeadlockConfig {
  bool enabled = true;
  double stall_threshold = 1e-3;
  int stall_steps = 10;
  double magnitude = 0.5;
};

struct AnalysisConfig {
  double v_n_max = 240.0;
  std::optional<double> gamma_bar;  ///< from config, else from the initial errors
  double lyapunov_tolerance = 1e-6;
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::optional<std::uint64_t> seed;
  double dt = 0.2;
  int substeps = 1;
  int horizon = 20;
  double epsilon = 0.1;
  int step_cap = 40;
  int threads = 0;  ///< 0 = hardware concurrency
  LeaderConfig leader;
  FollowerConfig followers;
  LandingConfig landing;
  FunnelConfig funnel;
  CollisionConfig collision;
  PredictorConfig predictor;
  CommConfig comm;
  SolverOptions solver;
  SafetyGateParams safety_gate;
  DeadlockConfig deadlock;
  DisturbanceConfig disturbance;
  AnalysisConfig analysis;

  [[nodiscard]] int agent_count() const { return followers.count + 1; }
  [[nodiscard]] bool stochastic() const;
  [[nodiscard]] FunnelParams funnel_params() const;
  [[nodiscard]] std::vector<Vec3> landing_offsets() const;
  [[nodiscard]] std::vector<Vec> follower_initial_states() const;
  [[nodiscard]] std::vector<std::string> agent_names() const;
  [[nodiscard]] FollowerParams follower_params() const;
  [[nodiscard]] LeaderParams leader_params() const;
};

/// Agent id from a name ("leader", "f1", ..., "*" = kAnyAgent).
[[nodiscard]] int agent_id_from_name(const std::string& name, int follower_count);
[[nodiscard]] std::string agent_name(int id);

struct ValidationReport {
  std::vector<std::string> errors;
  std::vector<std::string> advisories;
  [[nodiscard]] bool ok() const { return errors.empty(); }
};

/// Full invariant sweep: parameter ranges, landing geometry, initial
/// feasibility, seed presence and the N > N0 advisory.
[[nodiscard]] ValidationReport validate_config(const ScenarioConfig& config);

/// Parses a JSON document. Throws ConfigError naming the offending line or field.
[[nodiscard]] ScenarioConfig parse_config(const std::string& text);
[[nodiscard]] ScenarioConfig load_config(const std::string& path);
[[nodiscard]] std::string dump_config(const ScenarioConfig& config);

/// M = 6 followers on a ring of radius 5 at 10 m, N = 20, dt = 0.2, leader
/// mute from t = 0, follower f1 cut off from t = 10.
[[nodiscard]] ScenarioConfig paper_sec6_preset();

[[nodiscard]] ScenarioConfig preset_by_name(const std::string& name);

}  // namespace dmpc
