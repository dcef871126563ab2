#pragma once

/**
 * @file convergence_analysis.hpp
 * @brief Lyapunov-decrease certificate, probabilistic landing gate and
 * collision-free verification of completed runs.
 *
 * Constants:
 *   lambda_ratio = lambda_max(Q_f) / lambda_min(Q_f)
 *   N0           = gamma_bar * lambda_ratio
 *   alpha_N      = 1 - rho * (gamma / N) * lambda_ratio
 *
 * Certificate (checked step by step):
 *   V(t+1) - V(t) <= -alpha_N ||e(t)||_Q^2
 *   ||e(t)||_Q^2 <= V(t) <= gamma ||e(t)||_Q^2
 *
 * Landing gate: r_safe + sqrt(s lambda_max(P)) < r_plat.
 */

#include "dmpc/safety_constraints.hpp"
#include "dmpc/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dmpc {

struct ConvergenceConstants {
  double rho = 0.0;
  double gamma_bar = 1.0;
  double gamma = 1.0;
  double lambda_ratio = 1.0;
  double n0 = 0.0;
  double alpha_n = 0.0;
  int horizon = 0;
  bool certifiable = false;  ///< alpha_N > 0
  int minimal_horizon = 0;   ///< smallest N with alpha_N > 0
};

/// lambda_max(Q) / lambda_min(Q) for a symmetric positive definite Q.
[[nodiscard]] double eigenvalue_ratio(const Mat& Q);

/// Constants with gamma = gamma_bar. Throws ConfigError unless rho in (0, 1),
/// N >= 1, gamma_bar >= 1 and Q positive definite.
[[nodiscard]] ConvergenceConstants compute_constants(const Mat& Q, double rho, int horizon,
                                                     double gamma_bar);

/// gamma_bar = V_max / min_i ||e_i||_Q^2 over the given initial errors.
[[nodiscard]] double gamma_bar_from_errors(const Mat& Q, double v_max,
                                           const std::vector<Vec>& initial_errors);

/// One step of a nominal run: value function and error at t.
struct LyapunovSample {
  int t = 0;
  double value = 0.0;         ///< V_N(t)
  double error_q = 0.0;       ///< ||e(t)||_Q^2
  double error_sq = 0.0;      ///< ||e(t)||^2
};

struct LyapunovStep {
  int t = 0;
  double value = 0.0;
  double next_value = 0.0;
  double decrease = 0.0;  ///< V(t+1) - V(t)
  double bound = 0.0;     ///< -alpha_N ||e(t)||_Q^2
  double tolerance = 0.0;
  bool decrease_ok = true;
  bool nonincreasing = true;
  bool sandwich_ok = true;
};

struct LyapunovReport {
  std::vector<LyapunovStep> steps;
  int decrease_violations = 0;
  int sandwich_violations = 0;
  int increase_violations = 0;
  [[nodiscard]] bool ok() const {
    return decrease_violations == 0 && sandwich_violations == 0 && increase_violations == 0;
  }
};

/// max_t ||e(t+1)||^2 / ||e(t)||^2 over consecutive samples with e(t) != 0.
[[nodiscard]] double estimate_rho(const std::vector<LyapunovSample>& samples);

/// Checks decrease, monotonicity and sandwich bounds with tolerance
/// rel_tol * V(t) (sandwich: rel_tol * max(V, 1)).
[[nodiscard]] LyapunovReport check_lyapunov_decrease(const std::vector<LyapunovSample>& samples,
                                                     const ConvergenceConstants& constants,
                                                     double rel_tol = 1e-6);

struct SafetyGateParams {
  double confidence = 0.95;     ///< p
  double platform_radius = 2.5;  ///< r_plat
  double safe_radius = 1.5;      ///< r_safe of the gate inequality
  int dwell = 5;                 ///< consecutive failures before abort

  void validate() const;
  [[nodiscard]] double scale() const;      ///< s = -2 ln(1 - p)
  [[nodiscard]] double threshold() const;  ///< largest admissible lambda_max (exclusive)
};

struct SafetyGate {
  double lambda_max = 0.0;
  double radius = 0.0;   ///< sqrt(s lambda_max)
  double margin = 0.0;   ///< r_plat - r_safe - radius
  bool pass = false;
};

[[nodiscard]] SafetyGate evaluate_safety_gate(double lambda_max, const SafetyGateParams& params);

struct SafetyGateTrace {
  std::vector<SafetyGate> steps;
  std::optional<int> abort_step;  ///< first step completing a dwell of failures
  [[nodiscard]] bool all_pass() const;
  [[nodiscard]] double max_lambda() const;
};

[[nodiscard]] SafetyGateTrace check_safety_gate(const std::vector<double>& lambda_trace,
                                                const SafetyGateParams& params);

/// Online form of check_safety_gate evaluated at each step barrier.
class SafetyGateMonitor {
 public:
  explicit SafetyGateMonitor(SafetyGateParams params);
  SafetyGate update(double lambda_max);
  [[nodiscard]] bool abort() const { return consecutive_failures_ >= params_.dwell; }
  [[nodiscard]] int consecutive_failures() const { return consecutive_failures_; }

 private:
  SafetyGateParams params_;
  int consecutive_failures_ = 0;
};

/// Positions of all agents at one step.
struct PositionFrame {
  int t = 0;
  Vec3 leader = Vec3::Zero();
  std::vector<int> follower_ids;
  std::vector<Vec3> followers;
};

struct CollisionReport {
  double min_pairwise = kInf;  ///< min h_ij (kInf with fewer than two followers)
  int pair_t = -1, pair_i = -1, pair_j = -1;
  std::vector<int> follower_ids;
  std::vector<double> min_funnel;  ///< per follower min h_C
  std::vector<int> funnel_t;
  double tolerance = 1e-6;
  [[nodiscard]] double min_h_C() const;
  [[nodiscard]] bool pairwise_ok() const { return min_pairwise >= -tolerance; }
  [[nodiscard]] bool funnel_ok() const { return min_h_C() >= -tolerance; }
  [[nodiscard]] bool pass() const { return pairwise_ok() && funnel_ok(); }
};

[[nodiscard]] CollisionReport verify_collision_free(const std::vector<PositionFrame>& frames,
                                                    const CollisionParams& cp,
                                                    const FunnelParams& fp);

}  // namespace dmpc
