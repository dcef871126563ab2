#pragma once

/**
 * @file docp_solver.hpp
 * @brief Per-agent finite-horizon optimal control problem and its
 * primal-dual interior-point solver.
 *
 * Problem (multiple shooting, states and inputs are decision variables):
 *
 *   min   sum_{k=0}^{N} ||x_k - r_k||_Q^2 + sum_k u_k^T R u_k + slack penalty
 *   s.t.  x_0 = x(t),   x_{k+1} = f(x_k, u_k)
 *         x_k in X, u_k in U
 *         h_C(p_k, leader_k) >= margin_k           (funnel, followers only;
 *                                                   optionally robust to a
 *                                                   centre uncertainty radius)
 *         h_ij(p_k, peer_j,k) >= inflation_j        (separation, followers only)
 *
 * The nonlinear inequalities may be softened with a nonnegative slack that is
 * charged w1 * slack + w2 * slack^2 in the objective.
 *
 * Newton steps are computed with a Riccati recursion over the stages. A
 * failed Cholesky factorization of a stage pivot signals that the reduced
 * Hessian is not positive definite, in which case a diagonal shift is added
 * (inertia correction). Globalization uses an l1 exact-penalty merit function
 * with a second-order correction.
 */

#include "dmpc/safety_constraints.hpp"
#include "dmpc/types.hpp"
#include "dmpc/vehicle_models.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dmpc {

struct SolverOptions {
  double tolerance = 1e-6;             ///< scaled KKT residual
  double dynamics_tolerance = 1e-9;    ///< stop only once defects are below this
  int max_iterations = 200;
  double mu_init = 0.1;
  double mu_min = 1e-9;                ///< final barrier parameter
  bool soft_constraints = true;
  double slack_linear_weight = 1e3;
  double slack_quadratic_weight = 1e4;
  double regularization = 1e-8;        ///< added to every input Hessian block
  /// State boxes of stages k >= 2 are shrunk by this fraction of their width,
  /// so the shifted plan starts strictly inside the box at stage 1.
  double state_box_tightening = 1e-3;
};

struct FunnelTerm {
  FunnelParams params;
  std::vector<Vec3> centers;   ///< N + 1 predicted platform centres
  std::vector<double> margin;  ///< per stage lower bound on h_C (empty = 0)
  std::vector<double> robust_radius;  ///< per stage centre uncertainty (empty = 0)
};

struct PeerTerm {
  int peer_id = -1;
  std::vector<Vec3> positions;  ///< N + 1 predicted peer positions
  double inflation = 0.0;       ///< constraint is h_ij >= inflation
};

struct OcpSpec {
  int horizon = 20;
  Mat Q;                        ///< state weight, positive definite
  Mat R;                        ///< input weight (empty = zero)
  bool include_terminal = true; ///< sum to k = N (true) or k = N - 1 (false)
  std::vector<Vec> reference;   ///< N + 1 state references
  std::optional<FunnelTerm> funnel;
  CollisionParams collision;
  std::vector<PeerTerm> peers;
  SolverOptions options;

  /// Throws ConfigError when dimensions or weights are inconsistent.
  void validate(int state_dim, int input_dim) const;
};

enum class SolveStatus { Converged, MaxIterations, Infeasible, NumericalFailure };

[[nodiscard]] std::string to_string(SolveStatus status);

struct SolveDiagnostics {
  int iterations = 0;
  double kkt_residual = kInf;        ///< scaled stationarity + complementarity
  double primal_infeasibility = kInf;  ///< before the final rollout
  double dynamics_defect = kInf;     ///< of the returned trajectory
  double max_box_violation = 0.0;
  double max_constraint_violation = 0.0;  ///< of the nonlinear inequalities
  double max_slack = 0.0;
  bool slack_active = false;
  double final_mu = 0.0;
  double objective = 0.0;            ///< cost plus slack penalty
  int inertia_corrections = 0;
  bool warm_start_candidate = false;  ///< the shifted warm start was returned
};

struct OcpSolution {
  std::vector<Vec> states;  ///< N + 1, states[0] = x(t)
  std::vector<Vec> inputs;  ///< N
  std::vector<Vec> dynamics_multipliers;  ///< N, used to warm start duals
  double cost = 0.0;        ///< tracking cost of `states`
  SolveStatus status = SolveStatus::NumericalFailure;
  SolveDiagnostics diagnostics;

  [[nodiscard]] bool converged() const { return status == SolveStatus::Converged; }
};

/// sum_{k=0}^{K} ||x_k - r_k||_Q^2 with K = N or N - 1.
[[nodiscard]] double tracking_cost(const std::vector<Vec>& states,
                                   const std::vector<Vec>& reference, const Mat& Q,
                                   bool include_terminal = true);

/// Previous solution shifted by one step with the last input repeated, states
/// re-simulated from x_now. Used as warm start and as the candidate of the
/// warm-start monotonicity check.
[[nodiscard]] OcpSolution shift_solution(const OcpSolution& previous, const Vec& x_now,
                                         const DynamicsModel& model);

class DocpSolver {
 public:
  explicit DocpSolver(const DynamicsModel& model) : model_(&model) {}

  [[nodiscard]] OcpSolution solve(const Vec& x_now, const OcpSpec& spec,
                                  const OcpSolution* warm = nullptr) const;

  [[nodiscard]] const DynamicsModel& model() const { return *model_; }

 private:
  const DynamicsModel* model_;
};

/// Optimal cost V_N for the given spec (whose reference is the leader
/// trajectory). `out` receives the full solution when non-null.
[[nodiscard]] double value_function(const DynamicsModel& model, const Vec& x_now,
                                    const OcpSpec& spec, OcpSolution* out = nullptr);

enum class Membership { Inside, Outside, Unknown };

/// x in { V_N <= V_max }. States with ||x - r_0||_Q^2 > V_max are rejected
/// without solving; a non-converged solve yields Unknown.
[[nodiscard]] Membership roa_membership(const DynamicsModel& model, const Vec& x_now,
                                        const OcpSpec& spec, double v_max);

}  // namespace dmpc
