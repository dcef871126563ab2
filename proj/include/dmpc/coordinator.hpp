#pragma once

/**
 * @file coordinator.hpp
 * @brief Step loop of the leader-follower rendezvous: measurement and
 * prediction, reference reconstruction, per-agent DOCP solves, tolerance
 * gating, input application and broadcasting.
 *
 * Agent ids: 0 is the leader, 1..M are the followers f1..fM.
 *
 * Step t:
 *   1. every follower measures all other agents and corrects its predictors
 *   2. references are rebuilt from the data collection D_i(t)
 *   3. followers within epsilon of their landing reference latch
 *   4. all agents solve (in id order at t = 0, concurrently afterwards)
 *   5. the leader and unlatched followers broadcast, inputs are applied
 */

#include "dmpc/comm_fabric.hpp"
#include "dmpc/convergence_analysis.hpp"
#include "dmpc/docp_solver.hpp"
#include "dmpc/ekf_predictor.hpp"
#include "dmpc/scenario_config.hpp"

#include <array>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dmpc {

enum class AgentRole { Leader, Follower };

[[nodiscard]] std::string to_string(AgentRole role);

/// Predictor one agent keeps for one peer.
struct PeerPredictor {
  int target = -1;
  EkfState state;  ///< prior for the current step until corrected
  EkfNoise noise;
  std::shared_ptr<const DynamicsModel> model;
};

struct AgentRuntime {
  int id = 0;
  AgentRole role = AgentRole::Follower;
  std::shared_ptr<const DynamicsModel> model;
  Vec state;
  Vec3 landing_offset = Vec3::Zero();
  bool latched = false;
  int latch_step = -1;
  std::map<int, PeerPredictor> predictors;  ///< followers only, keyed by peer id
  std::optional<OcpSolution> previous;
  double previous_cost = kInf;
  int stall_count = 0;
};

/// Everything an agent derived from D_i(t) at one step.
struct AgentReferences {
  std::vector<Vec> reference;   ///< N + 1 own reference states
  std::optional<FunnelTerm> funnel;
  std::vector<PeerTerm> peers;
  Vec3 leader_estimate = Vec3::Zero();  ///< hat z_l(0|t)
  double leader_lambda = 0.0;   ///< max_k lambda_max of the predicted leader position covariance
  std::map<int, int> staleness; ///< per peer, -1 = never heard
  int predictor_filled = 0;     ///< entries of the leader and peer trajectories taken from predictors
};

struct AgentStepRecord {
  int id = 0;
  bool latched = false;
  bool solved = false;
  bool broadcast = false;
  bool degraded = false;
  bool perturbed = false;   ///< deadlock perturbation applied this step
  Vec state;                ///< x(t)
  Vec input;                ///< u applied at t (zero once the run has ended)
  double cost = 0.0;
  SolveStatus status = SolveStatus::Converged;
  SolveDiagnostics diagnostics;
  std::map<int, int> staleness;
  int predictor_filled = 0;
  double leader_lambda = 0.0;
  double gate_distance = 0.0;  ///< ||p_i - (hat z_l(0|t) + c_i)||
  double error_q = 0.0;        ///< ||x_i - r_i(0|t)||_Q^2
  double error_sq = 0.0;       ///< ||x_i - r_i(0|t)||^2
};

struct StepRecord {
  int t = 0;
  std::vector<AgentStepRecord> agents;  ///< indexed by agent id
  double lambda_max = 0.0;              ///< max over followers of leader_lambda
  bool gate_pass = true;
  double gate_margin = 0.0;
  double min_h_C = kInf;                ///< over followers, true leader position
  double min_pairwise = kInf;
  int latched_count = 0;
};

enum class RunOutcome { Success, StepCap, SafetyAbort, CertificateFailure };

[[nodiscard]] std::string to_string(RunOutcome outcome);
/// 0 success, 2 step cap, 3 safety abort, 4 certificate failure.
[[nodiscard]] int exit_code(RunOutcome outcome);

struct DeadlockEvent {
  int t = 0;
  int agent = 0;
  Vec3 offset = Vec3::Zero();
};

struct RunResult {
  RunOutcome outcome = RunOutcome::StepCap;
  std::vector<StepRecord> steps;
  std::vector<DeliveryRecord> audit;
  std::vector<DeadlockEvent> deadlock_events;
  std::vector<int> latch_steps;  ///< per follower (index 0 = f1), -1 if never
  bool all_latched = false;
  double wall_seconds = 0.0;
};

/// Simulation world. Construction validates the config and refuses to start
/// when the landing geometry or the initial states are infeasible.
class World {
 public:
  explicit World(ScenarioConfig config);

  [[nodiscard]] const ScenarioConfig& config() const { return config_; }
  [[nodiscard]] const std::vector<AgentRuntime>& agents() const { return agents_; }
  [[nodiscard]] const CommFabric& fabric() const { return fabric_; }
  [[nodiscard]] int t() const { return t_; }
  [[nodiscard]] bool all_latched() const;
  [[nodiscard]] const std::vector<DeadlockEvent>& deadlock_events() const { return deadlock_events_; }
  [[nodiscard]] double worst_case_radius() const { return worst_case_radius_; }

  /// References of one follower at the current step from its data collection.
  [[nodiscard]] AgentReferences build_references(int agent, const DataCollection& data) const;

  /// Executes one step and advances time unless every follower latched.
  /// With allow_solve = false only the latch gate is evaluated (used at the
  /// step cap).
  StepRecord run_step(bool allow_solve = true);

 private:
  void correct_predictors();
  void advance_predictors();
  [[nodiscard]] OcpSpec make_spec(int agent, const AgentReferences& refs) const;
  [[nodiscard]] OcpSolution solve_agent(int agent, const OcpSpec& spec) const;
  [[nodiscard]] SharedTrajectory share(int agent, const OcpSolution& sol) const;
  [[nodiscard]] Vec3 measurement_noise(int observer, int target) const;
  [[nodiscard]] Vec disturbance(int agent) const;
  void apply_replay();
  void fill_metrics(StepRecord& rec) const;

  ScenarioConfig config_;
  std::vector<AgentRuntime> agents_;
  CommFabric fabric_;
  FunnelParams funnel_params_;
  std::uint64_t seed_ = 0;
  int t_ = 0;
  double worst_case_radius_ = 0.0;
  std::vector<DeadlockEvent> deadlock_events_;
  std::vector<std::array<double, 4>> replay_;  ///< t, p_x, p_y, psi
};

/// Per-step callback (progress reporting).
using StepObserver = std::function<void(const StepRecord&)>;

/// Runs until every follower latches, the step cap is hit or the safety
/// monitor aborts. The outcome is Success or one of the failure modes; the
/// certificate check is left to the caller.
[[nodiscard]] RunResult run_scenario(const ScenarioConfig& config,
                                     const StepObserver& observer = {});

/// Runs `count` tasks on up to `threads` worker threads (0 = hardware
/// concurrency). Tasks must write to disjoint outputs.
void parallel_for(int count, int threads, const std::function<void(int)>& task);

/// Standard normal draw determined by its key.
[[nodiscard]] double hash_normal(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                                 std::uint64_t c);

/// Recorded leader track: CSV with header t,p_x,p_y,psi.
[[nodiscard]] std::vector<std::array<double, 4>> load_leader_track(const std::string& path);

}  // namespace dmpc
