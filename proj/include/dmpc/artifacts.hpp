#pragma once

/**
 * @file artifacts.hpp
 * @brief Run certificate and the on-disk artifacts of a run.
 *
 * A run directory holds
 *   config.json       the effective scenario
 *   trajectory.csv    t,agent,role,px,py,pz,x3..x8,u0..u3,latched
 *   steps.jsonl       one step record per line
 *   loss_audit.csv    t,link,status
 *   certificate.json  convergence, safety-gate and collision checks
 *   summary.json      outcome, latch steps and counters
 * and optionally plot_top.csv / plot_3d.csv.
 */

#include "dmpc/convergence_analysis.hpp"
#include "dmpc/coordinator.hpp"
#include "dmpc/scenario_config.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dmpc {

inline constexpr int kArtifactSchemaVersion = 1;

struct FollowerLyapunov {
  int follower = 0;
  std::vector<LyapunovSample> samples;
  LyapunovReport report;
};

struct Certificate {
  CollisionReport collision;
  SafetyGateTrace gate;
  double gate_threshold = 0.0;

  /// The decrease certificate only applies to nominal runs: no disturbance and
  /// no loss rules. It is evaluated either way.
  bool lyapunov_applicable = false;
  double rho_hat = 0.0;
  double gamma_bar = 0.0;
  std::optional<ConvergenceConstants> constants;
  std::string constants_note;
  std::vector<FollowerLyapunov> lyapunov;
  int decrease_violations = 0;
  int increase_violations = 0;
  int sandwich_violations = 0;

  int degraded_solves = 0;
  double max_slack = 0.0;

  [[nodiscard]] bool lyapunov_ok() const;
  [[nodiscard]] bool pass() const;
};

/// Positions per step from step records.
[[nodiscard]] std::vector<PositionFrame> frames_from_steps(const std::vector<StepRecord>& steps);

[[nodiscard]] Certificate certify_run(const ScenarioConfig& config,
                                      const std::vector<StepRecord>& steps,
                                      const std::vector<PositionFrame>& frames);

/// Outcome after the certificate: a successful run whose certificate fails
/// becomes CertificateFailure.
[[nodiscard]] RunOutcome final_outcome(const RunResult& result, const Certificate& cert);

[[nodiscard]] std::string trajectory_csv_header();
void write_trajectory_csv(const std::string& path, const ScenarioConfig& config,
                          const std::vector<StepRecord>& steps);
[[nodiscard]] std::vector<PositionFrame> read_trajectory_frames(const std::string& path);

void write_steps_jsonl(const std::string& path, const std::vector<StepRecord>& steps);
/// Reads back the fields the certificate needs (states are not stored).
[[nodiscard]] std::vector<StepRecord> read_steps_jsonl(const std::string& path);

void write_certificate_json(const std::string& path, const Certificate& cert);
void write_summary_json(const std::string& path, const ScenarioConfig& config,
                        const RunResult& result, const Certificate& cert, RunOutcome outcome);
void write_plot_tables(const std::string& dir, const std::vector<StepRecord>& steps);

/// Writes every artifact into `dir` (created if needed) and returns the final outcome.
RunOutcome write_run_artifacts(const std::string& dir, const ScenarioConfig& config,
                               const RunResult& result, bool plot_data = false);

/// Human-readable summary rebuilt from the artifacts in `dir`. Throws
/// std::runtime_error when artifacts are missing.
[[nodiscard]] std::string render_report(const std::string& dir);

}  // namespace dmpc
