#pragma once

/**
 * @file ekf_predictor.hpp
 * @brief Extended Kalman filter used as an N-step open-loop trajectory
 * predictor for peers whose shared trajectories are stale or missing.
 *
 * The motion model is the peer's nominal dynamics propagated with zero input;
 * the unknown input is absorbed by the process noise. Measurements are peer
 * positions (first three state entries).
 */

#include "dmpc/types.hpp"
#include "dmpc/vehicle_models.hpp"

#include <optional>
#include <vector>

namespace dmpc {

struct EkfState {
  Vec x;      ///< state estimate
  Mat P;      ///< covariance
  int t = 0;  ///< discrete time the estimate refers to
};

struct EkfNoise {
  Mat process;      ///< Q, state_dim x state_dim, added every prediction step
  Mat measurement;  ///< R, 3 x 3 position measurement noise
};

struct EkfDiagnostics {
  bool regularized = false;  ///< innovation covariance was singular and got a ridge
};

struct PredictionResult {
  std::vector<Vec> states;       ///< N + 1 predicted states, index 0 = current estimate
  std::vector<Mat> covariances;  ///< N + 1 covariance matrices

  [[nodiscard]] int horizon() const { return static_cast<int>(states.size()) - 1; }
  [[nodiscard]] Vec3 position(int k) const { return states[static_cast<std::size_t>(k)].head<3>(); }
  [[nodiscard]] Mat3 position_covariance(int k) const {
    return covariances[static_cast<std::size_t>(k)].topLeftCorner<3, 3>();
  }
};

/// Confidence level p and the matching ellipsoid scale s = -2 ln(1 - p).
struct ConfidenceParams {
  double p = 0.95;
  [[nodiscard]] double scale() const;
};

/// Measurement update with a position measurement.
[[nodiscard]] EkfState ekf_correct(const EkfState& state, const Vec3& measurement,
                                   const EkfNoise& noise, EkfDiagnostics* diag = nullptr);

/// One zero-input prediction step: x <- f(x, 0), P <- A P A^T + Q, t <- t + 1.
[[nodiscard]] EkfState ekf_predict(const EkfState& state, const DynamicsModel& model,
                                   const EkfNoise& noise);

/// Correct with the measurement at time state.t, then predict to state.t + 1.
[[nodiscard]] EkfState ekf_update(const EkfState& state, const Vec3& measurement,
                                  const DynamicsModel& model, const EkfNoise& noise,
                                  EkfDiagnostics* diag = nullptr);

/// N open-loop prediction steps from the current estimate.
[[nodiscard]] PredictionResult predict_horizon(const EkfState& state, const DynamicsModel& model,
                                               const EkfNoise& noise, int steps);

/// sqrt(s * lambda_max(P)); P is expected to be a position covariance.
[[nodiscard]] double confidence_radius(const Mat& P, const ConfidenceParams& cp);

/// Largest eigenvalue of a symmetric matrix (0 for empty).
[[nodiscard]] double max_eigenvalue(const Mat& P);

/// A trajectory as broadcast by an agent: N + 1 follower-space vectors born at
/// step `birth`.
struct SharedTrajectory {
  int sender = -1;
  int birth = 0;
  std::vector<Vec> points;
};

struct ReconstructedTrajectory {
  std::vector<Vec> points;      ///< N + 1 follower-space vectors for times t .. t + N
  std::vector<bool> predicted;  ///< true where the entry came from the predictor
  int staleness = -1;           ///< t - t_a, or -1 with no shared data
  bool pure_prediction = false;

  [[nodiscard]] int predictor_filled() const;
};

/// Rebuilds a peer trajectory at time `now` from the newest shared trajectory
/// (born at t_a) and a prediction computed at `now`:
///   k = now - t_a;  out[l] = shared[l + k] for l < N - k, else prediction[l].
/// k = 0 returns the shared trajectory verbatim; k >= N - 1 or no shared data
/// uses the prediction only. `prediction` must already be in follower space.
[[nodiscard]] ReconstructedTrajectory shift_and_predict(
    const std::optional<SharedTrajectory>& last_shared, int now, int horizon,
    const std::vector<Vec>& prediction);

struct WorstCaseRadiusOptions {
  int grid_points = 3;   ///< per dimension (corners + midpoints for 3)
  int refine_iterations = 30;
};

/// Largest one-step position displacement ||p(f(x,u)) - p(x)|| over the
/// state/input boxes, found on a grid and refined by projected coordinate
/// ascent, plus a Lipschitz slack bounding what the grid may have missed.
/// Unbounded box dimensions are fixed at zero.
[[nodiscard]] double worst_case_radius(const DynamicsModel& model, const Box& state_box,
                                       const Box& input_box,
                                       const WorstCaseRadiusOptions& options = {});

}  // namespace dmpc
