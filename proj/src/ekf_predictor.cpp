#include "dmpc/ekf_predictor.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace dmpc {

namespace {

Mat symmetrize(const Mat& P) { return 0.5 * (P + P.transpose()); }

Mat measurement_matrix(int state_dim) {
  Mat H = Mat::Zero(3, state_dim);
  H.leftCols<3>().setIdentity();
  return H;
}

}  // namespace

double ConfidenceParams::scale() const {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("confidence level must lie in (0, 1)");
  return -2.0 * std::log1p(-p);
}

EkfState ekf_correct(const EkfState& state, const Vec3& measurement, const EkfNoise& noise,
                     EkfDiagnostics* diag) {
  if (!measurement.allFinite()) throw ConfigError("ekf_correct: non-finite measurement");
  const int n = static_cast<int>(state.x.size());
  const Mat H = measurement_matrix(n);
  const Vec3 innovation = measurement - state.x.head<3>();
  Mat3 S = (H * state.P * H.transpose() + noise.measurement);
  S = 0.5 * (S + S.transpose());

  Eigen::LDLT<Mat3> ldlt(S);
  bool regularized = false;
  const double ridge = 1e-12 * std::max(1.0, S.diagonal().cwiseAbs().maxCoeff());
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= ridge) {
    S += Mat3::Identity() * std::max(ridge, 1e-12);
    ldlt.compute(S);
    regularized = true;
  }
  if (diag != nullptr) diag->regularized = regularized;

  // K = P H^T S^-1
  const Mat PHt = state.P * H.transpose();
  const Mat K = ldlt.solve(PHt.transpose()).transpose();

  EkfState out = state;
  out.x = state.x + K * innovation;
  // Joseph form keeps P symmetric positive semidefinite.
  const Mat IKH = Mat::Identity(n, n) - K * H;
  out.P = symmetrize(IKH * state.P * IKH.transpose() + K * noise.measurement * K.transpose());
  return out;
}

EkfState ekf_predict(const EkfState& state, const DynamicsModel& model, const EkfNoise& noise) {
  const Vec u0 = Vec::Zero(model.input_dim());
  const Linearization lin = model.linearize(state.x, u0);
  EkfState out;
  out.x = model.step(state.x, u0);
  out.P = symmetrize(lin.A * state.P * lin.A.transpose() + noise.process);
  out.t = state.t + 1;
  return out;
}

EkfState ekf_update(const EkfState& state, const Vec3& measurement, const DynamicsModel& model,
                    const EkfNoise& noise, EkfDiagnostics* diag) {
  return ekf_predict(ekf_correct(state, measurement, noise, diag), model, noise);
}

PredictionResult predict_horizon(const EkfState& state, const DynamicsModel& model,
                                 const EkfNoise& noise, int steps) {
  if (steps < 1) throw ConfigError("predict_horizon: steps must be >= 1");
  PredictionResult result;
  result.states.reserve(static_cast<std::size_t>(steps) + 1);
  result.covariances.reserve(static_cast<std::size_t>(steps) + 1);
  EkfState s = state;
  result.states.push_back(s.x);
  result.covariances.push_back(s.P);
  for (int k = 0; k < steps; ++k) {
    s = ekf_predict(s, model, noise);
    result.states.push_back(s.x);
    result.covariances.push_back(s.P);
  }
  return result;
}

double max_eigenvalue(const Mat& P) {
  if (P.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(P), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

double confidence_radius(const Mat& P, const ConfidenceParams& cp) {
  return std::sqrt(cp.scale() * std::max(0.0, max_eigenvalue(P)));
}

int ReconstructedTrajectory::predictor_filled() const {
  return static_cast<int>(std::count(predicted.begin(), predicted.end(), true));
}

ReconstructedTrajectory shift_and_predict(const std::optional<SharedTrajectory>& last_shared,
                                          int now, int horizon,
                                          const std::vector<Vec>& prediction) {
  const auto len = static_cast<std::size_t>(horizon) + 1;
  if (prediction.size() < len) {
    throw ConfigError("shift_and_predict: prediction shorter than horizon + 1");
  }
  ReconstructedTrajectory out;
  out.points.resize(len);
  out.predicted.assign(len, true);

  if (!last_shared || last_shared->points.size() < len) {
    out.pure_prediction = true;
    for (std::size_t l = 0; l < len; ++l) out.points[l] = prediction[l];
    return out;
  }
  const int k = now - last_shared->birth;
  if (k < 0) throw ConfigError("shift_and_predict: shared trajectory born in the future");
  out.staleness = k;
  if (k == 0) {
    out.points = last_shared->points;
    out.points.resize(len);
    out.predicted.assign(len, false);
    return out;
  }
  out.pure_prediction = k >= horizon - 1;
  for (int l = 0; l <= horizon; ++l) {
    const auto idx = static_cast<std::size_t>(l);
    if (!out.pure_prediction && l < horizon - k) {
      out.points[idx] = last_shared->points[static_cast<std::size_t>(l + k)];
      out.predicted[idx] = false;
    } else {
      out.points[idx] = prediction[idx];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct DisplacementProbe {
  const DynamicsModel& model;
  std::vector<int> free_dims;  // indices into [x; u] that are bounded
  Vec lo, hi;                  // bounds of the free dims
  int nx;
  Vec x_base, u_base;  // values of the fixed dims

  Vec assemble(const Vec& z, Vec& x, Vec& u) const {
    x = x_base;
    u = u_base;
    for (std::size_t i = 0; i < free_dims.size(); ++i) {
      const int d = free_dims[i];
      if (d < nx) x[d] = z[static_cast<Eigen::Index>(i)];
      else u[d - nx] = z[static_cast<Eigen::Index>(i)];
    }
    return z;
  }

  Vec3 displacement(const Vec& z) const {
    Vec x, u;
    assemble(z, x, u);
    return (model.step(x, u) - x).head<3>();
  }

  // Jacobian of the displacement w.r.t. the free dims.
  Mat jacobian(const Vec& z) const {
    Vec x, u;
    assemble(z, x, u);
    const Linearization lin = model.linearize(x, u);
    Mat J(3, static_cast<Eigen::Index>(free_dims.size()));
    for (std::size_t i = 0; i < free_dims.size(); ++i) {
      const int d = free_dims[i];
      Vec3 col = d < nx ? Vec3(lin.A.col(d).head<3>()) : Vec3(lin.B.col(d - nx).head<3>());
      if (d < nx && d < 3) col[d] -= 1.0;
      J.col(static_cast<Eigen::Index>(i)) = col;
    }
    return J;
  }
};

}  // namespace

double worst_case_radius(const DynamicsModel& model, const Box& state_box, const Box& input_box,
                         const WorstCaseRadiusOptions& options) {
  const int nx = model.state_dim();
  const int nu = model.input_dim();
  DisplacementProbe probe{model, {}, {}, {}, nx, Vec::Zero(nx), Vec::Zero(nu)};
  for (int d = 0; d < nx; ++d) {
    if (std::isfinite(state_box.lower[d]) && state_box.lower[d] == state_box.upper[d]) {
      probe.x_base[d] = state_box.lower[d];
    }
  }
  for (int d = 0; d < nu; ++d) {
    if (std::isfinite(input_box.lower[d]) && input_box.lower[d] == input_box.upper[d]) {
      probe.u_base[d] = input_box.lower[d];
    }
  }
  std::vector<double> lo, hi;
  for (int d = 0; d < nx + nu; ++d) {
    const double l = d < nx ? state_box.lower[d] : input_box.lower[d - nx];
    const double h = d < nx ? state_box.upper[d] : input_box.upper[d - nx];
    if (std::isfinite(l) && std::isfinite(h) && h > l) {
      probe.free_dims.push_back(d);
      lo.push_back(l);
      hi.push_back(h);
    }
  }
  const auto nf = static_cast<Eigen::Index>(probe.free_dims.size());
  probe.lo = Eigen::Map<const Vec>(lo.data(), nf);
  probe.hi = Eigen::Map<const Vec>(hi.data(), nf);

  if (nf == 0) return probe.displacement(Vec()).norm();

  const int g = std::max(2, options.grid_points);
  const Vec cell = (probe.hi - probe.lo) / (g - 1);
  double best = 0.0;
  Vec best_z = probe.lo;
  double max_jac_norm = 0.0;

  std::vector<int> idx(static_cast<std::size_t>(nf), 0);
  while (true) {
    Vec z(nf);
    for (Eigen::Index i = 0; i < nf; ++i) z[i] = probe.lo[i] + cell[i] * idx[static_cast<std::size_t>(i)];
    const double val = probe.displacement(z).norm();
    if (val > best) {
      best = val;
      best_z = z;
    }
    max_jac_norm = std::max(max_jac_norm, probe.jacobian(z).operatorNorm());
    std::size_t pos = 0;
    while (pos < idx.size() && ++idx[pos] == g) idx[pos++] = 0;
    if (pos == idx.size()) break;
  }

  // Projected gradient ascent from the best grid point.
  Vec z = best_z;
  double step = cell.maxCoeff();
  for (int it = 0; it < options.refine_iterations && step > 1e-9; ++it) {
    const Vec3 disp = probe.displacement(z);
    const double n = disp.norm();
    if (n < 1e-15) break;
    const Vec grad = probe.jacobian(z).transpose() * (disp / n);
    if (grad.norm() < 1e-14) break;
    const Vec cand = (z + step * grad / grad.norm()).cwiseMax(probe.lo).cwiseMin(probe.hi);
    const double val = probe.displacement(cand).norm();
    if (val > best) {
      best = val;
      z = cand;
    } else {
      step *= 0.5;
    }
  }

  // The norm is Lipschitz with constant max ||J||; any point of a grid cell is
  // within half the cell diagonal of a grid node.
  const double slack = 1.05 * max_jac_norm * 0.5 * cell.norm();
  return best + slack;
}

}  // namespace dmpc
