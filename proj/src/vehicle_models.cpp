#include "dmpc/vehicle_models.hpp"

#include <cmath>

namespace dmpc {

namespace {

void require_finite(const Vec& v, const char* what) {
  if (!v.allFinite()) {
    throw IntegrationError(std::string(what) + ": non-finite state after integration");
  }
}

}  // namespace

Vec DynamicsModel::step(const Vec& x, const Vec& u, const Vec& w) const {
  Vec next = step(x, u);
  if (w.size() == next.size()) next += w;
  return next;
}

Mat DynamicsModel::weighted_hessian(const Vec& x, const Vec& u, const Vec& lambda) const {
  const int nx = state_dim();
  const int nu = input_dim();
  const int n = nx + nu;
  Mat H(n, n);
  Vec xp = x;
  Vec up = u;
  auto gradient = [&](const Vec& xs, const Vec& us) {
    const Linearization lin = linearize(xs, us);
    Vec g(n);
    g.head(nx) = lin.A.transpose() * lambda;
    if (nu > 0) g.tail(nu) = lin.B.transpose() * lambda;
    return g;
  };
  for (int j = 0; j < n; ++j) {
    double& slot = j < nx ? xp[j] : up[j - nx];
    const double base = slot;
    const double h = 1e-5 * std::max(1.0, std::abs(base));
    slot = base + h;
    const Vec gp = gradient(xp, up);
    slot = base - h;
    const Vec gm = gradient(xp, up);
    slot = base;
    H.col(j) = (gp - gm) / (2.0 * h);
  }
  return 0.5 * (H + H.transpose());
}

Rk4Model::Rk4Model(double dt, int substeps) : dt_(dt), substeps_(substeps) {
  if (!(dt > 0.0)) throw ConfigError("model dt must be positive");
  if (substeps < 1) throw ConfigError("model substeps must be >= 1");
}

Vec Rk4Model::step(const Vec& x, const Vec& u) const {
  const double h = dt_ / substeps_;
  Vec s = x;
  for (int i = 0; i < substeps_; ++i) {
    const Vec k1 = rhs(s, u);
    const Vec k2 = rhs(s + 0.5 * h * k1, u);
    const Vec k3 = rhs(s + 0.5 * h * k2, u);
    const Vec k4 = rhs(s + h * k3, u);
    s += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  require_finite(s, "Rk4Model::step");
  return s;
}

Linearization Rk4Model::linearize(const Vec& x, const Vec& u) const {
  const int nx = state_dim();
  const int nu = input_dim();
  const double h = dt_ / substeps_;
  Mat Sx = Mat::Identity(nx, nx);  // d s / d x0
  Mat Su = Mat::Zero(nx, nu);      // d s / d u
  Mat Fx(nx, nx);
  Mat Fu(nx, nu);
  Vec s = x;
  const Mat I = Mat::Identity(nx, nx);
  for (int i = 0; i < substeps_; ++i) {
    const Vec k1 = rhs(s, u);
    rhs_jacobian(s, u, Fx, Fu);
    const Mat K1x = Fx;
    const Mat K1u = Fu;

    const Vec s2 = s + 0.5 * h * k1;
    const Vec k2 = rhs(s2, u);
    rhs_jacobian(s2, u, Fx, Fu);
    const Mat K2x = Fx * (I + 0.5 * h * K1x);
    const Mat K2u = Fx * (0.5 * h * K1u) + Fu;

    const Vec s3 = s + 0.5 * h * k2;
    const Vec k3 = rhs(s3, u);
    rhs_jacobian(s3, u, Fx, Fu);
    const Mat K3x = Fx * (I + 0.5 * h * K2x);
    const Mat K3u = Fx * (0.5 * h * K2u) + Fu;

    const Vec s4 = s + h * k3;
    const Vec k4 = rhs(s4, u);
    rhs_jacobian(s4, u, Fx, Fu);
    const Mat K4x = Fx * (I + h * K3x);
    const Mat K4u = Fx * (h * K3u) + Fu;

    const Mat stage_x = I + (h / 6.0) * (K1x + 2.0 * K2x + 2.0 * K3x + K4x);
    const Mat stage_u = (h / 6.0) * (K1u + 2.0 * K2u + 2.0 * K3u + K4u);
    Su = stage_x * Su + stage_u;
    Sx = stage_x * Sx;
    s += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return {Sx, Su};
}

// ---------------------------------------------------------------------------
// Follower

FollowerModel::FollowerModel(FollowerParams params)
    : Rk4Model(params.dt, params.substeps), params_(params) {
  if (!(params.mass > 0.0) || !(params.gravity > 0.0)) {
    throw ConfigError("follower mass and gravity must be positive");
  }
  state_box_ = Box::unbounded(kStateDim);
  for (int i = 3; i < 6; ++i) {
    state_box_.lower[i] = -params.max_speed;
    state_box_.upper[i] = params.max_speed;
  }
  for (int i = 6; i < 8; ++i) {
    state_box_.lower[i] = -params.max_tilt;
    state_box_.upper[i] = params.max_tilt;
  }
  const double thrust = params.thrust_fraction * params.mass * params.gravity;
  input_box_.lower = Vec(kInputDim);
  input_box_.upper = Vec(kInputDim);
  input_box_.lower << -thrust, -params.max_rate, -params.max_rate, -params.max_rate;
  input_box_.upper << thrust, params.max_rate, params.max_rate, params.max_rate;
  if (!state_box_.nonempty() || !input_box_.nonempty() ||
      !input_box_.contains(Vec::Zero(kInputDim))) {
    throw ConfigError("follower constraint boxes must be nonempty and contain hover");
  }
}

Vec FollowerModel::hover_state(const Vec3& p, double yaw) {
  Vec x = Vec::Zero(kStateDim);
  x.head<3>() = p;
  x[8] = yaw;
  return x;
}

Vec FollowerModel::rhs(const Vec& x, const Vec& u) const {
  const double g = params_.gravity;
  const double phi = x[6], theta = x[7], psi = x[8];
  const double cphi = std::cos(phi), sphi = std::sin(phi);
  const double cth = std::cos(theta), sth = std::sin(theta);
  const double cpsi = std::cos(psi), spsi = std::sin(psi);
  const double accel = g + u[0] / params_.mass;

  Vec dx(kStateDim);
  dx.segment<3>(0) = x.segment<3>(3);
  dx[3] = accel * (cpsi * sth * cphi + spsi * sphi) - params_.drag[0] * x[3];
  dx[4] = accel * (spsi * sth * cphi - cpsi * sphi) - params_.drag[1] * x[4];
  dx[5] = accel * (cth * cphi) - g - params_.drag[2] * x[5];
  dx.segment<3>(6) = u.segment<3>(1);
  return dx;
}

void FollowerModel::rhs_jacobian(const Vec& x, const Vec& u, Mat& Fx, Mat& Fu) const {
  const double phi = x[6], theta = x[7], psi = x[8];
  const double cphi = std::cos(phi), sphi = std::sin(phi);
  const double cth = std::cos(theta), sth = std::sin(theta);
  const double cpsi = std::cos(psi), spsi = std::sin(psi);
  const double accel = params_.gravity + u[0] / params_.mass;

  Fx.setZero(kStateDim, kStateDim);
  Fu.setZero(kStateDim, kInputDim);
  Fx.block<3, 3>(0, 3).setIdentity();
  for (int i = 0; i < 3; ++i) Fx(3 + i, 3 + i) = -params_.drag[i];

  // Columns of d(R e3) / d(phi, theta, psi).
  Vec3 b(cpsi * sth * cphi + spsi * sphi, spsi * sth * cphi - cpsi * sphi, cth * cphi);
  Vec3 db_dphi(-cpsi * sth * sphi + spsi * cphi, -spsi * sth * sphi - cpsi * cphi, -cth * sphi);
  Vec3 db_dtheta(cpsi * cth * cphi, spsi * cth * cphi, -sth * cphi);
  Vec3 db_dpsi(-spsi * sth * cphi + cpsi * sphi, cpsi * sth * cphi + spsi * sphi, 0.0);
  Fx.block<3, 1>(3, 6) = accel * db_dphi;
  Fx.block<3, 1>(3, 7) = accel * db_dtheta;
  Fx.block<3, 1>(3, 8) = accel * db_dpsi;

  Fu.block<3, 1>(3, 0) = b / params_.mass;
  Fu.block<3, 3>(6, 1).setIdentity();
}

// ---------------------------------------------------------------------------
// Leader

LeaderModel::LeaderModel(LeaderParams params)
    : Rk4Model(params.dt, params.substeps), params_(params) {
  state_box_ = Box::unbounded(kStateDim);
  state_box_.lower[4] = -params.max_surge;
  state_box_.upper[4] = params.max_surge;
  state_box_.lower[5] = -params.max_yaw_rate;
  state_box_.upper[5] = params.max_yaw_rate;
  input_box_.lower = Vec(kInputDim);
  input_box_.upper = Vec(kInputDim);
  input_box_.lower << -params.max_surge_accel, -params.max_yaw_accel;
  input_box_.upper << params.max_surge_accel, params.max_yaw_accel;
  if (!state_box_.nonempty() || !input_box_.nonempty() ||
      !input_box_.contains(Vec::Zero(kInputDim)) || !state_box_.contains(Vec::Zero(kStateDim))) {
    throw ConfigError("leader constraint boxes must be nonempty and contain the rest state");
  }
}

Vec LeaderModel::step(const Vec& x, const Vec& u) const {
  Vec next = Rk4Model::step(x, u);
  next[2] = 0.0;
  return next;
}

Vec LeaderModel::rhs(const Vec& x, const Vec& u) const {
  const double psi = x[3], nu = x[4], r = x[5];
  Vec dx(kStateDim);
  dx << nu * std::cos(psi), nu * std::sin(psi), 0.0, r, u[0] - params_.surge_damping * nu,
      u[1] - params_.yaw_damping * r;
  return dx;
}

void LeaderModel::rhs_jacobian(const Vec& x, const Vec& /*u*/, Mat& Fx, Mat& Fu) const {
  const double psi = x[3], nu = x[4];
  Fx.setZero(kStateDim, kStateDim);
  Fu.setZero(kStateDim, kInputDim);
  Fx(0, 3) = -nu * std::sin(psi);
  Fx(0, 4) = std::cos(psi);
  Fx(1, 3) = nu * std::cos(psi);
  Fx(1, 4) = std::sin(psi);
  Fx(3, 5) = 1.0;
  Fx(4, 4) = -params_.surge_damping;
  Fx(5, 5) = -params_.yaw_damping;
  Fu(4, 0) = 1.0;
  Fu(5, 1) = 1.0;
}

// ---------------------------------------------------------------------------
// Constant velocity

ConstantVelocityModel::ConstantVelocityModel(double dt) : dt_(dt) {
  if (!(dt > 0.0)) throw ConfigError("model dt must be positive");
  A_ = Mat::Identity(6, 6);
  A_.block<3, 3>(0, 3) = dt * Mat3::Identity();
  state_box_ = Box::unbounded(6);
  input_box_ = Box::unbounded(0);
}

Vec ConstantVelocityModel::step(const Vec& x, const Vec& /*u*/) const { return A_ * x; }

Linearization ConstantVelocityModel::linearize(const Vec& /*x*/, const Vec& /*u*/) const {
  return {A_, Mat::Zero(6, 0)};
}

// ---------------------------------------------------------------------------

Vec map_leader_to_follower_space(const Vec& leader_state) {
  Vec z = Vec::Zero(FollowerModel::kStateDim);
  z.head<3>() = leader_state.head<3>();
  return z;
}

Vec to_follower_space(const Vec& state, bool is_follower_state) {
  Vec z = Vec::Zero(FollowerModel::kStateDim);
  if (is_follower_state) {
    const Eigen::Index n = std::min<Eigen::Index>(state.size(), FollowerModel::kStateDim);
    z.head(n) = state.head(n);
  } else {
    z.head<3>() = state.head<3>();
  }
  return z;
}

}  // namespace dmpc
