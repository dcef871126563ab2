#pragma once

/**
 * @file vehicle_models.hpp
 * @brief Discrete-time follower quadrotor and leader surface-vessel models.
 *
 * Both models are continuous-time ODEs discretized with fixed-step RK4 over
 * the control interval. Jacobians of the discrete map are propagated through
 * the RK4 stages, so they are exact derivatives of `step` rather than of the
 * continuous vector field.
 *
 * Follower state  x = [p(3), v(3), roll, pitch, yaw]
 * Follower input  u = [thrust deviation from hover, roll rate, pitch rate, yaw rate]
 *
 *   p' = v
 *   v' = R(eta) (0, 0, g + dT/m) - (0, 0, g) - drag .* v
 *   eta' = omega
 *
 * Leader state    x = [p(3), heading, surge speed, yaw rate]
 * Leader input    u = [surge acceleration, yaw acceleration]
 *
 *   px' = nu cos(psi),  py' = nu sin(psi),  pz' = 0
 *   psi' = r,  nu' = a_nu - d_nu nu,  r' = a_r - d_r r
 */

#include "dmpc/types.hpp"

#include <memory>
#include <string>

namespace dmpc {

struct Linearization {
  Mat A;  ///< d step / d x
  Mat B;  ///< d step / d u
};

/// Abstract discrete-time model x+ = f(x, u). Implementations are immutable.
class DynamicsModel {
 public:
  virtual ~DynamicsModel() = default;

  [[nodiscard]] virtual int state_dim() const = 0;
  [[nodiscard]] virtual int input_dim() const = 0;
  [[nodiscard]] virtual double dt() const = 0;
  [[nodiscard]] virtual std::string name() const = 0;

  /// Nominal discrete map f(x, u). Throws IntegrationError on non-finite output.
  [[nodiscard]] virtual Vec step(const Vec& x, const Vec& u) const = 0;

  [[nodiscard]] virtual Linearization linearize(const Vec& x, const Vec& u) const = 0;

  /// Hessian of lambda^T f(x, u) with respect to (x, u), ordered [x; u].
  /// The default uses central differences of the analytic Jacobians.
  [[nodiscard]] virtual Mat weighted_hessian(const Vec& x, const Vec& u,
                                             const Vec& lambda) const;

  [[nodiscard]] virtual const Box& state_box() const = 0;
  [[nodiscard]] virtual const Box& input_box() const = 0;

  /// f(x, u) + w.
  [[nodiscard]] Vec step(const Vec& x, const Vec& u, const Vec& w) const;
};

/// Continuous-time model discretized with RK4; subclasses supply the vector
/// field and its Jacobians.
class Rk4Model : public DynamicsModel {
 public:
  Rk4Model(double dt, int substeps);

  [[nodiscard]] double dt() const override { return dt_; }
  [[nodiscard]] int substeps() const { return substeps_; }

  [[nodiscard]] Vec step(const Vec& x, const Vec& u) const override;
  [[nodiscard]] Linearization linearize(const Vec& x, const Vec& u) const override;

  [[nodiscard]] virtual Vec rhs(const Vec& x, const Vec& u) const = 0;
  /// Fills Fx = d rhs / dx and Fu = d rhs / du.
  virtual void rhs_jacobian(const Vec& x, const Vec& u, Mat& Fx, Mat& Fu) const = 0;

  using DynamicsModel::step;

 private:
  double dt_;
  int substeps_;
};

struct FollowerParams {
  double dt = 0.2;
  int substeps = 1;
  double mass = 1.0;
  double gravity = 9.81;
  Vec3 drag = Vec3::Constant(0.1);
  double max_speed = 5.0;      ///< per axis
  double max_tilt = 0.5;       ///< |roll|, |pitch|
  double thrust_fraction = 0.5;  ///< dT in [-f m g, f m g]
  double max_rate = 2.0;       ///< |omega| per axis
};

class FollowerModel final : public Rk4Model {
 public:
  static constexpr int kStateDim = 9;
  static constexpr int kInputDim = 4;

  explicit FollowerModel(FollowerParams params = {});

  [[nodiscard]] int state_dim() const override { return kStateDim; }
  [[nodiscard]] int input_dim() const override { return kInputDim; }
  [[nodiscard]] std::string name() const override { return "follower_quadrotor"; }
  [[nodiscard]] const Box& state_box() const override { return state_box_; }
  [[nodiscard]] const Box& input_box() const override { return input_box_; }
  [[nodiscard]] const FollowerParams& params() const { return params_; }

  [[nodiscard]] Vec rhs(const Vec& x, const Vec& u) const override;
  void rhs_jacobian(const Vec& x, const Vec& u, Mat& Fx, Mat& Fu) const override;

  /// Hover at position p with level attitude and the given yaw.
  [[nodiscard]] static Vec hover_state(const Vec3& p, double yaw = 0.0);

 private:
  FollowerParams params_;
  Box state_box_;
  Box input_box_;
};

struct LeaderParams {
  double dt = 0.2;
  int substeps = 1;
  double surge_damping = 0.1;
  double yaw_damping = 0.5;
  double max_surge = 3.0;
  double max_yaw_rate = 0.5;
  double max_surge_accel = 1.0;
  double max_yaw_accel = 0.5;
};

class LeaderModel final : public Rk4Model {
 public:
  static constexpr int kStateDim = 6;
  static constexpr int kInputDim = 2;

  explicit LeaderModel(LeaderParams params = {});

  [[nodiscard]] int state_dim() const override { return kStateDim; }
  [[nodiscard]] int input_dim() const override { return kInputDim; }
  [[nodiscard]] std::string name() const override { return "leader_usv"; }
  [[nodiscard]] const Box& state_box() const override { return state_box_; }
  [[nodiscard]] const Box& input_box() const override { return input_box_; }
  [[nodiscard]] const LeaderParams& params() const { return params_; }

  /// RK4 step with the vertical position pinned to exactly zero.
  [[nodiscard]] Vec step(const Vec& x, const Vec& u) const override;
  using DynamicsModel::step;

  [[nodiscard]] Vec rhs(const Vec& x, const Vec& u) const override;
  void rhs_jacobian(const Vec& x, const Vec& u, Mat& Fx, Mat& Fu) const override;

 private:
  LeaderParams params_;
  Box state_box_;
  Box input_box_;
};

/// Position/velocity random-walk model used to predict peers whose attitude
/// is not observable from position measurements. State [p(3), v(3)], no input.
class ConstantVelocityModel final : public DynamicsModel {
 public:
  explicit ConstantVelocityModel(double dt);

  [[nodiscard]] int state_dim() const override { return 6; }
  [[nodiscard]] int input_dim() const override { return 0; }
  [[nodiscard]] double dt() const override { return dt_; }
  [[nodiscard]] std::string name() const override { return "constant_velocity"; }
  [[nodiscard]] Vec step(const Vec& x, const Vec& u) const override;
  [[nodiscard]] Linearization linearize(const Vec& x, const Vec& u) const override;
  [[nodiscard]] const Box& state_box() const override { return state_box_; }
  [[nodiscard]] const Box& input_box() const override { return input_box_; }

  using DynamicsModel::step;

 private:
  double dt_;
  Mat A_;
  Box state_box_;
  Box input_box_;
};

/// Maps a leader state into the follower state space: first three entries are
/// the leader position, the remaining six are zero.
[[nodiscard]] Vec map_leader_to_follower_space(const Vec& leader_state);

/// Maps any state whose first three entries are a position into the
/// 9-dimensional follower space, copying up to nine leading entries for
/// follower-shaped states and only the position otherwise.
[[nodiscard]] Vec to_follower_space(const Vec& state, bool is_follower_state);

}  // namespace dmpc
