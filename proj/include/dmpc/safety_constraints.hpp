#pragma once

/**
 * @file safety_constraints.hpp
 * @brief Funnel-shaped restricted-area constraint around the landing platform,
 * inter-follower separation constraint and landing-geometry checks.
 *
 * Both constraints act on positions only and follow the convention h >= 0 is
 * safe.
 */

#include "dmpc/types.hpp"

#include <string>
#include <vector>

namespace dmpc {

struct FunnelParams {
  double safety_height = 2.0;    ///< h_s, m
  double platform_radius = 2.5;  ///< r, m
  double slope = 1.0;            ///< beta, 1/m^2
  double platform_height = 0.0;  ///< vertical offset of the platform, m

  void validate() const;
};

struct CollisionParams {
  double min_distance = 1.0;     ///< R, m
  double vertical_factor = 1.0;  ///< c in diag(1, 1, c)

  void validate() const;
  [[nodiscard]] Vec3 shaping() const { return {1.0, 1.0, vertical_factor}; }
};

struct LandingGeometry {
  double platform_radius = 2.5;
  double safe_radius = 0.5;
  std::vector<Vec3> offsets;
};

/// Value, gradient and Hessian of a scalar constraint w.r.t. the follower position.
struct ConstraintEval {
  double value = 0.0;
  Vec3 gradient = Vec3::Zero();
  Mat3 hessian = Mat3::Zero();
};

/// Argument of the funnel sigmoid is clamped to this magnitude.
inline constexpr double kSigmoidClamp = 50.0;

/// h_C = p_z - h_s / (1 + exp(-beta (dx^2 + dy^2 - r^2))), with p_z measured
/// from the platform height. Only the first three entries of each argument
/// are read.
[[nodiscard]] double eval_h_C(const Vec3& follower_pos, const Vec3& platform_center,
                              const FunnelParams& fp);
[[nodiscard]] Vec3 grad_h_C(const Vec3& follower_pos, const Vec3& platform_center,
                            const FunnelParams& fp);
[[nodiscard]] ConstraintEval funnel_constraint(const Vec3& follower_pos,
                                               const Vec3& platform_center,
                                               const FunnelParams& fp);

/// Worst case of h_C over platform centres within `radius` of the given one:
/// the horizontal distance rho is replaced by sqrt(rho^2 + e^2) + radius with
/// e = kRobustSmoothing, which keeps the function smooth above the centre.
/// radius = 0 reduces to funnel_constraint.
inline constexpr double kRobustSmoothing = 1e-3;
[[nodiscard]] ConstraintEval robust_funnel_constraint(const Vec3& follower_pos,
                                                      const Vec3& platform_center,
                                                      const FunnelParams& fp, double radius);

/// h_ij = ||C (p_i - p_j)|| - R.
[[nodiscard]] double eval_h_ij(const Vec3& pos_i, const Vec3& pos_j, const CollisionParams& cp);
[[nodiscard]] Vec3 grad_h_ij(const Vec3& pos_i, const Vec3& pos_j, const CollisionParams& cp);
[[nodiscard]] ConstraintEval collision_constraint(const Vec3& pos_i, const Vec3& pos_j,
                                                  const CollisionParams& cp);

struct GeometryViolation {
  enum class Kind { OutsidePlatform, TooClose };
  Kind kind;
  int first = -1;
  int second = -1;  ///< -1 for single-offset violations
  double value = 0.0;  ///< offending norm or pairwise distance
  [[nodiscard]] std::string describe() const;
};

struct GeometryReport {
  std::vector<GeometryViolation> violations;
  [[nodiscard]] bool ok() const { return violations.empty(); }
};

/// Checks ||c_i|| <= r_plat - r_safe, r_safe < r_plat, and ||c_i - c_j|| > R.
[[nodiscard]] GeometryReport validate_landing_geometry(const LandingGeometry& geom,
                                                       const CollisionParams& cp);

/// Equidistant offsets on a circle. Offset slot i lies at angle 2 i pi / M;
/// the follower starting at angle 2 i pi / M is assigned the slot
/// (i + floor(M/2)) mod M, i.e. the diametrically opposite slot for even M.
/// Returned in follower order (index 0 is the follower at angle 0).
[[nodiscard]] std::vector<Vec3> make_hexagon_offsets(int count, double radius);

/// Unassigned slot positions radius (cos 2 i pi / M, sin 2 i pi / M, 0).
[[nodiscard]] std::vector<Vec3> ring_slots(int count, double radius);

}  // namespace dmpc
