#include "dmpc/safety_constraints.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace dmpc {

namespace {

double sigmoid(double a) {
  a = std::clamp(a, -kSigmoidClamp, kSigmoidClamp);
  return 1.0 / (1.0 + std::exp(-a));
}

struct FunnelTerms {
  double dx, dy, arg, sig;
  bool clamped;
};

FunnelTerms funnel_terms(const Vec3& p, const Vec3& c, const FunnelParams& fp) {
  const double dx = p.x() - c.x();
  const double dy = p.y() - c.y();
  const double arg = fp.slope * (dx * dx + dy * dy - fp.platform_radius * fp.platform_radius);
  return {dx, dy, arg, sigmoid(arg), std::abs(arg) > kSigmoidClamp};
}

}  // namespace

void FunnelParams::validate() const {
  if (!(safety_height > 0.0)) throw ConfigError("funnel.safety_height must be > 0");
  if (!(platform_radius > 0.0)) throw ConfigError("funnel.platform_radius must be > 0");
  if (!(slope > 0.0)) throw ConfigError("funnel.slope must be > 0");
}

void CollisionParams::validate() const {
  if (!(min_distance > 0.0)) throw ConfigError("collision.min_distance must be > 0");
  if (!(vertical_factor > 0.0)) throw ConfigError("collision.vertical_factor must be > 0");
}

double eval_h_C(const Vec3& follower_pos, const Vec3& platform_center, const FunnelParams& fp) {
  const FunnelTerms t = funnel_terms(follower_pos, platform_center, fp);
  return follower_pos.z() - fp.platform_height - fp.safety_height * t.sig;
}

Vec3 grad_h_C(const Vec3& follower_pos, const Vec3& platform_center, const FunnelParams& fp) {
  return funnel_constraint(follower_pos, platform_center, fp).gradient;
}

ConstraintEval funnel_constraint(const Vec3& follower_pos, const Vec3& platform_center,
                                 const FunnelParams& fp) {
  const FunnelTerms t = funnel_terms(follower_pos, platform_center, fp);
  ConstraintEval out;
  out.value = follower_pos.z() - fp.platform_height - fp.safety_height * t.sig;
  out.gradient.z() = 1.0;
  if (t.clamped) return out;  // flat region of the sigmoid

  const double s1 = t.sig * (1.0 - t.sig);  // sigma'
  const double s2 = s1 * (1.0 - 2.0 * t.sig);  // sigma''
  const double b2 = 2.0 * fp.slope;
  const double ax = b2 * t.dx;  // d arg / d x
  const double ay = b2 * t.dy;
  out.gradient.x() = -fp.safety_height * s1 * ax;
  out.gradient.y() = -fp.safety_height * s1 * ay;
  out.hessian(0, 0) = -fp.safety_height * (s2 * ax * ax + s1 * b2);
  out.hessian(1, 1) = -fp.safety_height * (s2 * ay * ay + s1 * b2);
  out.hessian(0, 1) = out.hessian(1, 0) = -fp.safety_height * s2 * ax * ay;
  return out;
}

ConstraintEval robust_funnel_constraint(const Vec3& follower_pos, const Vec3& platform_center,
                                        const FunnelParams& fp, double radius) {
  if (radius < 0.0) throw ConfigError("robust_funnel_constraint: radius must be >= 0");
  if (radius == 0.0) return funnel_constraint(follower_pos, platform_center, fp);
  const double dx = follower_pos.x() - platform_center.x();
  const double dy = follower_pos.y() - platform_center.y();
  const double rho = std::sqrt(dx * dx + dy * dy + kRobustSmoothing * kRobustSmoothing);
  const double reach = rho + radius;
  const double arg = fp.slope * (reach * reach - fp.platform_radius * fp.platform_radius);
  const double sig = sigmoid(arg);
  ConstraintEval out;
  out.value = follower_pos.z() - fp.platform_height - fp.safety_height * sig;
  out.gradient.z() = 1.0;
  if (std::abs(arg) > kSigmoidClamp) return out;

  const double s1 = sig * (1.0 - sig);
  const double s2 = s1 * (1.0 - 2.0 * sig);
  const double g = 2.0 * fp.slope * (1.0 + radius / rho);  // d arg / d(dx) = g dx
  const double ax = g * dx;
  const double ay = g * dy;
  const double c3 = 2.0 * fp.slope * radius / (rho * rho * rho);
  const double axx = g - c3 * dx * dx;
  const double ayy = g - c3 * dy * dy;
  const double axy = -c3 * dx * dy;
  out.gradient.x() = -fp.safety_height * s1 * ax;
  out.gradient.y() = -fp.safety_height * s1 * ay;
  out.hessian(0, 0) = -fp.safety_height * (s2 * ax * ax + s1 * axx);
  out.hessian(1, 1) = -fp.safety_height * (s2 * ay * ay + s1 * ayy);
  out.hessian(0, 1) = out.hessian(1, 0) = -fp.safety_height * (s2 * ax * ay + s1 * axy);
  return out;
}

double eval_h_ij(const Vec3& pos_i, const Vec3& pos_j, const CollisionParams& cp) {
  return cp.shaping().cwiseProduct(pos_i - pos_j).norm() - cp.min_distance;
}

Vec3 grad_h_ij(const Vec3& pos_i, const Vec3& pos_j, const CollisionParams& cp) {
  return collision_constraint(pos_i, pos_j, cp).gradient;
}

ConstraintEval collision_constraint(const Vec3& pos_i, const Vec3& pos_j,
                                    const CollisionParams& cp) {
  const Vec3 c = cp.shaping();
  const Vec3 cd = c.cwiseProduct(pos_i - pos_j);
  const double norm = cd.norm();
  ConstraintEval out;
  out.value = norm - cp.min_distance;
  if (norm < 1e-12) return out;  // gradient undefined at coincidence
  const Vec3 g = c.cwiseProduct(cd) / norm;  // C^T C d / ||C d||
  out.gradient = g;
  const Mat3 CtC = c.cwiseProduct(c).asDiagonal();
  out.hessian = CtC / norm - g * g.transpose() / norm;
  return out;
}

std::string GeometryViolation::describe() const {
  std::ostringstream os;
  if (kind == Kind::OutsidePlatform) {
    os << "landing offset " << first << " has norm " << value
       << " exceeding platform_radius - safe_radius";
  } else {
    os << "landing offsets " << first << " and " << second << " are " << value
       << " apart, not more than the minimal distance";
  }
  return os.str();
}

GeometryReport validate_landing_geometry(const LandingGeometry& geom, const CollisionParams& cp) {
  GeometryReport report;
  const double reach = geom.platform_radius - geom.safe_radius;
  if (!(geom.safe_radius < geom.platform_radius)) {
    report.violations.push_back({GeometryViolation::Kind::OutsidePlatform, -1, -1, reach});
  }
  const int n = static_cast<int>(geom.offsets.size());
  for (int i = 0; i < n; ++i) {
    const double norm = geom.offsets[i].norm();
    if (norm > reach) {
      report.violations.push_back({GeometryViolation::Kind::OutsidePlatform, i, -1, norm});
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double d = (geom.offsets[i] - geom.offsets[j]).norm();
      if (!(d > cp.min_distance)) {
        report.violations.push_back({GeometryViolation::Kind::TooClose, i, j, d});
      }
    }
  }
  return report;
}

std::vector<Vec3> ring_slots(int count, double radius) {
  std::vector<Vec3> slots;
  slots.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int i = 0; i < count; ++i) {
    const double a = 2.0 * std::numbers::pi * i / count;
    slots.emplace_back(radius * std::cos(a), radius * std::sin(a), 0.0);
  }
  return slots;
}

std::vector<Vec3> make_hexagon_offsets(int count, double radius) {
  if (count < 1) throw ConfigError("make_hexagon_offsets: count must be >= 1");
  const std::vector<Vec3> slots = ring_slots(count, radius);
  std::vector<Vec3> assigned;
  assigned.reserve(slots.size());
  const int shift = count / 2;
  for (int i = 0; i < count; ++i) assigned.push_back(slots[(i + shift) % count]);
  return assigned;
}

}  // namespace dmpc
