#include "dmpc/safety_constraints.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

using namespace dmpc;

namespace {

using Scalar3 = std::function<double(const Vec3&)>;

Vec3 central_gradient(const Scalar3& f, const Vec3& p, double h = 1e-6) {
  Vec3 g;
  for (int i = 0; i < 3; ++i) {
    Vec3 a = p, b = p;
    a[i] += h;
    b[i] -= h;
    g[i] = (f(a) - f(b)) / (2 * h);
  }
  return g;
}

Mat3 central_hessian(const std::function<Vec3(const Vec3&)>& grad, const Vec3& p, double h = 1e-5) {
  Mat3 H;
  for (int i = 0; i < 3; ++i) {
    Vec3 a = p, b = p;
    a[i] += h;
    b[i] -= h;
    H.col(i) = (grad(a) - grad(b)) / (2 * h);
  }
  return H;
}

// Independent evaluation of the funnel formula.
double funnel_formula(const Vec3& p, const Vec3& c, double hs, double r, double beta) {
  const double d2 = (p.x() - c.x()) * (p.x() - c.x()) + (p.y() - c.y()) * (p.y() - c.y());
  return p.z() - hs / (1.0 + std::exp(-beta * (d2 - r * r)));
}

}  // namespace

TEST(Funnel, HalfHeightAtPlatformEdge) {
  const FunnelParams fp;
  for (double angle : {0.0, 0.7, 2.0, -2.5}) {
    const Vec3 c(1.0, -3.0, 0.0);
    const Vec3 p = c + Vec3(fp.platform_radius * std::cos(angle),
                            fp.platform_radius * std::sin(angle), 4.2);
    EXPECT_DOUBLE_EQ(eval_h_C(p, c, fp), p.z() - fp.safety_height / 2.0);
  }
}

TEST(Funnel, AboveCentreValue) {
  const FunnelParams fp;
  const double expected = 1.0 - 2.0 / (1.0 + std::exp(6.25));
  EXPECT_NEAR(eval_h_C(Vec3(0, 0, 1), Vec3::Zero(), fp), expected, 1e-12);
  EXPECT_NEAR(expected, 0.99615, 1e-5);
}

TEST(Funnel, FarFieldApproachesSafetyHeight) {
  const FunnelParams fp;
  EXPECT_NEAR(eval_h_C(Vec3(100, 0, fp.safety_height), Vec3::Zero(), fp), 0.0, 1e-12);
  EXPECT_NEAR(eval_h_C(Vec3(0, 40, 7.0), Vec3::Zero(), fp), 7.0 - fp.safety_height, 1e-12);
}

TEST(Funnel, UnitSlopeInAltitude) {
  const FunnelParams fp;
  const Vec3 c(0.5, 0.5, 0);
  for (double x : {0.0, 1.0, 2.5, 3.0}) {
    const double a = eval_h_C(Vec3(x, 0, 1.0), c, fp);
    const double b = eval_h_C(Vec3(x, 0, 3.5), c, fp);
    EXPECT_NEAR(b - a, 2.5, 1e-12);
  }
}

TEST(Funnel, PlatformHeightOffset) {
  FunnelParams fp;
  fp.platform_height = 0.4;
  const FunnelParams base;
  EXPECT_NEAR(eval_h_C(Vec3(1, 1, 2.4), Vec3::Zero(), fp),
              eval_h_C(Vec3(1, 1, 2.0), Vec3::Zero(), base), 1e-12);
}

TEST(Funnel, GradientAxisAndEdge) {
  const FunnelParams fp;
  const Vec3 axis = grad_h_C(Vec3(2, 3, 1), Vec3(2, 3, 0), fp);
  EXPECT_EQ(axis.x(), 0.0);
  EXPECT_EQ(axis.y(), 0.0);
  EXPECT_EQ(axis.z(), 1.0);
  // radial derivative at the edge: -h_s * beta * 2r * sigma'(0)
  const Vec3 edge = grad_h_C(Vec3(fp.platform_radius, 0, 1), Vec3::Zero(), fp);
  EXPECT_NEAR(edge.x(), -fp.safety_height * fp.slope * fp.platform_radius / 2.0, 1e-12);
}

TEST(Funnel, ValueMatchesFormulaAndGradientsMatchFiniteDifferences) {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> pos(0.2, 3.0);
  for (int i = 0; i < 1000; ++i) {
    FunnelParams fp;
    fp.safety_height = 1.0 + pos(rng);
    fp.platform_radius = 1.0 + pos(rng);
    fp.slope = 0.3 + 0.5 * pos(rng);
    const Vec3 c(3 * u(rng), 3 * u(rng), 0.0);
    const Vec3 p = c + Vec3(5 * u(rng), 5 * u(rng), 5 + 5 * u(rng));
    const ConstraintEval ev = funnel_constraint(p, c, fp);
    EXPECT_NEAR(ev.value, funnel_formula(p, c, fp.safety_height, fp.platform_radius, fp.slope), 1e-12);
    const Vec3 fd = central_gradient([&](const Vec3& q) { return eval_h_C(q, c, fp); }, p);
    EXPECT_LE((ev.gradient - fd).cwiseAbs().maxCoeff(), 1e-6) << "point " << i;
    EXPECT_LE((grad_h_C(p, c, fp) - ev.gradient).norm(), 0.0);
    const Mat3 fh = central_hessian([&](const Vec3& q) { return grad_h_C(q, c, fp); }, p);
    EXPECT_LE((ev.hessian - fh).cwiseAbs().maxCoeff(), 1e-5) << "point " << i;
  }
}

TEST(RobustFunnel, ZeroRadiusIsNominal) {
  const FunnelParams fp;
  const Vec3 p(1.0, 2.0, 3.0);
  const ConstraintEval a = robust_funnel_constraint(p, Vec3::Zero(), fp, 0.0);
  const ConstraintEval b = funnel_constraint(p, Vec3::Zero(), fp);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.gradient, b.gradient);
  EXPECT_THROW((void)robust_funnel_constraint(p, Vec3::Zero(), fp, -0.1), ConfigError);
}

TEST(RobustFunnel, LowerBoundsShiftedCentres) {
  const FunnelParams fp;
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const double radius = 0.2 * std::abs(u(rng));
    const Vec3 c(u(rng), u(rng), 0.0);
    const Vec3 p = c + Vec3(3 * u(rng), 3 * u(rng), 2 + u(rng));
    const double robust = robust_funnel_constraint(p, c, fp, radius).value;
    for (int j = 0; j < 20; ++j) {
      const double a = 2 * M_PI * j / 20.0;
      const Vec3 shifted = c + radius * Vec3(std::cos(a), std::sin(a), 0.0);
      EXPECT_LE(robust, eval_h_C(p, shifted, fp) + 1e-12);
    }
  }
}

TEST(RobustFunnel, GradientsMatchFiniteDifferences) {
  const FunnelParams fp;
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double radius = 0.05 + 0.1 * std::abs(u(rng));
    const Vec3 c(u(rng), u(rng), 0.0);
    const Vec3 p = c + Vec3(4 * u(rng), 4 * u(rng), 3 + 2 * u(rng));
    const ConstraintEval ev = robust_funnel_constraint(p, c, fp, radius);
    const Vec3 fd = central_gradient(
        [&](const Vec3& q) { return robust_funnel_constraint(q, c, fp, radius).value; }, p);
    EXPECT_LE((ev.gradient - fd).cwiseAbs().maxCoeff(), 1e-6) << "point " << i;
    const Mat3 fh = central_hessian(
        [&](const Vec3& q) { return robust_funnel_constraint(q, c, fp, radius).gradient; }, p);
    EXPECT_LE((ev.hessian - fh).cwiseAbs().maxCoeff(), 1e-4) << "point " << i;
  }
}

TEST(Collision, Examples) {
  CollisionParams cp;
  EXPECT_DOUBLE_EQ(eval_h_ij(Vec3(1, 2, 3), Vec3(1, 2, 3), cp), -1.0);
  EXPECT_DOUBLE_EQ(eval_h_ij(Vec3(0, 0, 5), Vec3(1.5, 0, 5), cp), 0.5);
  cp.vertical_factor = 2.0;
  EXPECT_NEAR(eval_h_ij(Vec3(0, 0, 1.0), Vec3(0, 0, 1.6), cp), 0.2, 1e-12);
}

TEST(Collision, GradientsMatchFiniteDifferences) {
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    CollisionParams cp;
    cp.min_distance = 0.5 + std::abs(u(rng));
    cp.vertical_factor = 1.0 + std::abs(u(rng));
    const Vec3 pj(3 * u(rng), 3 * u(rng), 3 * u(rng));
    Vec3 pi = pj + Vec3(2 * u(rng), 2 * u(rng), 2 * u(rng));
    if ((pi - pj).norm() < 0.05) pi.x() += 0.5;
    const ConstraintEval ev = collision_constraint(pi, pj, cp);
    EXPECT_NEAR(ev.value, eval_h_ij(pi, pj, cp), 1e-15);
    const Vec3 fd = central_gradient([&](const Vec3& q) { return eval_h_ij(q, pj, cp); }, pi);
    EXPECT_LE((ev.gradient - fd).cwiseAbs().maxCoeff(), 1e-6) << "point " << i;
    EXPECT_LE((grad_h_ij(pi, pj, cp) - ev.gradient).norm(), 1e-15);
    const Mat3 fh = central_hessian([&](const Vec3& q) { return grad_h_ij(q, pj, cp); }, pi);
    EXPECT_LE((ev.hessian - fh).cwiseAbs().maxCoeff(), 1e-4) << "point " << i;
  }
}

TEST(Geometry, HexagonOfThePreset) {
  const std::vector<Vec3> offsets = make_hexagon_offsets(6, 1.5);
  ASSERT_EQ(offsets.size(), 6u);
  for (const Vec3& c : offsets) EXPECT_NEAR(c.norm(), 1.5, 1e-12);
  const std::vector<Vec3> slots = ring_slots(6, 1.5);
  for (int i = 0; i < 6; ++i) {
    EXPECT_NEAR((slots[i] - slots[(i + 1) % 6]).norm(), 2 * 1.5 * std::sin(M_PI / 6), 1e-12);
    // follower starting at angle 2 i pi / 6 takes the opposite slot
    EXPECT_LE((offsets[i] + slots[i]).norm(), 1e-12);
  }
  LandingGeometry g{2.5, 0.5, offsets};
  EXPECT_TRUE(validate_landing_geometry(g, CollisionParams{}).ok());
}

TEST(Geometry, SmallCounts) {
  const std::vector<Vec3> one = make_hexagon_offsets(1, 0.8);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_LE((one[0] - Vec3(0.8, 0, 0)).norm(), 1e-15);
  const std::vector<Vec3> two = make_hexagon_offsets(2, 1.0);
  EXPECT_NEAR((two[0] - two[1]).norm(), 2.0, 1e-12);
  EXPECT_THROW((void)make_hexagon_offsets(0, 1.0), ConfigError);
}

TEST(Geometry, PairsCloserThanSeparationAreListed) {
  CollisionParams cp;
  cp.min_distance = 2.0;
  LandingGeometry g{2.5, 0.5, make_hexagon_offsets(6, 1.5)};
  const GeometryReport rep = validate_landing_geometry(g, cp);
  ASSERT_EQ(rep.violations.size(), 6u);
  for (const GeometryViolation& v : rep.violations) {
    EXPECT_EQ(v.kind, GeometryViolation::Kind::TooClose);
    EXPECT_NEAR(v.value, 1.5, 1e-12);
    EXPECT_FALSE(v.describe().empty());
  }
}

TEST(Geometry, BoundaryDistanceIsViolation) {
  LandingGeometry g{2.5, 0.5, {Vec3(-0.5, 0, 0), Vec3(0.5, 0, 0)}};
  EXPECT_FALSE(validate_landing_geometry(g, CollisionParams{}).ok());
  g.offsets[1].x() = 0.5 + 1e-9;
  EXPECT_TRUE(validate_landing_geometry(g, CollisionParams{}).ok());
}

TEST(Geometry, SingleCentredOffsetIsFine) {
  LandingGeometry g{2.5, 0.5, {Vec3::Zero()}};
  EXPECT_TRUE(validate_landing_geometry(g, CollisionParams{}).ok());
}

TEST(Geometry, OffsetOutsidePlatform) {
  LandingGeometry g{2.5, 0.5, {Vec3(2.1, 0, 0)}};
  const GeometryReport rep = validate_landing_geometry(g, CollisionParams{});
  ASSERT_EQ(rep.violations.size(), 1u);
  EXPECT_EQ(rep.violations[0].kind, GeometryViolation::Kind::OutsidePlatform);
  LandingGeometry bad{1.0, 1.0, {}};
  EXPECT_FALSE(validate_landing_geometry(bad, CollisionParams{}).ok());
}

TEST(Params, Validation) {
  FunnelParams fp;
  fp.slope = 0.0;
  EXPECT_THROW(fp.validate(), ConfigError);
  CollisionParams cp;
  cp.vertical_factor = -1.0;
  EXPECT_THROW(cp.validate(), ConfigError);
}
