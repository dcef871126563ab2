#include "dmpc/convergence_analysis.hpp"
#include "dmpc/ekf_predictor.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace dmpc;

namespace {

Mat qf() {
  Vec d(9);
  d << 10, 10, 5, 1, 1, 1, 1, 1, 1;
  return d.asDiagonal();
}

std::vector<LyapunovSample> geometric_run(int n, double rate, double gamma) {
  std::vector<LyapunovSample> s;
  double e = 100.0;
  for (int t = 0; t < n; ++t) {
    s.push_back({t, gamma * e, e, e});
    e *= rate;
  }
  return s;
}

}  // namespace

TEST(ConvergenceConstants, ReproducesPublishedThreshold) {
  const ConvergenceConstants c = compute_constants(qf(), 0.9, 20, 1.99);
  EXPECT_DOUBLE_EQ(c.lambda_ratio, 10.0);
  EXPECT_NEAR(c.n0, 19.9, 1e-12);
  EXPECT_GT(20, c.n0);
  EXPECT_NEAR(c.alpha_n, 1.0 - 0.9 * (1.99 / 20.0) * 10.0, 1e-12);
  EXPECT_NEAR(c.alpha_n, 0.1045, 1e-12);
  EXPECT_TRUE(c.certifiable);
}

TEST(ConvergenceConstants, SmallRhoGivesAlphaNearOne) {
  const ConvergenceConstants c = compute_constants(qf(), 1e-9, 20, 1.99);
  EXPECT_NEAR(c.alpha_n, 1.0, 1e-8);
}

TEST(ConvergenceConstants, UncertifiableReportsMinimalHorizon) {
  const ConvergenceConstants c = compute_constants(qf(), 0.9, 10, 1.99);
  EXPECT_FALSE(c.certifiable);
  EXPECT_LT(c.alpha_n, 0.0);
  EXPECT_EQ(c.minimal_horizon, 18);
  EXPECT_GT(compute_constants(qf(), 0.9, 18, 1.99).alpha_n, 0.0);
  EXPECT_LE(compute_constants(qf(), 0.9, 17, 1.99).alpha_n, 0.0);
}

TEST(ConvergenceConstants, HorizonIdentityOnRandomDraws) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> rho_d(1e-3, 1.0 - 1e-3);
  std::uniform_real_distribution<double> gamma_d(1.0, 5.0);
  std::uniform_real_distribution<double> eig_d(0.1, 20.0);
  std::uniform_int_distribution<int> n_d(1, 200);
  for (int draw = 0; draw < 1000; ++draw) {
    Vec d(4);
    for (int i = 0; i < 4; ++i) d[i] = eig_d(rng);
    const Mat Q = d.asDiagonal();
    const double rho = rho_d(rng);
    const double gbar = gamma_d(rng);
    const int N = n_d(rng);
    const ConvergenceConstants c = compute_constants(Q, rho, N, gbar);
    const double ratio = d.maxCoeff() / d.minCoeff();
    ASSERT_NEAR(c.n0, gbar * ratio, 1e-9 * c.n0);
    // N > N0 is sufficient for every rho in (0, 1)
    if (N > c.n0) ASSERT_GT(c.alpha_n, 0.0);
    // the exact equivalence carries the factor rho
    ASSERT_EQ(c.alpha_n > 0.0, N > rho * gbar * ratio) << draw;
  }
}

TEST(ConvergenceConstants, LiteralEquivalenceAtUnitRho) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> gamma_d(1.0, 5.0);
  std::uniform_int_distribution<int> n_d(1, 100);
  for (int draw = 0; draw < 1000; ++draw) {
    const double gbar = gamma_d(rng);
    const int N = n_d(rng);
    const double n0 = gbar * 10.0;
    const double alpha = 1.0 - 1.0 * (gbar / N) * 10.0;
    ASSERT_EQ(N > n0, alpha > 0.0);
  }
}

TEST(ConvergenceConstants, RejectsInvalidInputs) {
  EXPECT_THROW((void)compute_constants(qf(), 0.0, 20, 2.0), ConfigError);
  EXPECT_THROW((void)compute_constants(qf(), 1.0, 20, 2.0), ConfigError);
  EXPECT_THROW((void)compute_constants(qf(), 0.5, 0, 2.0), ConfigError);
  EXPECT_THROW((void)compute_constants(qf(), 0.5, 20, 0.5), ConfigError);
  Mat bad = qf();
  bad(0, 0) = 0.0;
  EXPECT_THROW((void)compute_constants(bad, 0.5, 20, 2.0), ConfigError);
}

TEST(ConvergenceConstants, GammaBarFromInitialErrors) {
  Vec e1 = Vec::Zero(9), e2 = Vec::Zero(9);
  e1[0] = 2.0;  // ||e||_Q^2 = 40
  e2[3] = 3.0;  // 9
  EXPECT_DOUBLE_EQ(gamma_bar_from_errors(qf(), 240.0, {e1, e2}), 240.0 / 9.0);
  EXPECT_THROW((void)gamma_bar_from_errors(qf(), 240.0, {}), ConfigError);
  EXPECT_THROW((void)gamma_bar_from_errors(qf(), 240.0, {Vec::Zero(9)}), ConfigError);
}

TEST(Lyapunov, RhoEstimateIsWorstContraction) {
  std::vector<LyapunovSample> s = {{0, 0, 0, 4.0}, {1, 0, 0, 2.0}, {2, 0, 0, 1.8}, {3, 0, 0, 0.9}};
  EXPECT_DOUBLE_EQ(estimate_rho(s), 0.9);
  s.push_back({4, 0, 0, 0.0});
  s.push_back({5, 0, 0, 0.0});
  EXPECT_DOUBLE_EQ(estimate_rho(s), 0.9);
}

TEST(Lyapunov, DecreaseCheckDependsOnAlpha) {
  const auto s = geometric_run(30, 0.8, 1.5);
  const ConvergenceConstants c = compute_constants(Mat::Identity(2, 2), 0.8, 20, 1.5);
  // V(t+1) - V(t) = -0.3 e(t) misses -alpha e(t) with alpha = 1 - 0.8 * 1.5 / 20 = 0.94
  const LyapunovReport strict = check_lyapunov_decrease(s, c);
  EXPECT_EQ(strict.decrease_violations, 29);
  EXPECT_EQ(strict.increase_violations, 0);
  EXPECT_EQ(strict.sandwich_violations, 0);

  const ConvergenceConstants loose = compute_constants(Mat::Identity(2, 2), 0.8, 2, 1.5);
  // alpha = 0.4 is still above the decrease of 0.3 per unit error
  EXPECT_GT(check_lyapunov_decrease(s, loose).decrease_violations, 0);
  const auto fast = geometric_run(30, 0.5, 1.5);
  // decrease 0.75 e(t) >= 0.4 e(t)
  EXPECT_TRUE(check_lyapunov_decrease(fast, loose).ok());
}

TEST(Lyapunov, ZeroErrorRunIsTriviallySatisfied) {
  std::vector<LyapunovSample> s;
  for (int t = 0; t < 10; ++t) s.push_back({t, 0.0, 0.0, 0.0});
  const ConvergenceConstants c = compute_constants(Mat::Identity(2, 2), 0.5, 20, 2.0);
  const LyapunovReport r = check_lyapunov_decrease(s, c);
  EXPECT_TRUE(r.ok());
  for (const LyapunovStep& st : r.steps) {
    EXPECT_EQ(st.decrease, 0.0);
    EXPECT_EQ(st.bound, 0.0);
  }
}

TEST(Lyapunov, InjectedViolationsAreFlagged) {
  const ConvergenceConstants c = compute_constants(Mat::Identity(2, 2), 0.5, 2, 1.5);
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> pick(0, 28);
  for (int trial = 0; trial < 200; ++trial) {
    auto s = geometric_run(30, 0.5, 1.5);
    const int i = pick(rng);
    const double tol = 1e-6 * s[static_cast<std::size_t>(i)].value;
    const double bound = -c.alpha_n * s[static_cast<std::size_t>(i)].error_q;
    // make V(i+1) - V(i) exceed the bound by 10 tolerances
    s[static_cast<std::size_t>(i) + 1].value = s[static_cast<std::size_t>(i)].value + bound + 10 * tol;
    const LyapunovReport r = check_lyapunov_decrease(s, c);
    ASSERT_FALSE(r.steps[static_cast<std::size_t>(i)].decrease_ok) << trial;
    ASSERT_GE(r.decrease_violations, 1);
  }
}

TEST(Lyapunov, SandwichBoundsChecked) {
  const ConvergenceConstants c = compute_constants(Mat::Identity(2, 2), 0.5, 20, 2.0);
  std::vector<LyapunovSample> s = {{0, 5.0, 10.0, 10.0}, {1, 25.0, 10.0, 10.0}, {2, 15.0, 10.0, 10.0}};
  const LyapunovReport r = check_lyapunov_decrease(s, c);
  EXPECT_FALSE(r.steps[0].sandwich_ok);
  EXPECT_FALSE(r.steps[1].sandwich_ok);
  EXPECT_TRUE(r.steps[2].sandwich_ok);
  EXPECT_EQ(r.sandwich_violations, 2);
  EXPECT_EQ(r.increase_violations, 1);
}

TEST(SafetyGate, ScaleAndThreshold) {
  const SafetyGateParams p;
  EXPECT_NEAR(p.scale(), 5.99146, 1e-5);
  EXPECT_NEAR(p.scale(), -2.0 * std::log(0.05), 1e-12);
  EXPECT_NEAR(p.threshold(), 1.0 / p.scale(), 1e-15);
  EXPECT_NEAR(p.threshold(), 0.1669, 1e-3);
}

TEST(SafetyGate, StrictInequalityAtBoundary) {
  const SafetyGateParams p;
  EXPECT_TRUE(evaluate_safety_gate(0.0, p).pass);
  EXPECT_DOUBLE_EQ(evaluate_safety_gate(0.0, p).margin, 1.0);
  EXPECT_TRUE(evaluate_safety_gate(0.06, p).pass);
  EXPECT_GT(evaluate_safety_gate(0.06, p).margin, 0.0);
  // lambda = 1 / s puts the radius exactly on r_plat - r_safe
  const SafetyGate edge = evaluate_safety_gate(1.0 / p.scale(), p);
  EXPECT_NEAR(edge.radius, 1.0, 1e-15);
  EXPECT_FALSE(evaluate_safety_gate(1.0 / p.scale() + 1e-12, p).pass);
  EXPECT_FALSE(evaluate_safety_gate(0.2, p).pass);
  for (double conf : {0.5, 0.9, 0.99, 0.999}) {
    SafetyGateParams q;
    q.confidence = conf;
    EXPECT_TRUE(evaluate_safety_gate(0.0, q).pass);
  }
}

TEST(SafetyGate, DwellTriggersAbort) {
  const SafetyGateParams p;
  std::vector<double> trace = {0.05, 0.3, 0.3, 0.3, 0.3, 0.05, 0.3, 0.3, 0.3, 0.3, 0.3, 0.3};
  const SafetyGateTrace r = check_safety_gate(trace, p);
  ASSERT_TRUE(r.abort_step.has_value());
  EXPECT_EQ(*r.abort_step, 10);
  EXPECT_FALSE(r.all_pass());
  EXPECT_DOUBLE_EQ(r.max_lambda(), 0.3);

  const SafetyGateTrace ok = check_safety_gate({0.01, 0.02, 0.05}, p);
  EXPECT_TRUE(ok.all_pass());
  EXPECT_FALSE(ok.abort_step.has_value());

  SafetyGateMonitor m(p);
  for (int i = 0; i < 4; ++i) m.update(1.0);
  EXPECT_FALSE(m.abort());
  m.update(1.0);
  EXPECT_TRUE(m.abort());
  m.update(0.0);
  EXPECT_EQ(m.consecutive_failures(), 0);
}

TEST(SafetyGate, ValidationRejectsBadParams) {
  SafetyGateParams p;
  p.confidence = 1.0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.safe_radius = 2.5;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.dwell = 0;
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(Eigenvalues, MatchPowerIteration) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    Mat A(6, 6);
    for (int i = 0; i < 36; ++i) A.data()[i] = n(rng);
    const Mat P = A * A.transpose();
    Vec v = Vec::Ones(6);
    double lambda = 0.0;
    for (int it = 0; it < 100000; ++it) {
      Vec w = P * v;
      const double next = w.norm();
      v = w / next;
      if (std::abs(next - lambda) <= 1e-14 * next) {
        lambda = next;
        break;
      }
      lambda = next;
    }
    EXPECT_NEAR(max_eigenvalue(P), lambda, 1e-8 * std::max(1.0, lambda));
  }
}

TEST(CollisionVerification, ReportsMinimaAndFlagsOverlap) {
  const CollisionParams cp;
  const FunnelParams fp;
  std::vector<PositionFrame> frames;
  for (int t = 0; t < 5; ++t) {
    PositionFrame f;
    f.t = t;
    f.follower_ids = {1, 2};
    f.followers = {Vec3(-2.0 + 0.5 * t, 0, 5), Vec3(2.0 - 0.5 * t, 0, 5)};
    frames.push_back(f);
  }
  const CollisionReport r = verify_collision_free(frames, cp, fp);
  // closest approach at t = 4 with both agents at the origin
  EXPECT_DOUBLE_EQ(r.min_pairwise, -1.0);
  EXPECT_EQ(r.pair_t, 4);
  EXPECT_EQ(r.pair_i, 1);
  EXPECT_EQ(r.pair_j, 2);
  EXPECT_FALSE(r.pairwise_ok());
  EXPECT_FALSE(r.pass());
  ASSERT_EQ(r.min_funnel.size(), 2u);
  EXPECT_GT(r.min_h_C(), 0.0);
}

TEST(CollisionVerification, SingleFollowerChecksFunnelOnly) {
  std::vector<PositionFrame> frames(3);
  for (int t = 0; t < 3; ++t) {
    frames[t].t = t;
    frames[t].follower_ids = {1};
    frames[t].followers = {Vec3(0, 0, 2.0 - t)};
  }
  const CollisionReport r = verify_collision_free(frames, {}, {});
  EXPECT_EQ(r.min_pairwise, kInf);
  EXPECT_TRUE(r.pairwise_ok());
  EXPECT_EQ(r.funnel_t[0], 2);
  EXPECT_NEAR(r.min_h_C(), 0.0 - 2.0 / (1.0 + std::exp(6.25)), 1e-12);
  EXPECT_FALSE(r.funnel_ok());
}
