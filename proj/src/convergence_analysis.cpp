#include "dmpc/convergence_analysis.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace dmpc {

double eigenvalue_ratio(const Mat& Q) {
  if (Q.rows() == 0 || Q.rows() != Q.cols()) throw ConfigError("eigenvalue_ratio: Q must be square");
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (Q + Q.transpose()), Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) throw ConfigError("eigenvalue_ratio: Q must be positive definite");
  return hi / lo;
}

ConvergenceConstants compute_constants(const Mat& Q, double rho, int horizon, double gamma_bar) {
  if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("compute_constants: rho must lie in (0, 1)");
  if (horizon < 1) throw ConfigError("compute_constants: N must be >= 1");
  if (!(gamma_bar >= 1.0)) throw ConfigError("compute_constants: gamma_bar must be >= 1");
  ConvergenceConstants c;
  c.rho = rho;
  c.gamma_bar = gamma_bar;
  c.gamma = gamma_bar;
  c.lambda_ratio = eigenvalue_ratio(Q);
  c.horizon = horizon;
  c.n0 = c.gamma_bar * c.lambda_ratio;
  c.alpha_n = 1.0 - c.rho * (c.gamma / horizon) * c.lambda_ratio;
  c.certifiable = c.alpha_n > 0.0;
  c.minimal_horizon = static_cast<int>(std::floor(c.rho * c.gamma * c.lambda_ratio)) + 1;
  return c;
}

double gamma_bar_from_errors(const Mat& Q, double v_max, const std::vector<Vec>& initial_errors) {
  if (!(v_max > 0.0)) throw ConfigError("gamma_bar_from_errors: V_max must be positive");
  if (initial_errors.empty()) throw ConfigError("gamma_bar_from_errors: no initial errors");
  double smallest = kInf;
  for (const Vec& e : initial_errors) smallest = std::min(smallest, e.dot(Q * e));
  if (!(smallest > 0.0)) throw ConfigError("gamma_bar_from_errors: zero initial error");
  return v_max / smallest;
}

double estimate_rho(const std::vector<LyapunovSample>& samples) {
  double rho = 0.0;
  for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
    if (samples[i].error_sq > 0.0) {
      rho = std::max(rho, samples[i + 1].error_sq / samples[i].error_sq);
    }
  }
  return rho;
}

LyapunovReport check_lyapunov_decrease(const std::vector<LyapunovSample>& samples,
                                       const ConvergenceConstants& constants, double rel_tol) {
  LyapunovReport report;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const LyapunovSample& s = samples[i];
    LyapunovStep step;
    step.t = s.t;
    step.value = s.value;
    const double sandwich_tol = rel_tol * std::max(s.value, 1.0);
    step.sandwich_ok = s.error_q <= s.value + sandwich_tol &&
                       s.value <= constants.gamma * s.error_q + sandwich_tol;
    if (!step.sandwich_ok) ++report.sandwich_violations;
    if (i + 1 < samples.size()) {
      step.next_value = samples[i + 1].value;
      step.decrease = step.next_value - s.value;
      step.bound = -constants.alpha_n * s.error_q;
      step.tolerance = rel_tol * s.value;
      step.decrease_ok = step.decrease <= step.bound + step.tolerance;
      step.nonincreasing = step.decrease <= step.tolerance;
      if (!step.decrease_ok) ++report.decrease_violations;
      if (!step.nonincreasing) ++report.increase_violations;
    } else {
      step.next_value = s.value;
    }
    report.steps.push_back(step);
  }
  return report;
}

void SafetyGateParams::validate() const {
  if (!(confidence > 0.0 && confidence < 1.0)) throw ConfigError("safety_gate.confidence must lie in (0, 1)");
  if (!(platform_radius > 0.0)) throw ConfigError("safety_gate.platform_radius must be > 0");
  if (!(safe_radius >= 0.0 && safe_radius < platform_radius)) {
    throw ConfigError("safety_gate.safe_radius must lie in [0, platform_radius)");
  }
  if (dwell < 1) throw ConfigError("safety_gate.dwell must be >= 1");
}

double SafetyGateParams::scale() const { return -2.0 * std::log1p(-confidence); }

double SafetyGateParams::threshold() const {
  const double room = platform_radius - safe_radius;
  return room * room / scale();
}

SafetyGate evaluate_safety_gate(double lambda_max, const SafetyGateParams& params) {
  SafetyGate g;
  g.lambda_max = lambda_max;
  g.radius = std::sqrt(params.scale() * std::max(0.0, lambda_max));
  g.margin = params.platform_radius - params.safe_radius - g.radius;
  g.pass = params.safe_radius + g.radius < params.platform_radius;
  return g;
}

bool SafetyGateTrace::all_pass() const {
  return std::all_of(steps.begin(), steps.end(), [](const SafetyGate& g) { return g.pass; });
}

double SafetyGateTrace::max_lambda() const {
  double m = 0.0;
  for (const SafetyGate& g : steps) m = std::max(m, g.lambda_max);
  return m;
}

SafetyGateTrace check_safety_gate(const std::vector<double>& lambda_trace,
                                  const SafetyGateParams& params) {
  params.validate();
  SafetyGateTrace trace;
  SafetyGateMonitor monitor(params);
  for (std::size_t i = 0; i < lambda_trace.size(); ++i) {
    trace.steps.push_back(monitor.update(lambda_trace[i]));
    if (monitor.abort() && !trace.abort_step) trace.abort_step = static_cast<int>(i);
  }
  return trace;
}

SafetyGateMonitor::SafetyGateMonitor(SafetyGateParams params) : params_(params) {
  params_.validate();
}

SafetyGate SafetyGateMonitor::update(double lambda_max) {
  const SafetyGate g = evaluate_safety_gate(lambda_max, params_);
  consecutive_failures_ = g.pass ? 0 : consecutive_failures_ + 1;
  return g;
}

double CollisionReport::min_h_C() const {
  double m = kInf;
  for (double v : min_funnel) m = std::min(m, v);
  return m;
}

CollisionReport verify_collision_free(const std::vector<PositionFrame>& frames,
                                      const CollisionParams& cp, const FunnelParams& fp) {
  CollisionReport report;
  for (const PositionFrame& f : frames) {
    if (f.followers.size() != f.follower_ids.size()) {
      throw ConfigError("verify_collision_free: malformed frame");
    }
    for (std::size_t a = 0; a < f.followers.size(); ++a) {
      const int id = f.follower_ids[a];
      auto pos = std::find(report.follower_ids.begin(), report.follower_ids.end(), id);
      std::size_t slot = 0;
      if (pos == report.follower_ids.end()) {
        report.follower_ids.push_back(id);
        report.min_funnel.push_back(kInf);
        report.funnel_t.push_back(-1);
        slot = report.follower_ids.size() - 1;
      } else {
        slot = static_cast<std::size_t>(pos - report.follower_ids.begin());
      }
      const double hc = eval_h_C(f.followers[a], f.leader, fp);
      if (hc < report.min_funnel[slot]) {
        report.min_funnel[slot] = hc;
        report.funnel_t[slot] = f.t;
      }
      for (std::size_t b = a + 1; b < f.followers.size(); ++b) {
        const double h = eval_h_ij(f.followers[a], f.followers[b], cp);
        if (h < report.min_pairwise) {
          report.min_pairwise = h;
          report.pair_t = f.t;
          report.pair_i = id;
          report.pair_j = f.follower_ids[b];
        }
      }
    }
  }
  return report;
}

}  // namespace dmpc
