#include "dmpc/docp_solver.hpp"

#include <algorithm>
#include <cmath>

namespace dmpc {

namespace {

constexpr double kBoundPush = 1e-2;
constexpr double kSlackInit = 1e-2;
constexpr double kTauMin = 0.99;
constexpr double kKappaEps = 10.0;
constexpr double kKappaMu = 0.2;
constexpr double kThetaMu = 1.5;
constexpr double kArmijo = 1e-4;
constexpr double kScaleMax = 100.0;
constexpr double kKappaSigma = 1e10;
constexpr double kSlackActive = 1e-6;
constexpr int kLineSearchRetries = 6;
constexpr double kFeasible = 1e-6;

struct Ineq {
  int stage = 0;
  bool funnel = false;
  Vec3 anchor = Vec3::Zero();
  double bound = 0.0;
  double radius = 0.0;  // robust funnel radius
};

struct Iterate {
  std::vector<Vec> x, u, y;
  Vec s, sig, lam, zsig;
  std::vector<Vec> zxl, zxu, zul, zuu;
};

struct Evaluation {
  std::vector<Vec> defect;  // f(x_k, u_k) - x_{k+1}
  Vec g;                    // raw constraint values
  Vec cin;                  // g + sig - s - b
  double objective = 0.0;   // tracking + input + slack penalty
  double barrier = 0.0;     // objective minus log barrier terms
  double theta = 0.0;       // l1 primal infeasibility
  double theta_inf = 0.0;
  double defect_inf = 0.0;
};

struct Step {
  std::vector<Vec> dx, du, y_plus;
  Vec ds, dsig, dlam, dzsig;
  std::vector<Vec> dzxl, dzxu, dzul, dzuu;
};

double push_lower(double l, double u) {
  double p = kBoundPush * std::max(1.0, std::abs(l));
  if (std::isfinite(u)) p = std::min(p, kBoundPush * (u - l));
  return l + p;
}

double push_upper(double l, double u) {
  double p = kBoundPush * std::max(1.0, std::abs(u));
  if (std::isfinite(l)) p = std::min(p, kBoundPush * (u - l));
  return u - p;
}

void push_inside(Vec& v, const Box& box) {
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    const double l = box.lower[j];
    const double u = box.upper[j];
    if (std::isfinite(l)) v[j] = std::max(v[j], push_lower(l, u));
    if (std::isfinite(u)) v[j] = std::min(v[j], push_upper(l, u));
  }
}

// Box shrunk by `fraction` of its width (of max(1, |bound|) for half-open dims).
Box tightened(const Box& box, double fraction) {
  Box out = box;
  for (Eigen::Index j = 0; j < box.lower.size(); ++j) {
    const double l = box.lower[j], u = box.upper[j];
    const bool both = std::isfinite(l) && std::isfinite(u);
    if (std::isfinite(l)) out.lower[j] = l + fraction * (both ? u - l : std::max(1.0, std::abs(l)));
    if (std::isfinite(u)) out.upper[j] = u - fraction * (both ? u - l : std::max(1.0, std::abs(u)));
  }
  return out;
}

double inf_norm(const std::vector<Vec>& vs) {
  double m = 0.0;
  for (const Vec& v : vs) {
    if (v.size() > 0) m = std::max(m, v.cwiseAbs().maxCoeff());
  }
  return m;
}

double inf_norm(const Vec& v) { return v.size() > 0 ? v.cwiseAbs().maxCoeff() : 0.0; }

// Largest alpha in (0, 1] with v + alpha dv >= (1 - tau) v for the entries
// selected by mask (v > 0 there).
double boundary_step(const Vec& v, const Vec& dv, double tau, double alpha) {
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    if (dv[j] < 0.0) alpha = std::min(alpha, -tau * v[j] / dv[j]);
  }
  return alpha;
}

class InteriorPoint {
 public:
  InteriorPoint(const DynamicsModel& model, const OcpSpec& spec, const Vec& x0)
      : model_(model),
        spec_(spec),
        opt_(spec.options),
        N_(spec.horizon),
        nx_(model.state_dim()),
        nu_(model.input_dim()),
        x0_(x0),
        xbox_(model.state_box()),
        ubox_(model.input_box()) {
    R_ = spec.R.size() > 0 ? spec.R : Mat::Zero(nu_, nu_);
    soft_ = opt_.soft_constraints;
    w1_ = opt_.slack_linear_weight;
    w2_ = opt_.slack_quadratic_weight;
    by_stage_.assign(static_cast<std::size_t>(N_) + 1, {});
    xb_.assign(static_cast<std::size_t>(N_) + 1, xbox_);
    ub_.assign(static_cast<std::size_t>(N_), ubox_);
    const Box inner = tightened(xbox_, opt_.state_box_tightening);
    for (std::size_t k = 2; k < xb_.size(); ++k) xb_[k] = inner;
    for (int k = 1; k <= N_; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      if (spec.funnel) {
        const double b = spec.funnel->margin.empty() ? 0.0 : spec.funnel->margin[kk];
        const double d = spec.funnel->robust_radius.empty() ? 0.0 : spec.funnel->robust_radius[kk];
        add_ineq({k, true, spec.funnel->centers[kk], b, d});
      }
      for (const PeerTerm& peer : spec.peers) {
        add_ineq({k, false, peer.positions[kk], peer.inflation, 0.0});
      }
    }
    const auto n = static_cast<std::size_t>(N_);
    H_xx_.resize(n + 1);
    H_uu_.resize(n);
    H_ux_.resize(n);
    A_.resize(n);
    B_.resize(n);
    K_.resize(n);
    P_next_.resize(n);
    chol_.resize(n);
    m_ = static_cast<Eigen::Index>(ineqs_.size());
    grad_g_.assign(ineqs_.size(), Vec3::Zero());
    gamma_ = Vec::Zero(m_);
    a_sig_ = Vec::Zero(m_);
    d_sig_ = Vec::Zero(m_);
    r_sig_ = Vec::Zero(m_);
  }

  OcpSolution run(const OcpSolution* warm);

 private:
  void add_ineq(const Ineq& c) {
    by_stage_[static_cast<std::size_t>(c.stage)].push_back(static_cast<int>(ineqs_.size()));
    ineqs_.push_back(c);
  }

  [[nodiscard]] ConstraintEval eval_ineq(const Ineq& c, const Vec& x) const {
    const Vec3 p = x.head<3>();
    if (c.funnel) return robust_funnel_constraint(p, c.anchor, spec_.funnel->params, c.radius);
    return collision_constraint(p, c.anchor, spec_.collision);
  }

  [[nodiscard]] bool stage_cost_active(int k) const { return k < N_ || spec_.include_terminal; }

  Iterate initial_iterate(const OcpSolution* warm, double mu) const;
  Evaluation evaluate(const Iterate& it, double mu) const;
  void linearize(const Iterate& it);
  double optimality_error(const Iterate& it, const Evaluation& ev, double mu) const;
  /// exact = false drops the curvature of the dynamics and of the nonlinear
  /// inequalities (Gauss-Newton), which keeps the reduced Hessian positive definite.
  void assemble(const Iterate& it, bool exact);
  bool factorize(double delta);
  Step solve_step(const Iterate& it, double mu, const std::vector<Vec>& cbar, const Vec& rp) const;
  double directional_derivative(const Iterate& it, const Step& d, double mu) const;
  Iterate apply(const Iterate& it, const Step& d, double alpha_p, double alpha_d, double mu) const;
  double max_primal_step(const Iterate& it, const Step& d, double tau) const;
  double max_dual_step(const Iterate& it, const Step& d, double tau) const;
  OcpSolution finish(const Iterate& it, SolveStatus status, int iterations, double kkt,
                     double mu, double theta_inf) const;

  const DynamicsModel& model_;
  const OcpSpec& spec_;
  const SolverOptions& opt_;
  int N_, nx_, nu_;
  Vec x0_;
  const Box& xbox_;
  const Box& ubox_;
  std::vector<Box> xb_;  // per stage, tightened for k >= 2
  std::vector<Box> ub_;
  Mat R_;
  bool soft_ = true;
  double w1_ = 0.0, w2_ = 0.0;
  std::vector<Ineq> ineqs_;
  std::vector<std::vector<int>> by_stage_;
  Eigen::Index m_ = 0;

  // Per-iteration linear algebra.
  std::vector<Mat> H_xx_, H_uu_, H_ux_, A_, B_, K_, P_next_;
  std::vector<Eigen::LLT<Mat>> chol_;
  std::vector<Vec3> grad_g_;
  Vec gamma_, a_sig_, d_sig_, r_sig_;
  int inertia_corrections_ = 0;
};

Iterate InteriorPoint::initial_iterate(const OcpSolution* warm, double mu) const {
  const auto n = static_cast<std::size_t>(N_);
  Iterate it;
  it.u.assign(n, Vec::Zero(nu_));
  const bool warm_ok = warm != nullptr && warm->inputs.size() == n &&
                       warm->states.size() == n + 1 && warm->inputs[0].size() == nu_ &&
                       warm->states[0].size() == nx_;
  if (warm_ok) it.u = warm->inputs;
  for (Vec& u : it.u) push_inside(u, ubox_);

  it.x.resize(n + 1);
  it.x[0] = x0_;
  for (std::size_t k = 0; k < n; ++k) {
    Vec next = warm_ok ? warm->states[k + 1] : model_.step(it.x[k], it.u[k]);
    if (!next.allFinite()) next = it.x[k];
    push_inside(next, xb_[k + 1]);
    it.x[k + 1] = next;
  }
  it.y.assign(n, Vec::Zero(nx_));
  if (warm_ok && warm->dynamics_multipliers.size() == n) it.y = warm->dynamics_multipliers;

  it.s = Vec::Zero(m_);
  it.sig = Vec::Zero(m_);
  it.lam = Vec::Zero(m_);
  it.zsig = Vec::Zero(m_);
  for (Eigen::Index i = 0; i < m_; ++i) {
    const Ineq& c = ineqs_[static_cast<std::size_t>(i)];
    const double v = eval_ineq(c, it.x[static_cast<std::size_t>(c.stage)]).value - c.bound;
    if (soft_) {
      it.sig[i] = std::max(kSlackInit, kSlackInit - v);
      it.s[i] = v + it.sig[i];
      it.zsig[i] = mu / it.sig[i];
    } else {
      it.s[i] = std::max(v, kSlackInit);
    }
    it.lam[i] = mu / it.s[i];
  }

  auto bound_duals = [mu](const std::vector<Vec>& vars, const std::vector<Box>& boxes,
                          std::vector<Vec>& zl, std::vector<Vec>& zu) {
    zl.assign(vars.size(), Vec());
    zu.assign(vars.size(), Vec());
    for (std::size_t k = 0; k < vars.size(); ++k) {
      const Box& box = boxes[k];
      zl[k] = Vec::Zero(box.dim());
      zu[k] = Vec::Zero(box.dim());
      for (int j = 0; j < box.dim(); ++j) {
        if (std::isfinite(box.lower[j])) zl[k][j] = mu / (vars[k][j] - box.lower[j]);
        if (std::isfinite(box.upper[j])) zu[k][j] = mu / (box.upper[j] - vars[k][j]);
      }
    }
  };
  bound_duals(it.x, xb_, it.zxl, it.zxu);
  bound_duals(it.u, ub_, it.zul, it.zuu);
  it.zxl[0].setZero();
  it.zxu[0].setZero();
  return it;
}

Evaluation InteriorPoint::evaluate(const Iterate& it, double mu) const {
  Evaluation ev;
  const auto n = static_cast<std::size_t>(N_);
  ev.defect.resize(n);
  double obj = 0.0;
  double logs = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    ev.defect[k] = model_.step(it.x[k], it.u[k]) - it.x[k + 1];
    obj += it.u[k].dot(R_ * it.u[k]);
  }
  for (std::size_t k = 1; k <= n; ++k) {
    if (stage_cost_active(static_cast<int>(k))) {
      const Vec e = it.x[k] - spec_.reference[k];
      obj += e.dot(spec_.Q * e);
    }
  }
  auto box_logs = [&logs](const Vec& v, const Box& box) {
    for (int j = 0; j < box.dim(); ++j) {
      if (std::isfinite(box.lower[j])) logs += std::log(v[j] - box.lower[j]);
      if (std::isfinite(box.upper[j])) logs += std::log(box.upper[j] - v[j]);
    }
  };
  for (std::size_t k = 1; k <= n; ++k) box_logs(it.x[k], xb_[k]);
  for (std::size_t k = 0; k < n; ++k) box_logs(it.u[k], ub_[k]);

  ev.g = Vec::Zero(m_);
  ev.cin = Vec::Zero(m_);
  for (Eigen::Index i = 0; i < m_; ++i) {
    const Ineq& c = ineqs_[static_cast<std::size_t>(i)];
    ev.g[i] = eval_ineq(c, it.x[static_cast<std::size_t>(c.stage)]).value;
    ev.cin[i] = ev.g[i] + it.sig[i] - it.s[i] - c.bound;
    logs += std::log(it.s[i]);
    if (soft_) {
      obj += w1_ * it.sig[i] + w2_ * it.sig[i] * it.sig[i];
      logs += std::log(it.sig[i]);
    }
  }
  ev.objective = obj;
  ev.barrier = obj - mu * logs;
  double theta = ev.cin.lpNorm<1>();
  for (const Vec& d : ev.defect) theta += d.lpNorm<1>();
  ev.theta = theta;
  ev.defect_inf = inf_norm(ev.defect);
  ev.theta_inf = std::max(ev.defect_inf, inf_norm(ev.cin));
  return ev;
}

void InteriorPoint::linearize(const Iterate& it) {
  for (std::size_t k = 0; k < static_cast<std::size_t>(N_); ++k) {
    Linearization lin = model_.linearize(it.x[k], it.u[k]);
    A_[k] = std::move(lin.A);
    B_[k] = std::move(lin.B);
  }
}

double InteriorPoint::optimality_error(const Iterate& it, const Evaluation& ev, double mu) const {
  const auto n = static_cast<std::size_t>(N_);
  double dual = 0.0;
  double comp = 0.0;
  double sum_mult = 0.0;
  double sum_bound = 0.0;
  double count_mult = 0.0;
  double count_bound = 0.0;

  std::vector<Vec> rx(n + 1, Vec::Zero(nx_));
  for (std::size_t k = 1; k <= n; ++k) {
    if (stage_cost_active(static_cast<int>(k))) rx[k] += 2.0 * spec_.Q * (it.x[k] - spec_.reference[k]);
    if (k < n) rx[k] += A_[k].transpose() * it.y[k];
    rx[k] -= it.y[k - 1];
    rx[k] += it.zxu[k] - it.zxl[k];
  }
  for (Eigen::Index i = 0; i < m_; ++i) {
    const Ineq& c = ineqs_[static_cast<std::size_t>(i)];
    const ConstraintEval ce = eval_ineq(c, it.x[static_cast<std::size_t>(c.stage)]);
    rx[static_cast<std::size_t>(c.stage)].head<3>() -= it.lam[i] * ce.gradient;
    if (soft_) {
      dual = std::max(dual, std::abs(w1_ + 2.0 * w2_ * it.sig[i] - it.lam[i] - it.zsig[i]));
      comp = std::max(comp, std::abs(it.sig[i] * it.zsig[i] - mu));
      sum_bound += it.zsig[i];
      count_bound += 1.0;
    }
    comp = std::max(comp, std::abs(it.s[i] * it.lam[i] - mu));
    sum_mult += it.lam[i];
    count_mult += 1.0;
  }
  for (std::size_t k = 1; k <= n; ++k) dual = std::max(dual, inf_norm(rx[k]));
  for (std::size_t k = 0; k < n; ++k) {
    Vec ru = 2.0 * R_ * it.u[k] + B_[k].transpose() * it.y[k] + it.zuu[k] - it.zul[k];
    dual = std::max(dual, inf_norm(ru));
    sum_mult += it.y[k].lpNorm<1>();
    count_mult += nx_;
  }
  auto box_comp = [&](const std::vector<Vec>& vars, const std::vector<Vec>& zl,
                      const std::vector<Vec>& zu, const std::vector<Box>& boxes,
                      std::size_t first) {
    for (std::size_t k = first; k < vars.size(); ++k) {
      const Box& box = boxes[k];
      for (int j = 0; j < box.dim(); ++j) {
        if (std::isfinite(box.lower[j])) {
          comp = std::max(comp, std::abs((vars[k][j] - box.lower[j]) * zl[k][j] - mu));
          sum_bound += zl[k][j];
          count_bound += 1.0;
        }
        if (std::isfinite(box.upper[j])) {
          comp = std::max(comp, std::abs((box.upper[j] - vars[k][j]) * zu[k][j] - mu));
          sum_bound += zu[k][j];
          count_bound += 1.0;
        }
      }
    }
  };
  box_comp(it.x, it.zxl, it.zxu, xb_, 1);
  box_comp(it.u, it.zul, it.zuu, ub_, 0);

  const double total = count_mult + count_bound;
  const double s_d =
      total > 0.0 ? std::max(kScaleMax, (sum_mult + sum_bound) / total) / kScaleMax : 1.0;
  const double s_c = count_bound + static_cast<double>(m_) > 0.0
                         ? std::max(kScaleMax, (sum_bound + it.lam.sum()) /
                                                   (count_bound + static_cast<double>(m_))) /
                               kScaleMax
                         : 1.0;
  return std::max({dual / s_d, ev.theta_inf, comp / s_c});
}

void InteriorPoint::assemble(const Iterate& it, bool exact) {
  const auto n = static_cast<std::size_t>(N_);
  const Mat Q2 = 2.0 * spec_.Q;
  for (std::size_t k = 0; k < n; ++k) {
    if (!exact || it.y[k].isZero(0.0)) {
      H_xx_[k] = Mat::Zero(nx_, nx_);
      H_uu_[k] = Mat::Zero(nu_, nu_);
      H_ux_[k] = Mat::Zero(nu_, nx_);
    } else {
      const Mat Hd = model_.weighted_hessian(it.x[k], it.u[k], it.y[k]);
      H_xx_[k] = Hd.topLeftCorner(nx_, nx_);
      H_uu_[k] = Hd.bottomRightCorner(nu_, nu_);
      H_ux_[k] = Hd.bottomLeftCorner(nu_, nx_);
    }
    H_uu_[k] += 2.0 * R_;
    H_uu_[k].diagonal().array() += opt_.regularization;
    for (int j = 0; j < nu_; ++j) {
      if (std::isfinite(ub_[k].lower[j])) H_uu_[k](j, j) += it.zul[k][j] / (it.u[k][j] - ub_[k].lower[j]);
      if (std::isfinite(ub_[k].upper[j])) H_uu_[k](j, j) += it.zuu[k][j] / (ub_[k].upper[j] - it.u[k][j]);
    }
  }
  H_xx_[n] = Mat::Zero(nx_, nx_);
  for (std::size_t k = 1; k <= n; ++k) {
    if (stage_cost_active(static_cast<int>(k))) H_xx_[k] += Q2;
    for (int j = 0; j < nx_; ++j) {
      if (std::isfinite(xb_[k].lower[j])) H_xx_[k](j, j) += it.zxl[k][j] / (it.x[k][j] - xb_[k].lower[j]);
      if (std::isfinite(xb_[k].upper[j])) H_xx_[k](j, j) += it.zxu[k][j] / (xb_[k].upper[j] - it.x[k][j]);
    }
  }
  for (Eigen::Index i = 0; i < m_; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    const Ineq& c = ineqs_[ii];
    const ConstraintEval ce = eval_ineq(c, it.x[static_cast<std::size_t>(c.stage)]);
    grad_g_[ii] = ce.gradient;
    if (soft_) {
      r_sig_[i] = w1_ + 2.0 * w2_ * it.sig[i] - it.lam[i] - it.zsig[i];
      d_sig_[i] = it.zsig[i] + 2.0 * w2_ * it.sig[i];
      gamma_[i] = it.sig[i] / d_sig_[i] + it.s[i] / it.lam[i];
    } else {
      gamma_[i] = it.s[i] / it.lam[i];
    }
    Mat& H = H_xx_[static_cast<std::size_t>(c.stage)];
    H.topLeftCorner<3, 3>() += ce.gradient * ce.gradient.transpose() / gamma_[i];
    if (exact) H.topLeftCorner<3, 3>() -= it.lam[i] * ce.hessian;
  }
}

bool InteriorPoint::factorize(double delta) {
  const auto n = static_cast<std::size_t>(N_);
  Mat P = H_xx_[n];
  P.diagonal().array() += delta;
  for (std::size_t k = n; k-- > 0;) {
    P_next_[k] = P;
    Mat Quu = H_uu_[k] + B_[k].transpose() * P * B_[k];
    Quu.diagonal().array() += delta;
    chol_[k].compute(Quu);
    if (chol_[k].info() != Eigen::Success) return false;
    if (k == 0) break;
    const Mat Qux = H_ux_[k] + B_[k].transpose() * P * A_[k];
    Mat Qxx = H_xx_[k] + A_[k].transpose() * P * A_[k];
    Qxx.diagonal().array() += delta;
    K_[k] = -chol_[k].solve(Qux);
    P = Qxx + Qux.transpose() * K_[k];
    P = 0.5 * (P + P.transpose());
  }
  return true;
}

Step InteriorPoint::solve_step(const Iterate& it, double mu, const std::vector<Vec>& cbar,
                               const Vec& rp) const {
  const auto n = static_cast<std::size_t>(N_);
  Vec rhs(m_);
  for (Eigen::Index i = 0; i < m_; ++i) {
    rhs[i] = -rp[i] + mu / it.lam[i] - it.s[i];
    if (soft_) {
      const double a = mu - it.sig[i] * it.zsig[i] - it.sig[i] * r_sig_[i];
      rhs[i] -= a / d_sig_[i];
    }
  }

  std::vector<Vec> qx(n + 1, Vec::Zero(nx_));
  std::vector<Vec> qu(n, Vec::Zero(nu_));
  for (std::size_t k = 1; k <= n; ++k) {
    if (stage_cost_active(static_cast<int>(k))) qx[k] += 2.0 * spec_.Q * (it.x[k] - spec_.reference[k]);
    for (int j = 0; j < nx_; ++j) {
      if (std::isfinite(xb_[k].lower[j])) qx[k][j] -= mu / (it.x[k][j] - xb_[k].lower[j]);
      if (std::isfinite(xb_[k].upper[j])) qx[k][j] += mu / (xb_[k].upper[j] - it.x[k][j]);
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    qu[k] = 2.0 * R_ * it.u[k];
    for (int j = 0; j < nu_; ++j) {
      if (std::isfinite(ub_[k].lower[j])) qu[k][j] -= mu / (it.u[k][j] - ub_[k].lower[j]);
      if (std::isfinite(ub_[k].upper[j])) qu[k][j] += mu / (ub_[k].upper[j] - it.u[k][j]);
    }
  }
  for (Eigen::Index i = 0; i < m_; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    qx[static_cast<std::size_t>(ineqs_[ii].stage)].head<3>() -=
        grad_g_[ii] * (it.lam[i] + rhs[i] / gamma_[i]);
  }

  // Backward pass.
  std::vector<Vec> kff(n), p_next(n);
  Vec p = qx[n];
  for (std::size_t k = n; k-- > 0;) {
    p_next[k] = p;
    const Vec t = P_next_[k] * cbar[k] + p;
    const Vec qu_t = qu[k] + B_[k].transpose() * t;
    kff[k] = -chol_[k].solve(qu_t);
    if (k == 0) break;
    const Vec qx_t = qx[k] + A_[k].transpose() * t;
    p = qx_t + K_[k].transpose() * qu_t;
  }

  // Forward pass.
  Step d;
  d.dx.assign(n + 1, Vec::Zero(nx_));
  d.du.resize(n);
  d.y_plus.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    d.du[k] = kff[k];
    if (k > 0) d.du[k] += K_[k] * d.dx[k];
    d.dx[k + 1] = A_[k] * d.dx[k] + B_[k] * d.du[k] + cbar[k];
    d.y_plus[k] = P_next_[k] * d.dx[k + 1] + p_next[k];
  }

  d.dlam = Vec::Zero(m_);
  d.ds = Vec::Zero(m_);
  d.dsig = Vec::Zero(m_);
  d.dzsig = Vec::Zero(m_);
  for (Eigen::Index i = 0; i < m_; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    const Vec& dxk = d.dx[static_cast<std::size_t>(ineqs_[ii].stage)];
    d.dlam[i] = (rhs[i] - grad_g_[ii].dot(dxk.head<3>())) / gamma_[i];
    d.ds[i] = (mu - it.s[i] * it.lam[i] - it.s[i] * d.dlam[i]) / it.lam[i];
    if (soft_) {
      const double a = mu - it.sig[i] * it.zsig[i] - it.sig[i] * r_sig_[i];
      d.dsig[i] = (a + it.sig[i] * d.dlam[i]) / d_sig_[i];
      d.dzsig[i] = 2.0 * w2_ * d.dsig[i] - d.dlam[i] + r_sig_[i];
    }
  }

  auto bound_steps = [mu](const std::vector<Vec>& vars, const std::vector<Vec>& dv,
                          const std::vector<Vec>& zl, const std::vector<Vec>& zu,
                          const std::vector<Box>& boxes, std::vector<Vec>& dzl,
                          std::vector<Vec>& dzu) {
    dzl.assign(vars.size(), Vec::Zero(boxes.front().dim()));
    dzu.assign(vars.size(), Vec::Zero(boxes.front().dim()));
    for (std::size_t k = 0; k < vars.size(); ++k) {
      const Box& box = boxes[k];
      for (int j = 0; j < box.dim(); ++j) {
        if (std::isfinite(box.lower[j])) {
          const double gap = vars[k][j] - box.lower[j];
          dzl[k][j] = mu / gap - zl[k][j] - zl[k][j] / gap * dv[k][j];
        }
        if (std::isfinite(box.upper[j])) {
          const double gap = box.upper[j] - vars[k][j];
          dzu[k][j] = mu / gap - zu[k][j] + zu[k][j] / gap * dv[k][j];
        }
      }
    }
  };
  bound_steps(it.x, d.dx, it.zxl, it.zxu, xb_, d.dzxl, d.dzxu);
  bound_steps(it.u, d.du, it.zul, it.zuu, ub_, d.dzul, d.dzuu);
  d.dzxl[0].setZero();
  d.dzxu[0].setZero();
  return d;
}

double InteriorPoint::directional_derivative(const Iterate& it, const Step& d, double mu) const {
  const auto n = static_cast<std::size_t>(N_);
  double dphi = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    if (stage_cost_active(static_cast<int>(k))) {
      dphi += (2.0 * spec_.Q * (it.x[k] - spec_.reference[k])).dot(d.dx[k]);
    }
    for (int j = 0; j < nx_; ++j) {
      if (std::isfinite(xb_[k].lower[j])) dphi -= mu / (it.x[k][j] - xb_[k].lower[j]) * d.dx[k][j];
      if (std::isfinite(xb_[k].upper[j])) dphi += mu / (xb_[k].upper[j] - it.x[k][j]) * d.dx[k][j];
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    dphi += (2.0 * R_ * it.u[k]).dot(d.du[k]);
    for (int j = 0; j < nu_; ++j) {
      if (std::isfinite(ub_[k].lower[j])) dphi -= mu / (it.u[k][j] - ub_[k].lower[j]) * d.du[k][j];
      if (std::isfinite(ub_[k].upper[j])) dphi += mu / (ub_[k].upper[j] - it.u[k][j]) * d.du[k][j];
    }
  }
  for (Eigen::Index i = 0; i < m_; ++i) {
    dphi -= mu / it.s[i] * d.ds[i];
    if (soft_) dphi += (w1_ + 2.0 * w2_ * it.sig[i] - mu / it.sig[i]) * d.dsig[i];
  }
  return dphi;
}

double InteriorPoint::max_primal_step(const Iterate& it, const Step& d, double tau) const {
  double alpha = boundary_step(it.s, d.ds, tau, 1.0);
  if (soft_) alpha = boundary_step(it.sig, d.dsig, tau, alpha);
  auto box_step = [&](const std::vector<Vec>& vars, const std::vector<Vec>& dv,
                      const std::vector<Box>& boxes, std::size_t first) {
    for (std::size_t k = first; k < vars.size(); ++k) {
      const Box& box = boxes[k];
      for (int j = 0; j < box.dim(); ++j) {
        if (std::isfinite(box.lower[j]) && dv[k][j] < 0.0) {
          alpha = std::min(alpha, -tau * (vars[k][j] - box.lower[j]) / dv[k][j]);
        }
        if (std::isfinite(box.upper[j]) && dv[k][j] > 0.0) {
          alpha = std::min(alpha, tau * (box.upper[j] - vars[k][j]) / dv[k][j]);
        }
      }
    }
  };
  box_step(it.x, d.dx, xb_, 1);
  box_step(it.u, d.du, ub_, 0);
  return alpha;
}

double InteriorPoint::max_dual_step(const Iterate& it, const Step& d, double tau) const {
  double alpha = boundary_step(it.lam, d.dlam, tau, 1.0);
  if (soft_) alpha = boundary_step(it.zsig, d.dzsig, tau, alpha);
  auto zstep = [&](const std::vector<Vec>& z, const std::vector<Vec>& dz, const Box& box,
                   bool lower, std::size_t first) {
    for (std::size_t k = first; k < z.size(); ++k) {
      for (int j = 0; j < box.dim(); ++j) {
        const double b = lower ? box.lower[j] : box.upper[j];
        if (std::isfinite(b) && dz[k][j] < 0.0) alpha = std::min(alpha, -tau * z[k][j] / dz[k][j]);
      }
    }
  };
  zstep(it.zxl, d.dzxl, xbox_, true, 1);
  zstep(it.zxu, d.dzxu, xbox_, false, 1);
  zstep(it.zul, d.dzul, ubox_, true, 0);
  zstep(it.zuu, d.dzuu, ubox_, false, 0);
  return alpha;
}

Iterate InteriorPoint::apply(const Iterate& it, const Step& d, double ap, double ad,
                             double mu) const {
  const auto n = static_cast<std::size_t>(N_);
  Iterate out = it;
  for (std::size_t k = 1; k <= n; ++k) out.x[k] += ap * d.dx[k];
  for (std::size_t k = 0; k < n; ++k) {
    out.u[k] += ap * d.du[k];
    out.y[k] += ap * (d.y_plus[k] - it.y[k]);
  }
  out.s += ap * d.ds;
  out.lam += ad * d.dlam;
  if (soft_) {
    out.sig += ap * d.dsig;
    out.zsig += ad * d.dzsig;
  }
  auto clamp_dual = [mu](double z, double gap) {
    return std::clamp(z, mu / (kKappaSigma * gap), kKappaSigma * mu / gap);
  };
  for (Eigen::Index i = 0; i < m_; ++i) {
    out.lam[i] = clamp_dual(out.lam[i], out.s[i]);
    if (soft_) out.zsig[i] = clamp_dual(out.zsig[i], out.sig[i]);
  }
  auto update_bounds = [&](std::vector<Vec>& vars, std::vector<Vec>& zl, std::vector<Vec>& zu,
                           const std::vector<Vec>& dzl, const std::vector<Vec>& dzu,
                           const std::vector<Box>& boxes, std::size_t first) {
    for (std::size_t k = first; k < vars.size(); ++k) {
      const Box& box = boxes[k];
      for (int j = 0; j < box.dim(); ++j) {
        if (std::isfinite(box.lower[j])) {
          zl[k][j] = clamp_dual(zl[k][j] + ad * dzl[k][j], vars[k][j] - box.lower[j]);
        }
        if (std::isfinite(box.upper[j])) {
          zu[k][j] = clamp_dual(zu[k][j] + ad * dzu[k][j], box.upper[j] - vars[k][j]);
        }
      }
    }
  };
  update_bounds(out.x, out.zxl, out.zxu, d.dzxl, d.dzxu, xb_, 1);
  update_bounds(out.u, out.zul, out.zuu, d.dzul, d.dzuu, ub_, 0);
  return out;
}

OcpSolution InteriorPoint::finish(const Iterate& it, SolveStatus status, int iterations,
                                  double kkt, double mu, double theta_inf) const {
  const auto n = static_cast<std::size_t>(N_);
  OcpSolution sol;
  sol.status = status;
  sol.inputs = it.u;
  sol.dynamics_multipliers = it.y;
  sol.states.resize(n + 1);
  sol.states[0] = x0_;
  for (std::size_t k = 0; k < n; ++k) sol.states[k + 1] = model_.step(sol.states[k], sol.inputs[k]);

  SolveDiagnostics& dg = sol.diagnostics;
  dg.iterations = iterations;
  dg.kkt_residual = kkt;
  dg.primal_infeasibility = theta_inf;
  dg.final_mu = mu;
  dg.inertia_corrections = inertia_corrections_;
  dg.dynamics_defect = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    dg.dynamics_defect = std::max(
        dg.dynamics_defect, inf_norm(model_.step(sol.states[k], sol.inputs[k]) - sol.states[k + 1]));
    dg.max_box_violation = std::max(dg.max_box_violation, ubox_.violation(sol.inputs[k]));
    dg.max_box_violation = std::max(dg.max_box_violation, xbox_.violation(sol.states[k + 1]));
  }
  for (Eigen::Index i = 0; i < m_; ++i) {
    const Ineq& c = ineqs_[static_cast<std::size_t>(i)];
    const double v = eval_ineq(c, sol.states[static_cast<std::size_t>(c.stage)]).value - c.bound;
    dg.max_constraint_violation = std::max(dg.max_constraint_violation, -v);
    if (soft_) dg.max_slack = std::max(dg.max_slack, it.sig[i]);
  }
  dg.slack_active = dg.max_slack > kSlackActive;
  sol.cost = tracking_cost(sol.states, spec_.reference, spec_.Q, spec_.include_terminal);
  double input_cost = 0.0;
  for (const Vec& u : sol.inputs) input_cost += u.dot(R_ * u);
  double penalty = 0.0;
  if (soft_) penalty = w1_ * it.sig.sum() + w2_ * it.sig.squaredNorm();
  dg.objective = sol.cost + input_cost + penalty;
  return sol;
}

OcpSolution InteriorPoint::run(const OcpSolution* warm) {
  double mu = opt_.mu_init;
  const double mu_min = std::min(opt_.mu_min, opt_.mu_init);
  Iterate it = initial_iterate(warm, mu);
  Evaluation ev = evaluate(it, mu);

  double nu = 1.0;
  double delta_last = 0.0;
  Iterate best = it;
  double best_theta = ev.theta_inf;
  double best_obj = ev.objective;
  double kkt = kInf;
  SolveStatus status = SolveStatus::MaxIterations;
  int iter = 0;

  auto record_best = [&](const Iterate& cand, const Evaluation& e) {
    const bool cand_feasible = e.theta_inf <= kFeasible;
    const bool best_feasible = best_theta <= kFeasible;
    if ((cand_feasible && (!best_feasible || e.objective < best_obj)) ||
        (!cand_feasible && !best_feasible && e.theta_inf < best_theta)) {
      best = cand;
      best_theta = e.theta_inf;
      best_obj = e.objective;
    }
  };

  for (;; ++iter) {
    linearize(it);
    kkt = optimality_error(it, ev, 0.0);
    record_best(it, ev);
    if (kkt <= opt_.tolerance && ev.defect_inf <= opt_.dynamics_tolerance && mu <= mu_min) {
      status = SolveStatus::Converged;
      break;
    }
    if (iter >= opt_.max_iterations) break;
    while (mu > mu_min && optimality_error(it, ev, mu) <= kKappaEps * mu) {
      mu = std::max(mu_min, std::min(kKappaMu * mu, std::pow(mu, kThetaMu)));
      ev = evaluate(it, mu);
    }

    assemble(it, true);
    bool exact = true;
    bool accepted = false;
    Iterate trial;
    Evaluation trial_ev;
    double forced = 0.0;
    for (int attempt = 0; attempt < kLineSearchRetries && !accepted; ++attempt) {
      double delta = forced;
      bool factorized = factorize(delta);
      if (!factorized && exact) {
        assemble(it, false);
        exact = false;
        ++inertia_corrections_;
        factorized = factorize(delta);
      }
      if (!factorized) {
        delta = std::max(forced, delta_last == 0.0 ? 1e-4 : std::max(1e-20, delta_last / 3.0));
        while (!factorize(delta)) {
          delta *= delta_last == 0.0 ? 100.0 : 8.0;
          if (delta > 1e40) break;
        }
        if (delta > 1e40) {
          status = SolveStatus::NumericalFailure;
          break;
        }
        delta_last = delta;
        ++inertia_corrections_;
      }

      const Step d = solve_step(it, mu, ev.defect, ev.cin);
      const double tau = std::max(kTauMin, 1.0 - mu);
      const double alpha_max = max_primal_step(it, d, tau);
      const double alpha_dual = max_dual_step(it, d, tau);

      // Penalty parameter of the l1 merit function.
      double mult = 0.0;
      for (const Vec& y : d.y_plus) mult = std::max(mult, inf_norm(y));
      mult = std::max(mult, inf_norm(it.lam + d.dlam));
      const double dphi = directional_derivative(it, d, mu);
      if (nu < mult) nu = 1.5 * mult;
      if (ev.theta > 0.0 && dphi - nu * ev.theta > -0.1 * nu * ev.theta) {
        nu = std::max(nu, dphi / (0.9 * ev.theta) + 1.0);
      }
      const double merit0 = ev.barrier + nu * ev.theta;
      const double slope = dphi - nu * ev.theta;

      double alpha = alpha_max;
      for (int ls = 0; ls < 60 && alpha > 1e-14; ++ls, alpha *= 0.5) {
        try {
          trial = apply(it, d, alpha, alpha_dual, mu);
          trial_ev = evaluate(trial, mu);
        } catch (const IntegrationError&) {
          continue;
        }
        const double merit = trial_ev.barrier + nu * trial_ev.theta;
        if (std::isfinite(merit) && merit <= merit0 + kArmijo * alpha * std::min(slope, 0.0)) {
          accepted = true;
          break;
        }
        if (ls == 0 && trial_ev.theta >= ev.theta) {
          // Second-order correction with the constraint values at the trial point.
          std::vector<Vec> c_soc(ev.defect.size());
          for (std::size_t k = 0; k < c_soc.size(); ++k) {
            c_soc[k] = alpha * ev.defect[k] + trial_ev.defect[k];
          }
          const Vec r_soc = alpha * ev.cin + trial_ev.cin;
          const Step d_soc = solve_step(it, mu, c_soc, r_soc);
          const double a_soc = max_primal_step(it, d_soc, tau);
          try {
            Iterate soc = apply(it, d_soc, a_soc, alpha_dual, mu);
            Evaluation soc_ev = evaluate(soc, mu);
            const double m_soc = soc_ev.barrier + nu * soc_ev.theta;
            if (std::isfinite(m_soc) &&
                m_soc <= merit0 + kArmijo * alpha * std::min(slope, 0.0)) {
              trial = std::move(soc);
              trial_ev = std::move(soc_ev);
              accepted = true;
              break;
            }
          } catch (const IntegrationError&) {
          }
        }
      }
      if (accepted) break;
      // Line search failed: retry with the Gauss-Newton Hessian, then with a
      // growing shift, which turns the step towards steepest descent.
      if (exact) {
        assemble(it, false);
        exact = false;
        continue;
      }
      forced = std::max(10.0 * std::max(delta, 1e-6), 1e-4 * std::pow(100.0, attempt));
    }
    if (status == SolveStatus::NumericalFailure) break;
    if (!accepted) {
      status = SolveStatus::NumericalFailure;
      break;
    }
    it = std::move(trial);
    ev = std::move(trial_ev);
  }

  const Iterate& out = status == SolveStatus::Converged ? it : best;
  const Evaluation out_ev = evaluate(out, mu);
  if (status != SolveStatus::Converged && out_ev.theta_inf > kFeasible) {
    status = SolveStatus::Infeasible;
  }
  return finish(out, status, iter, kkt, mu, out_ev.theta_inf);
}

}  // namespace

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIterations: return "max_iterations";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::NumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

void OcpSpec::validate(int state_dim, int input_dim) const {
  if (horizon < 1) throw ConfigError("ocp: horizon must be >= 1");
  if (Q.rows() != state_dim || Q.cols() != state_dim) throw ConfigError("ocp: Q has wrong shape");
  if (!Q.isApprox(Q.transpose(), 1e-12)) throw ConfigError("ocp: Q must be symmetric");
  Eigen::LLT<Mat> llt(Q);
  if (llt.info() != Eigen::Success) throw ConfigError("ocp: Q must be positive definite");
  if (R.size() > 0) {
    if (R.rows() != input_dim || R.cols() != input_dim) throw ConfigError("ocp: R has wrong shape");
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (R + R.transpose()), Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-12) throw ConfigError("ocp: R must be positive semidefinite");
  }
  const auto len = static_cast<std::size_t>(horizon) + 1;
  if (reference.size() != len) throw ConfigError("ocp: reference must have N + 1 entries");
  for (const Vec& r : reference) {
    if (r.size() != state_dim || !r.allFinite()) throw ConfigError("ocp: malformed reference entry");
  }
  if (funnel) {
    funnel->params.validate();
    if (funnel->centers.size() != len) throw ConfigError("ocp: funnel centres must have N + 1 entries");
    if (!funnel->margin.empty() && funnel->margin.size() != len) {
      throw ConfigError("ocp: funnel margin must be empty or have N + 1 entries");
    }
    if (!funnel->robust_radius.empty()) {
      if (funnel->robust_radius.size() != len) {
        throw ConfigError("ocp: funnel robust radius must be empty or have N + 1 entries");
      }
      for (double d : funnel->robust_radius) {
        if (!(d >= 0.0)) throw ConfigError("ocp: funnel robust radius must be >= 0");
      }
    }
  }
  if (!peers.empty()) collision.validate();
  for (const PeerTerm& p : peers) {
    if (p.positions.size() != len) throw ConfigError("ocp: peer trajectory must have N + 1 entries");
    if (!(p.inflation >= 0.0)) throw ConfigError("ocp: peer inflation must be >= 0");
  }
  if (state_dim < 3 && (funnel || !peers.empty())) {
    throw ConfigError("ocp: position constraints need a position-bearing state");
  }
  const SolverOptions& o = options;
  if (!(o.tolerance > 0.0) || !(o.dynamics_tolerance > 0.0) || o.max_iterations < 1 ||
      !(o.mu_init > 0.0) || !(o.mu_min > 0.0) || !(o.slack_linear_weight >= 0.0) ||
      !(o.slack_quadratic_weight > 0.0) || !(o.regularization >= 0.0)) {
    throw ConfigError("ocp: invalid solver options");
  }
}

double tracking_cost(const std::vector<Vec>& states, const std::vector<Vec>& reference,
                     const Mat& Q, bool include_terminal) {
  if (states.size() != reference.size() || states.empty()) {
    throw ConfigError("tracking_cost: states and reference lengths differ");
  }
  const std::size_t last = include_terminal ? states.size() : states.size() - 1;
  double cost = 0.0;
  for (std::size_t k = 0; k < last; ++k) {
    const Vec e = states[k] - reference[k];
    cost += e.dot(Q * e);
  }
  return cost;
}

OcpSolution shift_solution(const OcpSolution& previous, const Vec& x_now,
                           const DynamicsModel& model) {
  if (previous.inputs.empty()) throw ConfigError("shift_solution: empty previous solution");
  OcpSolution out;
  const std::size_t n = previous.inputs.size();
  out.inputs.reserve(n);
  for (std::size_t k = 1; k < n; ++k) out.inputs.push_back(previous.inputs[k]);
  out.inputs.push_back(previous.inputs.back());
  out.states.resize(n + 1);
  out.states[0] = x_now;
  for (std::size_t k = 0; k < n; ++k) out.states[k + 1] = model.step(out.states[k], out.inputs[k]);
  if (previous.dynamics_multipliers.size() == n) {
    for (std::size_t k = 1; k < n; ++k) {
      out.dynamics_multipliers.push_back(previous.dynamics_multipliers[k]);
    }
    out.dynamics_multipliers.push_back(Vec::Zero(model.state_dim()));
  }
  out.status = SolveStatus::MaxIterations;
  return out;
}

OcpSolution DocpSolver::solve(const Vec& x_now, const OcpSpec& spec, const OcpSolution* warm) const {
  if (x_now.size() != model_->state_dim() || !x_now.allFinite()) {
    throw ConfigError("solve: initial state must be finite and of state dimension");
  }
  spec.validate(model_->state_dim(), model_->input_dim());
  InteriorPoint ip(*model_, spec, x_now);
  return ip.run(warm);
}

double value_function(const DynamicsModel& model, const Vec& x_now, const OcpSpec& spec,
                      OcpSolution* out) {
  DocpSolver solver(model);
  OcpSolution sol = solver.solve(x_now, spec);
  const double v = sol.cost;
  if (out != nullptr) *out = std::move(sol);
  return v;
}

Membership roa_membership(const DynamicsModel& model, const Vec& x_now, const OcpSpec& spec,
                          double v_max) {
  if (!(v_max > 0.0)) throw ConfigError("roa_membership: V_max must be positive");
  if (spec.reference.empty()) throw ConfigError("roa_membership: empty reference");
  const Vec e = x_now - spec.reference.front();
  if (e.dot(spec.Q * e) > v_max) return Membership::Outside;
  OcpSolution sol;
  const double v = value_function(model, x_now, spec, &sol);
  if (!sol.converged()) return Membership::Unknown;
  return v <= v_max ? Membership::Inside : Membership::Outside;
}

}  // namespace dmpc
