#include "dmpc/coordinator.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <thread>

namespace dmpc {

namespace {

constexpr std::uint64_t kNoiseStream = 0x6D656173ULL;
constexpr std::uint64_t kDisturbanceStream = 0x64697374ULL;
constexpr std::uint64_t kDeadlockStream = 0x6465616CULL;

double wrap_angle(double a) {
  return std::atan2(std::sin(a), std::cos(a));
}

}  // namespace

std::string to_string(AgentRole role) {
  return role == AgentRole::Leader ? "leader" : "follower";
}

std::string to_string(RunOutcome outcome) {
  switch (outcome) {
    case RunOutcome::Success: return "success";
    case RunOutcome::StepCap: return "step_cap";
    case RunOutcome::SafetyAbort: return "safety_abort";
    case RunOutcome::CertificateFailure: return "certificate_failure";
  }
  return "unknown";
}

int exit_code(RunOutcome outcome) {
  switch (outcome) {
    case RunOutcome::Success: return 0;
    case RunOutcome::StepCap: return 2;
    case RunOutcome::SafetyAbort: return 3;
    case RunOutcome::CertificateFailure: return 4;
  }
  return 1;
}

double hash_normal(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  const double u1 = hash_uniform(seed ^ 0x9E3779B97F4A7C15ULL, a, b, c);
  const double u2 = hash_uniform(seed ^ 0xD1B54A32D192ED03ULL, a, b, c);
  return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void parallel_for(int count, int threads, const std::function<void(int)>& task) {
  if (count <= 0) return;
  int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, count);
  if (workers == 1) {
    for (int i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          task(i);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
        }
      }
    });
  }
  for (std::thread& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::vector<std::array<double, 4>> load_leader_track(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read leader track '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("leader track '" + path + "' is empty");
  std::vector<std::array<double, 4>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::array<double, 4> row{};
    std::stringstream ss(line);
    std::string cell;
    for (std::size_t c = 0; c < 4; ++c) {
      if (!std::getline(ss, cell, ',')) {
        throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 4 columns");
      }
      try {
        row[c] = std::stod(cell);
      } catch (const std::exception&) {
        throw ConfigError(path + ":" + std::to_string(lineno) + ": not a number '" + cell + "'");
      }
    }
    if (!rows.empty() && row[0] <= rows.back()[0]) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": time must increase");
    }
    rows.push_back(row);
  }
  if (rows.size() < 2) throw ConfigError("leader track '" + path + "' needs at least two rows");
  return rows;
}

World::World(ScenarioConfig config)
    : config_(std::move(config)),
      fabric_(config_.agent_count(), LossSchedule{config_.comm.links, config_.seed.value_or(0)}) {
  const ValidationReport report = validate_config(config_);
  if (!report.ok()) {
    std::string msg = "scenario violates its preconditions:";
    for (const std::string& e : report.errors) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
  seed_ = config_.seed.value_or(0);
  funnel_params_ = config_.funnel_params();

  auto leader_model = std::make_shared<const LeaderModel>(config_.leader_params());
  auto follower_model = std::make_shared<const FollowerModel>(config_.follower_params());
  auto cv_model = std::make_shared<const ConstantVelocityModel>(config_.dt);

  const PredictorConfig& pc = config_.predictor;
  const Mat3 meas = Mat3::Identity() * pc.measurement_sigma * pc.measurement_sigma;
  Vec leader_process = pc.leader_process;
  Vec leader_initial = pc.leader_initial;
  leader_process[2] = 0.0;
  leader_initial[2] = 0.0;

  AgentRuntime leader;
  leader.id = 0;
  leader.role = AgentRole::Leader;
  leader.model = leader_model;
  leader.state = config_.leader.initial_state;
  agents_.push_back(std::move(leader));

  const std::vector<Vec> x0 = config_.follower_initial_states();
  const std::vector<Vec3> offsets = config_.landing_offsets();
  for (int i = 1; i <= config_.followers.count; ++i) {
    AgentRuntime a;
    a.id = i;
    a.model = follower_model;
    a.state = x0[static_cast<std::size_t>(i - 1)];
    a.landing_offset = offsets[static_cast<std::size_t>(i - 1)];
    agents_.push_back(std::move(a));
  }

  for (int i = 1; i <= config_.followers.count; ++i) {
    AgentRuntime& a = agents_[static_cast<std::size_t>(i)];
    for (int j = 0; j < config_.agent_count(); ++j) {
      if (j == i) continue;
      PeerPredictor p;
      p.target = j;
      p.noise.measurement = meas;
      if (j == 0) {
        p.model = leader_model;
        p.noise.process = leader_process.asDiagonal();
        p.state.x = config_.leader.initial_state;
        p.state.P = leader_initial.asDiagonal();
      } else {
        p.model = cv_model;
        p.noise.process = pc.peer_process.asDiagonal();
        p.state.x = Vec::Zero(6);
        p.state.x.head<3>() = x0[static_cast<std::size_t>(j - 1)].head<3>();
        p.state.P = pc.peer_initial.asDiagonal();
      }
      p.state.t = 0;
      a.predictors.emplace(j, std::move(p));
    }
  }

  if (config_.collision.enabled && config_.followers.count > 1) {
    worst_case_radius_ = dmpc::worst_case_radius(*follower_model, follower_model->state_box(),
                                                 follower_model->input_box());
  }
  if (config_.disturbance.kind == DisturbanceKind::Replay) {
    replay_ = load_leader_track(config_.disturbance.replay_file);
    apply_replay();
  }
}

bool World::all_latched() const {
  return std::all_of(agents_.begin() + 1, agents_.end(),
                     [](const AgentRuntime& a) { return a.latched; });
}

Vec3 World::measurement_noise(int observer, int target) const {
  Vec3 n = Vec3::Zero();
  const double sigma = config_.predictor.measurement_sigma;
  if (sigma <= 0.0) return n;
  for (int axis = 0; axis < 3; ++axis) {
    n[axis] = sigma * hash_normal(seed_ ^ kNoiseStream,
                                  static_cast<std::uint64_t>(observer) * 4096 +
                                      static_cast<std::uint64_t>(target),
                                  static_cast<std::uint64_t>(t_), static_cast<std::uint64_t>(axis));
  }
  return n;
}

Vec World::disturbance(int agent) const {
  const AgentRuntime& a = agents_[static_cast<std::size_t>(agent)];
  const int n = a.model->state_dim();
  Vec w = Vec::Zero(n);
  if (config_.disturbance.kind != DisturbanceKind::Seeded) return w;
  const Vec& bound = agent == 0 ? config_.disturbance.leader_bound : config_.disturbance.follower_bound;
  for (int d = 0; d < n; ++d) {
    const double u = hash_uniform(seed_ ^ kDisturbanceStream, static_cast<std::uint64_t>(agent),
                                  static_cast<std::uint64_t>(t_), static_cast<std::uint64_t>(d));
    w[d] = bound[d] * (2.0 * u - 1.0);
  }
  if (agent == 0) w[2] = 0.0;
  return w;
}

void World::apply_replay() {
  if (replay_.empty()) return;
  const double time = t_ * config_.dt;
  auto sample = [this](double tau) {
    std::array<double, 3> out{};
    if (tau <= replay_.front()[0]) {
      out = {replay_.front()[1], replay_.front()[2], replay_.front()[3]};
      return out;
    }
    if (tau >= replay_.back()[0]) {
      out = {replay_.back()[1], replay_.back()[2], replay_.back()[3]};
      return out;
    }
    auto it = std::upper_bound(replay_.begin(), replay_.end(), tau,
                               [](double v, const std::array<double, 4>& r) { return v < r[0]; });
    const auto& b = *it;
    const auto& a = *(it - 1);
    const double s = (tau - a[0]) / (b[0] - a[0]);
    out[0] = a[1] + s * (b[1] - a[1]);
    out[1] = a[2] + s * (b[2] - a[2]);
    out[2] = a[3] + s * wrap_angle(b[3] - a[3]);
    return out;
  };
  const auto now = sample(time);
  const auto next = sample(time + config_.dt);
  Vec& x = agents_[0].state;
  x[0] = now[0];
  x[1] = now[1];
  x[2] = 0.0;
  x[3] = now[2];
  x[4] = std::hypot(next[0] - now[0], next[1] - now[1]) / config_.dt;
  x[5] = wrap_angle(next[2] - now[2]) / config_.dt;
}

void World::correct_predictors() {
  for (std::size_t i = 1; i < agents_.size(); ++i) {
    AgentRuntime& a = agents_[i];
    for (auto& [target, p] : a.predictors) {
      const Vec3 z = agents_[static_cast<std::size_t>(target)].state.head<3>() +
                     measurement_noise(a.id, target);
      p.state = ekf_correct(p.state, z, p.noise);
    }
  }
}

void World::advance_predictors() {
  for (std::size_t i = 1; i < agents_.size(); ++i) {
    for (auto& [target, p] : agents_[i].predictors) {
      p.state = ekf_predict(p.state, *p.model, p.noise);
    }
  }
}

AgentReferences World::build_references(int agent, const DataCollection& data) const {
  const AgentRuntime& a = agents_.at(static_cast<std::size_t>(agent));
  const int N = config_.horizon;
  AgentReferences refs;
  if (a.role == AgentRole::Leader) {
    const Vec3 origin = config_.leader.initial_state.head<3>();
    for (int k = 0; k <= N; ++k) {
      refs.reference.push_back(config_.leader.track.state_at((t_ + k) * config_.dt, origin));
    }
    refs.leader_estimate = a.state.head<3>();
    return refs;
  }

  const ConfidenceParams conf{config_.predictor.confidence};
  const PeerPredictor& lp = a.predictors.at(0);
  if (lp.state.t != t_) throw ConfigError("leader predictor is not synchronized with the world");
  const PredictionResult lpred = predict_horizon(lp.state, *lp.model, lp.noise, N);
  std::vector<Vec> lfs;
  for (const Vec& s : lpred.states) lfs.push_back(map_leader_to_follower_space(s));
  const ReconstructedTrajectory leader = shift_and_predict(data.get(0), t_, N, lfs);
  refs.staleness[0] = leader.staleness;
  refs.predictor_filled += leader.predictor_filled();
  refs.leader_estimate = leader.points[0].head<3>();
  for (int k = 0; k <= N; ++k) {
    refs.leader_lambda = std::max(refs.leader_lambda, max_eigenvalue(lpred.position_covariance(k)));
  }

  for (int k = 0; k <= N; ++k) {
    Vec r = Vec::Zero(FollowerModel::kStateDim);
    r.head<3>() = leader.points[static_cast<std::size_t>(k)].head<3>() + a.landing_offset;
    refs.reference.push_back(r);
  }

  if (config_.funnel.enabled) {
    FunnelTerm f;
    f.params = funnel_params_;
    for (int k = 0; k <= N; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      f.centers.push_back(leader.points[ks].head<3>());
      f.margin.push_back(config_.funnel.margin);
      const double radius = leader.predicted[ks]
                                ? std::min(config_.funnel.robust_radius_cap,
                                           confidence_radius(lpred.position_covariance(k), conf))
                                : 0.0;
      f.robust_radius.push_back(radius);
    }
    refs.funnel = std::move(f);
  }

  for (const auto& [j, p] : a.predictors) {
    if (j == 0) continue;
    const PredictionResult pred = predict_horizon(p.state, *p.model, p.noise, N);
    std::vector<Vec> pfs;
    for (const Vec& s : pred.states) pfs.push_back(to_follower_space(s, false));
    const ReconstructedTrajectory rec = shift_and_predict(data.get(j), t_, N, pfs);
    refs.staleness[j] = rec.staleness;
    refs.predictor_filled += rec.predictor_filled();
    if (!config_.collision.enabled) continue;
    PeerTerm term;
    term.peer_id = j;
    for (const Vec& pt : rec.points) term.positions.push_back(pt.head<3>());
    const std::optional<int> k = data.staleness(j);
    double inflation = 0.0;
    if (!k) {
      inflation = confidence_radius(pred.position_covariance(N), conf);
    } else if (*k > 0) {
      inflation = std::min(confidence_radius(pred.position_covariance(std::min(*k, N)), conf),
                           worst_case_radius_ * *k);
    }
    term.inflation = std::min(inflation, config_.collision.inflation_ceiling);
    refs.peers.push_back(std::move(term));
  }
  return refs;
}

OcpSpec World::make_spec(int agent, const AgentReferences& refs) const {
  OcpSpec spec;
  spec.horizon = config_.horizon;
  const bool leader = agent == 0;
  spec.Q = leader ? config_.leader.Q : config_.followers.Q;
  if (!leader) spec.R = config_.followers.R;
  spec.include_terminal = true;
  spec.reference = refs.reference;
  spec.funnel = refs.funnel;
  spec.collision = config_.collision.params;
  spec.peers = refs.peers;
  spec.options = config_.solver;
  return spec;
}

OcpSolution World::solve_agent(int agent, const OcpSpec& spec) const {
  const AgentRuntime& a = agents_[static_cast<std::size_t>(agent)];
  const DocpSolver solver(*a.model);
  std::optional<OcpSolution> warm;
  if (a.previous) warm = shift_solution(*a.previous, a.state, *a.model);
  return warm ? solver.solve(a.state, spec, &*warm) : solver.solve(a.state, spec);
}

SharedTrajectory World::share(int agent, const OcpSolution& sol) const {
  SharedTrajectory traj;
  traj.sender = agent;
  traj.birth = t_;
  for (const Vec& x : sol.states) {
    traj.points.push_back(agent == 0 ? map_leader_to_follower_space(x) : x);
  }
  return traj;
}

void World::fill_metrics(StepRecord& rec) const {
  const Vec3 leader = agents_[0].state.head<3>();
  double lam = 0.0;
  for (std::size_t i = 1; i < agents_.size(); ++i) {
    const AgentRuntime& a = agents_[i];
    AgentStepRecord& r = rec.agents[i];
    lam = std::max(lam, r.leader_lambda);
    rec.min_h_C = std::min(rec.min_h_C, eval_h_C(a.state.head<3>(), leader, funnel_params_));
    for (std::size_t j = i + 1; j < agents_.size(); ++j) {
      rec.min_pairwise = std::min(rec.min_pairwise,
                                  eval_h_ij(a.state.head<3>(), agents_[j].state.head<3>(),
                                            config_.collision.params));
    }
    if (a.latched) ++rec.latched_count;
  }
  rec.lambda_max = lam;
  const SafetyGate g = evaluate_safety_gate(lam, config_.safety_gate);
  rec.gate_pass = g.pass;
  rec.gate_margin = g.margin;
}

StepRecord World::run_step(bool allow_solve) {
  const int n = config_.agent_count();
  StepRecord rec;
  rec.t = t_;
  rec.agents.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    AgentStepRecord& r = rec.agents[static_cast<std::size_t>(i)];
    const AgentRuntime& a = agents_[static_cast<std::size_t>(i)];
    r.id = i;
    r.state = a.state;
    r.input = Vec::Zero(a.model->input_dim());
  }

  correct_predictors();

  std::vector<AgentReferences> refs(static_cast<std::size_t>(n));
  auto record_refs = [&](int i) {
    AgentStepRecord& r = rec.agents[static_cast<std::size_t>(i)];
    const AgentReferences& ref = refs[static_cast<std::size_t>(i)];
    const AgentRuntime& a = agents_[static_cast<std::size_t>(i)];
    r.staleness = ref.staleness;
    r.predictor_filled = ref.predictor_filled;
    r.leader_lambda = ref.leader_lambda;
    const Mat& Q = i == 0 ? config_.leader.Q : config_.followers.Q;
    const Vec e = a.state - ref.reference.front();
    r.error_q = e.dot(Q * e);
    r.error_sq = e.squaredNorm();
    if (i > 0) {
      r.gate_distance = (a.state.head<3>() - (ref.leader_estimate + a.landing_offset)).norm();
    }
  };
  auto prepare = [&](int i, bool include_current) {
    const DataCollection data = fabric_.collect(i, t_, include_current);
    refs[static_cast<std::size_t>(i)] = build_references(i, data);
    record_refs(i);
  };
  auto gate = [&](int i) {
    AgentRuntime& a = agents_[static_cast<std::size_t>(i)];
    const double d = rec.agents[static_cast<std::size_t>(i)].gate_distance;
    if (!a.latched && d <= config_.epsilon) {
      a.latched = true;
      a.latch_step = t_;
      spdlog::info("t={} {} latched (distance {:.4f})", t_, agent_name(i), d);
    }
  };

  for (int i = 0; i < n; ++i) {
    prepare(i, false);
    if (i > 0) gate(i);
  }
  for (int i = 1; i < n; ++i) rec.agents[static_cast<std::size_t>(i)].latched = agents_[static_cast<std::size_t>(i)].latched;

  if (all_latched() || !allow_solve) {
    fill_metrics(rec);
    return rec;
  }

  // Deadlock perturbation of stalled followers.
  std::vector<bool> perturbed(static_cast<std::size_t>(n), false);
  auto maybe_perturb = [&](int i) {
    AgentRuntime& a = agents_[static_cast<std::size_t>(i)];
    if (i == 0 || a.latched || !config_.deadlock.enabled) return;
    if (a.stall_count < config_.deadlock.stall_steps) return;
    AgentReferences& ref = refs[static_cast<std::size_t>(i)];
    const Vec3 target = ref.reference.front().head<3>();
    Vec3 d = target - a.state.head<3>();
    d.z() = 0.0;
    Vec3 tangent(-d.y(), d.x(), 0.0);
    tangent = tangent.norm() > 1e-9 ? tangent.normalized() : Vec3::UnitX();
    const double u = hash_uniform(seed_ ^ kDeadlockStream, static_cast<std::uint64_t>(i),
                                  static_cast<std::uint64_t>(t_), 0);
    const double mag = config_.deadlock.magnitude * (2.0 * u - 1.0);
    const Vec3 offset = mag * tangent;
    for (Vec& r : ref.reference) r.head<3>() += offset;
    a.stall_count = 0;
    perturbed[static_cast<std::size_t>(i)] = true;
    deadlock_events_.push_back({t_, i, offset});
    spdlog::warn("t={} {} stalled, reference perturbed by ({:.3f}, {:.3f})", t_, agent_name(i),
                 offset.x(), offset.y());
  };

  std::vector<OcpSolution> sols(static_cast<std::size_t>(n));
  auto solve = [&](int i) {
    sols[static_cast<std::size_t>(i)] = solve_agent(i, make_spec(i, refs[static_cast<std::size_t>(i)]));
  };
  auto broadcasts = [&](int i) { return i == 0 || !agents_[static_cast<std::size_t>(i)].latched; };

  std::vector<bool> degraded(static_cast<std::size_t>(n), false);
  std::vector<Vec> inputs(static_cast<std::size_t>(n));
  auto settle = [&](int i) {
    AgentRuntime& a = agents_[static_cast<std::size_t>(i)];
    OcpSolution& sol = sols[static_cast<std::size_t>(i)];
    const bool hard = sol.status == SolveStatus::NumericalFailure || sol.status == SolveStatus::Infeasible;
    if (hard) {
      degraded[static_cast<std::size_t>(i)] = true;
      spdlog::warn("t={} {} solver {}, applying shifted previous input", t_, agent_name(i),
                   to_string(sol.status));
      if (a.previous) {
        OcpSolution shifted = shift_solution(*a.previous, a.state, *a.model);
        shifted.status = sol.status;
        shifted.diagnostics = sol.diagnostics;
        shifted.cost = tracking_cost(shifted.states, refs[static_cast<std::size_t>(i)].reference,
                                     i == 0 ? config_.leader.Q : config_.followers.Q);
        sol = std::move(shifted);
      }
    }
    inputs[static_cast<std::size_t>(i)] =
        sol.inputs.empty() ? Vec::Zero(a.model->input_dim()) : sol.inputs.front();
  };

  if (t_ == 0) {
    // Sequential first iteration: each agent sees the trajectories already
    // broadcast at t = 0 by lower ids.
    for (int i = 0; i < n; ++i) {
      if (i > 0) prepare(i, true);
      maybe_perturb(i);
      solve(i);
      settle(i);
      if (broadcasts(i)) fabric_.broadcast(share(i, sols[static_cast<std::size_t>(i)]), t_);
    }
  } else {
    for (int i = 0; i < n; ++i) maybe_perturb(i);
    parallel_for(n, config_.threads, solve);
    for (int i = 0; i < n; ++i) settle(i);
    for (int i = 0; i < n; ++i) {
      if (broadcasts(i)) fabric_.broadcast(share(i, sols[static_cast<std::size_t>(i)]), t_);
    }
  }

  for (int i = 0; i < n; ++i) {
    AgentRuntime& a = agents_[static_cast<std::size_t>(i)];
    const OcpSolution& sol = sols[static_cast<std::size_t>(i)];
    AgentStepRecord& r = rec.agents[static_cast<std::size_t>(i)];
    r.solved = true;
    r.broadcast = broadcasts(i);
    r.degraded = degraded[static_cast<std::size_t>(i)];
    r.perturbed = perturbed[static_cast<std::size_t>(i)];
    r.input = inputs[static_cast<std::size_t>(i)];
    r.cost = sol.cost;
    r.status = sol.status;
    r.diagnostics = sol.diagnostics;
    if (i > 0 && !a.latched && !r.perturbed) {
      const double decrease = a.previous_cost - sol.cost;
      a.stall_count = std::isfinite(a.previous_cost) && decrease < config_.deadlock.stall_threshold
                          ? a.stall_count + 1
                          : 0;
    }
    a.previous_cost = sol.cost;
    a.previous = sol;
  }
  fill_metrics(rec);

  for (int i = 0; i < n; ++i) {
    AgentRuntime& a = agents_[static_cast<std::size_t>(i)];
    const Vec w = disturbance(i);
    try {
      a.state = a.model->step(a.state, inputs[static_cast<std::size_t>(i)], w);
    } catch (const IntegrationError& e) {
      throw IntegrationError("t=" + std::to_string(t_) + " " + agent_name(i) + ": " + e.what());
    }
  }
  advance_predictors();
  ++t_;
  apply_replay();
  return rec;
}

RunResult run_scenario(const ScenarioConfig& config, const StepObserver& observer) {
  const auto start = std::chrono::steady_clock::now();
  World world(config);
  SafetyGateMonitor monitor(config.safety_gate);
  RunResult result;
  while (true) {
    const bool at_cap = world.t() >= config.step_cap;
    StepRecord rec = world.run_step(!at_cap);
    monitor.update(rec.lambda_max);
    if (observer) observer(rec);
    spdlog::debug("t={} latched={}/{} lambda={:.4g} min_hC={:.4g} min_hij={:.4g}", rec.t,
                  rec.latched_count, config.followers.count, rec.lambda_max, rec.min_h_C,
                  rec.min_pairwise);
    result.steps.push_back(std::move(rec));
    if (world.all_latched()) {
      result.outcome = RunOutcome::Success;
      break;
    }
    if (monitor.abort()) {
      result.outcome = RunOutcome::SafetyAbort;
      spdlog::error("t={} safety gate failed for {} consecutive steps, aborting", world.t(),
                    monitor.consecutive_failures());
      break;
    }
    if (at_cap) {
      result.outcome = RunOutcome::StepCap;
      break;
    }
  }
  result.all_latched = world.all_latched();
  result.audit = world.fabric().audit();
  result.deadlock_events = world.deadlock_events();
  for (std::size_t i = 1; i < world.agents().size(); ++i) {
    result.latch_steps.push_back(world.agents()[i].latch_step);
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace dmpc
