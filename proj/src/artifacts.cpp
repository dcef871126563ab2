#include "dmpc/artifacts.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace dmpc {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

std::string fmt_num(double v) {
  if (!std::isfinite(v)) return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

double num_or_inf(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return kInf;
  return j.at(key).get<double>();
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing artifact " + path);
  return in;
}

SolveStatus status_from_string(const std::string& s) {
  for (SolveStatus st : {SolveStatus::Converged, SolveStatus::MaxIterations, SolveStatus::Infeasible,
                         SolveStatus::NumericalFailure}) {
    if (to_string(st) == s) return st;
  }
  throw std::runtime_error("unknown solver status '" + s + "'");
}

}  // namespace

bool Certificate::lyapunov_ok() const {
  return constants && constants->certifiable && decrease_violations == 0 &&
         increase_violations == 0 && sandwich_violations == 0;
}

bool Certificate::pass() const {
  return collision.pass() && gate.all_pass() && (!lyapunov_applicable || lyapunov_ok());
}

std::vector<PositionFrame> frames_from_steps(const std::vector<StepRecord>& steps) {
  std::vector<PositionFrame> frames;
  for (const StepRecord& s : steps) {
    PositionFrame f;
    f.t = s.t;
    f.leader = s.agents.at(0).state.head<3>();
    for (std::size_t i = 1; i < s.agents.size(); ++i) {
      f.follower_ids.push_back(static_cast<int>(i));
      f.followers.push_back(s.agents[i].state.head<3>());
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

Certificate certify_run(const ScenarioConfig& config, const std::vector<StepRecord>& steps,
                        const std::vector<PositionFrame>& frames) {
  Certificate cert;
  cert.collision = verify_collision_free(frames, config.collision.params, config.funnel_params());

  std::vector<double> lambdas;
  for (const StepRecord& s : steps) lambdas.push_back(s.lambda_max);
  cert.gate = check_safety_gate(lambdas, config.safety_gate);
  cert.gate_threshold = config.safety_gate.threshold();

  cert.lyapunov_applicable =
      config.disturbance.kind == DisturbanceKind::None && config.comm.links.empty();

  std::vector<LyapunovSample> all;
  double min_initial = kInf;
  for (int i = 1; i <= config.followers.count; ++i) {
    FollowerLyapunov fl;
    fl.follower = i;
    for (const StepRecord& s : steps) {
      const AgentStepRecord& a = s.agents.at(static_cast<std::size_t>(i));
      if (!a.solved || a.latched) continue;
      fl.samples.push_back({s.t, a.cost, a.error_q, a.error_sq});
    }
    if (!fl.samples.empty() && fl.samples.front().t == 0) {
      min_initial = std::min(min_initial, fl.samples.front().error_q);
    }
    all.insert(all.end(), fl.samples.begin(), fl.samples.end());
    cert.lyapunov.push_back(std::move(fl));
  }
  for (const FollowerLyapunov& fl : cert.lyapunov) {
    cert.rho_hat = std::max(cert.rho_hat, estimate_rho(fl.samples));
  }
  if (config.analysis.gamma_bar) {
    cert.gamma_bar = *config.analysis.gamma_bar;
  } else if (min_initial > 0.0 && std::isfinite(min_initial)) {
    cert.gamma_bar = config.analysis.v_n_max / min_initial;
  }

  try {
    cert.constants = compute_constants(config.followers.Q, cert.rho_hat, config.horizon, cert.gamma_bar);
    if (!cert.constants->certifiable) {
      cert.constants_note = "alpha_N <= 0; N >= " + std::to_string(cert.constants->minimal_horizon) +
                            " would be required";
    }
  } catch (const ConfigError& e) {
    cert.constants_note = e.what();
  }
  ConvergenceConstants used = cert.constants.value_or(ConvergenceConstants{});
  if (!cert.constants) {
    used.gamma = std::max(cert.gamma_bar, 1.0);
    used.alpha_n = 0.0;
  }
  for (FollowerLyapunov& fl : cert.lyapunov) {
    fl.report = check_lyapunov_decrease(fl.samples, used, config.analysis.lyapunov_tolerance);
    cert.decrease_violations += fl.report.decrease_violations;
    cert.increase_violations += fl.report.increase_violations;
    cert.sandwich_violations += fl.report.sandwich_violations;
  }

  for (const StepRecord& s : steps) {
    for (const AgentStepRecord& a : s.agents) {
      if (a.degraded) ++cert.degraded_solves;
      if (a.solved) cert.max_slack = std::max(cert.max_slack, a.diagnostics.max_slack);
    }
  }
  return cert;
}

RunOutcome final_outcome(const RunResult& result, const Certificate& cert) {
  if (result.outcome == RunOutcome::Success && !cert.pass()) return RunOutcome::CertificateFailure;
  return result.outcome;
}

std::string trajectory_csv_header() {
  return "t,agent,role,px,py,pz,x3,x4,x5,x6,x7,x8,u0,u1,u2,u3,latched";
}

void write_trajectory_csv(const std::string& path, const ScenarioConfig& config,
                          const std::vector<StepRecord>& steps) {
  (void)config;
  std::ofstream out = open_out(path);
  out << trajectory_csv_header() << '\n';
  for (const StepRecord& s : steps) {
    for (const AgentStepRecord& a : s.agents) {
      out << s.t << ',' << agent_name(a.id) << ',' << (a.id == 0 ? "leader" : "follower");
      for (Eigen::Index k = 0; k < 9; ++k) {
        out << ',';
        if (k < a.state.size()) out << fmt_num(a.state[k]);
      }
      for (Eigen::Index k = 0; k < 4; ++k) {
        out << ',';
        if (k < a.input.size()) out << fmt_num(a.input[k]);
      }
      out << ',' << (a.latched ? 1 : 0) << '\n';
    }
  }
}

std::vector<PositionFrame> read_trajectory_frames(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string line;
  std::getline(in, line);
  if (line != trajectory_csv_header()) {
    throw std::runtime_error(path + ": unexpected header '" + line + "'");
  }
  std::vector<PositionFrame> frames;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 6) throw std::runtime_error(path + ":" + std::to_string(lineno) + ": too few columns");
    const int t = std::stoi(cells[0]);
    const Vec3 p(std::stod(cells[3]), std::stod(cells[4]), std::stod(cells[5]));
    if (frames.empty() || frames.back().t != t) {
      PositionFrame f;
      f.t = t;
      frames.push_back(f);
    }
    PositionFrame& f = frames.back();
    if (cells[2] == "leader") {
      f.leader = p;
    } else {
      f.follower_ids.push_back(agent_id_from_name(cells[1], std::numeric_limits<int>::max()));
      f.followers.push_back(p);
    }
  }
  return frames;
}

void write_steps_jsonl(const std::string& path, const std::vector<StepRecord>& steps) {
  std::ofstream out = open_out(path);
  for (const StepRecord& s : steps) {
    Json j;
    j["t"] = s.t;
    j["lambda_max"] = s.lambda_max;
    j["gate_pass"] = s.gate_pass;
    j["gate_margin"] = s.gate_margin;
    j["min_h_C"] = num(s.min_h_C);
    j["min_pairwise"] = num(s.min_pairwise);
    j["latched_count"] = s.latched_count;
    Json agents = Json::array();
    for (const AgentStepRecord& a : s.agents) {
      Json r;
      r["agent"] = agent_name(a.id);
      r["latched"] = a.latched;
      r["solved"] = a.solved;
      r["broadcast"] = a.broadcast;
      r["degraded"] = a.degraded;
      r["perturbed"] = a.perturbed;
      r["cost"] = a.cost;
      r["status"] = to_string(a.status);
      r["iterations"] = a.diagnostics.iterations;
      r["kkt_residual"] = num(a.diagnostics.kkt_residual);
      r["dynamics_defect"] = num(a.diagnostics.dynamics_defect);
      r["max_constraint_violation"] = a.diagnostics.max_constraint_violation;
      r["max_slack"] = a.diagnostics.max_slack;
      r["inertia_corrections"] = a.diagnostics.inertia_corrections;
      Json st = Json::object();
      for (const auto& [peer, k] : a.staleness) st[agent_name(peer)] = k;
      r["staleness"] = st;
      r["predictor_filled"] = a.predictor_filled;
      r["leader_lambda"] = a.leader_lambda;
      r["gate_distance"] = a.gate_distance;
      r["error_q"] = a.error_q;
      r["error_sq"] = a.error_sq;
      agents.push_back(r);
    }
    j["agents"] = agents;
    out << j.dump() << '\n';
  }
}

std::vector<StepRecord> read_steps_jsonl(const std::string& path) {
  std::ifstream in = open_in(path);
  std::vector<StepRecord> steps;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const Json j = Json::parse(line);
      StepRecord s;
      s.t = j.at("t").get<int>();
      s.lambda_max = j.at("lambda_max").get<double>();
      s.gate_pass = j.at("gate_pass").get<bool>();
      s.gate_margin = j.at("gate_margin").get<double>();
      s.min_h_C = num_or_inf(j, "min_h_C");
      s.min_pairwise = num_or_inf(j, "min_pairwise");
      s.latched_count = j.at("latched_count").get<int>();
      for (const Json& r : j.at("agents")) {
        AgentStepRecord a;
        a.id = agent_id_from_name(r.at("agent").get<std::string>(), std::numeric_limits<int>::max());
        a.latched = r.at("latched").get<bool>();
        a.solved = r.at("solved").get<bool>();
        a.broadcast = r.at("broadcast").get<bool>();
        a.degraded = r.at("degraded").get<bool>();
        a.perturbed = r.at("perturbed").get<bool>();
        a.cost = r.at("cost").get<double>();
        a.status = status_from_string(r.at("status").get<std::string>());
        a.diagnostics.iterations = r.at("iterations").get<int>();
        a.diagnostics.kkt_residual = num_or_inf(r, "kkt_residual");
        a.diagnostics.dynamics_defect = num_or_inf(r, "dynamics_defect");
        a.diagnostics.max_constraint_violation = r.at("max_constraint_violation").get<double>();
        a.diagnostics.max_slack = r.at("max_slack").get<double>();
        a.diagnostics.inertia_corrections = r.at("inertia_corrections").get<int>();
        for (auto it = r.at("staleness").begin(); it != r.at("staleness").end(); ++it) {
          a.staleness[agent_id_from_name(it.key(), std::numeric_limits<int>::max())] = it.value().get<int>();
        }
        a.predictor_filled = r.at("predictor_filled").get<int>();
        a.leader_lambda = r.at("leader_lambda").get<double>();
        a.gate_distance = r.at("gate_distance").get<double>();
        a.error_q = r.at("error_q").get<double>();
        a.error_sq = r.at("error_sq").get<double>();
        s.agents.push_back(std::move(a));
      }
      steps.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return steps;
}

void write_certificate_json(const std::string& path, const Certificate& cert) {
  Json j;
  j["schema_version"] = kArtifactSchemaVersion;
  j["pass"] = cert.pass();

  Json& c = j["collision"];
  c["pass"] = cert.collision.pass();
  c["tolerance"] = cert.collision.tolerance;
  c["min_pairwise_h_ij"] = num(cert.collision.min_pairwise);
  if (cert.collision.pair_t >= 0) {
    c["min_pairwise_at"] = {{"t", cert.collision.pair_t},
                            {"i", agent_name(cert.collision.pair_i)},
                            {"j", agent_name(cert.collision.pair_j)}};
  }
  Json hc = Json::object();
  for (std::size_t k = 0; k < cert.collision.follower_ids.size(); ++k) {
    hc[agent_name(cert.collision.follower_ids[k])] = {{"min_h_C", num(cert.collision.min_funnel[k])},
                                                      {"t", cert.collision.funnel_t[k]}};
  }
  c["funnel"] = hc;

  Json& g = j["safety_gate"];
  g["pass"] = cert.gate.all_pass();
  g["threshold_lambda_max"] = cert.gate_threshold;
  g["max_lambda"] = cert.gate.max_lambda();
  g["abort_step"] = cert.gate.abort_step ? Json(*cert.gate.abort_step) : Json(nullptr);
  int failures = 0;
  double min_margin = kInf;
  for (const SafetyGate& s : cert.gate.steps) {
    if (!s.pass) ++failures;
    min_margin = std::min(min_margin, s.margin);
  }
  g["failed_steps"] = failures;
  g["min_margin"] = num(min_margin);

  Json& l = j["lyapunov"];
  l["applicable"] = cert.lyapunov_applicable;
  l["ok"] = cert.lyapunov_ok();
  l["empirical"] = true;
  l["cost_convention"] = "sum over k = 0..N";
  l["rho_hat"] = cert.rho_hat;
  l["gamma_bar"] = cert.gamma_bar;
  if (cert.constants) {
    l["lambda_ratio"] = cert.constants->lambda_ratio;
    l["n0"] = cert.constants->n0;
    l["horizon"] = cert.constants->horizon;
    l["alpha_n"] = cert.constants->alpha_n;
    l["certifiable"] = cert.constants->certifiable;
    l["minimal_horizon"] = cert.constants->minimal_horizon;
  }
  if (!cert.constants_note.empty()) l["note"] = cert.constants_note;
  l["decrease_violations"] = cert.decrease_violations;
  l["increase_violations"] = cert.increase_violations;
  l["sandwich_violations"] = cert.sandwich_violations;
  Json per = Json::object();
  for (const FollowerLyapunov& fl : cert.lyapunov) {
    Json bad = Json::array();
    for (const LyapunovStep& s : fl.report.steps) {
      if (!s.decrease_ok || !s.nonincreasing || !s.sandwich_ok) bad.push_back(s.t);
    }
    per[agent_name(fl.follower)] = {{"samples", fl.samples.size()}, {"violating_steps", bad}};
  }
  l["followers"] = per;

  j["degraded_solves"] = cert.degraded_solves;
  j["max_slack"] = cert.max_slack;
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
}

void write_summary_json(const std::string& path, const ScenarioConfig& config,
                        const RunResult& result, const Certificate& cert, RunOutcome outcome) {
  Json j;
  j["schema_version"] = kArtifactSchemaVersion;
  j["scenario"] = config.name;
  j["seed"] = config.seed ? Json(*config.seed) : Json(nullptr);
  j["outcome"] = to_string(outcome);
  j["exit_code"] = exit_code(outcome);
  j["steps_executed"] = result.steps.size();
  j["final_t"] = result.steps.empty() ? 0 : result.steps.back().t;
  j["all_latched"] = result.all_latched;
  Json latch = Json::object();
  for (std::size_t i = 0; i < result.latch_steps.size(); ++i) {
    latch[agent_name(static_cast<int>(i) + 1)] =
        result.latch_steps[i] >= 0 ? Json(result.latch_steps[i]) : Json(nullptr);
  }
  j["latch_steps"] = latch;
  long filled = 0;
  for (const StepRecord& s : result.steps) {
    for (const AgentStepRecord& a : s.agents) filled += a.predictor_filled;
  }
  j["predictor_filled_total"] = filled;
  Json dl = Json::array();
  for (const DeadlockEvent& e : result.deadlock_events) {
    dl.push_back({{"t", e.t}, {"agent", agent_name(e.agent)}, {"offset", {e.offset.x(), e.offset.y()}}});
  }
  j["deadlock_events"] = dl;
  j["degraded_solves"] = cert.degraded_solves;
  j["certificate_pass"] = cert.pass();
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
}

void write_plot_tables(const std::string& dir, const std::vector<StepRecord>& steps) {
  std::ofstream top = open_out((fs::path(dir) / "plot_top.csv").string());
  std::ofstream d3 = open_out((fs::path(dir) / "plot_3d.csv").string());
  top << "t,agent,px,py\n";
  d3 << "t,agent,px,py,pz\n";
  for (const StepRecord& s : steps) {
    for (const AgentStepRecord& a : s.agents) {
      const std::string name = agent_name(a.id);
      top << s.t << ',' << name << ',' << fmt_num(a.state[0]) << ',' << fmt_num(a.state[1]) << '\n';
      d3 << s.t << ',' << name << ',' << fmt_num(a.state[0]) << ',' << fmt_num(a.state[1]) << ','
         << fmt_num(a.state[2]) << '\n';
    }
  }
}

RunOutcome write_run_artifacts(const std::string& dir, const ScenarioConfig& config,
                               const RunResult& result, bool plot_data) {
  fs::create_directories(dir);
  const fs::path root(dir);
  {
    std::ofstream out = open_out((root / "config.json").string());
    out << dump_config(config);
  }
  write_trajectory_csv((root / "trajectory.csv").string(), config, result.steps);
  write_steps_jsonl((root / "steps.jsonl").string(), result.steps);
  write_loss_audit((root / "loss_audit.csv").string(), result.audit, config.agent_names());
  const Certificate cert = certify_run(config, result.steps, frames_from_steps(result.steps));
  const RunOutcome outcome = final_outcome(result, cert);
  write_certificate_json((root / "certificate.json").string(), cert);
  write_summary_json((root / "summary.json").string(), config, result, cert, outcome);
  if (plot_data) write_plot_tables(dir, result.steps);
  return outcome;
}

std::string render_report(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw std::runtime_error("run directory '" + dir + "' does not exist");
  for (const char* f : {"config.json", "trajectory.csv", "steps.jsonl", "summary.json"}) {
    if (!fs::exists(root / f)) throw std::runtime_error("missing artifact " + (root / f).string());
  }
  const ScenarioConfig config = load_config((root / "config.json").string());
  const std::vector<StepRecord> steps = read_steps_jsonl((root / "steps.jsonl").string());
  const std::vector<PositionFrame> frames = read_trajectory_frames((root / "trajectory.csv").string());
  const Certificate cert = certify_run(config, steps, frames);
  Json summary;
  {
    std::ifstream in = open_in((root / "summary.json").string());
    try {
      summary = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("summary.json: " + std::string(e.what()));
    }
  }

  std::ostringstream os;
  char buf[256];
  os << "scenario: " << config.name;
  if (config.seed) os << " (seed " << *config.seed << ")";
  os << '\n';
  os << "outcome: " << summary.value("outcome", std::string("unknown")) << " (exit "
     << summary.value("exit_code", -1) << ") after " << steps.size() << " recorded steps\n";
  os << "latch steps:";
  for (auto it = summary["latch_steps"].begin(); it != summary["latch_steps"].end(); ++it) {
    os << ' ' << it.key() << '=' << (it.value().is_null() ? std::string("-") : it.value().dump());
  }
  os << '\n';
  std::snprintf(buf, sizeof(buf), "collision-free: %s (min h_ij = %.6g, min h_C = %.6g)\n",
                cert.collision.pass() ? "yes" : "no", cert.collision.min_pairwise,
                cert.collision.min_h_C());
  os << buf;
  for (std::size_t k = 0; k < cert.collision.follower_ids.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "  %s: min h_C = %.6g at t=%d\n",
                  agent_name(cert.collision.follower_ids[k]).c_str(), cert.collision.min_funnel[k],
                  cert.collision.funnel_t[k]);
    os << buf;
  }
  std::snprintf(buf, sizeof(buf), "safety gate: %s (lambda_max<%.4g vs %.4g)\n",
                cert.gate.all_pass() ? "pass" : "fail", cert.gate.max_lambda(), cert.gate_threshold);
  os << buf;
  std::snprintf(buf, sizeof(buf),
                "lyapunov violations: %d (decrease %d, increase %d, sandwich %d); certificate %s\n",
                cert.decrease_violations + cert.increase_violations + cert.sandwich_violations,
                cert.decrease_violations, cert.increase_violations, cert.sandwich_violations,
                cert.lyapunov_applicable ? "applies (nominal run)" : "informational (non-nominal run)");
  os << buf;
  std::snprintf(buf, sizeof(buf), "rho_hat estimate: %.6g (empirical), gamma_bar = %.6g", cert.rho_hat,
                cert.gamma_bar);
  os << buf;
  if (cert.constants) {
    std::snprintf(buf, sizeof(buf), ", N0 = %.6g, alpha_N = %.6g", cert.constants->n0,
                  cert.constants->alpha_n);
    os << buf;
  }
  os << '\n';
  if (!cert.constants_note.empty()) os << "  note: " << cert.constants_note << '\n';
  os << "predictor-filled reference entries: " << summary.value("predictor_filled_total", 0L) << '\n';
  os << "degraded solves: " << cert.degraded_solves << ", max slack: " << fmt_num(cert.max_slack) << '\n';
  os << "deadlock perturbations: " << summary["deadlock_events"].size() << '\n';
  return os.str();
}

}  // namespace dmpc
