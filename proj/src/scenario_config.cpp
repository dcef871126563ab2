#include "dmpc/scenario_config.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace dmpc {

using Json = nlohmann::ordered_json;

namespace {

Vec diag_vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) out[i++] = d;
  return out;
}

// Reads one JSON object, tracking consumed keys so that typos are reported.
class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("", "expected an object");
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw ConfigError("config field '" + where(key) + "': " + msg);
  }

  [[nodiscard]] std::string where(const std::string& key) const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  bool has(const std::string& key) {
    if (!j_.contains(key)) return false;
    seen_.insert(key);
    return !j_.at(key).is_null();
  }

  const Json& at(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const Json& v = at(key);
    if (!v.is_number()) fail(key, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(key, "expected a finite number");
    return d;
  }

  int integer(const std::string& key, int fallback) {
    if (!has(key)) return fallback;
    const Json& v = at(key);
    if (!v.is_number_integer()) fail(key, "expected an integer");
    return v.get<int>();
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const Json& v = at(key);
    if (!v.is_boolean()) fail(key, "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const Json& v = at(key);
    if (!v.is_string()) fail(key, "expected a string");
    return v.get<std::string>();
  }

  Vec vector(const std::string& key, const Vec& fallback, Eigen::Index size) {
    if (!has(key)) return fallback;
    return to_vector(at(key), key, size);
  }

  Vec to_vector(const Json& v, const std::string& key, Eigen::Index size) const {
    if (!v.is_array()) fail(key, "expected an array of numbers");
    if (size >= 0 && static_cast<Eigen::Index>(v.size()) != size) {
      fail(key, "expected " + std::to_string(size) + " numbers, got " + std::to_string(v.size()));
    }
    Vec out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) fail(key, "entry " + std::to_string(i) + " is not a number");
      out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
    }
    return out;
  }

  /// A flat array is a diagonal, an array of arrays a full matrix.
  Mat matrix(const std::string& key, const Mat& fallback, Eigen::Index n) {
    if (!has(key)) return fallback;
    const Json& v = at(key);
    if (!v.is_array()) fail(key, "expected a diagonal array or a matrix");
    if (!v.empty() && v[0].is_array()) {
      if (static_cast<Eigen::Index>(v.size()) != n) fail(key, "expected " + std::to_string(n) + " rows");
      Mat m(n, n);
      for (Eigen::Index r = 0; r < n; ++r) {
        m.row(r) = to_vector(v[static_cast<std::size_t>(r)], key, n).transpose();
      }
      return m;
    }
    return to_vector(v, key, n).asDiagonal();
  }

  Reader child(const std::string& key) {
    const Json& v = at(key);
    return Reader(v, where(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (seen_.count(it.key()) == 0) fail(it.key(), "unknown field");
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Json vec_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Json mat_json(const Mat& m) {
  if (m.size() == 0) return Json::array();
  const Mat off = m - Mat(m.diagonal().asDiagonal());
  if (off.isZero(0.0)) return vec_json(m.diagonal());
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vec_json(m.row(r).transpose()));
  return a;
}

std::string track_kind_name(LeaderTrackKind k) {
  switch (k) {
    case LeaderTrackKind::Static: return "static";
    case LeaderTrackKind::Line: return "line";
    case LeaderTrackKind::Decelerate: return "decelerate";
  }
  return "line";
}

std::string disturbance_name(DisturbanceKind k) {
  switch (k) {
    case DisturbanceKind::None: return "none";
    case DisturbanceKind::Seeded: return "seeded";
    case DisturbanceKind::Replay: return "replay";
  }
  return "none";
}

std::pair<int, int> line_and_column(const std::string& text, std::size_t byte) {
  int line = 1;
  int col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

Vec LeaderTrack::state_at(double time, const Vec3& origin) const {
  double s = 0.0;
  double v = 0.0;
  switch (kind) {
    case LeaderTrackKind::Static:
      break;
    case LeaderTrackKind::Line:
      s = speed * time;
      v = speed;
      break;
    case LeaderTrackKind::Decelerate: {
      const double t_stop = deceleration > 0.0 ? speed / deceleration : kInf;
      const double tau = std::min(time, t_stop);
      s = speed * tau - 0.5 * deceleration * tau * tau;
      v = speed - deceleration * tau;
      break;
    }
  }
  Vec x = Vec::Zero(6);
  x[0] = origin.x() + s * std::cos(heading);
  x[1] = origin.y() + s * std::sin(heading);
  x[2] = 0.0;
  x[3] = heading;
  x[4] = v;
  return x;
}

bool ScenarioConfig::stochastic() const {
  if (disturbance.kind == DisturbanceKind::Seeded) return true;
  if (predictor.measurement_sigma > 0.0) return true;
  return std::any_of(comm.links.begin(), comm.links.end(),
                     [](const LinkRule& r) { return r.drop_probability > 0.0; });
}

FunnelParams ScenarioConfig::funnel_params() const {
  FunnelParams fp;
  fp.safety_height = funnel.safety_height;
  fp.platform_radius = landing.platform_radius;
  fp.slope = funnel.slope;
  return fp;
}

std::vector<Vec3> ScenarioConfig::landing_offsets() const {
  if (!landing.offsets.empty()) return landing.offsets;
  return make_hexagon_offsets(followers.count, landing.offset_radius);
}

std::vector<Vec> ScenarioConfig::follower_initial_states() const {
  if (!followers.initial_states.empty()) return followers.initial_states;
  std::vector<Vec> states;
  for (int i = 1; i <= followers.count; ++i) {
    const double a = 2.0 * std::numbers::pi * i / followers.count;
    const Vec3 base = leader.initial_state.head<3>();
    states.push_back(FollowerModel::hover_state(
        base + Vec3(followers.ring_radius * std::cos(a), followers.ring_radius * std::sin(a),
                    followers.altitude)));
  }
  return states;
}

std::vector<std::string> ScenarioConfig::agent_names() const {
  std::vector<std::string> names;
  for (int id = 0; id < agent_count(); ++id) names.push_back(agent_name(id));
  return names;
}

FollowerParams ScenarioConfig::follower_params() const {
  FollowerParams p = followers.model;
  p.dt = dt;
  p.substeps = substeps;
  return p;
}

LeaderParams ScenarioConfig::leader_params() const {
  LeaderParams p = leader.model;
  p.dt = dt;
  p.substeps = substeps;
  return p;
}

std::string agent_name(int id) {
  if (id == kAnyAgent) return "*";
  return id == 0 ? "leader" : "f" + std::to_string(id);
}

int agent_id_from_name(const std::string& name, int follower_count) {
  if (name == "*") return kAnyAgent;
  if (name == "leader") return 0;
  if (name.size() > 1 && name[0] == 'f') {
    try {
      std::size_t used = 0;
      const int id = std::stoi(name.substr(1), &used);
      if (used == name.size() - 1 && id >= 1 && id <= follower_count) return id;
    } catch (const std::exception&) {
    }
  }
  throw ConfigError("unknown agent name '" + name + "'");
}

ValidationReport validate_config(const ScenarioConfig& c) {
  ValidationReport rep;
  auto err = [&rep](const std::string& m) { rep.errors.push_back(m); };
  auto guard = [&](auto&& fn) {
    try {
      fn();
    } catch (const ConfigError& e) {
      err(e.what());
    }
  };

  if (!(c.dt > 0.0)) err("dt must be > 0");
  if (c.substeps < 1) err("substeps must be >= 1");
  if (c.horizon < 1) err("horizon must be >= 1");
  if (!(c.epsilon > 0.0)) err("epsilon must be > 0");
  if (c.step_cap < 1) err("step_cap must be >= 1");
  if (c.threads < 0) err("threads must be >= 0");
  if (c.followers.count < 1) err("followers.count must be >= 1");
  if (c.stochastic() && !c.seed) err("seed: required because stochastic elements are enabled");

  auto check_pd = [&](const Mat& Q, Eigen::Index n, const std::string& what) {
    if (Q.rows() != n || Q.cols() != n) {
      err(what + " must be " + std::to_string(n) + "x" + std::to_string(n));
      return;
    }
    if (!Q.isApprox(Q.transpose(), 1e-12) || Eigen::LLT<Mat>(Q).info() != Eigen::Success) {
      err(what + " must be symmetric positive definite");
    }
  };
  check_pd(c.leader.Q, 6, "leader.Q");
  check_pd(c.followers.Q, 9, "followers.Q");
  if (c.followers.R.size() > 0 && (c.followers.R.rows() != 4 || c.followers.R.cols() != 4)) {
    err("followers.R must be 4x4");
  }
  if (c.leader.initial_state.size() != 6 || !c.leader.initial_state.allFinite()) {
    err("leader.initial_state must have 6 finite entries");
  } else if (c.leader.initial_state[2] != 0.0) {
    err("leader.initial_state: vertical position must be 0");
  }
  if (c.leader.track.speed < 0.0 || c.leader.track.deceleration < 0.0) {
    err("leader.track: speed and deceleration must be >= 0");
  }

  std::optional<FollowerModel> fmodel;
  guard([&] { fmodel.emplace(c.follower_params()); });
  guard([&] { LeaderModel lm(c.leader_params()); });

  if (!(c.funnel.safety_height > 0.0) || !(c.funnel.slope > 0.0)) {
    err("funnel: safety_height and slope must be > 0");
  }
  if (c.funnel.margin < 0.0 || c.funnel.robust_radius_cap < 0.0) {
    err("funnel: margin and robust_radius_cap must be >= 0");
  }
  guard([&] { c.collision.params.validate(); });
  if (c.collision.inflation_ceiling < 0.0) err("collision.inflation_ceiling must be >= 0");

  const PredictorConfig& p = c.predictor;
  if (!(p.measurement_sigma >= 0.0)) err("predictor.measurement_sigma must be >= 0");
  if (!(p.confidence > 0.0 && p.confidence < 1.0)) err("predictor.confidence must lie in (0, 1)");
  auto check_diag = [&](const Vec& v, Eigen::Index n, const std::string& what) {
    if (v.size() != n || (v.array() < 0.0).any() || !v.allFinite()) {
      err(what + " must have " + std::to_string(n) + " nonnegative entries");
    }
  };
  check_diag(p.leader_process, 6, "predictor.leader_process");
  check_diag(p.leader_initial, 6, "predictor.leader_initial");
  check_diag(p.peer_process, 6, "predictor.peer_process");
  check_diag(p.peer_initial, 6, "predictor.peer_initial");

  guard([&] { c.comm.links.empty() ? void() : LossSchedule{c.comm.links, 0}.validate(c.agent_count()); });
  guard([&] { c.solver.tolerance > 0.0 ? void() : throw ConfigError("solver.tolerance must be > 0"); });
  if (!(c.solver.dynamics_tolerance > 0.0) || c.solver.max_iterations < 1 ||
      !(c.solver.mu_init > 0.0) || !(c.solver.mu_min > 0.0) ||
      !(c.solver.slack_quadratic_weight > 0.0) || c.solver.slack_linear_weight < 0.0) {
    err("solver: invalid options");
  }
  guard([&] { c.safety_gate.validate(); });
  if (c.deadlock.stall_steps < 1 || c.deadlock.magnitude < 0.0 || c.deadlock.stall_threshold < 0.0) {
    err("deadlock: invalid parameters");
  }
  if (c.disturbance.kind == DisturbanceKind::Seeded) {
    check_diag(c.disturbance.leader_bound, 6, "disturbance.leader_bound");
    check_diag(c.disturbance.follower_bound, 9, "disturbance.follower_bound");
  }
  if (c.disturbance.kind == DisturbanceKind::Replay && c.disturbance.replay_file.empty()) {
    err("disturbance.replay_file is required for replay");
  }
  if (!(c.analysis.v_n_max > 0.0)) err("analysis.v_n_max must be > 0");
  if (c.analysis.gamma_bar && !(*c.analysis.gamma_bar >= 1.0)) err("analysis.gamma_bar must be >= 1");

  if (c.followers.count < 1 || !rep.errors.empty()) return rep;

  // Landing geometry.
  LandingGeometry geom;
  geom.platform_radius = c.landing.platform_radius;
  geom.safe_radius = c.landing.safe_radius;
  std::vector<Vec3> offsets;
  guard([&] { offsets = c.landing_offsets(); });
  geom.offsets = offsets;
  if (static_cast<int>(offsets.size()) != c.followers.count) {
    err("landing.offsets must list one offset per follower");
    return rep;
  }
  for (const GeometryViolation& v : validate_landing_geometry(geom, c.collision.params).violations) {
    std::string m = "infeasible geometry: ";
    if (v.kind == GeometryViolation::Kind::TooClose) {
      m += "landing offsets of " + agent_name(v.first + 1) + " and " + agent_name(v.second + 1) +
           " are " + std::to_string(v.value) + " m apart, not more than R = " +
           std::to_string(c.collision.params.min_distance);
    } else if (v.first < 0) {
      m += "safe radius must be smaller than the platform radius";
    } else {
      m += "landing offset of " + agent_name(v.first + 1) + " lies outside the platform margin";
    }
    err(m);
  }

  // Initial feasibility.
  std::vector<Vec> x0;
  guard([&] { x0 = c.follower_initial_states(); });
  if (static_cast<int>(x0.size()) != c.followers.count) {
    err("followers.initial_states must list one state per follower");
    return rep;
  }
  const Vec3 center = c.leader.initial_state.head<3>();
  const FunnelParams fp = c.funnel_params();
  for (int i = 0; i < c.followers.count; ++i) {
    const Vec& x = x0[static_cast<std::size_t>(i)];
    const std::string name = agent_name(i + 1);
    if (x.size() != 9 || !x.allFinite()) {
      err("initial state of " + name + " must have 9 finite entries");
      continue;
    }
    if (fmodel && !fmodel->state_box().contains(x)) err("initial state of " + name + " violates the state box");
    if (c.funnel.enabled && eval_h_C(x.head<3>(), center, fp) < 0.0) {
      err("infeasible geometry: initial state of " + name + " violates the funnel constraint");
    }
    for (int j = i + 1; j < c.followers.count; ++j) {
      const Vec& y = x0[static_cast<std::size_t>(j)];
      if (y.size() == 9 && c.collision.enabled &&
          eval_h_ij(x.head<3>(), y.head<3>(), c.collision.params) < 0.0) {
        err("infeasible geometry: initial states of " + name + " and " + agent_name(j + 1) + " collide");
      }
    }
  }

  // Convergence advisory.
  try {
    const double lr = eigenvalue_ratio(c.followers.Q);
    double gb = 0.0;
    if (c.analysis.gamma_bar) {
      gb = *c.analysis.gamma_bar;
    } else {
      std::vector<Vec> errors;
      for (int i = 0; i < c.followers.count; ++i) {
        Vec e = x0[static_cast<std::size_t>(i)];
        e.head<3>() -= center + offsets[static_cast<std::size_t>(i)];
        errors.push_back(e);
      }
      gb = gamma_bar_from_errors(c.followers.Q, c.analysis.v_n_max, errors);
    }
    const double n0 = gb * lr;
    std::ostringstream os;
    os << "N0 = " << n0 << (c.horizon > n0 ? " < " : " >= ") << "N = " << c.horizon
       << " (gamma_bar = " << gb << ", lambda_ratio = " << lr << ")";
    rep.advisories.push_back(os.str());
    std::ostringstream g;
    g << "safety gate threshold lambda_max < " << c.safety_gate.threshold();
    rep.advisories.push_back(g.str());
  } catch (const ConfigError& e) {
    rep.advisories.push_back(std::string("convergence constants unavailable: ") + e.what());
  }
  return rep;
}

ScenarioConfig parse_config(const std::string& text) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = line_and_column(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ConfigError("config parse error at line " + std::to_string(line) + ", column " +
                      std::to_string(col) + ": " + e.what());
  }
  ScenarioConfig c = paper_sec6_preset();
  c.comm.links.clear();
  c.seed.reset();
  Reader r(root, "");
  c.name = r.string("name", c.name);
  if (r.has("seed")) {
    const Json& s = r.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) {
      r.fail("seed", "expected a nonnegative integer");
    }
    c.seed = s.get<std::uint64_t>();
  }
  c.dt = r.number("dt", c.dt);
  c.substeps = r.integer("substeps", c.substeps);
  c.horizon = r.integer("horizon", c.horizon);
  c.epsilon = r.number("epsilon", c.epsilon);
  c.step_cap = r.integer("step_cap", c.step_cap);
  c.threads = r.integer("threads", c.threads);

  if (r.has("leader")) {
    Reader l = r.child("leader");
    c.leader.Q = l.matrix("Q", c.leader.Q, 6);
    c.leader.initial_state = l.vector("initial_state", c.leader.initial_state, 6);
    LeaderParams& m = c.leader.model;
    m.surge_damping = l.number("surge_damping", m.surge_damping);
    m.yaw_damping = l.number("yaw_damping", m.yaw_damping);
    m.max_surge = l.number("max_surge", m.max_surge);
    m.max_yaw_rate = l.number("max_yaw_rate", m.max_yaw_rate);
    m.max_surge_accel = l.number("max_surge_accel", m.max_surge_accel);
    m.max_yaw_accel = l.number("max_yaw_accel", m.max_yaw_accel);
    if (l.has("track")) {
      Reader t = l.child("track");
      const std::string kind = t.string("kind", track_kind_name(c.leader.track.kind));
      if (kind == "static") c.leader.track.kind = LeaderTrackKind::Static;
      else if (kind == "line") c.leader.track.kind = LeaderTrackKind::Line;
      else if (kind == "decelerate") c.leader.track.kind = LeaderTrackKind::Decelerate;
      else t.fail("kind", "expected static, line or decelerate");
      c.leader.track.speed = t.number("speed", c.leader.track.speed);
      c.leader.track.heading = t.number("heading", c.leader.track.heading);
      c.leader.track.deceleration = t.number("deceleration", c.leader.track.deceleration);
      t.finish();
    }
    l.finish();
  }

  if (r.has("followers")) {
    Reader f = r.child("followers");
    c.followers.count = f.integer("count", c.followers.count);
    c.followers.ring_radius = f.number("ring_radius", c.followers.ring_radius);
    c.followers.altitude = f.number("altitude", c.followers.altitude);
    c.followers.Q = f.matrix("Q", c.followers.Q, 9);
    c.followers.R = f.matrix("R", c.followers.R, 4);
    FollowerParams& m = c.followers.model;
    m.mass = f.number("mass", m.mass);
    m.gravity = f.number("gravity", m.gravity);
    if (f.has("drag")) m.drag = f.to_vector(f.at("drag"), "drag", 3);
    m.max_speed = f.number("max_speed", m.max_speed);
    m.max_tilt = f.number("max_tilt", m.max_tilt);
    m.thrust_fraction = f.number("thrust_fraction", m.thrust_fraction);
    m.max_rate = f.number("max_rate", m.max_rate);
    if (f.has("initial_states")) {
      const Json& a = f.at("initial_states");
      if (!a.is_array()) f.fail("initial_states", "expected an array of states");
      c.followers.initial_states.clear();
      for (std::size_t i = 0; i < a.size(); ++i) {
        c.followers.initial_states.push_back(
            f.to_vector(a[i], "initial_states[" + std::to_string(i) + "]", 9));
      }
    }
    f.finish();
  }

  if (r.has("landing")) {
    Reader l = r.child("landing");
    c.landing.platform_radius = l.number("platform_radius", c.landing.platform_radius);
    c.landing.safe_radius = l.number("safe_radius", c.landing.safe_radius);
    c.landing.offset_radius = l.number("offset_radius", c.landing.offset_radius);
    if (l.has("offsets")) {
      const Json& a = l.at("offsets");
      if (!a.is_array()) l.fail("offsets", "expected an array of 3-vectors");
      c.landing.offsets.clear();
      for (std::size_t i = 0; i < a.size(); ++i) {
        c.landing.offsets.push_back(l.to_vector(a[i], "offsets[" + std::to_string(i) + "]", 3));
      }
    }
    l.finish();
  }

  if (r.has("funnel")) {
    Reader f = r.child("funnel");
    c.funnel.enabled = f.boolean("enabled", c.funnel.enabled);
    c.funnel.safety_height = f.number("safety_height", c.funnel.safety_height);
    c.funnel.slope = f.number("slope", c.funnel.slope);
    c.funnel.margin = f.number("margin", c.funnel.margin);
    c.funnel.robust_radius_cap = f.number("robust_radius_cap", c.funnel.robust_radius_cap);
    f.finish();
  }

  if (r.has("collision")) {
    Reader f = r.child("collision");
    c.collision.enabled = f.boolean("enabled", c.collision.enabled);
    c.collision.params.min_distance = f.number("min_distance", c.collision.params.min_distance);
    c.collision.params.vertical_factor = f.number("vertical_factor", c.collision.params.vertical_factor);
    c.collision.inflation_ceiling = f.number("inflation_ceiling", c.collision.inflation_ceiling);
    f.finish();
  }

  if (r.has("predictor")) {
    Reader p = r.child("predictor");
    PredictorConfig& pc = c.predictor;
    pc.measurement_sigma = p.number("measurement_sigma", pc.measurement_sigma);
    pc.confidence = p.number("confidence", pc.confidence);
    pc.leader_process = p.vector("leader_process", pc.leader_process, 6);
    pc.leader_initial = p.vector("leader_initial", pc.leader_initial, 6);
    pc.peer_process = p.vector("peer_process", pc.peer_process, 6);
    pc.peer_initial = p.vector("peer_initial", pc.peer_initial, 6);
    p.finish();
  }

  if (r.has("comm")) {
    Reader cm = r.child("comm");
    if (cm.has("links")) {
      const Json& links = cm.at("links");
      if (!links.is_array()) cm.fail("links", "expected an array of link rules");
      for (std::size_t i = 0; i < links.size(); ++i) {
        Reader lr(links[i], cm.where("links[" + std::to_string(i) + "]"));
        LinkRule rule;
        try {
          rule.from = agent_id_from_name(lr.string("from", "*"), c.followers.count);
          rule.to = agent_id_from_name(lr.string("to", "*"), c.followers.count);
        } catch (const ConfigError& e) {
          lr.fail("", e.what());
        }
        rule.drop_probability = lr.number("drop_probability", 0.0);
        if (lr.has("windows")) {
          const Json& ws = lr.at("windows");
          if (!ws.is_array()) lr.fail("windows", "expected an array of [start, end] pairs");
          for (const Json& w : ws) {
            if (!w.is_array() || w.size() != 2 || !w[0].is_number_integer() ||
                !(w[1].is_null() || w[1].is_number_integer())) {
              lr.fail("windows", "each window is [start, end] with end an integer or null");
            }
            BlackoutWindow bw;
            bw.start = w[0].get<int>();
            if (!w[1].is_null()) bw.end = w[1].get<int>();
            rule.windows.push_back(bw);
          }
        }
        lr.finish();
        c.comm.links.push_back(rule);
      }
    }
    cm.finish();
  }

  if (r.has("solver")) {
    Reader s = r.child("solver");
    SolverOptions& o = c.solver;
    o.tolerance = s.number("tolerance", o.tolerance);
    o.dynamics_tolerance = s.number("dynamics_tolerance", o.dynamics_tolerance);
    o.max_iterations = s.integer("max_iterations", o.max_iterations);
    o.mu_init = s.number("mu_init", o.mu_init);
    o.mu_min = s.number("mu_min", o.mu_min);
    o.soft_constraints = s.boolean("soft_constraints", o.soft_constraints);
    o.slack_linear_weight = s.number("slack_linear_weight", o.slack_linear_weight);
    o.slack_quadratic_weight = s.number("slack_quadratic_weight", o.slack_quadratic_weight);
    o.regularization = s.number("regularization", o.regularization);
    s.finish();
  }

  if (r.has("safety_gate")) {
    Reader g = r.child("safety_gate");
    c.safety_gate.confidence = g.number("confidence", c.safety_gate.confidence);
    c.safety_gate.safe_radius = g.number("safe_radius", c.safety_gate.safe_radius);
    c.safety_gate.dwell = g.integer("dwell", c.safety_gate.dwell);
    g.finish();
  }
  c.safety_gate.platform_radius = c.landing.platform_radius;

  if (r.has("deadlock")) {
    Reader d = r.child("deadlock");
    c.deadlock.enabled = d.boolean("enabled", c.deadlock.enabled);
    c.deadlock.stall_threshold = d.number("stall_threshold", c.deadlock.stall_threshold);
    c.deadlock.stall_steps = d.integer("stall_steps", c.deadlock.stall_steps);
    c.deadlock.magnitude = d.number("magnitude", c.deadlock.magnitude);
    d.finish();
  }

  if (r.has("disturbance")) {
    Reader d = r.child("disturbance");
    const std::string kind = d.string("kind", disturbance_name(c.disturbance.kind));
    if (kind == "none") c.disturbance.kind = DisturbanceKind::None;
    else if (kind == "seeded") c.disturbance.kind = DisturbanceKind::Seeded;
    else if (kind == "replay") c.disturbance.kind = DisturbanceKind::Replay;
    else d.fail("kind", "expected none, seeded or replay");
    c.disturbance.leader_bound = d.vector("leader_bound", c.disturbance.leader_bound, 6);
    c.disturbance.follower_bound = d.vector("follower_bound", c.disturbance.follower_bound, 9);
    c.disturbance.replay_file = d.string("replay_file", c.disturbance.replay_file);
    d.finish();
  }

  if (r.has("analysis")) {
    Reader a = r.child("analysis");
    c.analysis.v_n_max = a.number("v_n_max", c.analysis.v_n_max);
    if (a.has("gamma_bar")) {
      c.analysis.gamma_bar = a.number("gamma_bar", 1.0);
    } else {
      c.analysis.gamma_bar.reset();
    }
    c.analysis.lyapunov_tolerance = a.number("lyapunov_tolerance", c.analysis.lyapunov_tolerance);
    a.finish();
  }
  r.finish();
  return c;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const ScenarioConfig& c) {
  Json j;
  j["name"] = c.name;
  if (c.seed) j["seed"] = *c.seed;
  j["dt"] = c.dt;
  j["substeps"] = c.substeps;
  j["horizon"] = c.horizon;
  j["epsilon"] = c.epsilon;
  j["step_cap"] = c.step_cap;
  j["threads"] = c.threads;

  Json& l = j["leader"];
  l["Q"] = mat_json(c.leader.Q);
  l["initial_state"] = vec_json(c.leader.initial_state);
  l["surge_damping"] = c.leader.model.surge_damping;
  l["yaw_damping"] = c.leader.model.yaw_damping;
  l["max_surge"] = c.leader.model.max_surge;
  l["max_yaw_rate"] = c.leader.model.max_yaw_rate;
  l["max_surge_accel"] = c.leader.model.max_surge_accel;
  l["max_yaw_accel"] = c.leader.model.max_yaw_accel;
  l["track"] = {{"kind", track_kind_name(c.leader.track.kind)},
                {"speed", c.leader.track.speed},
                {"heading", c.leader.track.heading},
                {"deceleration", c.leader.track.deceleration}};

  Json& f = j["followers"];
  f["count"] = c.followers.count;
  f["ring_radius"] = c.followers.ring_radius;
  f["altitude"] = c.followers.altitude;
  f["Q"] = mat_json(c.followers.Q);
  if (c.followers.R.size() > 0) f["R"] = mat_json(c.followers.R);
  f["mass"] = c.followers.model.mass;
  f["gravity"] = c.followers.model.gravity;
  f["drag"] = vec_json(c.followers.model.drag);
  f["max_speed"] = c.followers.model.max_speed;
  f["max_tilt"] = c.followers.model.max_tilt;
  f["thrust_fraction"] = c.followers.model.thrust_fraction;
  f["max_rate"] = c.followers.model.max_rate;
  if (!c.followers.initial_states.empty()) {
    Json a = Json::array();
    for (const Vec& x : c.followers.initial_states) a.push_back(vec_json(x));
    f["initial_states"] = a;
  }

  Json& ld = j["landing"];
  ld["platform_radius"] = c.landing.platform_radius;
  ld["safe_radius"] = c.landing.safe_radius;
  ld["offset_radius"] = c.landing.offset_radius;
  if (!c.landing.offsets.empty()) {
    Json a = Json::array();
    for (const Vec3& o : c.landing.offsets) a.push_back(vec_json(o));
    ld["offsets"] = a;
  }

  j["funnel"] = {{"enabled", c.funnel.enabled},
                 {"safety_height", c.funnel.safety_height},
                 {"slope", c.funnel.slope},
                 {"margin", c.funnel.margin},
                 {"robust_radius_cap", c.funnel.robust_radius_cap}};
  j["collision"] = {{"enabled", c.collision.enabled},
                    {"min_distance", c.collision.params.min_distance},
                    {"vertical_factor", c.collision.params.vertical_factor},
                    {"inflation_ceiling", c.collision.inflation_ceiling}};
  j["predictor"] = {{"measurement_sigma", c.predictor.measurement_sigma},
                    {"confidence", c.predictor.confidence},
                    {"leader_process", vec_json(c.predictor.leader_process)},
                    {"leader_initial", vec_json(c.predictor.leader_initial)},
                    {"peer_process", vec_json(c.predictor.peer_process)},
                    {"peer_initial", vec_json(c.predictor.peer_initial)}};

  Json links = Json::array();
  for (const LinkRule& rule : c.comm.links) {
    Json lr;
    lr["from"] = agent_name(rule.from);
    lr["to"] = agent_name(rule.to);
    Json ws = Json::array();
    for (const BlackoutWindow& w : rule.windows) {
      ws.push_back(Json::array({w.start, w.end ? Json(*w.end) : Json(nullptr)}));
    }
    lr["windows"] = ws;
    lr["drop_probability"] = rule.drop_probability;
    links.push_back(lr);
  }
  j["comm"] = {{"links", links}};

  const SolverOptions& o = c.solver;
  j["solver"] = {{"tolerance", o.tolerance},
                 {"dynamics_tolerance", o.dynamics_tolerance},
                 {"max_iterations", o.max_iterations},
                 {"mu_init", o.mu_init},
                 {"mu_min", o.mu_min},
                 {"soft_constraints", o.soft_constraints},
                 {"slack_linear_weight", o.slack_linear_weight},
                 {"slack_quadratic_weight", o.slack_quadratic_weight},
                 {"regularization", o.regularization}};
  j["safety_gate"] = {{"confidence", c.safety_gate.confidence},
                      {"safe_radius", c.safety_gate.safe_radius},
                      {"dwell", c.safety_gate.dwell}};
  j["deadlock"] = {{"enabled", c.deadlock.enabled},
                   {"stall_threshold", c.deadlock.stall_threshold},
                   {"stall_steps", c.deadlock.stall_steps},
                   {"magnitude", c.deadlock.magnitude}};
  Json d;
  d["kind"] = disturbance_name(c.disturbance.kind);
  if (c.disturbance.leader_bound.size() > 0) d["leader_bound"] = vec_json(c.disturbance.leader_bound);
  if (c.disturbance.follower_bound.size() > 0) d["follower_bound"] = vec_json(c.disturbance.follower_bound);
  if (!c.disturbance.replay_file.empty()) d["replay_file"] = c.disturbance.replay_file;
  j["disturbance"] = d;
  Json a;
  a["v_n_max"] = c.analysis.v_n_max;
  if (c.analysis.gamma_bar) a["gamma_bar"] = *c.analysis.gamma_bar;
  a["lyapunov_tolerance"] = c.analysis.lyapunov_tolerance;
  j["analysis"] = a;
  return j.dump(2) + "\n";
}

ScenarioConfig paper_sec6_preset() {
  ScenarioConfig c;
  c.name = "paper-sec6";
  c.seed = 6;
  c.dt = 0.2;
  c.horizon = 20;
  c.epsilon = 0.1;
  c.step_cap = 40;

  c.leader.Q = diag_vec({10, 10, 10, 1, 1, 1}).asDiagonal();
  c.leader.initial_state = Vec::Zero(6);
  c.leader.track.kind = LeaderTrackKind::Line;
  c.leader.track.speed = 0.3;
  c.leader.track.heading = 0.0;

  c.followers.count = 6;
  c.followers.ring_radius = 5.0;
  c.followers.altitude = 10.0;
  c.followers.Q = diag_vec({10, 10, 5, 1, 1, 1, 1, 1, 1}).asDiagonal();

  c.landing.platform_radius = 2.5;
  c.landing.safe_radius = 0.5;
  c.landing.offset_radius = 1.5;

  c.collision.params.min_distance = 1.0;
  c.collision.params.vertical_factor = 1.0;
  c.collision.inflation_ceiling = 0.25;

  c.predictor.measurement_sigma = 0.05;
  c.predictor.confidence = 0.95;
  c.predictor.leader_process = diag_vec({1e-5, 1e-5, 0.0, 1e-4, 4e-4, 1e-4});
  c.predictor.leader_initial = diag_vec({2.5e-3, 2.5e-3, 0.0, 0.05, 4e-3, 1e-3});
  c.predictor.peer_process = diag_vec({1e-4, 1e-4, 1e-4, 1e-2, 1e-2, 1e-2});
  c.predictor.peer_initial = diag_vec({2.5e-3, 2.5e-3, 2.5e-3, 1.0, 1.0, 1.0});

  LinkRule leader_mute;
  leader_mute.from = 0;
  leader_mute.windows.push_back({0, std::nullopt});
  LinkRule f1_out;
  f1_out.from = 1;
  f1_out.windows.push_back({10, std::nullopt});
  LinkRule f1_in;
  f1_in.to = 1;
  f1_in.windows.push_back({10, std::nullopt});
  c.comm.links = {leader_mute, f1_out, f1_in};

  c.safety_gate.confidence = 0.95;
  c.safety_gate.platform_radius = 2.5;
  c.safety_gate.safe_radius = 1.5;
  c.safety_gate.dwell = 5;

  c.analysis.v_n_max = 240.0;
  c.analysis.gamma_bar = 1.99;
  return c;
}

ScenarioConfig preset_by_name(const std::string& name) {
  if (name == "paper-sec6") return paper_sec6_preset();
  throw ConfigError("unknown preset '" + name + "' (available: paper-sec6)");
}

}  // namespace dmpc
