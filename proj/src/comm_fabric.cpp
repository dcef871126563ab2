#include "dmpc/comm_fabric.hpp"

#include <fstream>

namespace dmpc {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

double hash_uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  h = splitmix64(h ^ c);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

void LossSchedule::validate(int agent_count) const {
  for (std::size_t r = 0; r < rules.size(); ++r) {
    const LinkRule& rule = rules[r];
    const std::string where = "comm.links[" + std::to_string(r) + "]";
    auto check_id = [&](int id, const char* field) {
      if (id != kAnyAgent && (id < 0 || id >= agent_count)) {
        throw ConfigError(where + "." + field + ": unknown agent id " + std::to_string(id));
      }
    };
    check_id(rule.from, "from");
    check_id(rule.to, "to");
    if (!(rule.drop_probability >= 0.0 && rule.drop_probability <= 1.0)) {
      throw ConfigError(where + ".drop_probability must lie in [0, 1]");
    }
    for (const BlackoutWindow& w : rule.windows) {
      if (w.start < 0) throw ConfigError(where + ": window start must be >= 0");
      if (w.end && *w.end < w.start) throw ConfigError(where + ": window end before start");
    }
  }
}

bool LossSchedule::delivers(int sender, int receiver, int t) const {
  for (std::size_t r = 0; r < rules.size(); ++r) {
    const LinkRule& rule = rules[r];
    if (!rule.matches(sender, receiver)) continue;
    for (const BlackoutWindow& w : rule.windows) {
      if (w.contains(t)) return false;
    }
    if (rule.drop_probability > 0.0) {
      const double draw = hash_uniform(seed ^ (0xC0FFEEULL + r), static_cast<std::uint64_t>(sender),
                                       static_cast<std::uint64_t>(receiver),
                                       static_cast<std::uint64_t>(t));
      if (draw < rule.drop_probability) return false;
    }
  }
  return true;
}

std::optional<int> DataCollection::staleness(int peer) const {
  const auto it = entries.find(peer);
  if (it == entries.end()) return std::nullopt;
  return t - it->second.birth;
}

std::optional<SharedTrajectory> DataCollection::get(int peer) const {
  const auto it = entries.find(peer);
  if (it == entries.end()) return std::nullopt;
  return it->second;
}

CommFabric::CommFabric(int agent_count, LossSchedule schedule)
    : agent_count_(agent_count), schedule_(std::move(schedule)) {
  if (agent_count < 1) throw ConfigError("comm fabric needs at least one agent");
  schedule_.validate(agent_count);
  inbox_.assign(static_cast<std::size_t>(agent_count),
                std::vector<std::vector<SharedTrajectory>>(static_cast<std::size_t>(agent_count)));
}

void CommFabric::broadcast(const SharedTrajectory& traj, int t) {
  if (traj.sender < 0 || traj.sender >= agent_count_) {
    throw ConfigError("broadcast: unknown sender " + std::to_string(traj.sender));
  }
  if (traj.birth != t) throw ConfigError("broadcast: trajectory birth must equal the send step");
  if (traj.points.empty()) throw ConfigError("broadcast: empty trajectory");
  for (int r = 0; r < agent_count_; ++r) {
    if (r == traj.sender) continue;
    const bool ok = schedule_.delivers(traj.sender, r, t);
    audit_.push_back({t, traj.sender, r, ok});
    if (!ok) continue;
    auto& box = inbox_[static_cast<std::size_t>(r)][static_cast<std::size_t>(traj.sender)];
    if (!box.empty() && box.back().birth >= t) {
      throw ConfigError("broadcast: sender " + std::to_string(traj.sender) +
                        " broadcast twice in one step");
    }
    box.push_back(traj);
  }
}

DataCollection CommFabric::collect(int agent, int t, bool include_current) const {
  if (agent < 0 || agent >= agent_count_) throw ConfigError("collect: unknown agent");
  DataCollection dc;
  dc.owner = agent;
  dc.t = t;
  const int latest_birth = include_current ? t : t - 1;
  const auto& row = inbox_[static_cast<std::size_t>(agent)];
  for (int s = 0; s < agent_count_; ++s) {
    const auto& box = row[static_cast<std::size_t>(s)];
    for (auto it = box.rbegin(); it != box.rend(); ++it) {
      if (it->birth <= latest_birth) {
        dc.entries.emplace(s, *it);
        break;
      }
    }
  }
  return dc;
}

void write_loss_audit(const std::string& path, const std::vector<DeliveryRecord>& audit,
                      const std::vector<std::string>& agent_names) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "t,link,status\n";
  for (const DeliveryRecord& r : audit) {
    out << r.t << ',' << agent_names.at(static_cast<std::size_t>(r.sender)) << "->"
        << agent_names.at(static_cast<std::size_t>(r.receiver)) << ','
        << (r.delivered ? "delivered" : "dropped") << '\n';
  }
}

}  // namespace dmpc
