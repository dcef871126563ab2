#pragma once

/**
 * @file comm_fabric.hpp
 * @brief Simulated broadcast of shared trajectories with per-link loss.
 *
 * A message broadcast at step t is visible to `collect` from step t + 1 on.
 * Each directed link can be blacked out over step windows and can drop
 * messages independently with a fixed probability. Drops are drawn from a
 * counter-based hash of (seed, sender, receiver, t), so the delivery pattern
 * does not depend on the order in which agents broadcast.
 */

#include "dmpc/ekf_predictor.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dmpc {

inline constexpr int kAnyAgent = -1;

/// Steps [start, end) with end = nullopt meaning "forever".
struct BlackoutWindow {
  int start = 0;
  std::optional<int> end;

  [[nodiscard]] bool contains(int t) const { return t >= start && (!end || t < *end); }
};

/// Rule for the directed links from -> to; kAnyAgent matches every agent.
struct LinkRule {
  int from = kAnyAgent;
  int to = kAnyAgent;
  std::vector<BlackoutWindow> windows;
  double drop_probability = 0.0;

  [[nodiscard]] bool matches(int sender, int receiver) const {
    return (from == kAnyAgent || from == sender) && (to == kAnyAgent || to == receiver);
  }
};

struct LossSchedule {
  std::vector<LinkRule> rules;
  std::uint64_t seed = 0;

  /// Throws ConfigError on malformed windows, probabilities or agent ids.
  void validate(int agent_count) const;

  /// False when a blackout window covers t or the i.i.d. draw drops the message.
  [[nodiscard]] bool delivers(int sender, int receiver, int t) const;
};

/// Uniform number in [0, 1) determined by the key alone.
[[nodiscard]] double hash_uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                                  std::uint64_t c);

struct DeliveryRecord {
  int t = 0;
  int sender = 0;
  int receiver = 0;
  bool delivered = false;
};

/// Newest trajectory per peer as seen by one agent at step t.
struct DataCollection {
  int owner = -1;
  int t = 0;
  std::map<int, SharedTrajectory> entries;

  [[nodiscard]] bool has(int peer) const { return entries.count(peer) > 0; }
  /// t - t_a, or nullopt for a peer never heard from.
  [[nodiscard]] std::optional<int> staleness(int peer) const;
  [[nodiscard]] std::optional<SharedTrajectory> get(int peer) const;
};

class CommFabric {
 public:
  CommFabric(int agent_count, LossSchedule schedule);

  /// Sends traj (born at t) to every other agent whose link is open at t.
  void broadcast(const SharedTrajectory& traj, int t);

  /// Newest trajectory per peer delivered strictly before t. With
  /// include_current, trajectories born at t are visible as well (used for
  /// the sequential first iteration).
  [[nodiscard]] DataCollection collect(int agent, int t, bool include_current = false) const;

  [[nodiscard]] const std::vector<DeliveryRecord>& audit() const { return audit_; }
  [[nodiscard]] int agent_count() const { return agent_count_; }
  [[nodiscard]] const LossSchedule& schedule() const { return schedule_; }

 private:
  int agent_count_;
  LossSchedule schedule_;
  // inbox_[receiver][sender] holds delivered trajectories in birth order.
  std::vector<std::vector<std::vector<SharedTrajectory>>> inbox_;
  std::vector<DeliveryRecord> audit_;
};

/// Writes the audit log as CSV with columns t,link,status.
void write_loss_audit(const std::string& path, const std::vector<DeliveryRecord>& audit,
                      const std::vector<std::string>& agent_names);

}  // namespace dmpc
