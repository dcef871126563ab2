#pragma once

// Seeded random DOCP instances shared by the solver tests and the acceptance run.

#include "dmpc/docp_solver.hpp"

#include <cmath>
#include <random>

namespace dmpc::testing {

/// Follower above a moving platform with a funnel, one or two peers and a
/// landing reference. The initial state satisfies every constraint.
inline OcpSpec random_instance(std::uint64_t seed, Vec& x0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  OcpSpec spec;
  spec.horizon = 10 + static_cast<int>(seed % 11);
  Mat Q = Mat::Identity(9, 9);
  Q.diagonal().head<3>() << 10, 10, 5;
  spec.Q = Q;
  spec.R = 0.01 * Mat::Identity(4, 4);

  const Vec3 platform0(2 * u(rng), 2 * u(rng), 0.0);
  const Vec3 platform_vel(0.3 * u(rng), 0.3 * u(rng), 0.0);
  const Vec3 offset(1.0 * u(rng), 1.0 * u(rng), 0.0);
  const double dt = 0.2;

  x0 = Vec::Zero(9);
  x0.head<3>() = platform0 + Vec3(4 * u(rng), 4 * u(rng), 4.0 + 3.0 * std::abs(u(rng)));
  x0.segment<3>(3) << 0.5 * u(rng), 0.5 * u(rng), 0.3 * u(rng);
  x0.segment<3>(6) << 0.1 * u(rng), 0.1 * u(rng), 0.3 * u(rng);

  FunnelTerm funnel;
  for (int k = 0; k <= spec.horizon; ++k) {
    const Vec3 c = platform0 + k * dt * platform_vel;
    funnel.centers.push_back(c);
    Vec r = Vec::Zero(9);
    r.head<3>() = c + offset;
    spec.reference.push_back(r);
  }
  funnel.robust_radius.assign(static_cast<std::size_t>(spec.horizon) + 1, 0.05 * std::abs(u(rng)));
  spec.funnel = funnel;

  const int peers = 1 + static_cast<int>(seed % 2);
  for (int j = 0; j < peers; ++j) {
    PeerTerm p;
    p.peer_id = j + 2;
    Vec3 start;
    do {
      start = x0.head<3>() + Vec3(3 * u(rng), 3 * u(rng), 2 * u(rng));
    } while ((start - x0.head<3>()).norm() < 2.0);
    const Vec3 goal = start + Vec3(3 * u(rng), 3 * u(rng), std::abs(u(rng)));
    for (int k = 0; k <= spec.horizon; ++k) {
      const double s = static_cast<double>(k) / spec.horizon;
      p.positions.push_back((1 - s) * start + s * goal);
    }
    p.inflation = 0.1 * std::abs(u(rng));
    spec.peers.push_back(p);
  }
  return spec;
}

}  // namespace dmpc::testing
