// SPDX-License-Identifier: Apache-2.0
//
// Small random convex subproblems on which the ADMM engine is compared with
// the interior-point reference.
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ltac/admm.hpp"
#include "ltac/channel.hpp"
#include "ltac/coupling_graph.hpp"
#include "ltac/reference_oracle.hpp"
#include "ltac/rng.hpp"

namespace ltac {

enum class Topology { star, chain };

struct OracleInstance {
  ProblemConfig cfg;
  CouplingGraph graph;
  std::vector<RVector> vt;
};

/// M in 1..4, N in 1..3; star: J in 1..3 with a random previous status;
/// chain: T in 1..3. References are 0 or uniform on [0, 2] per entry.
inline OracleInstance random_oracle_instance(Topology topo, std::uint64_t seed) {
  const rng::CounterStream st(seed, rng::Stream::test);
  const auto u = st.uniform2(0, 0, 0), u2 = st.uniform2(1, 0, 0);
  OracleInstance inst;
  const int M = 1 + static_cast<int>(u[0] * 4), N = 1 + static_cast<int>(u[1] * 3);
  const int K = 1 + static_cast<int>(u2[0] * 3);
  inst.cfg.num_users = M;
  inst.cfg.num_antennas = N;
  const auto scen = place_users(Scenario{}, M, seed);
  const auto cs = sample_horizon(scen, N, K, seed);
  if (topo == Topology::chain) {
    inst.cfg.num_slices = K;
    inst.graph = offline_chain_graph(cs.H, inst.cfg);
  } else {
    inst.cfg.num_slices = 1;
    StatusVector prev(static_cast<std::size_t>(M));
    for (int m = 0; m < M; ++m) prev[static_cast<std::size_t>(m)] = st.uniform2(2, static_cast<std::uint32_t>(m), 0)[0] < 0.5;
    inst.graph = online_star_graph(cs.H[0], sample_future(cs.variances, N, K, rng::derive_seed(seed, 1)), prev, inst.cfg);
  }
  for (int r = 0; r < inst.graph.num_nodes(); ++r) {
    RVector x(M);
    for (int m = 0; m < M; ++m) {
      const auto w = st.uniform2(10 + static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(m), 0);
      x[m] = w[0] < 0.5 ? 0.0 : 2.0 * w[1];
    }
    inst.vt.push_back(x);
  }
  return inst;
}

struct OracleComparison {
  double admm_objective = 0.0;
  double oracle_objective = 0.0;
  double relative_error = 0.0;  // |admm - oracle| / max(1, |oracle|)
  int admm_iterations = 0;
  bool admm_converged = false;
  double admm_seconds = 0.0;
  double oracle_seconds = 0.0;
};

/// Cold ADMM solve with cap `max_iter` against the reference solution.
inline OracleComparison compare_with_oracle(const OracleInstance& inst, int max_iter = 50000) {
  const auto& c = inst.cfg;
  const auto o = oracle::reference_oracle(inst.graph, inst.vt, c.kappa, c.qos_target, c.noise_power, c.power_budget);
  auto opts = admm::AdmmOptions::from(c.solver);
  opts.max_iter = max_iter;
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = admm::solve_convex(inst.graph, inst.vt, c, opts);
  OracleComparison out;
  out.admm_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.oracle_seconds = o.seconds;
  out.admm_objective = graph_convex_objective(inst.graph, r.point, inst.vt, c.kappa);
  out.oracle_objective = o.objective;
  out.relative_error = std::abs(out.admm_objective - o.objective) / std::max(1.0, std::abs(o.objective));
  out.admm_iterations = r.iterations;
  out.admm_converged = r.converged;
  return out;
}

}  // namespace ltac
