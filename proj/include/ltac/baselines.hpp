// SPDX-License-Identifier: Apache-2.0
//
// Comparison algorithms: per-slice admission control run independently in
// every slice (no control of switching), the channel-strength heuristic with
// externally supplied admitted counts, and an exhaustive optimum for tiny
// instances used as a test oracle.
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "ltac/beamforming.hpp"
#include "ltac/channel.hpp"
#include "ltac/model.hpp"
#include "ltac/sum_solvers.hpp"

namespace ltac {

struct PerSliceResult {
  RVector v;
  CMatrix W;
  SumResult sum;
  int deflations = 0;
};

/// Single-slice joint admission control and beamforming (no switching term),
/// quantized and repaired.
inline PerSliceResult solve_per_slice(const CMatrix& H, const ProblemConfig& cfg) {
  detail::require(H.rows() == cfg.num_antennas && H.cols() == cfg.num_users,
                  "solve_per_slice: channel shape does not match config");
  PerSliceResult out;
  out.sum = run_sum(detail::single_slice_graph(H, cfg), cfg);
  auto rep = repair_slice(H, out.sum.point.v.front(), cfg);
  out.v = std::move(rep.v);
  out.W = std::move(rep.W);
  out.deflations = rep.deflations;
  return out;
}

struct BaselineResult {
  HorizonPlan plan;
  SolveStats stats;
};

/// Per-slice solves, one per slice. The switching weight is never read.
inline BaselineResult solve_no_control(const ChannelSet& channels, const ProblemConfig& cfg) {
  ProblemConfig c = cfg;
  c.switch_weight = 0.0;
  c.validate();
  detail::require(channels.num_slices() == c.num_slices, "solve_no_control: slice count does not match config");
  BaselineResult out;
  for (const auto& H : channels.H) {
    auto r = solve_per_slice(H, c);
    out.plan.slack.push_back(std::move(r.v));
    out.plan.beams.push_back(std::move(r.W));
    out.stats.add(r.sum);
    out.stats.deflations += r.deflations;
  }
  return out;
}

/// Users of one slice by decreasing ||h_m||^2; equal gains keep index order.
inline std::vector<int> strength_order(const CMatrix& H) {
  std::vector<int> order(static_cast<std::size_t>(H.cols()));
  std::iota(order.begin(), order.end(), 0);
  const RVector gain = H.colwise().squaredNorm().transpose();
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return gain[a] > gain[b]; });
  return order;
}

struct ChannelStrengthResult {
  HorizonPlan plan;
  std::vector<int> admitted;  // realized count per slice, after deflation
  int deflations = 0;
};

/// Admits the K(t) strongest users of slice t. An infeasible set loses its
/// weakest member until exact beamforming succeeds.
inline ChannelStrengthResult channel_strength_plan(const ChannelSet& channels, const ProblemConfig& cfg,
                                                   const std::vector<int>& K) {
  cfg.validate();
  detail::require(channels.num_slices() == cfg.num_slices, "channel_strength_plan: slice count does not match config");
  detail::require(static_cast<int>(K.size()) == cfg.num_slices, "channel_strength_plan: need one count per slice");
  ChannelStrengthResult out;
  for (int t = 0; t < cfg.num_slices; ++t) {
    const auto& H = channels.H[static_cast<std::size_t>(t)];
    const int k = K[static_cast<std::size_t>(t)];
    detail::require(k >= 0 && k <= cfg.num_users, "channel_strength_plan: K(t) must lie in [0, M]");
    const auto order = strength_order(H);
    std::vector<int> admitted(order.begin(), order.begin() + k);
    std::optional<Beamforming> bf;
    while (!(bf = qos_beamforming(H, admitted, cfg.qos_target, cfg.noise_power, cfg.power_budget))) {
      admitted.pop_back();
      ++out.deflations;
    }
    StatusVector status(static_cast<std::size_t>(cfg.num_users), 0);
    for (int m : admitted) status[static_cast<std::size_t>(m)] = 1;
    out.plan.slack.push_back(detail::repaired_slack(H, bf->W, status, cfg));
    out.plan.beams.push_back(bf->W);
    out.admitted.push_back(static_cast<int>(admitted.size()));
  }
  return out;
}

struct BruteForceResult {
  double cost = std::numeric_limits<double>::infinity();
  std::vector<StatusVector> status;  // T x M, 1 = admitted
  HorizonPlan plan;
};

inline constexpr int kBruteForceMaxBits = 12;

/// Exhaustive minimum of the true cost over all admission patterns, with
/// exact minimum-power beamforming for every admitted set.
inline BruteForceResult brute_force_optimum(const ChannelSet& channels, const ProblemConfig& cfg,
                                            const std::optional<StatusVector>& initial_status = std::nullopt) {
  cfg.validate();
  const int M = cfg.num_users, T = cfg.num_slices;
  detail::require(channels.num_slices() == T, "brute_force_optimum: slice count does not match config");
  detail::require(M * T <= kBruteForceMaxBits, "brute_force_optimum: M*T must be <= 12");
  const std::uint32_t sets = 1u << M;
  const double inf = std::numeric_limits<double>::infinity();

  auto members = [M](std::uint32_t mask) {
    std::vector<int> out;
    for (int m = 0; m < M; ++m)
      if (mask >> m & 1u) out.push_back(m);
    return out;
  };
  // power[t][mask], inf when infeasible
  std::vector<std::vector<double>> power(static_cast<std::size_t>(T), std::vector<double>(sets, inf));
  for (int t = 0; t < T; ++t)
    for (std::uint32_t mask = 0; mask < sets; ++mask)
      if (auto bf = qos_beamforming(channels.H[static_cast<std::size_t>(t)], members(mask), cfg.qos_target,
                                    cfg.noise_power, cfg.power_budget))
        power[static_cast<std::size_t>(t)][mask] = bf->power;

  const bool anchor = initial_status && cfg.count_initial_switch;
  std::uint32_t init_mask = 0;
  if (anchor)
    for (int m = 0; m < M; ++m)
      if ((*initial_status)[static_cast<std::size_t>(m)]) init_mask |= 1u << m;

  BruteForceResult out;
  std::uint64_t best = 0;
  const std::uint64_t patterns = std::uint64_t{1} << (M * T);
  for (std::uint64_t p = 0; p < patterns; ++p) {
    double cost = 0.0;
    std::uint32_t prev = init_mask;
    for (int t = 0; t < T && cost < inf; ++t) {
      const auto mask = static_cast<std::uint32_t>(p >> (M * t)) & (sets - 1);
      cost += power[static_cast<std::size_t>(t)][mask];
      cost += cfg.reject_weight * (M - std::popcount(mask));
      if (t > 0 || anchor) cost += cfg.switch_weight * std::popcount(mask ^ prev);
      prev = mask;
    }
    if (cost < out.cost) {
      out.cost = cost;
      best = p;
    }
  }
  detail::require(std::isfinite(out.cost), "brute_force_optimum: no feasible pattern");

  out.plan.initial_status = initial_status;
  for (int t = 0; t < T; ++t) {
    const auto mask = static_cast<std::uint32_t>(best >> (M * t)) & (sets - 1);
    const auto& H = channels.H[static_cast<std::size_t>(t)];
    StatusVector s(static_cast<std::size_t>(M), 0);
    for (int m : members(mask)) s[static_cast<std::size_t>(m)] = 1;
    const auto bf = qos_beamforming(H, members(mask), cfg.qos_target, cfg.noise_power, cfg.power_budget);
    out.plan.slack.push_back(detail::repaired_slack(H, bf->W, s, cfg));
    out.plan.beams.push_back(bf->W);
    out.status.push_back(std::move(s));
  }
  return out;
}

}  // namespace ltac
