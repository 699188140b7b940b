// SPDX-License-Identifier: Apache-2.0
//
// Successive upper-bound minimization over a coupling graph, the offline
// (whole-horizon chain) and online (per-slice SAA star) solvers built on it,
// and the exact-feasibility repair applied to every final plan.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "ltac/admm.hpp"
#include "ltac/beamforming.hpp"
#include "ltac/channel.hpp"
#include "ltac/coupling_graph.hpp"
#include "ltac/model.hpp"
#include "ltac/rng.hpp"

namespace ltac {

/// u(v; v_bar) minus the smoothed rejection and switching terms it bounds,
/// for one user over a horizon: v, v_bar hold v_m(t), t = 0..T-1. Always >= 0,
/// and 0 at v = v_bar.
inline double sum_bound_gap(const RVector& v, const RVector& v_bar, const ProblemConfig& cfg) {
  detail::require(v.size() == v_bar.size() && v.size() >= 1, "sum_bound_gap: length mismatch");
  detail::require((v.array() >= 0).all() && (v_bar.array() >= 0).all(), "sum_bound_gap: arguments must be >= 0");
  const double k = cfg.kappa;
  auto inv = [k](double x) { return 1.0 / (1.0 + k * x); };
  // 1/(1+k v) >= 2/(1+k vb) - (1+k v)/(1+k vb)^2, tight at v = vb
  auto lower = [k](double x, double xb) {
    const double d = 1.0 + k * xb;
    return 2.0 / d - (1.0 + k * x) / (d * d);
  };
  double bound = 0.0, exact = 0.0;
  const Eigen::Index T = v.size();
  for (Eigen::Index t = 0; t < T; ++t) {
    bound += cfg.reject_weight * (1.0 - lower(v[t], v_bar[t]));
    exact += cfg.reject_weight * (1.0 - inv(v[t]));
    if (t + 1 < T) {
      bound += cfg.switch_weight * std::max(inv(v[t + 1]) - lower(v[t], v_bar[t]), inv(v[t]) - lower(v[t + 1], v_bar[t + 1]));
      exact += cfg.switch_weight * std::abs(inv(v[t]) - inv(v[t + 1]));
    }
  }
  return bound - exact;
}

struct SumTraceRow {
  int iteration = 0;
  double objective = 0.0;  // smoothed objective of the graph problem at the iterate
  bool accepted = true;
  int admm_iterations = 0;
  bool admm_converged = false;
  double primal = 0.0;
  double dual = 0.0;
};

struct SumResult {
  GraphPoint point;
  double objective = std::numeric_limits<double>::infinity();
  std::vector<SumTraceRow> trace;
  int sum_iterations = 0;
  long admm_iterations = 0;
  int inner_not_converged = 0;
  int rejected_steps = 0;
  bool converged = false;
};

/// Phase-aligns every node's beamformers and raises each slack to the
/// smallest value satisfying its cone, so the point is feasible for the
/// smoothed problem (the ADMM consensus is only approximate).
inline GraphPoint polish_point(const CouplingGraph& g, GraphPoint p, double gamma, double sigma2) {
  for (int r = 0; r < g.num_nodes(); ++r) {
    const auto ur = static_cast<std::size_t>(r);
    const auto& H = g.nodes[ur].H;
    align_phases(H, p.W[ur]);
    for (int m = 0; m < g.num_users; ++m)
      p.v[ur][m] = std::max({p.v[ur][m], required_slack(H, p.W[ur], gamma, sigma2, m), 0.0});
  }
  return p;
}

/// SUM from v_bar = 0: each step solves the convex bound at the previous
/// iterate by warm-started ADMM. The first (cold) step runs to convergence or
/// admm_max_iter, since it picks the basin that later steps refine; later
/// steps get at most sum_inner_max_iter iterations. A step that fails to
/// lower the smoothed objective is rejected and ends the loop, so the
/// accepted sequence stays monotone when the inner solve is inexact.
inline SumResult run_sum(const CouplingGraph& g, const ProblemConfig& cfg,
                         std::optional<admm::AdmmOptions> opts = std::nullopt) {
  const int first_cap = opts ? opts->max_iter : cfg.solver.admm_max_iter;
  if (!opts) {
    opts = admm::AdmmOptions::from(cfg.solver);
    opts->max_iter = std::min(cfg.solver.sum_inner_max_iter, first_cap);
  }
  admm::AdmmSolver solver(g, cfg.kappa, cfg.qos_target, cfg.noise_power, cfg.power_budget, *opts);
  SumResult out;
  std::vector<RVector> vt(static_cast<std::size_t>(g.num_nodes()), RVector::Zero(g.num_users));
  for (int k = 1; k <= cfg.solver.sum_max_iter; ++k) {
    solver.set_reference(vt);
    auto sol = solver.solve();
    int iters = sol.iterations;
    while (k == 1 && !sol.converged && iters < first_cap) {
      sol = solver.solve();
      iters += sol.iterations;
    }
    const GraphPoint p = polish_point(g, sol.point, cfg.qos_target, cfg.noise_power);
    const double obj = graph_smoothed_objective(g, p, cfg.kappa);
    out.admm_iterations += iters;
    if (!sol.converged) ++out.inner_not_converged;
    const bool accept = !(obj > out.objective);
    out.trace.push_back({k, obj, accept, iters, sol.converged, sol.residuals.primal_norm, sol.residuals.dual_norm});
    out.sum_iterations = k;
    if (!accept) {
      ++out.rejected_steps;
      break;
    }
    const double prev = out.objective;
    out.objective = obj;
    out.point = p;
    vt = p.v;
    if (std::isfinite(prev) && (prev - obj) <= cfg.solver.sum_tol * std::max(1.0, std::abs(prev))) {
      out.converged = true;
      break;
    }
  }
  return out;
}

/// Objective values of the accepted SUM iterates, in order.
inline std::vector<double> accepted_objectives(const SumResult& r) {
  std::vector<double> out;
  for (const auto& row : r.trace)
    if (row.accepted) out.push_back(row.objective);
  return out;
}

struct SolveStats {
  int sum_iterations = 0;
  long admm_iterations = 0;
  int inner_not_converged = 0;
  int rejected_steps = 0;
  int deflations = 0;

  void add(const SumResult& r) {
    sum_iterations += r.sum_iterations;
    admm_iterations += r.admm_iterations;
    inner_not_converged += r.inner_not_converged;
    rejected_steps += r.rejected_steps;
  }
};

namespace detail {

inline CouplingGraph single_slice_graph(const CMatrix& H, const ProblemConfig& cfg) {
  CouplingGraph g;
  g.num_users = cfg.num_users;
  g.num_antennas = cfg.num_antennas;
  g.nodes.push_back({H, 1.0, cfg.reject_weight});
  tether_isolated_nodes(g);
  g.validate();
  return g;
}

// Rejected users keep a slack of at least 1/kappa so that the slack-based
// status and the indicator-based cost agree; admitted users get v = 0.
inline RVector repaired_slack(const CMatrix& H, const CMatrix& W, const StatusVector& status, const ProblemConfig& cfg) {
  RVector v = RVector::Zero(cfg.num_users);
  for (int m = 0; m < cfg.num_users; ++m)
    if (!status[static_cast<std::size_t>(m)])
      v[m] = std::max(required_slack(H, W, cfg.qos_target, cfg.noise_power, m), 1.0 / cfg.kappa);
  return v;
}

}  // namespace detail

/// Exact re-beamforming of one slice for the quantized statuses of v. While
/// the admitted set is infeasible, the admitted user with the largest v is
/// dropped (ties: weakest channel, then lowest index).
struct SliceRepair {
  RVector v;
  CMatrix W;
  StatusVector status;
  int deflations = 0;
};

inline SliceRepair repair_slice(const CMatrix& H, const RVector& v, const ProblemConfig& cfg) {
  SliceRepair out;
  out.status = slice_status(v, cfg.kappa);
  for (;;) {
    std::vector<int> admitted;
    for (int m = 0; m < cfg.num_users; ++m)
      if (out.status[static_cast<std::size_t>(m)]) admitted.push_back(m);
    if (auto bf = qos_beamforming(H, admitted, cfg.qos_target, cfg.noise_power, cfg.power_budget)) {
      out.W = bf->W;
      break;
    }
    int drop = admitted.front();
    for (int m : admitted) {
      if (v[m] > v[drop] ||
          (v[m] == v[drop] && H.col(m).squaredNorm() < H.col(drop).squaredNorm()))
        drop = m;
    }
    out.status[static_cast<std::size_t>(drop)] = 0;
    ++out.deflations;
  }
  out.v = detail::repaired_slack(H, out.W, out.status, cfg);
  return out;
}

inline HorizonPlan repair_plan(const HorizonPlan& plan, const std::vector<CMatrix>& H, const ProblemConfig& cfg,
                               int* deflations = nullptr) {
  detail::require(plan.slack.size() == H.size(), "repair_plan: slice count mismatch");
  HorizonPlan out;
  out.initial_status = plan.initial_status;
  for (std::size_t t = 0; t < H.size(); ++t) {
    auto r = repair_slice(H[t], plan.slack[t], cfg);
    out.slack.push_back(r.v);
    out.beams.push_back(r.W);
    if (deflations) *deflations += r.deflations;
  }
  return out;
}

struct OfflineResult {
  HorizonPlan plan;      // repaired
  HorizonPlan relaxed;   // SUM output before repair
  SumResult sum;
  SolveStats stats;
};

/// Algorithm 1 on the whole horizon (chain graph).
inline OfflineResult solve_offline(const ChannelSet& channels, const ProblemConfig& cfg,
                                   const std::optional<StatusVector>& initial_status = std::nullopt) {
  cfg.validate();
  detail::require(channels.num_slices() == cfg.num_slices, "solve_offline: slice count does not match config");
  OfflineResult out;
  const auto g = offline_chain_graph(channels.H, cfg, initial_status);
  out.sum = run_sum(g, cfg);
  out.stats.add(out.sum);
  out.relaxed.slack = out.sum.point.v;
  out.relaxed.beams = out.sum.point.W;
  out.relaxed.initial_status = initial_status;
  out.plan = repair_plan(out.relaxed, channels.H, cfg, &out.stats.deflations);
  return out;
}

struct OnlineStep {
  RVector v;
  CMatrix W;
  SumResult sum;
};

/// Per-slice SAA problem: J future samples drawn from the per-user variances
/// (never from realized future channels), a star graph anchored at the
/// previous statuses, SUM on it; node 0's variables are returned.
inline OnlineStep solve_online_step(const StatusVector& prev_status, const CMatrix& H_t, const RVector& variances,
                                    int J, const ProblemConfig& cfg, std::uint64_t seed) {
  detail::require(J >= 0, "solve_online_step: J must be >= 0");
  const auto samples = sample_future(variances, cfg.num_antennas, J, seed);
  const auto g = online_star_graph(H_t, samples, prev_status, cfg);
  OnlineStep out;
  out.sum = run_sum(g, cfg);
  out.v = out.sum.point.v.front();
  out.W = out.sum.point.W.front();
  return out;
}

struct OnlineOptions {
  int samples = 9;                  // J
  bool terminal_future = false;     // sample beyond the last slice, as written in Algorithm 2
  std::optional<StatusVector> initial_status;  // default: nobody admitted before the horizon
};

struct OnlineResult {
  HorizonPlan plan;
  HorizonPlan relaxed;
  std::vector<SumResult> slices;
  SolveStats stats;
};

/// Algorithm 2: slice-by-slice SAA solves, threading the quantized status.
inline OnlineResult solve_online(const ChannelSet& channels, const ProblemConfig& cfg, const OnlineOptions& opts,
                                 std::uint64_t seed) {
  cfg.validate();
  detail::require(channels.num_slices() == cfg.num_slices, "solve_online: slice count does not match config");
  OnlineResult out;
  StatusVector prev = opts.initial_status.value_or(StatusVector(static_cast<std::size_t>(cfg.num_users), 0));
  out.relaxed.initial_status = prev;
  for (int t = 0; t < cfg.num_slices; ++t) {
    const bool last = t + 1 == cfg.num_slices;
    const int J = last && !opts.terminal_future ? 0 : opts.samples;
    auto step = solve_online_step(prev, channels.H[static_cast<std::size_t>(t)], channels.variances, J, cfg,
                                  rng::derive_seed(seed, static_cast<std::uint64_t>(t)));
    prev = slice_status(step.v, cfg.kappa);
    out.relaxed.slack.push_back(step.v);
    out.relaxed.beams.push_back(step.W);
    out.stats.add(step.sum);
    out.slices.push_back(std::move(step.sum));
  }
  out.plan = repair_plan(out.relaxed, channels.H, cfg, &out.stats.deflations);
  return out;
}

}  // namespace ltac
