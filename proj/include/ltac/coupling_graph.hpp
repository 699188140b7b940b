// SPDX-License-Identifier: Apache-2.0
//
// Coupling graph of the convex SUM subproblem. Nodes are slice instances
// (a channel matrix with power and rejection weights); edges are switching
// terms |1/(1+k v_tail) - 1/(1+k v_head)| between two nodes, or between a node
// and a fixed binary status (anchor edges). The online per-slice problem is a
// star around the current slice; the offline problem is a chain over slices.
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "ltac/core.hpp"
#include "ltac/model.hpp"

namespace ltac {

struct GraphNode {
  CMatrix H;                   // N x M
  double power_weight = 1.0;   // weight of ||W||_F^2
  double reject_weight = 0.0;  // weight of the smoothed rejection count
};

struct GraphEdge {
  static constexpr int kAnchor = -1;

  int tail = 0;
  int head = kAnchor;  // kAnchor: compare against `anchor` instead of a node
  double weight = 0.0;
  StatusVector anchor;  // binary, anchor edges only

  bool is_anchor() const { return head == kAnchor; }
};

/// Node r's view of one edge: either as tail (duplicates x, y) or head (z, s).
struct Incidence {
  int edge = 0;
  bool tail = true;
};

struct CouplingGraph {
  int num_users = 0;
  int num_antennas = 0;
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }

  /// Incident edge endpoints of node r in edge order.
  std::vector<Incidence> incidences(int r) const {
    std::vector<Incidence> out;
    for (int d = 0; d < num_edges(); ++d) {
      if (edges[static_cast<std::size_t>(d)].tail == r) out.push_back({d, true});
      if (edges[static_cast<std::size_t>(d)].head == r) out.push_back({d, false});
    }
    return out;
  }

  int degree(int r) const { return static_cast<int>(incidences(r).size()); }

  void validate() const {
    detail::require(num_users >= 1 && num_antennas >= 1, "CouplingGraph: empty dimensions");
    detail::require(!nodes.empty(), "CouplingGraph: no nodes");
    for (const auto& n : nodes) {
      detail::require(n.H.rows() == num_antennas && n.H.cols() == num_users, "CouplingGraph: node channel shape");
      detail::require(n.power_weight > 0, "CouplingGraph: power weight must be positive");
      detail::require(n.reject_weight >= 0, "CouplingGraph: rejection weight must be nonnegative");
    }
    for (const auto& e : edges) {
      detail::require(e.tail >= 0 && e.tail < num_nodes(), "CouplingGraph: edge tail out of range");
      detail::require(e.is_anchor() || (e.head >= 0 && e.head < num_nodes() && e.head != e.tail),
                      "CouplingGraph: edge head out of range");
      detail::require(e.weight >= 0, "CouplingGraph: edge weight must be nonnegative");
      if (e.is_anchor()) {
        detail::require(e.anchor.size() == static_cast<std::size_t>(num_users), "CouplingGraph: anchor length");
        for (int s : e.anchor) detail::require(s == 0 || s == 1, "CouplingGraph: anchor must be binary");
      }
    }
    for (int r = 0; r < num_nodes(); ++r)
      if (degree(r) == 0)
        throw InvalidArgument("CouplingGraph: node " + std::to_string(r) +
                              " has no incident duplicates; its slack would be unconstrained");
  }
};

namespace detail {

/// Zero-weight anchor that only ties the node's slack to x >= 1 (v >= 0).
inline void tether_isolated_nodes(CouplingGraph& g) {
  for (int r = 0; r < g.num_nodes(); ++r)
    if (g.degree(r) == 0)
      g.edges.push_back({r, GraphEdge::kAnchor, 0.0, StatusVector(static_cast<std::size_t>(g.num_users), 1)});
}

}  // namespace detail

/// Star graph of the per-slice SAA problem: node 0 is the current slice,
/// nodes 1..J are the future samples, each joined to node 0 with weight
/// lambda2/J, plus an anchor on node 0 (weight lambda2) holding the previous
/// binary statuses. Power and rejection weights are 1, lambda1 on node 0 and
/// 1/J, lambda1/J on samples.
inline CouplingGraph online_star_graph(const CMatrix& current, const std::vector<CMatrix>& samples,
                                       const StatusVector& previous_status, const ProblemConfig& cfg) {
  CouplingGraph g;
  g.num_users = cfg.num_users;
  g.num_antennas = cfg.num_antennas;
  const int J = static_cast<int>(samples.size());
  g.nodes.push_back({current, 1.0, cfg.reject_weight});
  for (const auto& Hs : samples) g.nodes.push_back({Hs, 1.0 / J, cfg.reject_weight / J});
  for (int j = 1; j <= J; ++j) g.edges.push_back({0, j, cfg.switch_weight / J, {}});
  g.edges.push_back({0, GraphEdge::kAnchor, cfg.switch_weight, previous_status});
  g.validate();
  return g;
}

/// Chain graph over the whole horizon (the offline subproblem). An anchor on
/// the first slice is added only when initial switches are charged.
inline CouplingGraph offline_chain_graph(const std::vector<CMatrix>& H, const ProblemConfig& cfg,
                                         const std::optional<StatusVector>& initial_status = std::nullopt) {
  CouplingGraph g;
  g.num_users = cfg.num_users;
  g.num_antennas = cfg.num_antennas;
  for (const auto& Ht : H) g.nodes.push_back({Ht, 1.0, cfg.reject_weight});
  for (int t = 0; t + 1 < g.num_nodes(); ++t) g.edges.push_back({t, t + 1, cfg.switch_weight, {}});
  if (initial_status && cfg.count_initial_switch)
    g.edges.push_back({0, GraphEdge::kAnchor, cfg.switch_weight, *initial_status});
  detail::tether_isolated_nodes(g);
  g.validate();
  return g;
}

/// Per-node slack and beamformers of a point of the graph problem.
struct GraphPoint {
  std::vector<CMatrix> W;
  std::vector<RVector> v;
};

/// Smoothed (nonconvex) objective of the graph problem.
inline double graph_smoothed_objective(const CouplingGraph& g, const GraphPoint& p, double kappa) {
  auto inv = [kappa](double v) { return 1.0 / (1.0 + kappa * v); };
  double total = 0.0;
  for (int r = 0; r < g.num_nodes(); ++r) {
    const auto& n = g.nodes[static_cast<std::size_t>(r)];
    total += n.power_weight * p.W[static_cast<std::size_t>(r)].squaredNorm();
    for (int m = 0; m < g.num_users; ++m) total += n.reject_weight * (1.0 - inv(p.v[static_cast<std::size_t>(r)][m]));
  }
  for (const auto& e : g.edges)
    for (int m = 0; m < g.num_users; ++m) {
      const double tail = inv(p.v[static_cast<std::size_t>(e.tail)][m]);
      const double head = e.is_anchor() ? e.anchor[static_cast<std::size_t>(m)]
                                        : inv(p.v[static_cast<std::size_t>(e.head)][m]);
      total += e.weight * std::abs(tail - head);
    }
  return total;
}

/// Lower envelope value of the epigraph variable a for edge e, user m: the
/// max of the two linearized switching bounds at reference point vt.
inline double switch_bound(const GraphEdge& e, int m, const std::vector<RVector>& v, const std::vector<RVector>& vt,
                           double kappa) {
  const auto um = static_cast<std::size_t>(m);
  const double vtail = v[static_cast<std::size_t>(e.tail)][m];
  const double wt_tail = 1.0 + kappa * vt[static_cast<std::size_t>(e.tail)][m];
  if (e.is_anchor()) {
    const double q = e.anchor[um];
    return std::max(1.0 / (1.0 + kappa * vtail) - q, q - 2.0 / wt_tail + (1.0 + kappa * vtail) / (wt_tail * wt_tail));
  }
  const double vhead = v[static_cast<std::size_t>(e.head)][m];
  const double wt_head = 1.0 + kappa * vt[static_cast<std::size_t>(e.head)][m];
  return std::max(1.0 / (1.0 + kappa * vtail) - 2.0 / wt_head + (1.0 + kappa * vhead) / (wt_head * wt_head),
                  1.0 / (1.0 + kappa * vhead) - 2.0 / wt_tail + (1.0 + kappa * vtail) / (wt_tail * wt_tail));
}

/// Objective of the convex SUM subproblem at reference vt, constants dropped:
/// sum lambda0 ||W||^2 + lambda1 k v / (1+k vt)^2 + lambda2 a, with each a at
/// its smallest feasible value.
inline double graph_convex_objective(const CouplingGraph& g, const GraphPoint& p, const std::vector<RVector>& vt,
                                     double kappa) {
  double total = 0.0;
  for (int r = 0; r < g.num_nodes(); ++r) {
    const auto ur = static_cast<std::size_t>(r);
    const auto& n = g.nodes[ur];
    total += n.power_weight * p.W[ur].squaredNorm();
    for (int m = 0; m < g.num_users; ++m) {
      const double d = 1.0 + kappa * vt[ur][m];
      total += n.reject_weight * kappa * p.v[ur][m] / (d * d);
    }
  }
  for (const auto& e : g.edges)
    if (e.weight > 0)
      for (int m = 0; m < g.num_users; ++m) total += e.weight * switch_bound(e, m, p.v, vt, kappa);
  return total;
}

}  // namespace ltac
