// SPDX-License-Identifier: Apache-2.0
//
// Consensus ADMM for the convex SUM subproblem on a coupling graph.
//
// Splitting: E(r) = [H(r)^H W(r), sigma 1]; per edge/user epigraph copies
// b = a, c = a; slack copies x = 1 + k v_tail, y = (1 + k v_tail)/(1 + k vt_tail)^2
// and, for node-node edges, z = 1 + k v_head, s = (1 + k v_head)/(1 + k vt_head)^2.
// First block {W, b, c, x, y, z, s}, second block {v, a, E}, then multipliers
// {Omega, theta, phi, eps, delta, tau, eta}. Every block splits into small
// independent closed-form or bisection subproblems.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "ltac/core.hpp"
#include "ltac/coupling_graph.hpp"
#include "ltac/model.hpp"
#include "ltac/worker_pool.hpp"

namespace ltac::admm {

// ---------------------------------------------------------------------------
// Block primitives

/// Eigen-decomposition H R H^H = U diag(eig) U^H for the row penalties R of a
/// node; reused by every W update until the penalties change.
struct ChannelFactor {
  CMatrix U;
  RVector eig;
  CMatrix UH;  // U^H H
};

inline ChannelFactor factor_channel(const CMatrix& H, const RVector& row_penalty) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(H * row_penalty.asDiagonal() * H.adjoint());
  return {es.eigenvectors(), es.eigenvalues().cwiseMax(0.0), es.eigenvectors().adjoint() * H};
}

inline ChannelFactor factor_channel(const CMatrix& H, double rho = 1.0) {
  return factor_channel(H, RVector::Constant(H.cols(), rho));
}

struct WUpdate {
  CMatrix W;
  double alpha = 0.0;  // multiplier of the power budget
};

/// argmin_W  lambda0 ||W||^2 + sum_m rho_m/2 ||(Ew)_m - h_m^H W||^2 - Re Tr(Omega_w^H H^H W)  s.t. ||W||^2 <= P.
/// W(alpha) = [H R H^H + 2(lambda0 + alpha) I]^{-1} H (R Ew + Omega_w) with R = diag(rho_m);
/// ||W(alpha)||^2 is nonincreasing in alpha, so alpha is found by bracketing and bisection.
/// `f` must factor H R H^H.
inline WUpdate update_w(const ChannelFactor& f, const Eigen::Ref<const CMatrix>& Ew,
                        const Eigen::Ref<const CMatrix>& Omega_w, const RVector& row_penalty, double power_weight, double P, double tol = 1e-10, int max_iter = 200) {
  detail::require(power_weight > 0 && P > 0, "update_w: lambda0 and P must be positive");
  const CMatrix C = f.UH * (row_penalty.asDiagonal() * Ew + Omega_w);
  const RVector row_energy = C.rowwise().squaredNorm();
  auto power = [&](double alpha) {
    double p = 0.0;
    for (Eigen::Index i = 0; i < row_energy.size(); ++i) {
      const double d = f.eig[i] + 2.0 * (power_weight + alpha);
      p += row_energy[i] / (d * d);
    }
    return p;
  };
  double alpha = 0.0;
  if (power(0.0) > P) {
    double lo = 0.0, hi = 1.0;
    int doublings = 0;
    while (power(hi) > P) {
      lo = hi;
      hi *= 2.0;
      if (++doublings > 200) throw NumericalError("update_w: could not bracket the power multiplier");
    }
    for (int it = 0; it < max_iter && hi - lo > tol; ++it) {
      const double mid = 0.5 * (lo + hi);
      (power(mid) > P ? lo : hi) = mid;
    }
    alpha = hi;  // feasible side
  }
  RVector scale(f.eig.size());
  for (Eigen::Index i = 0; i < scale.size(); ++i) scale[i] = 1.0 / (f.eig[i] + 2.0 * (power_weight + alpha));
  WUpdate out{CMatrix(f.U.rows(), C.cols()), alpha};
  out.W.noalias() = f.U * (scale.asDiagonal() * C);
  return out;
}

inline WUpdate update_w(const CMatrix& H, const CMatrix& Ew, const CMatrix& Omega_w, double rho, double power_weight,
                        double P, double tol = 1e-10, int max_iter = 200) {
  detail::require(rho > 0, "update_w: rho must be positive");
  const RVector R = RVector::Constant(H.cols(), rho);
  return update_w(factor_channel(H, R), Ew, Omega_w, R, power_weight, P, tol, max_iter);
}

struct EpigraphUpdate {
  double b = 0.0;
  double x = 1.0;
  double s = 0.0;  // unused when the constraint has no s term
  double beta = 0.0;
};

/// argmin rho/2 [(b - b0)^2 + (x - x0)^2 + (s - s0)^2]  s.t.  b >= 1/x + s - K,  x >= 1.
/// Without s0 the s term is absent. If the constraint holds at beta = 0 the
/// unconstrained point is returned; otherwise beta > 0 solves
///   [x0 + beta (k beta + rho Gamma)^2 / rho^3]_1^+ = rho / (k beta + rho Gamma)
/// with Gamma = b0 - s0 + K and k = 2 (k = 1 without s), bracketed by
///   beta in [max(0, -rho Gamma / k), rho (1 - Gamma) / k].
inline EpigraphUpdate epigraph_prox(double b0, double x0, std::optional<double> s0, double K, double rho,
                                    double tol = 1e-10, int max_iter = 200) {
  const double s_ref = s0.value_or(0.0);
  const double k = s0 ? 2.0 : 1.0;
  const double gamma = b0 - s_ref + K;
  const double x_free = std::max(1.0, x0);
  if (gamma >= 1.0 / x_free) return {b0, x_free, s_ref, 0.0};

  auto excess = [&](double beta) {
    const double d = k * beta + rho * gamma;
    return std::max(1.0, x0 + beta * d * d / (rho * rho * rho)) - rho / d;
  };
  double lo = std::max(0.0, -rho * gamma / k);
  double hi = rho * (1.0 - gamma) / k;
  for (int it = 0; it < max_iter && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    (excess(mid) < 0 ? lo : hi) = mid;
  }
  const double beta = hi;
  const double x = std::max(1.0, rho / (k * beta + rho * gamma));
  return {b0 + beta / rho, x, s0 ? s_ref - beta / rho : s_ref, beta};
}

/// argmin rho/2 [(c - c0)^2 + (y - y0)^2]  s.t.  c >= y + L.
inline std::pair<double, double> halfspace_prox(double c0, double y0, double L) {
  const double gap = L - (c0 - y0);
  if (gap <= 0) return {c0, y0};
  return {c0 + 0.5 * gap, y0 - 0.5 * gap};
}

/// Weighted form of epigraph_prox:
///   argmin wb/2 (b - b0)^2 + wx/2 (x - x0)^2 + ws/2 (s - s0)^2  s.t.  b >= 1/x + s - K, x >= 1.
/// With beta the constraint multiplier, b = b0 + beta/wb, s = s0 - beta/ws and, when x > 1,
/// wx (x - x0) x^2 = beta = (1/x - Gamma) / (1/wb + 1/ws). The difference h of the two sides
/// is increasing for x >= max(1, x0), so its root is found by Newton steps safeguarded by a
/// bracket.
inline EpigraphUpdate epigraph_prox_weighted(double b0, double x0, std::optional<double> s0, double K, double wb,
                                             double wx, double ws, double tol = 1e-10, int max_iter = 200) {
  const double s_ref = s0.value_or(0.0);
  const double gamma = b0 - s_ref + K;
  const double x_free = std::max(1.0, x0);
  if (gamma >= 1.0 / x_free) return {b0, x_free, s_ref, 0.0};
  const double k = 1.0 / wb + (s0 ? 1.0 / ws : 0.0);
  auto h = [&](double x) { return wx * (x - x0) * x * x - (1.0 / x - gamma) / k; };
  auto dh = [&](double x) { return wx * x * (3.0 * x - 2.0 * x0) + 1.0 / (k * x * x); };
  // h(x_free) < 0 here. Newton from the left end; a step that leaves the
  // current bracket is replaced by bisection, or by doubling while no upper
  // end is known yet.
  double lo = x_free, hi = std::numeric_limits<double>::infinity();
  double x = x_free;
  for (int it = 0; it < max_iter; ++it) {
    const double hx = h(x);
    if (hx == 0.0) break;
    (hx < 0 ? lo : hi) = x;
    if (hi - lo <= tol * std::max(1.0, lo)) break;
    double next = x - hx / dh(x);
    if (!(next > lo && next < hi)) next = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * lo;
    const bool done = std::abs(next - x) <= tol * std::max(1.0, x);
    x = next;
    if (done) break;
    if (it + 1 == max_iter && !std::isfinite(hi)) throw NumericalError("epigraph_prox_weighted: could not bracket x");
  }
  const double beta = std::max(0.0, (1.0 / x - gamma) / k);
  return {b0 + beta / wb, x, s0 ? s_ref - beta / ws : s_ref, beta};
}

/// argmin wc/2 (c - c0)^2 + wy/2 (y - y0)^2  s.t.  c >= y + L.
inline std::pair<double, double> halfspace_prox_weighted(double c0, double y0, double L, double wc, double wy) {
  const double gap = L - (c0 - y0);
  if (gap <= 0) return {c0, y0};
  const double beta = gap / (1.0 / wc + 1.0 / wy);
  return {c0 + beta / wc, y0 - beta / wy};
}

struct ConeUpdate {
  CVector e;  // row m of E, length M + 1
  double v = 0.0;
  double mu = 0.0;
};

namespace impl {

// Writes row m's prox into e (length of g) and returns {v, mu}.
template <class In, class Out>
std::pair<double, double> soc_prox_into(const In& g, int m, double f, double q, double rho, double gamma, Out&& e) {
  if (!(q > 0)) throw InvalidArgument("soc_prox: q must be positive (node without incident duplicates)");
  const double sg = std::sqrt(gamma);
  const double gm = g[m].real();
  double rest = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i)
    if (i != m) rest += std::norm(g[i]);
  rest = std::sqrt(rest);

  double mu = ltac::detail::pos_part(-f - q * gm) / (1.0 + q);
  if (rest <= sg * mu) {
    e.setZero();
  } else {
    mu = ltac::detail::pos_part(q * (sg * rest - gm) - f) / (1.0 + (1.0 + gamma) * q);
    const double shrink = (rest - mu * sg) / (rho * rest);
    for (Eigen::Index i = 0; i < g.size(); ++i) e[i] = shrink * g[i];
  }
  e[m] = (gm + mu) / rho;
  return {(f + mu) / (rho * q), mu};
}

}  // namespace impl

/// argmin rho/2 ||e - g/rho||^2 + rho q/2 v^2 - f v
///   s.t. Re e_m + v >= sqrt(gamma) ||e_{-m}||, Im e_m = 0,
/// where g is row m of G = rho [H^H W, sigma 1] - Omega (length M + 1).
inline ConeUpdate soc_prox(const CVector& g, int m, double f, double q, double rho, double gamma) {
  ConeUpdate out;
  out.e.resize(g.size());
  std::tie(out.v, out.mu) = impl::soc_prox_into(g, m, f, q, rho, gamma, out.e);
  return out;
}

inline double update_a(double b, double c, double weight, double theta, double phi, double rho) {
  return 0.5 * (b + c) - (weight + theta + phi) / (2.0 * rho);
}

// ---------------------------------------------------------------------------
// Solver state

struct EdgeState {
  // epigraph split and multipliers
  RVector a, b, c, theta, phi;
  // tail duplicates x, y (multipliers eps, delta); head duplicates z, s (tau, eta)
  RVector x, y, z, s, eps, delta, tau, eta;
};

struct AdmmState {
  std::vector<RVector> rho_e;  // per node, per row of E: penalty of E = [H^H W, sigma 1]
  // penalties of the epigraph splits (a = b, a = c), the linear slack copies
  // (x, z) and the scaled slack copies (y, s); shared by every edge
  double rho_a = 1.0, rho_x = 1.0, rho_y = 1.0;
  std::vector<CMatrix> W, E, Omega;  // per node
  std::vector<RVector> v;            // per node local slack
  std::vector<EdgeState> edges;
};

struct Residuals {
  double primal_norm = 0.0;
  double dual_norm = 0.0;
};

// Floor on ||h_m||^2 in the channel-scaled penalty.
inline constexpr double kMinChannelEnergy = 1e-8;

struct AdmmOptions {
  double rho = 1.0;
  double indicator_penalty = 1.0;    // rho_a / rho
  double linear_copy_penalty = 1.0;  // rho_x / rho_a
  double scaled_copy_penalty = 1.0;  // rho_y / rho_a
  // The x, z copies of node r, user m get penalty rho_x w(r, m) with
  // w = 1/(1 + k vt)^2, i.e. deviations are measured in 1/x units at the
  // reference point, where the epigraph constraints live.
  bool reference_scaled_copies = true;
  // Row penalties of E start at rho lambda0 N / ||h_m||^2 instead of rho, so
  // users whose channels differ by orders of magnitude see comparable steps.
  bool channel_scaled_penalty = true;
  // Over-relaxation: the second block and the multipliers see
  // relaxation * (first block) + (1 - relaxation) * (previous second block).
  double relaxation = 1.6;
  bool residual_balancing = false;
  int balance_period = 20;  // iterations between penalty adjustments
  double tol = 1e-5;
  int max_iter = 5000;
  double bisect_tol = 1e-10;
  int bisect_max_iter = 200;
  int workers = 1;
  bool stop_on_convergence = true;
  bool trace = false;

  static AdmmOptions from(const SolverOptions& s) {
    AdmmOptions o;
    o.rho = s.rho;
    o.indicator_penalty = s.indicator_penalty;
    o.linear_copy_penalty = s.linear_copy_penalty;
    o.scaled_copy_penalty = s.scaled_copy_penalty;
    o.reference_scaled_copies = s.reference_scaled_copies;
    o.channel_scaled_penalty = s.channel_scaled_penalty;
    o.relaxation = s.relaxation;
    o.residual_balancing = s.residual_balancing;
    o.tol = s.admm_tol;
    o.max_iter = s.admm_max_iter;
    o.bisect_tol = s.bisect_tol;
    o.bisect_max_iter = s.bisect_max_iter;
    o.workers = s.workers;
    return o;
  }
};

struct TraceRow {
  int iteration = 0;
  double primal_norm = 0.0;
  double dual_norm = 0.0;
  double objective = 0.0;
};

struct ConvexSolution {
  GraphPoint point;
  Residuals residuals;
  int iterations = 0;
  bool converged = false;
  std::vector<TraceRow> trace;
};

/// ADMM solver bound to one coupling graph. State persists between calls to
/// solve(), so successive SUM iterations warm-start from the previous point.
class AdmmSolver {
 public:
  AdmmSolver(const CouplingGraph& graph, double kappa, double gamma, double noise_power, double power_budget,
             AdmmOptions opts)
      : g_(graph),
        kappa_(kappa),
        gamma_(gamma),
        sigma_(std::sqrt(noise_power)),
        P_(power_budget),
        opts_(opts),
        pool_(opts.workers) {
    g_.validate();
    detail::require(opts.rho > 0 && opts.indicator_penalty > 0 && opts.linear_copy_penalty > 0 &&
                        opts.scaled_copy_penalty > 0,
                    "AdmmSolver: penalties must be positive");
    detail::require(opts.relaxation > 0 && opts.relaxation < 2, "AdmmSolver: relaxation must lie in (0, 2)");
    const int R = g_.num_nodes(), M = g_.num_users, N = g_.num_antennas;
    for (int r = 0; r < R; ++r) {
      const auto& node = g_.nodes[static_cast<std::size_t>(r)];
      RVector rho = RVector::Constant(M, opts.rho);
      if (opts.channel_scaled_penalty)
        for (int m = 0; m < M; ++m)
          // a dead column decouples row m of E from W, so any finite weight is
          // exact; the floor keeps it large enough to pin E to its target
          rho[m] = opts.rho * node.power_weight * N / std::max(node.H.col(m).squaredNorm(), kMinChannelEnergy);
      st_.rho_e.push_back(rho);
      factors_.push_back(factor_channel(node.H, rho));
      incidences_.push_back(g_.incidences(r));
    }
    st_.rho_a = opts.rho * opts.indicator_penalty;
    st_.rho_x = st_.rho_a * opts.linear_copy_penalty;
    st_.rho_y = st_.rho_a * opts.scaled_copy_penalty;
    st_.W.assign(static_cast<std::size_t>(R), CMatrix::Zero(N, M));
    st_.E.assign(static_cast<std::size_t>(R), CMatrix::Zero(M, M + 1));
    for (auto& E : st_.E) E.col(M).setConstant(Complex(sigma_, 0.0));
    st_.Omega.assign(static_cast<std::size_t>(R), CMatrix::Zero(M, M + 1));
    st_.v.assign(static_cast<std::size_t>(R), RVector::Zero(M));
    vt_.assign(static_cast<std::size_t>(R), RVector::Zero(M));
    st_.edges.resize(static_cast<std::size_t>(g_.num_edges()));
    for (auto& es : st_.edges) {
      for (RVector* p : {&es.a, &es.b, &es.c, &es.theta, &es.phi, &es.eps, &es.delta, &es.tau, &es.eta})
        *p = RVector::Zero(M);
      es.x = es.z = es.y = es.s = RVector::Ones(M);
    }
    targets_.assign(static_cast<std::size_t>(R), CMatrix::Zero(M, M + 1));
    raw_targets_ = targets_;
    e_old_ = targets_;
    g_buf_ = targets_;
    raw_.resize(static_cast<std::size_t>(g_.num_edges()));
    primal_e_.assign(static_cast<std::size_t>(R), RVector::Zero(M));
    dual_e_.assign(static_cast<std::size_t>(R), RVector::Zero(M));
  }

  const CouplingGraph& graph() const { return g_; }
  AdmmState& state() { return st_; }
  const AdmmState& state() const { return st_; }
  const std::vector<RVector>& reference() const { return vt_; }

  /// Sets the SUM expansion point. Duplicates y, s are consistent with v = 0
  /// on first use.
  void set_reference(const std::vector<RVector>& vt) {
    detail::require(vt.size() == static_cast<std::size_t>(g_.num_nodes()), "set_reference: node count");
    for (const auto& x : vt) detail::require(x.size() == g_.num_users && (x.array() >= 0).all(), "set_reference: vt");
    vt_ = vt;
    if (!initialized_) {
      for (int d = 0; d < g_.num_edges(); ++d) {
        const auto& e = g_.edges[static_cast<std::size_t>(d)];
        auto& es = st_.edges[static_cast<std::size_t>(d)];
        for (int m = 0; m < g_.num_users; ++m) {
          es.y[m] = scaled_target(e.tail, m);
          if (!e.is_anchor()) es.s[m] = scaled_target(e.head, m);
        }
      }
      initialized_ = true;
    }
  }

  /// Overrides the row penalties of node r (and refactors its channel).
  void set_row_penalty(int r, const RVector& rho) {
    const auto ur = static_cast<std::size_t>(r);
    detail::require(rho.size() == g_.num_users && (rho.array() > 0).all(), "set_row_penalty: rho");
    st_.rho_e[ur] = rho;
    factors_[ur] = factor_channel(g_.nodes[ur].H, rho);
  }

  // -- individual steps (exposed for testing) --

  double weight_of(int r, int m) const {
    const double d = 1.0 + kappa_ * vt_[static_cast<std::size_t>(r)][m];
    return 1.0 / (d * d);
  }

  /// (1 + k v(r)_m) / (1 + k vt(r)_m)^2 at the current local slack.
  double scaled_target(int r, int m) const {
    return (1.0 + kappa_ * st_.v[static_cast<std::size_t>(r)][m]) * weight_of(r, m);
  }

  double linear_target(int r, int m) const { return 1.0 + kappa_ * st_.v[static_cast<std::size_t>(r)][m]; }

  /// Penalty of the linear copies (x or z) of node r's slack, user m.
  double rho_x(int r, int m) const { return opts_.reference_scaled_copies ? st_.rho_x * weight_of(r, m) : st_.rho_x; }

  WUpdate update_W(int r) {
    const auto ur = static_cast<std::size_t>(r);
    const int M = g_.num_users;
    auto res = update_w(factors_[ur], st_.E[ur].leftCols(M), st_.Omega[ur].leftCols(M), st_.rho_e[ur],
                        g_.nodes[ur].power_weight, P_, opts_.bisect_tol, opts_.bisect_max_iter);
    st_.W[ur] = res.W;
    return res;
  }

  void update_W_in_place(int r) {
    const auto ur = static_cast<std::size_t>(r);
    const int M = g_.num_users;
    st_.W[ur] = update_w(factors_[ur], st_.E[ur].leftCols(M), st_.Omega[ur].leftCols(M), st_.rho_e[ur],
                         g_.nodes[ur].power_weight, P_, opts_.bisect_tol, opts_.bisect_max_iter)
                    .W;
  }

  // The weighted form covers equal penalties too (it then matches
  // epigraph_prox) and converges in a few Newton steps instead of ~40 halvings.
  EpigraphUpdate epigraph(double b0, double x0, std::optional<double> s0, double K, double wx) const {
    return epigraph_prox_weighted(b0, x0, s0, K, st_.rho_a, wx, st_.rho_y, opts_.bisect_tol, opts_.bisect_max_iter);
  }

  EpigraphUpdate update_bxs(int d, int m) {
    const auto& e = g_.edges[static_cast<std::size_t>(d)];
    auto& es = st_.edges[static_cast<std::size_t>(d)];
    const double b0 = es.a[m] + es.theta[m] / st_.rho_a;
    const double wx = rho_x(e.tail, m);
    const double x0 = linear_target(e.tail, m) - es.eps[m] / wx;
    std::optional<double> s0;
    double K = static_cast<double>(e.is_anchor() ? e.anchor[static_cast<std::size_t>(m)] : 0);
    if (!e.is_anchor()) {
      s0 = scaled_target(e.head, m) - es.eta[m] / st_.rho_y;
      K = 2.0 / (1.0 + kappa_ * vt_[static_cast<std::size_t>(e.head)][m]);
    }
    const EpigraphUpdate u = epigraph(b0, x0, s0, K, wx);
    if (s0) es.s[m] = u.s;
    es.b[m] = u.b;
    es.x[m] = u.x;
    return u;
  }

  EpigraphUpdate update_cyz(int d, int m) {
    const auto& e = g_.edges[static_cast<std::size_t>(d)];
    auto& es = st_.edges[static_cast<std::size_t>(d)];
    const double c0 = es.a[m] + es.phi[m] / st_.rho_a;
    const double y0 = scaled_target(e.tail, m) - es.delta[m] / st_.rho_y;
    const double K = 2.0 / (1.0 + kappa_ * vt_[static_cast<std::size_t>(e.tail)][m]);
    EpigraphUpdate u;
    if (e.is_anchor()) {
      // c >= q - 2/(1 + k vt_tail) + y: no z copy, a plain half-space.
      const auto [c, y] =
          halfspace_prox_weighted(c0, y0, e.anchor[static_cast<std::size_t>(m)] - K, st_.rho_a, st_.rho_y);
      u = {c, 1.0, y, 0.0};
    } else {
      const double wz = rho_x(e.head, m);
      const double z0 = linear_target(e.head, m) - es.tau[m] / wz;
      u = epigraph(c0, z0, y0, K, wz);
      es.z[m] = u.x;
    }
    es.c[m] = u.b;
    es.y[m] = u.s;
    return u;
  }

  /// Aggregated linear and quadratic coefficients of node r's slack in the
  /// (e, v) subproblem, over the D incident duplicate pairs (X, Y) with
  /// multipliers (Lambda, Delta):
  ///   rho_a q = k^2 D (rho_x + rho_y w^2),
  ///   f = k sum_p [rho_x (X_p - 1) + Lambda_p + rho_y w (Y_p - w) + w Delta_p] - lambda1 k w,
  /// rho_x being this node's linear-copy penalty.
  /// With equal penalties rho this is q = k^2 D (1 + w^2) and
  /// f = k rho sum_p [(X_p - 1) + Lambda_p/rho + w (Y_p - w) + w Delta_p/rho] - lambda1 k w.
  std::pair<double, double> slack_coefficients(int r, int m) const {
    const double w = weight_of(r, m);
    const double rx = rho_x(r, m);
    double acc = 0.0;
    const auto& inc = incidences_[static_cast<std::size_t>(r)];
    for (const auto& p : inc) {
      const auto& es = st_.edges[static_cast<std::size_t>(p.edge)];
      const double X = p.tail ? es.x[m] : es.z[m];
      const double Lam = p.tail ? es.eps[m] : es.tau[m];
      const double Y = p.tail ? es.y[m] : es.s[m];
      const double Del = p.tail ? es.delta[m] : es.eta[m];
      acc += rx * (X - 1.0) + Lam + st_.rho_y * w * (Y - w) + w * Del;
    }
    const double f = kappa_ * acc - g_.nodes[static_cast<std::size_t>(r)].reject_weight * kappa_ * w;
    const double q = kappa_ * kappa_ * static_cast<double>(inc.size()) * (rx + st_.rho_y * w * w) / st_.rho_a;
    return {f, q};
  }

  CMatrix consensus_target(int r) const {
    CMatrix F(g_.num_users, g_.num_users + 1);
    consensus_target_into(r, F);
    return F;
  }

  void consensus_target_into(int r, CMatrix& F) const {
    const auto ur = static_cast<std::size_t>(r);
    const int M = g_.num_users;
    F.leftCols(M).noalias() = g_.nodes[ur].H.adjoint() * st_.W[ur];
    F.col(M).setConstant(Complex(sigma_, 0.0));
  }

  /// G(r) = R F - Omega(r) for consensus target F, row penalties R.
  CMatrix cone_target(int r, const CMatrix& F) const {
    const auto ur = static_cast<std::size_t>(r);
    return st_.rho_e[ur].asDiagonal() * F - st_.Omega[ur];
  }

  CMatrix cone_target(int r) const { return cone_target(r, consensus_target(r)); }

  /// Updates row m of E(r) and v(r)_m, given G(r).
  ConeUpdate soc_prox_ve(int r, int m, const CMatrix& G) {
    const auto ur = static_cast<std::size_t>(r);
    const auto [f, q] = slack_coefficients(r, m);
    // v's quadratic carries rho_a q, row m of E carries rho_m: rescale q so the shared closed form applies.
    const double rho_m = st_.rho_e[ur][m];
    auto u = soc_prox(G.row(m).transpose(), m, f, q * st_.rho_a / rho_m, rho_m, gamma_);
    st_.E[ur].row(m) = u.e.transpose();
    st_.v[ur][m] = u.v;
    return u;
  }

  ConeUpdate soc_prox_ve(int r, int m) { return soc_prox_ve(r, m, cone_target(r)); }

  // soc_prox_ve without the returned copy, writing straight into E(r)
  void soc_prox_ve_in_place(int r, int m, const CMatrix& G) {
    const auto ur = static_cast<std::size_t>(r);
    const auto [f, q] = slack_coefficients(r, m);
    const double rho_m = st_.rho_e[ur][m];
    st_.v[ur][m] =
        impl::soc_prox_into(G.row(m), m, f, q * st_.rho_a / rho_m, rho_m, gamma_, st_.E[ur].row(m)).first;
  }

  double update_a(int d, int m) {
    auto& es = st_.edges[static_cast<std::size_t>(d)];
    es.a[m] = admm::update_a(es.b[m], es.c[m], g_.edges[static_cast<std::size_t>(d)].weight, es.theta[m], es.phi[m],
                             st_.rho_a);
    return es.a[m];
  }

  /// Dual ascent on every consensus constraint against the current W.
  /// Returns the normalized primal residual.
  Residuals update_multipliers() {
    for (int r = 0; r < g_.num_nodes(); ++r)
      targets_[static_cast<std::size_t>(r)] = raw_targets_[static_cast<std::size_t>(r)] = consensus_target(r);
    run_multiplier_stage(false);
    return {std::sqrt(sum(primal_parts_) / constraint_count()), 0.0};
  }

  /// Runs ADMM iterations at the current reference until the normalized
  /// primal and dual residuals are both <= tol, or the iteration cap.
  ConvexSolution solve() {
    if (!initialized_) set_reference(vt_);
    ConvexSolution out;
    const int R = g_.num_nodes(), D = g_.num_edges(), M = g_.num_users;
    const double relax = opts_.relaxation;
    slack_parts_.assign(static_cast<std::size_t>(R), 0.0);
    edge_parts_.assign(static_cast<std::size_t>(D), 0.0);
    const double count = constraint_count();
    for (int it = 1; it <= opts_.max_iter; ++it) {
      // first block: W per node, (b, x, s) and (c, y, z) per edge, each
      // followed by its relaxation against the current second block
      pool_.run(static_cast<std::size_t>(R + D), [&](std::size_t i) {
        if (i < static_cast<std::size_t>(R)) {
          update_W_in_place(static_cast<int>(i));
          consensus_target_into(static_cast<int>(i), raw_targets_[i]);
          targets_[i] = relax == 1.0 ? raw_targets_[i] : relax * raw_targets_[i] + (1.0 - relax) * st_.E[i];
          return;
        }
        const int d = static_cast<int>(i) - R;
        for (int m = 0; m < M; ++m) {
          update_bxs(d, m);
          update_cyz(d, m);
        }
        if (relax != 1.0) relax_edge(d, relax);
      });
      // second block: (E, v) per node, a per edge
      prev_v_ = st_.v;
      pool_.run(static_cast<std::size_t>(R + D), [&](std::size_t i) {
        if (i < static_cast<std::size_t>(R)) {
          const int r = static_cast<int>(i);
          e_old_[i] = st_.E[i];
          g_buf_[i] = st_.rho_e[i].asDiagonal() * targets_[i] - st_.Omega[i];
          for (int m = 0; m < M; ++m) soc_prox_ve_in_place(r, m, g_buf_[i]);
          dual_e_[i] = (st_.rho_e[i].asDiagonal() * (st_.E[i] - e_old_[i])).rowwise().squaredNorm();
          const double pairs = static_cast<double>(incidences_[i].size());
          double part = 0.0;
          for (int m = 0; m < M; ++m) {
            const double dv = kappa_ * (st_.v[i][m] - prev_v_[i][m]);
            const double w = weight_of(r, m);
            const double rx = rho_x(r, m);
            part += pairs * dv * dv * (rx * rx + st_.rho_y * st_.rho_y * w * w);
          }
          slack_parts_[i] = part;
        } else {
          const auto d = i - static_cast<std::size_t>(R);
          double part = 0.0;
          for (int m = 0; m < M; ++m) {
            const double old = st_.edges[d].a[m];
            const double da = st_.rho_a * (update_a(static_cast<int>(d), m) - old);
            part += 2.0 * da * da;
          }
          edge_parts_[d] = part;
        }
      });
      double dual_e = 0.0;
      for (const auto& de : dual_e_) dual_e += de.sum();
      const double dual_i = sum(slack_parts_) + sum(edge_parts_);
      const double dual = std::sqrt((dual_e + dual_i) / count);
      run_multiplier_stage(relax != 1.0);
      double primal_i = 0.0;
      for (int d = 0; d < D; ++d) primal_i += primal_parts_[static_cast<std::size_t>(R + d)];
      const double primal = std::sqrt(sum(primal_parts_) / count);
      out.residuals = {primal, dual};
      out.iterations = it;
      if (opts_.trace) out.trace.push_back({it, primal, dual, graph_convex_objective(g_, current_point(), vt_, kappa_)});
      if (opts_.stop_on_convergence && primal <= opts_.tol && dual <= opts_.tol) {
        out.converged = true;
        break;
      }
      if (opts_.residual_balancing && it % opts_.balance_period == 0) balance(primal_i, dual_i);
    }
    total_iterations_ += out.iterations;
    out.point = current_point();
    return out;
  }

  ConvexSolution solve(const std::vector<RVector>& vt) {
    set_reference(vt);
    return solve();
  }

  /// Node beamformers and slacks (clamped to v >= 0).
  GraphPoint current_point() const {
    GraphPoint p{st_.W, st_.v};
    for (auto& v : p.v) v = v.cwiseMax(0.0);
    return p;
  }

  long total_iterations() const { return total_iterations_; }

 private:
  // First-block duplicates before relaxation; restored after the multiplier
  // stage so that x, z >= 1 holds between iterations.
  struct RawCopies {
    RVector b, c, x, y, z, s;
  };

  void relax_edge(int d, double relax) {
    const auto& e = g_.edges[static_cast<std::size_t>(d)];
    auto& es = st_.edges[static_cast<std::size_t>(d)];
    auto& raw = raw_[static_cast<std::size_t>(d)];
    raw.b = es.b, raw.c = es.c, raw.x = es.x, raw.y = es.y, raw.z = es.z, raw.s = es.s;
    auto mix = [relax](double first, double second) { return relax * first + (1.0 - relax) * second; };
    for (int m = 0; m < g_.num_users; ++m) {
      es.b[m] = mix(es.b[m], es.a[m]);
      es.c[m] = mix(es.c[m], es.a[m]);
      es.x[m] = mix(es.x[m], linear_target(e.tail, m));
      es.y[m] = mix(es.y[m], scaled_target(e.tail, m));
      if (!e.is_anchor()) {
        es.z[m] = mix(es.z[m], linear_target(e.head, m));
        es.s[m] = mix(es.s[m], scaled_target(e.head, m));
      }
    }
  }

  static double sum(const std::vector<double>& parts) {
    double s = 0.0;
    for (double p : parts) s += p;
    return s;
  }

  double constraint_count() const {
    const double M = g_.num_users;
    double n = g_.num_nodes() * M * (M + 1.0);
    for (const auto& e : g_.edges) n += M * (e.is_anchor() ? 4.0 : 6.0);
    return n;
  }

  // Penalty doubling/halving when a family's primal and dual residuals are
  // more than 10x apart; every row of E is its own family, the epigraph and
  // slack copies form one more.
  void balance(double primal_i, double dual_i) {
    auto factor = [](double primal2, double dual2) {
      if (primal2 > 100.0 * dual2) return 2.0;
      if (dual2 > 100.0 * primal2) return 0.5;
      return 1.0;
    };
    for (int r = 0; r < g_.num_nodes(); ++r) {
      const auto ur = static_cast<std::size_t>(r);
      bool changed = false;
      for (int m = 0; m < g_.num_users; ++m) {
        const double k = factor(primal_e_[ur][m], dual_e_[ur][m]);
        if (k != 1.0) {
          st_.rho_e[ur][m] *= k;
          changed = true;
        }
      }
      if (changed) factors_[ur] = factor_channel(g_.nodes[ur].H, st_.rho_e[ur]);
    }
    const double k = factor(primal_i, dual_i);
    st_.rho_a *= k;
    st_.rho_x *= k;
    st_.rho_y *= k;
  }

  // Multiplier ascent with the (possibly relaxed) first-block values held in
  // targets_ and the edge duplicates. The reported primal residual uses the
  // unrelaxed values.
  void run_multiplier_stage(bool relaxed) {
    const int R = g_.num_nodes(), D = g_.num_edges();
    primal_parts_.assign(static_cast<std::size_t>(R + D), 0.0);
    const double rho_a = st_.rho_a, rho_y = st_.rho_y;
    pool_.run(static_cast<std::size_t>(R + D), [&](std::size_t i) {
      if (i < static_cast<std::size_t>(R)) {
        st_.Omega[i] += st_.rho_e[i].asDiagonal() * (st_.E[i] - targets_[i]);
        primal_e_[i] = (st_.E[i] - raw_targets_[i]).rowwise().squaredNorm();
        primal_parts_[i] = primal_e_[i].sum();
        return;
      }
      const auto d = i - static_cast<std::size_t>(R);
      const auto& e = g_.edges[d];
      auto& es = st_.edges[d];
      for (int m = 0; m < g_.num_users; ++m) {
        es.theta[m] += rho_a * (es.a[m] - es.b[m]);
        es.phi[m] += rho_a * (es.a[m] - es.c[m]);
        es.eps[m] += rho_x(e.tail, m) * (es.x[m] - linear_target(e.tail, m));
        es.delta[m] += rho_y * (es.y[m] - scaled_target(e.tail, m));
        if (!e.is_anchor()) {
          es.tau[m] += rho_x(e.head, m) * (es.z[m] - linear_target(e.head, m));
          es.eta[m] += rho_y * (es.s[m] - scaled_target(e.head, m));
        }
      }
      if (relaxed) {
        const auto& raw = raw_[d];
        es.b = raw.b, es.c = raw.c, es.x = raw.x, es.y = raw.y, es.z = raw.z, es.s = raw.s;
      }
      double part = 0.0;
      for (int m = 0; m < g_.num_users; ++m) {
        const double r_ab = es.a[m] - es.b[m];
        const double r_ac = es.a[m] - es.c[m];
        const double r_x = es.x[m] - linear_target(e.tail, m);
        const double r_y = es.y[m] - scaled_target(e.tail, m);
        part += r_ab * r_ab + r_ac * r_ac + r_x * r_x + r_y * r_y;
        if (!e.is_anchor()) {
          const double r_z = es.z[m] - linear_target(e.head, m);
          const double r_s = es.s[m] - scaled_target(e.head, m);
          part += r_z * r_z + r_s * r_s;
        }
      }
      primal_parts_[i] = part;
    });
  }

  CouplingGraph g_;
  double kappa_, gamma_, sigma_, P_;
  AdmmOptions opts_;
  WorkerPool pool_;
  std::vector<ChannelFactor> factors_;
  std::vector<std::vector<Incidence>> incidences_;
  AdmmState st_;
  std::vector<RVector> vt_;
  std::vector<RVector> prev_v_;
  std::vector<CMatrix> targets_;      // per node, (relaxed) [H^H W, sigma 1] seen by the second block
  std::vector<CMatrix> raw_targets_;  // the same before relaxation
  std::vector<CMatrix> e_old_, g_buf_;  // per-node scratch of the second block
  std::vector<RawCopies> raw_;
  std::vector<RVector> primal_e_, dual_e_;  // per node, per row of E (squared)
  std::vector<double> slack_parts_, edge_parts_, primal_parts_;
  bool initialized_ = false;
  long total_iterations_ = 0;
};

/// One-shot solve of the convex subproblem at reference vt (cold start).
inline ConvexSolution solve_convex(const CouplingGraph& graph, const std::vector<RVector>& vt, const ProblemConfig& cfg,
                                   std::optional<AdmmOptions> opts = std::nullopt) {
  AdmmSolver solver(graph, cfg.kappa, cfg.qos_target, cfg.noise_power, cfg.power_budget,
                    opts.value_or(AdmmOptions::from(cfg.solver)));
  return solver.solve(vt);
}

}  // namespace ltac::admm
