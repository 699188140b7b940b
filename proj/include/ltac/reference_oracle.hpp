// SPDX-License-Identifier: Apache-2.0
//
// Slow, independent reference solver for the convex SUM subproblem on a
// coupling graph: a primal log-barrier interior-point method with damped
// Newton steps on a dense real parameterization. Shares nothing with the ADMM
// engine except the graph description, and is meant for small instances.
//
// The constraint Im{h_m^H w_m} = 0 is dropped: rotating w_m by a phase leaves
// every |h_k^H w_n| and ||W|| unchanged while making Re{h_m^H w_m} = |h_m^H w_m|,
// so the optimal value is the same with or without it.
#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "ltac/core.hpp"
#include "ltac/coupling_graph.hpp"

namespace ltac::oracle {

struct OracleOptions {
  double initial_t = 1.0;
  double barrier_growth = 20.0;
  double gap_tol = 1e-10;  // stop when (barrier parameter)/t <= gap_tol * max(1, |objective|)
  double newton_tol = 1e-12;
  int max_newton = 5000;  // per centering; the first one can be long (far start)
};

struct OracleResult {
  double objective = 0.0;
  GraphPoint point;
  double kkt_residual = 0.0;  // certified suboptimality bound, relative to max(1, |objective|)
  int newton_steps = 0;
  double seconds = 0.0;
};

namespace detail {

class BarrierProblem {
 public:
  BarrierProblem(const CouplingGraph& g, const std::vector<RVector>& vt, double kappa, double gamma,
                 double noise_power, double P)
      : g_(g), vt_(vt), kappa_(kappa), sg_(std::sqrt(gamma)), sigma_(std::sqrt(noise_power)), P_(P) {
    const int N = g.num_antennas, M = g.num_users;
    node_block_ = 2 * N * M + M;
    n_ = g.num_nodes() * node_block_;
    for (const auto& e : g.edges) {
      edge_offset_.push_back(e.weight > 0 ? n_ : -1);
      if (e.weight > 0) n_ += M;
    }
    // barrier parameter: 2 per cone, 1 per log term
    nu_ = g.num_nodes() * (2.0 * M + 1.0 + M);
    for (const auto& e : g.edges)
      if (e.weight > 0) nu_ += 2.0 * M;
  }

  int size() const { return n_; }
  double nu() const { return nu_; }

  int w_index(int r, int a, int n, bool imag) const {
    return r * node_block_ + 2 * (n * g_.num_antennas + a) + (imag ? 1 : 0);
  }
  int v_index(int r, int m) const { return r * node_block_ + 2 * g_.num_antennas * g_.num_users + m; }

  RVector initial_point() const {
    RVector x = RVector::Zero(n_);
    for (int r = 0; r < g_.num_nodes(); ++r)
      for (int m = 0; m < g_.num_users; ++m) x[v_index(r, m)] = sg_ * sigma_ + 1.0;
    for (int d = 0; d < g_.num_edges(); ++d) {
      if (edge_offset_[static_cast<std::size_t>(d)] < 0) continue;
      for (int m = 0; m < g_.num_users; ++m) {
        const auto [g1, g2] = bounds(d, m, x);
        x[edge_offset_[static_cast<std::size_t>(d)] + m] = std::max(g1.value, g2.value) + 1.0;
      }
    }
    return x;
  }

  double objective(const RVector& x) const {
    double f = 0.0;
    for (int r = 0; r < g_.num_nodes(); ++r) {
      const auto& node = g_.nodes[static_cast<std::size_t>(r)];
      f += node.power_weight * x.segment(r * node_block_, 2 * g_.num_antennas * g_.num_users).squaredNorm();
      for (int m = 0; m < g_.num_users; ++m) f += node.reject_weight * kappa_ * w(r, m) * x[v_index(r, m)];
    }
    for (int d = 0; d < g_.num_edges(); ++d) {
      const int off = edge_offset_[static_cast<std::size_t>(d)];
      if (off < 0) continue;
      f += g_.edges[static_cast<std::size_t>(d)].weight * x.segment(off, g_.num_users).sum();
    }
    return f;
  }

  /// Value of t f0 + phi; +inf outside the domain. Gradient and Hessian when requested.
  double evaluate(const RVector& x, double t, RVector* grad, RMatrix* hess) const {
    const int N = g_.num_antennas, M = g_.num_users;
    double val = t * objective(x);
    if (grad) *grad = RVector::Zero(n_);
    if (hess) *hess = RMatrix::Zero(n_, n_);
    // objective derivatives
    for (int r = 0; r < g_.num_nodes(); ++r) {
      const auto& node = g_.nodes[static_cast<std::size_t>(r)];
      const int w0 = r * node_block_;
      for (int i = 0; i < 2 * N * M; ++i) {
        if (grad) (*grad)[w0 + i] += t * 2.0 * node.power_weight * x[w0 + i];
        if (hess) (*hess)(w0 + i, w0 + i) += t * 2.0 * node.power_weight;
      }
      for (int m = 0; m < M; ++m)
        if (grad) (*grad)[v_index(r, m)] += t * node.reject_weight * kappa_ * w(r, m);
    }
    for (int d = 0; d < g_.num_edges(); ++d) {
      const int off = edge_offset_[static_cast<std::size_t>(d)];
      if (off < 0 || !grad) continue;
      for (int m = 0; m < M; ++m) (*grad)[off + m] += t * g_.edges[static_cast<std::size_t>(d)].weight;
    }

    std::vector<int> idx;
    RVector lin;
    for (int r = 0; r < g_.num_nodes(); ++r) {
      const auto& H = g_.nodes[static_cast<std::size_t>(r)].H;
      // second-order cones: (Re{h_m^H w_m} + v_m)/sqrt(gamma) >= ||(h_m^H w_n)_{n != m}, sigma||
      for (int m = 0; m < M; ++m) {
        // rows: t, then (re, im) per interferer; all affine in node-local vars
        const int rows = 1 + 2 * (M - 1);
        const int cols = 2 * N * M + M;
        RMatrix A = RMatrix::Zero(rows, cols);
        for (int a = 0; a < N; ++a) {
          const double hr = H(a, m).real(), hi = H(a, m).imag();
          A(0, 2 * (m * N + a)) = hr / sg_;
          A(0, 2 * (m * N + a) + 1) = hi / sg_;
          int row = 1;
          for (int n = 0; n < M; ++n) {
            if (n == m) continue;
            A(row, 2 * (n * N + a)) = hr;
            A(row, 2 * (n * N + a) + 1) = hi;
            A(row + 1, 2 * (n * N + a)) = -hi;
            A(row + 1, 2 * (n * N + a) + 1) = hr;
            row += 2;
          }
        }
        A(0, 2 * N * M + m) = 1.0 / sg_;
        const RVector loc = x.segment(r * node_block_, cols);
        const RVector z = A * loc;
        const double tt = z[0];
        const double uu = z.tail(rows - 1).squaredNorm() + sigma_ * sigma_;
        const double s = tt * tt - uu;
        if (!(tt > 0 && s > 0)) return std::numeric_limits<double>::infinity();
        val -= std::log(s);
        if (grad || hess) {
          RVector dz(rows);
          dz[0] = -2.0 * tt / s;
          dz.tail(rows - 1) = 2.0 * z.tail(rows - 1) / s;
          if (grad) (*grad).segment(r * node_block_, cols) += A.transpose() * dz;
          if (hess) {
            RVector sgn = z;
            sgn.tail(rows - 1) *= -1.0;
            RMatrix Hl = (4.0 / (s * s)) * sgn * sgn.transpose();
            Hl(0, 0) -= 2.0 / s;
            for (int i = 1; i < rows; ++i) Hl(i, i) += 2.0 / s;
            (*hess).block(r * node_block_, r * node_block_, cols, cols) += A.transpose() * Hl * A;
          }
        }
      }
      // power budget
      const int w0 = r * node_block_;
      const double pw = P_ - x.segment(w0, 2 * N * M).squaredNorm();
      if (!(pw > 0)) return std::numeric_limits<double>::infinity();
      val -= std::log(pw);
      if (grad) (*grad).segment(w0, 2 * N * M) += 2.0 * x.segment(w0, 2 * N * M) / pw;
      if (hess) {
        const RVector xw = x.segment(w0, 2 * N * M);
        (*hess).block(w0, w0, 2 * N * M, 2 * N * M) +=
            (4.0 / (pw * pw)) * xw * xw.transpose() + (2.0 / pw) * RMatrix::Identity(2 * N * M, 2 * N * M);
      }
      // v >= 0
      for (int m = 0; m < M; ++m) {
        const int i = v_index(r, m);
        if (!(x[i] > 0)) return std::numeric_limits<double>::infinity();
        val -= std::log(x[i]);
        if (grad) (*grad)[i] -= 1.0 / x[i];
        if (hess) (*hess)(i, i) += 1.0 / (x[i] * x[i]);
      }
    }
    // switching epigraphs a >= g(v)
    for (int d = 0; d < g_.num_edges(); ++d) {
      const int off = edge_offset_[static_cast<std::size_t>(d)];
      if (off < 0) continue;
      for (int m = 0; m < M; ++m) {
        const auto bb = bounds(d, m, x);
        for (const Bound& b : {bb.first, bb.second}) {
          const double phi = x[off + m] - b.value;
          if (!(phi > 0)) return std::numeric_limits<double>::infinity();
          val -= std::log(phi);
          // grad(phi) = e_a - grad(g); hess(phi) = -hess(g) (only on the convex v entry)
          if (grad) {
            (*grad)[off + m] -= 1.0 / phi;
            for (int k = 0; k < 2; ++k)
              if (b.var[k] >= 0) (*grad)[b.var[k]] += b.slope[k] / phi;
          }
          if (hess) {
            idx = {off + m, b.var[0], b.var[1]};
            lin = RVector(3);
            lin << 1.0, -b.slope[0], -b.slope[1];
            for (int i = 0; i < 3; ++i)
              for (int j = 0; j < 3; ++j)
                if (idx[i] >= 0 && idx[j] >= 0) (*hess)(idx[i], idx[j]) += lin[i] * lin[j] / (phi * phi);
            if (b.var[0] >= 0) (*hess)(b.var[0], b.var[0]) += b.curvature / phi;
          }
        }
      }
    }
    return val;
  }

  GraphPoint point(const RVector& x) const {
    const int N = g_.num_antennas, M = g_.num_users;
    GraphPoint p;
    for (int r = 0; r < g_.num_nodes(); ++r) {
      CMatrix W(N, M);
      RVector v(M);
      for (int n = 0; n < M; ++n)
        for (int a = 0; a < N; ++a) W(a, n) = Complex(x[w_index(r, a, n, false)], x[w_index(r, a, n, true)]);
      for (int m = 0; m < M; ++m) v[m] = x[v_index(r, m)];
      p.W.push_back(W);
      p.v.push_back(v);
    }
    return p;
  }

 private:
  // g(v) = convex term c/(1 + k v_var0) (curvature on var0) + affine terms.
  struct Bound {
    double value = 0.0;
    int var[2] = {-1, -1};
    double slope[2] = {0.0, 0.0};
    double curvature = 0.0;  // second derivative of g along var0
  };

  double w(int r, int m) const {
    const double d = 1.0 + kappa_ * vt_[static_cast<std::size_t>(r)][m];
    return 1.0 / (d * d);
  }

  // 1/(1 + k v_i) + [(1 + k v_j) w_j - 2/(1 + k vt_j)]
  Bound mixed_bound(int ri, int rj, int m, const RVector& x) const {
    Bound b;
    const double vi = x[v_index(ri, m)], vj = x[v_index(rj, m)];
    const double di = 1.0 + kappa_ * vi;
    const double dtj = 1.0 + kappa_ * vt_[static_cast<std::size_t>(rj)][m];
    b.value = 1.0 / di - 2.0 / dtj + (1.0 + kappa_ * vj) * w(rj, m);
    b.var[0] = v_index(ri, m);
    b.slope[0] = -kappa_ / (di * di);
    b.curvature = 2.0 * kappa_ * kappa_ / (di * di * di);
    b.var[1] = v_index(rj, m);
    b.slope[1] = kappa_ * w(rj, m);
    return b;
  }

  std::pair<Bound, Bound> bounds(int d, int m, const RVector& x) const {
    const auto& e = g_.edges[static_cast<std::size_t>(d)];
    if (!e.is_anchor()) return {mixed_bound(e.tail, e.head, m, x), mixed_bound(e.head, e.tail, m, x)};
    const double q = e.anchor[static_cast<std::size_t>(m)];
    const double vi = x[v_index(e.tail, m)];
    const double di = 1.0 + kappa_ * vi;
    Bound b1;
    b1.value = 1.0 / di - q;
    b1.var[0] = v_index(e.tail, m);
    b1.slope[0] = -kappa_ / (di * di);
    b1.curvature = 2.0 * kappa_ * kappa_ / (di * di * di);
    Bound b2;
    const double dt = 1.0 + kappa_ * vt_[static_cast<std::size_t>(e.tail)][m];
    b2.value = q - 2.0 / dt + (1.0 + kappa_ * vi) * w(e.tail, m);
    b2.var[1] = v_index(e.tail, m);
    b2.slope[1] = kappa_ * w(e.tail, m);
    return {b1, b2};
  }

  const CouplingGraph& g_;
  const std::vector<RVector>& vt_;
  double kappa_, sg_, sigma_, P_;
  int node_block_ = 0;
  int n_ = 0;
  double nu_ = 0.0;
  std::vector<int> edge_offset_;
};

}  // namespace detail

inline OracleResult reference_oracle(const CouplingGraph& g, const std::vector<RVector>& vt, double kappa,
                                     double gamma, double noise_power, double power_budget,
                                     const OracleOptions& opts = {}) {
  g.validate();
  const auto start = std::chrono::steady_clock::now();
  detail::BarrierProblem prob(g, vt, kappa, gamma, noise_power, power_budget);
  RVector x = prob.initial_point();
  OracleResult out;
  double t = opts.initial_t;
  RVector grad;
  RMatrix hess;
  double last_decrement = 0.0;
  for (;;) {
    bool centered = false;
    for (int it = 0; it < opts.max_newton; ++it) {
      const double val = prob.evaluate(x, t, &grad, &hess);
      Eigen::LDLT<RMatrix> ldlt(hess);
      const RVector step = -ldlt.solve(grad);
      const double decrement2 = -grad.dot(step);
      ++out.newton_steps;
      last_decrement = decrement2 / 2.0;
      // relative test: at large t the barrier value carries ~16 digits of t * f0
      if (decrement2 / 2.0 <= std::max(opts.newton_tol, 1e-15 * std::abs(val))) {
        centered = true;
        break;
      }
      double s = 1.0;
      for (int ls = 0; ls < 100; ++ls) {
        const double trial = prob.evaluate(x + s * step, t, nullptr, nullptr);
        if (std::isfinite(trial) && trial <= val - 0.25 * s * decrement2) break;
        s *= 0.5;
      }
      x += s * step;
      if (s < 1e-14) break;
    }
    const double obj = prob.objective(x);
    if (!centered) throw NumericalError("reference_oracle: centering did not converge at t = " + std::to_string(t));
    if (prob.nu() / t <= opts.gap_tol * std::max(1.0, std::abs(obj))) break;
    t *= opts.barrier_growth;
    if (t > 1e16) throw NumericalError("reference_oracle: barrier parameter diverged");
  }
  out.objective = prob.objective(x);
  out.point = prob.point(x);
  // near the central path f0 - f* <= (nu + lambda^2/2) / t (lambda: Newton decrement)
  out.kkt_residual = (prob.nu() + last_decrement) / t / std::max(1.0, std::abs(out.objective));
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace ltac::oracle
