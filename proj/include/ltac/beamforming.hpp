// SPDX-License-Identifier: Apache-2.0
//
// Exact minimum-power beamforming for a fixed admitted set through
// uplink-downlink duality: the dual uplink powers solve a monotone fixed
// point, their MMSE receivers are the optimal downlink directions, and the
// downlink powers follow from one linear system.
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "ltac/core.hpp"
#include "ltac/model.hpp"

namespace ltac {

struct BeamformingOptions {
  double rel_tol = 1e-10;
  int max_iter = 10000;
  double divergence_factor = 1e6;  // infeasible once the dual power exceeds this times P
};

struct Beamforming {
  CMatrix W;  // N x M, zero columns for users outside the admitted set
  double power = 0.0;
  int iterations = 0;
};

/// min sum ||w_m||^2 s.t. SINR_m >= gamma for m in `admitted`, w_m = 0 otherwise,
/// and ||W||_F^2 <= P. Returns nullopt when the set is infeasible.
inline std::optional<Beamforming> qos_beamforming(const CMatrix& H, const std::vector<int>& admitted, double gamma,
                                                  double sigma2, double P, const BeamformingOptions& opts = {}) {
  detail::require(gamma > 0 && sigma2 > 0 && P > 0, "qos_beamforming: gamma, sigma2 and P must be positive");
  const Eigen::Index N = H.rows(), M = H.cols();
  for (int m : admitted) detail::require(m >= 0 && m < M, "qos_beamforming: user index out of range");
  Beamforming out;
  out.W = CMatrix::Zero(N, M);
  const auto K = static_cast<Eigen::Index>(admitted.size());
  if (K == 0) return out;

  CMatrix Hs(N, K);
  for (Eigen::Index k = 0; k < K; ++k) {
    Hs.col(k) = H.col(admitted[static_cast<std::size_t>(k)]);
    if (Hs.col(k).squaredNorm() == 0.0) return std::nullopt;
  }

  // Dual powers with unit noise: q_k = gamma / (h_k^H (I + sum_{j!=k} q_j h_j h_j^H)^{-1} h_k).
  // Total downlink power at the optimum is sigma2 * sum q.
  RVector q = RVector::Zero(K);
  const CMatrix I = CMatrix::Identity(N, N);
  auto covariance = [&](const RVector& pw) {
    CMatrix S = I;
    for (Eigen::Index j = 0; j < K; ++j) S.noalias() += pw[j] * Hs.col(j) * Hs.col(j).adjoint();
    return S;
  };
  bool settled = false;
  for (int it = 1; it <= opts.max_iter; ++it) {
    const Eigen::LDLT<CMatrix> full(covariance(q));
    RVector next(K);
    for (Eigen::Index k = 0; k < K; ++k) {
      // remove user k's own term by the Sherman-Morrison identity:
      // h^H (S - q h h^H)^{-1} h = t / (1 - q t) with t = h^H S^{-1} h
      const double t = Hs.col(k).dot(full.solve(Hs.col(k))).real();
      const double own = t / (1.0 - q[k] * t);
      next[k] = gamma / own;
    }
    out.iterations = it;
    const double change = (next - q).cwiseAbs().maxCoeff() / std::max(next.cwiseAbs().maxCoeff(), 1e-300);
    q = next;
    if (!std::isfinite(q.sum()) || sigma2 * q.sum() > opts.divergence_factor * P) return std::nullopt;
    if (change <= opts.rel_tol) {
      settled = true;
      break;
    }
  }
  if (!settled) return std::nullopt;

  // MMSE directions, then downlink powers p from
  //   p_k |h_k^H u_k|^2 / gamma - sum_{j!=k} p_j |h_k^H u_j|^2 = sigma2.
  const Eigen::LDLT<CMatrix> full(covariance(q));
  CMatrix U = full.solve(Hs);
  for (Eigen::Index k = 0; k < K; ++k) U.col(k).normalize();
  const CMatrix G = Hs.adjoint() * U;  // G(k, j) = h_k^H u_j
  RMatrix A(K, K);
  for (Eigen::Index k = 0; k < K; ++k)
    for (Eigen::Index j = 0; j < K; ++j) A(k, j) = k == j ? std::norm(G(k, k)) / gamma : -std::norm(G(k, j));
  const Eigen::FullPivLU<RMatrix> lu(A);
  if (!lu.isInvertible()) return std::nullopt;
  const RVector p = lu.solve(RVector::Constant(K, sigma2));
  if (!p.allFinite() || (p.array() <= 0).any()) return std::nullopt;
  for (Eigen::Index k = 0; k < K; ++k) out.W.col(admitted[static_cast<std::size_t>(k)]) = std::sqrt(p[k]) * U.col(k);
  align_phases(H, out.W);
  out.power = out.W.squaredNorm();
  if (out.power > P) return std::nullopt;
  return out;
}

}  // namespace ltac
