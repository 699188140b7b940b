// SPDX-License-Identifier: Apache-2.0
//
// Problem data, SINR/QoS evaluation and the exact and smoothed long-term
// cost of a horizon plan.
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ltac/core.hpp"

namespace ltac {

struct SolverOptions {
  double rho = 1.0;
  double indicator_penalty = 1.0;
  double linear_copy_penalty = 1.0;
  double scaled_copy_penalty = 1.0;
  bool reference_scaled_copies = true;
  bool channel_scaled_penalty = true;
  double relaxation = 1.6;
  bool residual_balancing = false;
  double admm_tol = 1e-5;
  int admm_max_iter = 5000;
  // ADMM iterations per SUM step; the solver state carries over between steps
  int sum_inner_max_iter = 500;
  double bisect_tol = 1e-10;
  int bisect_max_iter = 200;
  double sum_tol = 1e-5;
  int sum_max_iter = 30;
  int workers = 1;
};

struct ProblemConfig {
  int num_users = 6;        // M
  int num_antennas = 4;     // N
  int num_slices = 10;      // T
  double power_budget = 100.0;
  double noise_power = 1.0;  // sigma^2
  double qos_target = 1.0;   // gamma, linear
  double reject_weight = 20.0;
  double switch_weight = 20.0;
  double kappa = 100.0;
  bool count_initial_switch = false;
  SolverOptions solver;

  double sigma() const { return std::sqrt(noise_power); }

  void validate() const {
    auto fail = [](const std::string& what) { throw InvalidArgument("ProblemConfig: " + what); };
    if (num_users < 1) fail("num_users must be >= 1");
    if (num_antennas < 1) fail("num_antennas must be >= 1");
    if (num_slices < 1) fail("num_slices must be >= 1");
    if (!(power_budget > 0)) fail("power_budget must be > 0");
    if (!(noise_power > 0)) fail("noise_power must be > 0");
    if (!(qos_target > 0)) fail("qos_target must be > 0");
    if (!(reject_weight >= 0)) fail("reject_weight must be >= 0");
    if (!(switch_weight >= 0)) fail("switch_weight must be >= 0");
    if (!(kappa >= 1)) fail("kappa must be >= 1");
    if (!(solver.rho > 0)) fail("rho must be > 0");
    if (!(solver.sum_tol > 0)) fail("sum_tol must be > 0");
    if (!(solver.bisect_tol > 0 && solver.bisect_tol < solver.admm_tol && solver.admm_tol < 1))
      fail("tolerances must satisfy 0 < bisect_tol < admm_tol < 1");
    if (solver.admm_max_iter < 1 || solver.sum_max_iter < 1 || solver.sum_inner_max_iter < 1 ||
        solver.bisect_max_iter < 1)
      fail("iteration caps must be >= 1");
    if (solver.workers < 1) fail("workers must be >= 1");
  }
};

/// A full-horizon decision: slack vectors v(t) and beamformers W(t), with an
/// optional status vector for the slice before the horizon.
struct HorizonPlan {
  std::vector<RVector> slack;    // T entries of length M
  std::vector<CMatrix> beams;    // T entries, N x M
  std::optional<StatusVector> initial_status;

  int num_slices() const { return static_cast<int>(slack.size()); }
};

struct CostBreakdown {
  double transmit_power = 0.0;
  double reject_cost = 0.0;
  double switch_cost = 0.0;
  double total = 0.0;
};

/// Admissible iff the quantized smoothed value [1/(1+kappa v)]_q is 1, i.e. v < 1/kappa.
inline int admissible_status(double v, double kappa) { return v < 1.0 / kappa ? 1 : 0; }

inline StatusVector slice_status(const RVector& v, double kappa) {
  StatusVector s(static_cast<std::size_t>(v.size()));
  for (Eigen::Index m = 0; m < v.size(); ++m) s[static_cast<std::size_t>(m)] = admissible_status(v[m], kappa);
  return s;
}

inline std::vector<StatusVector> plan_status(const HorizonPlan& plan, double kappa) {
  std::vector<StatusVector> out;
  out.reserve(plan.slack.size());
  for (const auto& v : plan.slack) out.push_back(slice_status(v, kappa));
  return out;
}

/// SINR of user m (0-based) for channel matrix H and beamformer matrix W (both N x M).
inline double sinr(const CMatrix& H, const CMatrix& W, double sigma2, int m) {
  detail::require(H.rows() == W.rows() && H.cols() == W.cols(), "sinr: H and W dimensions differ");
  detail::require(m >= 0 && m < H.cols(), "sinr: user index out of range");
  detail::require(sigma2 > 0, "sinr: sigma2 must be positive");
  const CVector gains = H.col(m).adjoint() * W;  // h_m^H w_n for all n
  double interference = 0.0;
  for (Eigen::Index n = 0; n < gains.size(); ++n)
    if (n != m) interference += std::norm(gains[n]);
  return std::norm(gains[m]) / (sigma2 + interference);
}

inline int indicator(double x) {
  detail::require(x >= 0, "indicator: argument must be nonnegative");
  return x > 0 ? 1 : 0;
}

inline double indicator_smooth(double x, double kappa) {
  detail::require(x >= 0, "indicator_smooth: argument must be nonnegative");
  detail::require(kappa >= 1, "indicator_smooth: kappa must be >= 1");
  return 1.0 - 1.0 / (1.0 + kappa * x);
}

namespace detail {

inline void check_plan(const HorizonPlan& plan, const ProblemConfig& cfg) {
  const auto T = static_cast<std::size_t>(cfg.num_slices);
  require(plan.slack.size() == T && plan.beams.size() == T, "plan: slice count does not match config");
  for (std::size_t t = 0; t < T; ++t) {
    require(plan.slack[t].size() == cfg.num_users, "plan: slack length does not match M");
    require(plan.beams[t].rows() == cfg.num_antennas && plan.beams[t].cols() == cfg.num_users,
            "plan: beamformer shape does not match N x M");
    require((plan.slack[t].array() >= 0).all(), "plan: slack must be nonnegative");
  }
  if (plan.initial_status)
    require(plan.initial_status->size() == static_cast<std::size_t>(cfg.num_users),
            "plan: initial status length does not match M");
}

}  // namespace detail

inline CostBreakdown true_cost(const HorizonPlan& plan, const ProblemConfig& cfg) {
  detail::check_plan(plan, cfg);
  CostBreakdown c;
  const int T = cfg.num_slices, M = cfg.num_users;
  int rejected = 0, switches = 0;
  for (int t = 0; t < T; ++t) {
    c.transmit_power += plan.beams[static_cast<std::size_t>(t)].squaredNorm();
    for (int m = 0; m < M; ++m) {
      const int now = indicator(plan.slack[static_cast<std::size_t>(t)][m]);
      rejected += now;
      if (t + 1 < T) switches += std::abs(indicator(plan.slack[static_cast<std::size_t>(t + 1)][m]) - now);
    }
  }
  if (plan.initial_status && cfg.count_initial_switch)
    for (int m = 0; m < M; ++m)
      switches += std::abs(indicator(plan.slack[0][m]) - (1 - (*plan.initial_status)[static_cast<std::size_t>(m)]));
  c.reject_cost = cfg.reject_weight * rejected;
  c.switch_cost = cfg.switch_weight * switches;
  c.total = c.transmit_power + c.reject_cost + c.switch_cost;
  return c;
}

inline double smoothed_cost(const HorizonPlan& plan, const ProblemConfig& cfg) {
  detail::check_plan(plan, cfg);
  const int T = cfg.num_slices, M = cfg.num_users;
  const double k = cfg.kappa;
  auto inv = [k](double v) { return 1.0 / (1.0 + k * v); };
  double power = 0.0, reject = 0.0, sw = 0.0;
  for (int t = 0; t < T; ++t) {
    const auto& v = plan.slack[static_cast<std::size_t>(t)];
    power += plan.beams[static_cast<std::size_t>(t)].squaredNorm();
    for (int m = 0; m < M; ++m) {
      reject += 1.0 - inv(v[m]);
      if (t + 1 < T) sw += std::abs(inv(v[m]) - inv(plan.slack[static_cast<std::size_t>(t + 1)][m]));
    }
  }
  if (plan.initial_status && cfg.count_initial_switch)
    for (int m = 0; m < M; ++m)
      sw += std::abs(inv(plan.slack[0][m]) - (*plan.initial_status)[static_cast<std::size_t>(m)]);
  return power + cfg.reject_weight * reject + cfg.switch_weight * sw;
}

struct QosCheck {
  std::vector<bool> pass;
  RVector residual;  // (Re{h^H w_m} + v_m) - sqrt(gamma) * sqrt(sigma^2 + interference)
};

/// Second-order-cone form of SINR_m >= gamma with slack v. The imaginary part
/// of the useful gain must be zero up to `imag_tol`.
inline QosCheck qos_feasible(const CMatrix& H, const CMatrix& W, const RVector& v, double gamma, double sigma2,
                             double imag_tol = 1e-5) {
  detail::require(H.rows() == W.rows() && H.cols() == W.cols() && v.size() == H.cols(),
                  "qos_feasible: dimension mismatch");
  const Eigen::Index M = H.cols();
  QosCheck out{std::vector<bool>(static_cast<std::size_t>(M)), RVector(M)};
  const CMatrix G = H.adjoint() * W;  // G(m, n) = h_m^H w_n
  for (Eigen::Index m = 0; m < M; ++m) {
    double interference = 0.0;
    for (Eigen::Index n = 0; n < M; ++n)
      if (n != m) interference += std::norm(G(m, n));
    const double lhs = G(m, m).real() + v[m];
    const double rhs = std::sqrt(gamma) * std::sqrt(sigma2 + interference);
    out.residual[m] = lhs - rhs;
    out.pass[static_cast<std::size_t>(m)] = out.residual[m] >= 0 && std::abs(G(m, m).imag()) <= imag_tol;
  }
  return out;
}

/// Smallest slack that makes user m's cone constraint hold for beamformers W,
/// after rotating w_m so that h_m^H w_m is real and nonnegative.
inline double required_slack(const CMatrix& H, const CMatrix& W, double gamma, double sigma2, int m) {
  const CVector gains = H.col(m).adjoint() * W;
  double interference = 0.0;
  for (Eigen::Index n = 0; n < gains.size(); ++n)
    if (n != m) interference += std::norm(gains[n]);
  return detail::pos_part(std::sqrt(gamma) * std::sqrt(sigma2 + interference) - std::abs(gains[m]));
}

/// Rotates each column of W so that h_m^H w_m is real and nonnegative. Leaves
/// every |h_k^H w_n| unchanged.
inline void align_phases(const CMatrix& H, CMatrix& W) {
  for (Eigen::Index m = 0; m < W.cols(); ++m) {
    const Complex g = H.col(m).dot(W.col(m));  // h_m^H w_m
    const double mag = std::abs(g);
    if (mag > 0) W.col(m) *= std::conj(g) / mag;
  }
}

}  // namespace ltac
