// SPDX-License-Identifier: Apache-2.0
//
// Closed-form ADMM blocks against independent scalar and projected-gradient
// solvers, 100 randomized cases per block.
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>
#include <gtest/gtest.h>

#include "ltac/admm.hpp"
#include "ltac/coupling_graph.hpp"
#include "support.hpp"

using namespace ltac;
using namespace ltac::admm;
using ltac::testutil::Gen;
using ltac::testutil::epigraph_objective;
using ltac::testutil::epigraph_reference;

namespace {

constexpr int kCases = 100;

AdmmOptions plain_options() {
  AdmmOptions o;
  o.reference_scaled_copies = false;
  o.channel_scaled_penalty = false;
  o.relaxation = 1.0;
  return o;
}

// Star with J samples and an anchor; small random channels.
CouplingGraph random_star(Gen& gen, int M, int N, int J, const ProblemConfig& cfg) {
  std::vector<CMatrix> samples;
  for (int j = 0; j < J; ++j) samples.push_back(gen.channel(N, M));
  StatusVector prev(static_cast<std::size_t>(M));
  for (auto& s : prev) s = gen.coin();
  return online_star_graph(gen.channel(N, M), samples, prev, cfg);
}

ProblemConfig dims(int M, int N) {
  ProblemConfig c;
  c.num_users = M;
  c.num_antennas = N;
  c.num_slices = 1;
  return c;
}

}  // namespace

// ---------------------------------------------------------------------------
// update_w

TEST(UpdateW, ZeroChannelGivesZeroBeams) {
  const auto r = update_w(CMatrix::Zero(3, 2), CMatrix::Ones(2, 2), CMatrix::Ones(2, 2), 1.0, 1.0, 10.0);
  EXPECT_EQ(r.W.norm(), 0.0);
  EXPECT_EQ(r.alpha, 0.0);
}

TEST(UpdateW, ScalarArithmetic) {
  const CMatrix one = CMatrix::Ones(1, 1);
  const auto r = update_w(one, one, CMatrix::Zero(1, 1), 2.0, 1.0, 1e6);
  EXPECT_NEAR(r.W(0, 0).real(), 0.5, 1e-15);
  EXPECT_EQ(r.alpha, 0.0);
}

TEST(UpdateW, MatchesProjectedGradientReference) {
  Gen gen(31);
  int tight = 0;
  for (int i = 0; i < kCases; ++i) {
    const int N = gen.integer(1, 4), M = gen.integer(1, 4);
    testutil::WProblem p;
    p.H = gen.channel(N, M);
    p.Ew = gen.cmatrix(M, M);
    p.Omega = gen.cmatrix(M, M, 0.5);
    p.rho = gen.rvector(M, 0.3, 3.0);
    p.lambda0 = gen.log_uniform(0.2, 2.0);
    p.P = 1e6;
    const CMatrix free = update_w(factor_channel(p.H, p.rho), p.Ew, p.Omega, p.rho, p.lambda0, p.P).W;
    if (i % 2 && free.squaredNorm() > 0) {
      p.P = gen.uniform(0.1, 0.9) * free.squaredNorm();
      ++tight;
    }
    const auto r = update_w(factor_channel(p.H, p.rho), p.Ew, p.Omega, p.rho, p.lambda0, p.P);
    const CMatrix ref = testutil::solve_w_reference(p);
    EXPECT_LE(r.W.squaredNorm(), p.P * (1 + 1e-9));
    const double a = p.objective(r.W), b = p.objective(ref);
    EXPECT_LE(std::abs(a - b), 1e-6 * std::max(1.0, std::abs(b))) << "case " << i;
    if (i % 2) EXPECT_GT(r.alpha, 0.0);
  }
  EXPECT_GT(tight, 40);
}

TEST(UpdateW, PowerNonincreasingInMultiplier) {
  // Lowering the budget can only raise the multiplier; the active budget is met exactly.
  Gen gen(32);
  for (int i = 0; i < kCases; ++i) {
    const int N = gen.integer(1, 4), M = gen.integer(1, 4);
    const CMatrix H = gen.channel(N, M), E = gen.cmatrix(M, M), O = gen.cmatrix(M, M);
    const double free = update_w(H, E, O, 1.0, 0.5, 1e9).W.squaredNorm();
    double last_alpha = 0.0;
    for (double frac : {0.9, 0.5, 0.2, 0.05}) {
      const auto r = update_w(H, E, O, 1.0, 0.5, frac * free);
      EXPECT_GE(r.alpha, last_alpha);
      EXPECT_NEAR(r.W.squaredNorm(), frac * free, 1e-7 * free);
      last_alpha = r.alpha;
    }
  }
}

// ---------------------------------------------------------------------------
// (b, x, s) and (c, y, z) epigraph proxes

TEST(EpigraphProx, InactiveConstraint) {
  // rho = 1, a = 1, zero multipliers, reference and slack at 0: Gamma = 2 >= 1
  const auto u = epigraph_prox(1.0, 1.0, 1.0, 2.0, 1.0);
  EXPECT_EQ(u.beta, 0.0);
  EXPECT_EQ(u.b, 1.0);
  EXPECT_EQ(u.x, 1.0);
  EXPECT_EQ(u.s, 1.0);
  EXPECT_GE(u.b - (1.0 / u.x + u.s - 2.0), 1.0 - 1e-15);
}

TEST(EpigraphProx, ActiveScalarRoot) {
  // a = -2: Gamma = -1 < 1, beta in [0.5, 1]
  const auto u = epigraph_prox(-2.0, 1.0, 1.0, 2.0, 1.0);
  auto excess = [](double beta) {
    const double d = 2 * beta - 1;
    return std::max(1.0, 1.0 + beta * d * d) - 1.0 / d;
  };
  std::uintmax_t iters = 200;
  const auto [lo, hi] = boost::math::tools::toms748_solve(excess, 0.5 + 1e-12, 1.0, boost::math::tools::eps_tolerance<double>(50), iters);
  const double root = 0.5 * (lo + hi);
  EXPECT_NEAR(u.beta, root, 1e-9);
  EXPECT_NEAR(u.beta, 0.85174, 1e-5);
  EXPECT_NEAR(u.x, 1.0 / (2 * root - 1), 1e-8);
  EXPECT_NEAR(u.x, 1.42151, 1e-5);
  EXPECT_NEAR(u.b - (1.0 / u.x + u.s - 2.0), 0.0, 1e-8);
}

TEST(EpigraphProx, MatchesBrentReference) {
  Gen gen(33);
  int active = 0;
  for (int i = 0; i < kCases; ++i) {
    const double b0 = gen.uniform(-3, 3), x0 = gen.uniform(-1, 5), K = gen.uniform(0, 2), rho = gen.log_uniform(0.1, 10);
    const std::optional<double> s0 = gen.coin(0.7) ? std::optional<double>(gen.uniform(-1, 2)) : std::nullopt;
    const auto u = epigraph_prox(b0, x0, s0, K, rho);
    const auto ref = epigraph_reference(b0, x0, s0, K, rho, rho, rho);
    active += u.beta > 0;
    EXPECT_GE(u.x, 1.0);
    EXPECT_GE(u.b - (1.0 / u.x + u.s - K), -1e-9);
    if (u.beta > 0) EXPECT_NEAR(u.b - (1.0 / u.x + u.s - K), 0.0, 1e-8);
    const double fu = epigraph_objective(u, b0, x0, s0, rho, rho, rho);
    EXPECT_NEAR(fu, ref.objective, 1e-8 * std::max(1.0, ref.objective)) << "case " << i;
    EXPECT_NEAR(u.x, ref.x, 1e-6 * std::max(1.0, ref.x));
  }
  EXPECT_GT(active, 30);
}

TEST(EpigraphProxWeighted, MatchesBrentReference) {
  Gen gen(34);
  int active = 0;
  for (int i = 0; i < kCases; ++i) {
    const double b0 = gen.uniform(-3, 3), x0 = gen.uniform(-1, 5), K = gen.uniform(0, 2);
    const double wb = gen.log_uniform(0.01, 100), wx = gen.log_uniform(1e-4, 100), ws = gen.log_uniform(0.01, 100);
    const std::optional<double> s0 = gen.coin(0.7) ? std::optional<double>(gen.uniform(-1, 2)) : std::nullopt;
    const auto u = epigraph_prox_weighted(b0, x0, s0, K, wb, wx, ws);
    const auto ref = epigraph_reference(b0, x0, s0, K, wb, wx, ws);
    active += u.beta > 0;
    EXPECT_GE(u.x, 1.0);
    if (u.beta > 0) EXPECT_NEAR(u.b - (1.0 / u.x + u.s - K), 0.0, 1e-8);
    EXPECT_GE(u.b - (1.0 / u.x + u.s - K), -1e-9);
    const double fu = epigraph_objective(u, b0, x0, s0, wb, wx, ws);
    EXPECT_LE(fu, ref.objective + 1e-8 * std::max(1.0, ref.objective)) << "case " << i;
    EXPECT_NEAR(fu, ref.objective, 1e-7 * std::max(1.0, ref.objective)) << "case " << i;
  }
  EXPECT_GT(active, 30);
}

TEST(EpigraphProxWeighted, AgreesWithEqualPenaltyForm) {
  Gen gen(35);
  for (int i = 0; i < kCases; ++i) {
    const double b0 = gen.uniform(-3, 3), x0 = gen.uniform(-1, 5), K = gen.uniform(0, 2), rho = gen.log_uniform(0.1, 10);
    const std::optional<double> s0 = gen.coin(0.7) ? std::optional<double>(gen.uniform(-1, 2)) : std::nullopt;
    const auto a = epigraph_prox(b0, x0, s0, K, rho);
    const auto b = epigraph_prox_weighted(b0, x0, s0, K, rho, rho, rho);
    EXPECT_NEAR(a.x, b.x, 1e-8 * std::max(1.0, a.x));
    EXPECT_NEAR(a.b, b.b, 1e-8 * std::max(1.0, std::abs(a.b)));
    EXPECT_NEAR(a.s, b.s, 1e-8 * std::max(1.0, std::abs(a.s)));
  }
}

TEST(HalfspaceProx, ProjectsOntoBoundaryWhenViolated) {
  Gen gen(36);
  for (int i = 0; i < kCases; ++i) {
    const double c0 = gen.uniform(-2, 2), y0 = gen.uniform(-2, 2), L = gen.uniform(-2, 2);
    const double wc = gen.log_uniform(0.01, 100), wy = gen.log_uniform(0.01, 100);
    const auto [c, y] = halfspace_prox_weighted(c0, y0, L, wc, wy);
    EXPECT_GE(c - y - L, -1e-12);
    if (c0 - y0 >= L) {
      EXPECT_EQ(c, c0);
      EXPECT_EQ(y, y0);
    } else {
      EXPECT_NEAR(c - y, L, 1e-12);
      // stationarity: wc (c - c0) = -wy (y - y0) = beta >= 0
      EXPECT_NEAR(wc * (c - c0), -wy * (y - y0), 1e-10 * (1 + wc + wy));
      EXPECT_GE(wc * (c - c0), 0.0);
    }
    const auto [c1, y1] = halfspace_prox(c0, y0, L);
    const auto [c2, y2] = halfspace_prox_weighted(c0, y0, L, 1.0, 1.0);
    EXPECT_NEAR(c1, c2, 1e-14);
    EXPECT_NEAR(y1, y2, 1e-14);
  }
}

TEST(SolverEpigraph, ZeroStateFixedPoint) {
  Gen gen(37);
  const auto cfg = dims(2, 2);
  auto g = random_star(gen, 2, 2, 1, cfg);
  g.edges.back().anchor = {1, 1};
  AdmmSolver s(g, cfg.kappa, 1.0, 1.0, 100.0, plain_options());
  s.set_reference({RVector::Zero(2), RVector::Zero(2)});
  for (auto& es : s.state().edges) es.a.setOnes();
  for (int d = 0; d < g.num_edges(); ++d)
    for (int m = 0; m < 2; ++m) {
      const auto u = s.update_bxs(d, m);
      const auto w = s.update_cyz(d, m);
      EXPECT_EQ(u.beta, 0.0);
      EXPECT_EQ(u.b, 1.0);
      EXPECT_EQ(u.x, 1.0);
      EXPECT_EQ(w.b, 1.0);
      EXPECT_EQ(w.s, 1.0);
      if (!g.edges[static_cast<std::size_t>(d)].is_anchor()) {
        EXPECT_EQ(u.s, 1.0);
        EXPECT_EQ(w.x, 1.0);
      }
    }
}

TEST(SolverEpigraph, AnchorUsesBinaryStatus) {
  Gen gen(38);
  const auto cfg = dims(1, 1);
  auto g = random_star(gen, 1, 1, 1, cfg);
  const int anchor = g.num_edges() - 1;
  for (int q : {0, 1}) {
    g.edges[static_cast<std::size_t>(anchor)].anchor = {q};
    AdmmSolver s(g, cfg.kappa, 1.0, 1.0, 100.0, plain_options());
    s.set_reference({RVector::Zero(1), RVector::Zero(1)});
    auto& es = s.state().edges[static_cast<std::size_t>(anchor)];
    es.a[0] = -5.0;  // force both constraints active
    const auto u = s.update_bxs(anchor, 0);
    EXPECT_NEAR(u.b, 1.0 / u.x - q, 1e-9);  // b >= 1/x - q
    const auto w = s.update_cyz(anchor, 0);
    EXPECT_NEAR(w.b, w.s + q - 2.0, 1e-12);  // c >= y + q - 2/(1 + k vt)
  }
}

TEST(SolverEpigraph, RandomStatesSatisfyConstraints) {
  Gen gen(39);
  for (int i = 0; i < kCases; ++i) {
    const int M = gen.integer(1, 3), N = gen.integer(1, 3), J = gen.integer(1, 3);
    const auto cfg = dims(M, N);
    const auto g = random_star(gen, M, N, J, cfg);
    AdmmOptions o;
    o.reference_scaled_copies = gen.coin();
    AdmmSolver s(g, cfg.kappa, 1.0, 1.0, 100.0, o);
    std::vector<RVector> vt;
    for (int r = 0; r < g.num_nodes(); ++r) vt.push_back(gen.coin() ? RVector::Zero(M) : gen.rvector(M, 0, 0.1));
    s.set_reference(vt);
    for (auto& v : s.state().v) v = gen.rvector(M, 0, 0.05);
    for (auto& es : s.state().edges)
      for (RVector* p : {&es.a, &es.theta, &es.phi, &es.eps, &es.delta, &es.tau, &es.eta}) *p = gen.rvector(M, -2, 2);
    const double k = cfg.kappa;
    for (int d = 0; d < g.num_edges(); ++d) {
      const auto& e = g.edges[static_cast<std::size_t>(d)];
      const auto& es = s.state().edges[static_cast<std::size_t>(d)];
      for (int m = 0; m < M; ++m) {
        s.update_bxs(d, m);
        s.update_cyz(d, m);
        const double K_tail = 2.0 / (1.0 + k * vt[static_cast<std::size_t>(e.tail)][m]);
        EXPECT_GE(es.x[m], 1.0);
        if (e.is_anchor()) {
          const double q = e.anchor[static_cast<std::size_t>(m)];
          EXPECT_GE(es.b[m] - (1.0 / es.x[m] - q), -1e-9);
          EXPECT_GE(es.c[m] - (es.y[m] + q - K_tail), -1e-12);
        } else {
          const double K_head = 2.0 / (1.0 + k * vt[static_cast<std::size_t>(e.head)][m]);
          EXPECT_GE(es.z[m], 1.0);
          EXPECT_GE(es.b[m] - (1.0 / es.x[m] + es.s[m] - K_head), -1e-9);
          EXPECT_GE(es.c[m] - (1.0 / es.z[m] + es.y[m] - K_tail), -1e-9);
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// (e, v) cone prox

TEST(SocProx, ZeroInputIsFixedPoint) {
  const auto u = soc_prox(CVector::Zero(3), 1, 0.0, 1.0, 1.0, 1.0);
  EXPECT_EQ(u.mu, 0.0);
  EXPECT_EQ(u.v, 0.0);
  EXPECT_EQ(u.e.norm(), 0.0);
}

TEST(SocProx, InteriorPoint) {
  CVector g = CVector::Zero(3);
  g[0] = 7.0;
  const auto u = soc_prox(g, 0, 0.0, 2.0, 1.5, 1.0);
  EXPECT_EQ(u.mu, 0.0);
  EXPECT_DOUBLE_EQ(u.e[0].real(), 7.0 / 1.5);
  EXPECT_EQ(u.v, 0.0);
  EXPECT_THROW(soc_prox(g, 0, 0.0, 0.0, 1.0, 1.0), InvalidArgument);
}

TEST(SocProx, MatchesProjectedGradientReference) {
  Gen gen(40);
  int boundary = 0;
  for (int i = 0; i < kCases; ++i) {
    testutil::ConeProblem p;
    const int M = gen.integer(1, 4);
    p.g = gen.cvector(M + 1, gen.log_uniform(0.1, 10));
    p.m = gen.integer(0, M - 1);
    if (gen.coin(0.3)) p.g[p.m] = -std::abs(p.g[p.m]);
    p.f = gen.uniform(-5, 5);
    p.q = gen.log_uniform(0.3, 5);
    p.rho = gen.log_uniform(0.3, 3);
    p.gamma = gen.log_uniform(0.25, 4);
    const auto u = soc_prox(p.g, p.m, p.f, p.q, p.rho, p.gamma);
    ASSERT_TRUE(p.feasible(u.e, u.v, 1e-9)) << "case " << i;
    EXPECT_EQ(u.e[p.m].imag(), 0.0);
    boundary += u.mu > 0;
    const auto ref = testutil::solve_cone_reference(p);
    const double a = p.objective(u.e, u.v), b = p.objective(ref.e, ref.v);
    EXPECT_LE(a, b + 1e-6 * std::max(1.0, std::abs(b))) << "case " << i;
    EXPECT_NEAR(a, b, 1e-6 * std::max(1.0, std::abs(b))) << "case " << i;
    // random feasible points never do better
    for (int k = 0; k < 100; ++k) {
      CVector e = u.e + gen.cvector(M + 1, gen.log_uniform(1e-3, 3));
      e[p.m] = e[p.m].real();
      double rest = 0.0;
      for (int j = 0; j <= M; ++j)
        if (j != p.m) rest += std::norm(e[j]);
      const double v = std::sqrt(p.gamma * rest) - e[p.m].real() + gen.log_uniform(1e-6, 1) * gen.coin();
      EXPECT_GE(p.objective(e, v), a - 1e-9 * std::max(1.0, std::abs(a)));
    }
  }
  EXPECT_GT(boundary, 30);
}

TEST(SlackCoefficients, StarReducesToClosedForm) {
  // Equal unit penalties: q = k^2 (J + 1)(1 + w^2) on the current slice and
  // k^2 (1 + w^2) on every sample, with w = 1/(1 + k vt)^2.
  Gen gen(41);
  for (int J : {1, 3, 9}) {
    const auto cfg = dims(2, 2);
    const auto g = random_star(gen, 2, 2, J, cfg);
    AdmmSolver s(g, cfg.kappa, 1.0, 1.0, 100.0, plain_options());
    std::vector<RVector> vt;
    for (int r = 0; r <= J; ++r) vt.push_back(gen.rvector(2, 0, 0.2));
    s.set_reference(vt);
    for (int r = 0; r <= J; ++r)
      for (int m = 0; m < 2; ++m) {
        const double d = 1.0 + cfg.kappa * vt[static_cast<std::size_t>(r)][m];
        const double expect = cfg.kappa * cfg.kappa * (r == 0 ? J + 1 : 1) * (1.0 + 1.0 / (d * d * d * d));
        EXPECT_NEAR(s.slack_coefficients(r, m).second, expect, 1e-12 * expect);
      }
  }
}

// ---------------------------------------------------------------------------
// a update and multipliers

TEST(UpdateA, Arithmetic) {
  EXPECT_EQ(update_a(1, 1, 0, 0, 0, 1), 1.0);
  EXPECT_EQ(update_a(2, 0, 2 * 3.0, 0, 0, 3.0), 0.0);
}

TEST(UpdateA, Stationary) {
  Gen gen(42);
  for (int i = 0; i < kCases; ++i) {
    const double b = gen.uniform(-3, 3), c = gen.uniform(-3, 3), w = gen.uniform(0, 20), th = gen.uniform(-5, 5),
                 ph = gen.uniform(-5, 5), rho = gen.log_uniform(0.1, 10);
    const double a = update_a(b, c, w, th, ph, rho);
    // d/da [w a + th (a - b) + ph (a - c) + rho/2 (a - b)^2 + rho/2 (a - c)^2]
    const double deriv = w + th + ph + rho * (a - b) + rho * (a - c);
    EXPECT_LE(std::abs(deriv), 1e-12 * (1 + std::abs(w) + std::abs(th) + std::abs(ph) + rho * (std::abs(b) + std::abs(c))));
  }
}

TEST(Multipliers, ExactConsensusLeavesThemUnchanged) {
  Gen gen(43);
  const auto cfg = dims(2, 2);
  const auto g = random_star(gen, 2, 2, 2, cfg);
  AdmmSolver s(g, cfg.kappa, 1.0, 1.0, 100.0, plain_options());
  s.set_reference(std::vector<RVector>(3, RVector::Zero(2)));
  const auto r = s.update_multipliers();
  EXPECT_EQ(r.primal_norm, 0.0);
  for (const auto& O : s.state().Omega) EXPECT_EQ(O.norm(), 0.0);
  for (const auto& es : s.state().edges)
    for (const RVector* p : {&es.theta, &es.phi, &es.eps, &es.delta, &es.tau, &es.eta}) EXPECT_EQ(p->norm(), 0.0);
}

TEST(Multipliers, UnitResidualMovesByPenalty) {
  Gen gen(44);
  const auto cfg = dims(2, 2);
  const auto g = random_star(gen, 2, 2, 2, cfg);
  AdmmOptions o = plain_options();
  o.rho = 0.7;
  AdmmSolver s(g, cfg.kappa, 1.0, 1.0, 100.0, o);
  s.set_reference(std::vector<RVector>(3, RVector::Zero(2)));
  auto& st = s.state();
  st.E[1](0, 1) += 1.0;
  st.edges[0].a[1] += 1.0;  // a - b = a - c = 1
  st.edges[0].x[0] += 1.0;
  st.edges[0].s[1] += 1.0;
  s.update_multipliers();
  EXPECT_NEAR(st.Omega[1](0, 1).real(), 0.7, 1e-15);
  EXPECT_NEAR(st.edges[0].theta[1], 0.7, 1e-15);
  EXPECT_NEAR(st.edges[0].phi[1], 0.7, 1e-15);
  EXPECT_NEAR(st.edges[0].eps[0], 0.7, 1e-15);
  EXPECT_NEAR(st.edges[0].eta[1], 0.7, 1e-15);
  EXPECT_EQ(st.edges[0].eps[1], 0.0);
  EXPECT_EQ(st.Omega[0].norm(), 0.0);
}
