// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>

#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

#include "ltac/channel.hpp"

using namespace ltac;

namespace {

double chi2_pvalue(const std::vector<double>& observed, const std::vector<double>& expected) {
  double x = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) x += (observed[i] - expected[i]) * (observed[i] - expected[i]) / expected[i];
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(observed.size() - 1.0), x));
}

// Jarque-Bera normality test
double jarque_bera_pvalue(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double a : x) mean += a;
  mean /= n;
  double m2 = 0, m3 = 0, m4 = 0;
  for (double a : x) {
    const double d = a - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n, m3 /= n, m4 /= n;
  const double skew = m3 / std::pow(m2, 1.5), kurt = m4 / (m2 * m2);
  const double jb = n / 6.0 * (skew * skew + 0.25 * (kurt - 3) * (kurt - 3));
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(2.0), jb));
}

Scenario two_users(double d0, double d1) {
  Scenario s;
  s.user_positions = {{d0, 0.0}, {0.0, d1}};
  s.shadow_std_db = 0.0;
  return s;
}

}  // namespace

TEST(Placement, DeterministicAndInsideCell) {
  const auto a = place_users(Scenario{}, 20, 7), b = place_users(Scenario{}, 20, 7);
  ASSERT_EQ(a.user_positions.size(), 20u);
  for (std::size_t m = 0; m < 20; ++m) {
    EXPECT_EQ(a.user_positions[m].x, b.user_positions[m].x);
    EXPECT_EQ(a.user_positions[m].y, b.user_positions[m].y);
    EXPECT_TRUE(inside_hexagon(a.user_positions[m].x, a.user_positions[m].y, 1000));
  }
  for (double d : a.distances()) EXPECT_GE(d, 50.0);
  const auto c = place_users(Scenario{}, 20, 8);
  EXPECT_NE(a.user_positions[0].x, c.user_positions[0].x);
}

TEST(Placement, HexagonAreaFractionOfBoundingBox) {
  // The hexagon fills 3/4 of its 2s x sqrt(3)s bounding box.
  const rng::CounterStream st(5, rng::Stream::test);
  const int n = 100000;
  double inside = 0;
  for (int i = 0; i < n; ++i) {
    const auto u = st.uniform2(static_cast<std::uint32_t>(i), 0, 0);
    inside += inside_hexagon((2 * u[0] - 1) * 1.0, (2 * u[1] - 1) * 0.5 * std::sqrt(3.0), 1.0);
  }
  EXPECT_GT(chi2_pvalue({inside, n - inside}, {0.75 * n, 0.25 * n}), 0.01);
}

TEST(Placement, UniformOverSectorsAndRadius) {
  // With no exclusion zone, the six 60-degree sectors are equally likely and
  // the fraction within half the apothem-scaled hexagon is 1/4.
  Scenario base;
  base.min_user_distance = 0.0;
  const int n = 100000;
  std::vector<double> sector(6, 0.0), ring(2, 0.0);
  for (int i = 0; i < n; ++i) {
    const auto p = place_users(base, 1, static_cast<std::uint64_t>(i)).user_positions[0];
    const double ang = std::atan2(p.y, p.x) + std::numbers::pi;
    sector[std::min(5, static_cast<int>(ang / (std::numbers::pi / 3)))] += 1;
    ring[inside_hexagon(p.x, p.y, 500.0) ? 0 : 1] += 1;
  }
  EXPECT_GT(chi2_pvalue(sector, std::vector<double>(6, n / 6.0)), 0.01);
  EXPECT_GT(chi2_pvalue(ring, {0.25 * n, 0.75 * n}), 0.01);
}

TEST(Placement, TooSmallCellIsConfigError) {
  Scenario s;
  s.corner_distance = 10.0;
  // only slivers of the corners lie beyond 9.99999: the attempt cap trips
  s.min_user_distance = 9.99999;
  EXPECT_THROW(place_users(s, 3, 1), ConfigError);
  s.min_user_distance = 10.0;
  EXPECT_THROW(place_users(s, 1, 1), ConfigError);
}

TEST(ChannelVariance, PathLossLaw) {
  EXPECT_DOUBLE_EQ(channel_variance(200, 1), 1.0);
  EXPECT_NEAR(channel_variance(400, 1), 0.07695, 1e-5);
  EXPECT_NEAR(channel_variance(400, 1), std::pow(2.0, -3.7), 1e-15);
  EXPECT_DOUBLE_EQ(channel_variance(400, 3), 3 * std::pow(2.0, -3.7));
  EXPECT_THROW(channel_variance(0, 1), InvalidArgument);
  EXPECT_THROW(channel_variance(100, 0), InvalidArgument);
}

TEST(Shadowing, LogNormalMoments) {
  const int n = 100000;
  std::vector<double> x(n);
  double mean = 0, var = 0;
  for (int i = 0; i < n; ++i) mean += (x[static_cast<std::size_t>(i)] = shadowing_db(3, i, 8.0));
  mean /= n;
  for (double a : x) var += (a - mean) * (a - mean);
  var /= n - 1;
  EXPECT_LT(std::abs(mean), 3 * 8.0 / std::sqrt(n));
  EXPECT_NEAR(var, 64.0, 0.03 * 64.0);
  EXPECT_GT(jarque_bera_pvalue(x), 0.01);
}

TEST(Horizon, BitIdenticalForSameSeed) {
  const auto scen = place_users(Scenario{}, 4, 2);
  const auto a = sample_horizon(scen, 3, 5, 9), b = sample_horizon(scen, 3, 5, 9);
  for (int t = 0; t < 5; ++t) EXPECT_TRUE(a.H[t] == b.H[t]);
  EXPECT_TRUE(a.variances == b.variances);
  const auto c = sample_horizon(scen, 3, 5, 10);
  EXPECT_FALSE(a.H[0] == c.H[0]);
}

TEST(Horizon, StaticUserVariancesAndDrawStatistics) {
  const auto scen = two_users(200.0, 400.0);
  const int T = 100000;
  const auto cs = sample_horizon(scen, 1, T, 4);
  ASSERT_NEAR(cs.variances[0], 1.0, 1e-15);
  ASSERT_NEAR(cs.variances[1], std::pow(2.0, -3.7), 1e-15);
  for (int m = 0; m < 2; ++m) {
    Complex mean = 0;
    double power = 0;
    for (const auto& H : cs.H) {
      mean += H(0, m);
      power += std::norm(H(0, m));
    }
    mean /= T;
    power /= T;
    const double s2 = cs.variances[m];
    EXPECT_NEAR(power, s2, 0.05 * s2);
    // each of Re, Im has variance s2/2
    EXPECT_LT(std::abs(mean.real()), 3 * std::sqrt(s2 / 2 / T));
    EXPECT_LT(std::abs(mean.imag()), 3 * std::sqrt(s2 / 2 / T));
  }
}

TEST(Future, SeparateStreamFromHorizon) {
  const auto scen = place_users(Scenario{}, 3, 1);
  const auto cs = sample_horizon(scen, 2, 1, 77);
  const auto f = sample_future(cs.variances, 2, 1, 77);
  ASSERT_EQ(f.size(), 1u);
  EXPECT_FALSE(f[0] == cs.H[0]);
  const auto g = sample_future(cs.variances, 2, 1, 77);
  EXPECT_TRUE(f[0] == g[0]);
  EXPECT_TRUE(sample_future(cs.variances, 2, 0, 77).empty());
}

TEST(Future, DrawStatistics) {
  const RVector var = (RVector(2) << 2.0, 0.01).finished();
  const int J = 100000;
  const auto f = sample_future(var, 1, J, 5);
  for (int m = 0; m < 2; ++m) {
    double power = 0;
    for (const auto& H : f) power += std::norm(H(0, m));
    EXPECT_NEAR(power / J, var[m], 0.05 * var[m]);
  }
}

TEST(ChannelCsv, RoundTripIsBitExact) {
  const auto cs = sample_horizon(place_users(Scenario{}, 3, 4), 2, 3, 4);
  const auto text = channels_to_csv(cs);
  EXPECT_EQ(text.rfind("# ltac channels", 0), 0u);
  const auto H = channels_from_csv(text);
  ASSERT_EQ(H.size(), 3u);
  for (int t = 0; t < 3; ++t) EXPECT_TRUE(H[t] == cs.H[t]);
}
