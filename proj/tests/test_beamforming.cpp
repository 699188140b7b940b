// SPDX-License-Identifier: Apache-2.0
#include <numeric>

#include <gtest/gtest.h>

#include "ltac/beamforming.hpp"
#include "support.hpp"

using namespace ltac;
using ltac::testutil::Gen;

namespace {

// Powers that give every admitted user SINR exactly gamma for fixed unit
// directions U; nullopt when no positive solution exists.
std::optional<double> power_for_directions(const CMatrix& Hs, const CMatrix& U, double gamma, double sigma2) {
  const Eigen::Index K = Hs.cols();
  const CMatrix G = Hs.adjoint() * U;
  RMatrix A(K, K);
  for (Eigen::Index k = 0; k < K; ++k)
    for (Eigen::Index j = 0; j < K; ++j) A(k, j) = k == j ? std::norm(G(k, k)) / gamma : -std::norm(G(k, j));
  const RVector p = A.fullPivLu().solve(RVector::Constant(K, sigma2));
  if (!p.allFinite() || (p.array() <= 0).any() || (A * p - RVector::Constant(K, sigma2)).norm() > 1e-9) return {};
  return p.sum();
}

}  // namespace

TEST(QosBeamforming, SingleUserMatchedFilter) {
  CMatrix H(2, 1);
  H << Complex(1, 0), Complex(0, 1);  // ||h||^2 = 2
  const auto bf = qos_beamforming(H, {0}, 1.0, 1.0, 100.0);
  ASSERT_TRUE(bf);
  EXPECT_NEAR(bf->power, 0.5, 1e-12);
  // w parallel to h
  EXPECT_NEAR(std::abs(H.col(0).dot(bf->W.col(0))), H.col(0).norm() * bf->W.col(0).norm(), 1e-12);
}

TEST(QosBeamforming, OrthogonalUsersDecouple) {
  CMatrix H = CMatrix::Zero(3, 2);
  H(0, 0) = 2.0;
  H(1, 1) = Complex(0, 0.5);
  const auto bf = qos_beamforming(H, {0, 1}, 2.0, 0.5, 100.0);
  ASSERT_TRUE(bf);
  EXPECT_NEAR(bf->W.col(0).squaredNorm(), 2.0 * 0.5 / 4.0, 1e-10);
  EXPECT_NEAR(bf->W.col(1).squaredNorm(), 2.0 * 0.5 / 0.25, 1e-10);
}

TEST(QosBeamforming, EmptySetAndBudget) {
  const CMatrix H = CMatrix::Ones(2, 2);
  const auto empty = qos_beamforming(H, {}, 1.0, 1.0, 1.0);
  ASSERT_TRUE(empty);
  EXPECT_EQ(empty->power, 0.0);
  // two identical channels cannot both reach SINR 1
  EXPECT_FALSE(qos_beamforming(H, {0, 1}, 1.0, 1.0, 1e6));
  // single user needing power 0.5 against a budget of 0.4
  EXPECT_FALSE(qos_beamforming(H, {0}, 1.0, 1.0, 0.4));
}

TEST(QosBeamforming, TightSinrAndMinimalPowerOnRandomSets) {
  Gen gen(21);
  int solved = 0;
  for (int i = 0; i < 60; ++i) {
    const int N = gen.integer(2, 4), M = gen.integer(1, N);
    const CMatrix H = gen.channel(N, M);
    std::vector<int> all(static_cast<std::size_t>(M));
    std::iota(all.begin(), all.end(), 0);
    const double gamma = gen.log_uniform(0.2, 3);
    const auto bf = qos_beamforming(H, all, gamma, 1.0, 1e4);
    if (!bf) continue;
    ++solved;
    for (int m = 0; m < M; ++m) EXPECT_NEAR(sinr(H, bf->W, 1.0, m), gamma, 1e-8 * gamma);
    for (int k = 0; k < 10000 / 60 + 1; ++k) {
      CMatrix U = gen.cmatrix(N, M);
      // mix the optimal directions in so some draws are near-optimal
      if (k % 2) U += gen.uniform(0, 3) * bf->W;
      U.colwise().normalize();
      if (auto p = power_for_directions(H, U, gamma, 1.0)) EXPECT_GE(*p, bf->power * (1 - 1e-9));
    }
  }
  EXPECT_GT(solved, 30);
}

TEST(QosBeamforming, PowerMonotoneInNestedSets) {
  Gen gen(22);
  for (int i = 0; i < 100; ++i) {
    const int N = gen.integer(2, 4), M = gen.integer(2, 5);
    const CMatrix H = gen.channel(N, M);
    std::vector<int> set;
    double last = 0.0;
    for (int m = 0; m < M; ++m) {
      set.push_back(m);
      const auto bf = qos_beamforming(H, set, 1.0, 1.0, 1e6);
      if (!bf) break;
      EXPECT_GE(bf->power, last * (1 - 1e-9));
      last = bf->power;
    }
  }
}

TEST(QosBeamforming, RejectsBadArguments) {
  const CMatrix H = CMatrix::Ones(2, 2);
  EXPECT_THROW(qos_beamforming(H, {2}, 1.0, 1.0, 1.0), InvalidArgument);
  EXPECT_THROW(qos_beamforming(H, {0}, 0.0, 1.0, 1.0), InvalidArgument);
  EXPECT_FALSE(qos_beamforming(CMatrix::Zero(2, 1), {0}, 1.0, 1.0, 1.0));
}
