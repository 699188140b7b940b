// SPDX-License-Identifier: Apache-2.0
//
// gtest assertions shared by the unit tests, on top of the generators and
// reference solvers.
#pragma once

#include <gtest/gtest.h>

#include "ltac/sum_solvers.hpp"
#include "references.hpp"

namespace ltac::testutil {

// Accepted SUM objectives never increase by more than `slack`.
inline void expect_monotone(const SumResult& r, double slack = 1e-6) {
  const auto obj = accepted_objectives(r);
  for (std::size_t k = 1; k < obj.size(); ++k) EXPECT_LE(obj[k], obj[k - 1] + slack) << "SUM step " << k;
}

// Budget and per-user SINR of every admitted user (zero slack).
inline void expect_feasible(const HorizonPlan& plan, const std::vector<CMatrix>& H, const ProblemConfig& cfg) {
  ASSERT_EQ(plan.slack.size(), H.size());
  for (std::size_t t = 0; t < H.size(); ++t) {
    EXPECT_LE(plan.beams[t].squaredNorm(), cfg.power_budget * (1 + 1e-6)) << "slice " << t;
    for (int m = 0; m < cfg.num_users; ++m)
      if (plan.slack[t][m] == 0.0)
        EXPECT_GE(sinr(H[t], plan.beams[t], cfg.noise_power, m), cfg.qos_target * (1 - 1e-6)) << "t " << t << " m " << m;
  }
}

}  // namespace ltac::testutil
