// Copyright 2026 The RTO Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "rto/oracle.hpp"

#include <cmath>
#include <functional>
#include <vector>

#include <gtest/gtest.h>

#include "rto/metrics.hpp"
#include "rto/model_core.hpp"
#include "rto/random.hpp"

namespace rto {
namespace {

ScoredExample Make(double score, int group) {
  ScoredExample e;
  e.score = score;
  e.group = group;
  return e;
}

ErrorCode CodeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::kInternal;
}

std::vector<ScoreCoefficient> RandomPoints(Rng& rng, bool signed_z) {
  std::vector<ScoreCoefficient> points(5 + rng.Below(40));
  for (auto& p : points) {
    p.score = 2.0 * rng.Uniform() - 1.0;
    if (rng.Bernoulli(0.2)) p.score = std::round(p.score * 4.0) / 4.0;
    p.z = signed_z ? (rng.Bernoulli(0.5) ? 1.0 : -1.0) * (0.2 + 0.8 * rng.Uniform())
                 : 1.0;
  }
  return points;
}

// Three points at f = -1 and four at f = 0, rho = 0.4: the group mean 0.4
// forces h(0) = 0.7, i.e. nu = -0.035 at gamma = 0.05.
TEST(SolveGroupTest, ToyGroupThreshold) {
  std::vector<ScoreCoefficient> points;
  for (int i = 0; i < 3; ++i) points.push_back({-1.0, 1.0});
  for (int i = 0; i < 4; ++i) points.push_back({0.0, 1.0});
  const auto solution = SolveGroup(points, 0.4, 0.0, 0.05);
  EXPECT_NEAR(solution.nu, -0.035, 1e-9);
  EXPECT_NEAR(RampProbability(0.0, solution.nu, 1.0, 0.05), 0.7, 1e-7);
  EXPECT_NEAR(solution.nu, BruteForceGrid(points, 0.4, 0.0, 0.05, 1e-5), 1e-5);
}

// D(nu) = nu + xi(0.5 - nu) with gamma = 0.1 is flat for nu <= 0.4 with
// value 0.45; the solver must land on the flat set.
TEST(SolveGroupTest, FlatMinimizerSet) {
  const std::vector<ScoreCoefficient> points = {{0.5, 1.0}};
  const auto solution = SolveGroup(points, 1.0, 0.0, 0.1);
  EXPECT_NEAR(solution.objective, 0.45, 1e-12);
  EXPECT_LE(solution.nu, 0.4 + 1e-9);
  EXPECT_NEAR(GroupDual(points, 1.0, 0.0, 0.1, 0.4), 0.45, 1e-12);
  EXPECT_NEAR(GroupDual(points, 1.0, 0.0, 0.1, -0.7), 0.45, 1e-12);
  EXPECT_GT(GroupDual(points, 1.0, 0.0, 0.1, 0.45), 0.45);
}

// xi(0.02 - nu) + xi(0.02 + nu) is strictly convex near 0 and even in nu.
TEST(SolveGroupTest, SymmetricScoresGiveZeroShift) {
  const std::vector<ScoreCoefficient> points = {{0.02, 1.0}, {0.02, -1.0}};
  const auto solution = SolveGroup(points, 0.0, 0.0, 0.1);
  EXPECT_NEAR(solution.nu, 0.0, 1e-9);
}

TEST(SolveGroupTest, InactiveConstraintGivesZero) {
  std::vector<ScoreCoefficient> points;
  for (int i = 0; i < 10; ++i) points.push_back({-0.9 + 0.2 * i, 1.0});
  EXPECT_DOUBLE_EQ(SolveGroup(points, 0.0, 2.0, 0.1).nu, 0.0);
  EXPECT_DOUBLE_EQ(BruteForceGrid(points, 0.0, 2.0, 0.1, 1e-3), 0.0);
}

TEST(SolveGroupTest, AgreesWithBruteForceOnRandomInstances) {
  Rng rng(123);
  const double step = 1e-4;
  for (int trial = 0; trial < 100; ++trial) {
    const bool signed_z = trial % 2 == 1;
    const auto points = RandomPoints(rng, signed_z);
    const double offset = signed_z ? 0.0 : 0.2 + 0.6 * rng.Uniform();
    const double slack = rng.Bernoulli(0.5) ? 0.0 : 0.05 * rng.Uniform();
    const double gamma = rng.Bernoulli(0.5) ? 0.05 : 0.1;
    const auto solution = SolveGroup(points, offset, slack, gamma);
    const double grid = BruteForceGrid(points, offset, slack, gamma, step);
    const double grid_value = GroupDual(points, offset, slack, gamma, grid);
    // Objective agreement holds even on flat duals; the grid point is
    // within one step of the continuous minimum.
    EXPECT_LE(solution.objective, grid_value + 1e-9) << "trial " << trial;
    const double slope_bound =
        static_cast<double>(points.size()) * (1.0 + offset + slack);
    EXPECT_GE(solution.objective, grid_value - slope_bound * step)
        << "trial " << trial;
    EXPECT_LE(grid_value, GroupDual(points, offset, slack, gamma, grid + step));
    EXPECT_LE(grid_value, GroupDual(points, offset, slack, gamma, grid - step));
  }
}

TEST(SolveGroupTest, AllZeroCoefficients) {
  const std::vector<ScoreCoefficient> points = {{0.2, 0.0}, {0.4, 0.0}};
  const auto vacuous = SolveGroup(points, 0.0, 0.0, 0.1);
  EXPECT_TRUE(vacuous.degenerate);
  EXPECT_DOUBLE_EQ(vacuous.nu, 0.0);
  EXPECT_EQ(CodeOf([&] { SolveGroup(points, 0.3, 0.0, 0.1); }),
            ErrorCode::kDegenerateConstraint);
}

TEST(SolveGroupTest, Errors) {
  const std::vector<ScoreCoefficient> none;
  EXPECT_EQ(CodeOf([&] { SolveGroup(none, 0.3, 0.0, 0.1); }),
            ErrorCode::kEmptyGroup);
  const std::vector<ScoreCoefficient> one = {{0.2, 1.0}};
  EXPECT_EQ(CodeOf([&] { SolveGroup(one, 0.3, 0.0, 0.0); }),
            ErrorCode::kInvalidParameter);
}

TEST(SolveAllTest, SlackConstraintsGiveUnconstrainedRule) {
  std::vector<ScoredExample> sample;
  for (int i = 0; i < 21; ++i) sample.push_back(Make(-1.0 + 0.1 * i, 1 + i % 2));
  const auto spec = CompileConstraint(StatisticalParity{0.5, 2.0}, sample, 2);
  const auto solution = SolveAll(sample, spec, 0.1);
  for (std::size_t i = 0; i < sample.size(); ++i) {
    EXPECT_NEAR(solution.h[i], std::clamp(sample[i].score / 0.1, 0.0, 1.0), 1e-12);
  }
}

TEST(SolveAllTest, ToyInstanceValues) {
  // Exact proportions of the toy population scaled to 120 points.
  std::vector<ScoredExample> sample;
  const auto add = [&](int count, double score, int group) {
    for (int i = 0; i < count; ++i) sample.push_back(Make(score, group));
  };
  add(30, -1.0, 1);
  add(30, -1.0, 2);
  add(40, 0.0, 2);
  add(20, 1.0, 1);
  const auto spec = CompileConstraint(StatisticalParity{0.4, 0.0}, sample, 2);
  const auto solution = SolveAll(sample, spec, 0.05);
  EXPECT_NEAR(solution.h[0], 0.0, 1e-3);
  EXPECT_NEAR(solution.h[60], 0.7, 1e-3);
  EXPECT_NEAR(solution.h[100], 1.0, 1e-3);
  EXPECT_NEAR(solution.duality_gap, 0.0, 1e-6 * 120);
}

TEST(SolveAllTest, PrimalFeasibleAndStronglyDual) {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ScoredExample> sample;
    for (int i = 0; i < 30; ++i) {
      ScoredExample e;
      e.score = 2.0 * rng.Uniform() - 1.0;
      e.group = 1 + i % 2;
      sample.push_back(e);
    }
    const double rho = 0.2 + 0.6 * rng.Uniform();
    const double epsilon = trial % 2 == 0 ? 0.0 : 0.05;
    const auto spec = CompileConstraint(StatisticalParity{rho, epsilon}, sample, 2);
    const auto solution = SolveAll(sample, spec, 0.1);
    std::vector<int> groups;
    for (const auto& e : sample) groups.push_back(e.group);
    for (double m : GroupMeans(solution.h, groups, 2)) {
      EXPECT_LE(std::abs(m - rho), epsilon / 2.0 + 1e-6) << "trial " << trial;
    }
    EXPECT_LE(std::abs(solution.duality_gap), 1e-6 * 30) << "trial " << trial;
  }
}

TEST(SolveAllTest, MultipliersSplitShift) {
  std::vector<ScoredExample> sample = {Make(0.9, 1), Make(0.8, 1), Make(-0.9, 2),
                                       Make(-0.8, 2)};
  const auto spec = CompileConstraint(StatisticalParity{0.5, 0.0}, sample, 2);
  const auto solution = SolveAll(sample, spec, 0.1);
  EXPECT_GT(solution.nu[0], 0.0);
  EXPECT_LT(solution.nu[1], 0.0);
  EXPECT_DOUBLE_EQ(solution.Lambda()[0], solution.nu[0]);
  EXPECT_DOUBLE_EQ(solution.Mu()[1], -solution.nu[1]);
  EXPECT_DOUBLE_EQ(solution.Mu()[0], 0.0);
}

}  // namespace
}  // namespace rto
