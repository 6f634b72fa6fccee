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

#pragma once

// Exact solver for the regularized primal
//
//   min_{0 <= h_i <= 1}  sum_i (gamma / 2) h_i^2 - f_i h_i
//   s.t.  | sum_{i in S_k} (z_i h_i - b) | <= epsilon_k   for every group k.
//
// The problem separates by group. Within a group the dual depends on
// (lambda, mu) only through nu = lambda - mu, and lambda + mu = |nu| at any
// optimum, so each group reduces to the scalar convex problem
//
//   D(nu) = sum_i [ b nu + e |nu| + xi_gamma(f_i - nu z_i) ],
//
// e = epsilon_k / |S_k|. The primal optimum is recovered by the ramp rule and
// the primal optimum value equals -min D.
//
// This path shares nothing with the SGD trainer except xi_gamma itself, which
// makes it usable as ground truth for the trainer.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "rto/model_core.hpp"
#include "rto/status.hpp"

namespace rto {

struct ScoreCoefficient {
  double score = 0.0;
  double z = 1.0;
};

struct GroupSolution {
  double nu = 0.0;
  double objective = 0.0;  // D(nu), summed over the group
  bool degenerate = false;  // every z_i was zero; nu = 0 returned
};

struct OracleSolution {
  std::vector<double> nu;  // per group
  std::vector<double> h;   // per example, in input order
  double primal_objective = 0.0;
  double dual_objective = 0.0;  // sum_k min D_k
  double duality_gap = 0.0;     // primal + dual; zero under strong duality
  std::vector<int> degenerate_groups;  // 1-based

  std::vector<double> Lambda() const {
    std::vector<double> out;
    for (double v : nu) out.push_back(std::max(v, 0.0));
    return out;
  }
  std::vector<double> Mu() const {
    std::vector<double> out;
    for (double v : nu) out.push_back(std::max(-v, 0.0));
    return out;
  }
  // The dual objective on the trainer's scale (a mean over examples).
  double MeanDualObjective() const {
    return h.empty() ? 0.0 : dual_objective / static_cast<double>(h.size());
  }
};

inline double GroupDual(std::span<const ScoreCoefficient> points, double offset,
                        double slack_per_sample, double gamma, double nu) {
  const double per_sample_linear = offset * nu + slack_per_sample * std::abs(nu);
  double total = 0.0;
  for (const auto& p : points) {
    total += per_sample_linear + XiGamma(p.score - nu * p.z, gamma);
  }
  return total;
}

// Half-width of a bracket that contains every breakpoint of D.
inline double GroupBracket(std::span<const ScoreCoefficient> points,
                           double gamma) {
  double min_abs_z = std::numeric_limits<double>::infinity();
  for (const auto& p : points) {
    if (p.z != 0.0) min_abs_z = std::min(min_abs_z, std::abs(p.z));
  }
  return (2.0 + gamma) / min_abs_z;
}

namespace internal {

inline bool AllCoefficientsZero(std::span<const ScoreCoefficient> points) {
  return std::all_of(points.begin(), points.end(),
                     [](const ScoreCoefficient& p) { return p.z == 0.0; });
}

// With every z_i = 0 the constraint reads M |b| <= M e: either vacuous
// (nu = 0 optimal) or infeasible.
inline GroupSolution SolveVacuous(std::span<const ScoreCoefficient> points,
                                  double offset, double slack_per_sample,
                                  double gamma) {
  if (std::abs(offset) > slack_per_sample + 1e-15) {
    Fail(ErrorCode::kDegenerateConstraint,
         "all constraint coefficients are zero and the offset exceeds the "
         "slack; the group constraint is infeasible");
  }
  return GroupSolution{0.0,
                       GroupDual(points, offset, slack_per_sample, gamma, 0.0),
                       true};
}

}  // namespace internal

// Minimizes D over nu by golden-section search on [-B, B] followed by Newton
// polishing on the quadratic piece that holds the minimizer.
inline GroupSolution SolveGroup(std::span<const ScoreCoefficient> points,
                                double offset, double slack_per_sample,
                                double gamma, double tolerance = 1e-10) {
  if (points.empty()) Fail(ErrorCode::kEmptyGroup, "empty group");
  if (!(gamma > 0.0)) Fail(ErrorCode::kInvalidParameter, "gamma must be > 0");
  if (!(tolerance > 0.0)) {
    Fail(ErrorCode::kInvalidParameter, "tolerance must be > 0");
  }
  if (!(slack_per_sample >= 0.0)) {
    Fail(ErrorCode::kInvalidParameter, "slack must be >= 0");
  }
  if (internal::AllCoefficientsZero(points)) {
    return internal::SolveVacuous(points, offset, slack_per_sample, gamma);
  }
  const auto dual = [&](double nu) {
    return GroupDual(points, offset, slack_per_sample, gamma, nu);
  };

  const double bracket = GroupBracket(points, gamma);
  constexpr double kInvPhi = 0.6180339887498948482;
  double lo = -bracket;
  double hi = bracket;
  double c = hi - kInvPhi * (hi - lo);
  double d = lo + kInvPhi * (hi - lo);
  double fc = dual(c);
  double fd = dual(d);
  while (hi - lo > tolerance) {
    if (fc <= fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - kInvPhi * (hi - lo);
      fc = dual(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + kInvPhi * (hi - lo);
      fd = dual(d);
    }
  }
  double best = 0.5 * (lo + hi);
  double best_value = dual(best);

  // D is piecewise quadratic; one Newton step lands exactly on the minimizer
  // of the current piece.
  for (int iter = 0; iter < 4; ++iter) {
    double slope = 0.0;
    double curvature = 0.0;
    const double sign = best > 0.0 ? 1.0 : (best < 0.0 ? -1.0 : 0.0);
    for (const auto& p : points) {
      const double w = p.score - best * p.z;
      slope += offset + slack_per_sample * sign - p.z * XiGammaDerivative(w, gamma);
      if (w > 0.0 && w < gamma) curvature += p.z * p.z / gamma;
    }
    if (curvature <= 0.0) break;
    const double candidate = best - slope / curvature;
    const double value = dual(candidate);
    if (!(value < best_value)) break;
    best = candidate;
    best_value = value;
  }
  if (slack_per_sample > 0.0) {
    const double at_zero = dual(0.0);
    if (at_zero <= best_value) {
      best = 0.0;
      best_value = at_zero;
    }
  }
  return GroupSolution{best, best_value, false};
}

// Exhaustive scan of nu over [-B, B]; returns the first grid argmin of D.
inline double BruteForceGrid(std::span<const ScoreCoefficient> points,
                             double offset, double slack_per_sample,
                             double gamma, double step) {
  if (points.empty()) Fail(ErrorCode::kEmptyGroup, "empty group");
  if (!(step > 0.0)) Fail(ErrorCode::kInvalidParameter, "step must be > 0");
  if (internal::AllCoefficientsZero(points)) return 0.0;
  const double bracket = GroupBracket(points, gamma);
  const auto count = static_cast<long long>(std::floor(2.0 * bracket / step));
  double best_nu = -bracket;
  double best_value = std::numeric_limits<double>::infinity();
  for (long long j = 0; j <= count + 1; ++j) {
    const double nu = std::min(-bracket + static_cast<double>(j) * step, bracket);
    const double value = GroupDual(points, offset, slack_per_sample, gamma, nu);
    if (value < best_value) {
      best_value = value;
      best_nu = nu;
    }
  }
  return best_nu;
}

inline OracleSolution SolveAll(std::span<const ScoredExample> examples,
                               const ConstraintSpec& spec, double gamma,
                               double tolerance = 1e-10) {
  if (examples.empty()) Fail(ErrorCode::kEmptyDataset, "no examples");
  if (!(gamma > 0.0)) Fail(ErrorCode::kInvalidParameter, "gamma must be > 0");
  const auto k_count = static_cast<std::size_t>(spec.group_count);
  std::vector<std::vector<ScoreCoefficient>> groups(k_count);
  std::vector<std::size_t> group_of(examples.size());
  std::vector<double> z_of(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    ValidateScore(examples[i]);
    const std::size_t k = spec.GroupIndex(examples[i]);
    group_of[i] = k;
    z_of[i] = spec.Coefficient(examples[i]);
    groups[k].push_back({examples[i].score, z_of[i]});
  }
  OracleSolution solution;
  solution.nu.resize(k_count);
  const double slack = spec.SlackPerSample();
  for (std::size_t k = 0; k < k_count; ++k) {
    if (groups[k].empty()) {
      Fail(ErrorCode::kEmptyGroup,
           "group " + std::to_string(k + 1) + " has no examples");
    }
    const GroupSolution group =
        SolveGroup(groups[k], spec.offset, slack, gamma, tolerance);
    solution.nu[k] = group.nu;
    solution.dual_objective += group.objective;
    if (group.degenerate) {
      solution.degenerate_groups.push_back(static_cast<int>(k + 1));
    }
  }
  solution.h.resize(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const double h =
        RampProbability(examples[i].score, solution.nu[group_of[i]], z_of[i],
                        gamma);
    solution.h[i] = h;
    solution.primal_objective += 0.5 * gamma * h * h - examples[i].score * h;
  }
  solution.duality_gap = solution.primal_objective + solution.dual_objective;
  return solution;
}

}  // namespace rto
