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

// Harnesses shared by the CLI and the acceptance suite: random instances,
// oracle agreement, theory audits, hyperparameter sweeps and tradeoff curves.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rto/data.hpp"
#include "rto/metrics.hpp"
#include "rto/model_core.hpp"
#include "rto/oracle.hpp"
#include "rto/random.hpp"
#include "rto/trainer.hpp"

namespace rto {

struct RandomInstance {
  std::vector<ScoredExample> examples;
  int group_count = 1;
  double gamma = 0.1;
  Criterion criterion = StatisticalParity{};
};

// N in [min_n, max_n], K in [1, max_k] with every group nonempty, uniform
// scores with some repeated values, rho in [0.2, 0.8], gamma in {0.05, 0.1},
// epsilon in {0, 0.05}.
inline RandomInstance MakeRandomInstance(std::uint64_t seed, int min_n = 20,
                                         int max_n = 200, int max_k = 3) {
  Rng rng(seed);
  RandomInstance out;
  const auto n = static_cast<std::size_t>(
      min_n + static_cast<int>(rng.Below(static_cast<std::uint64_t>(max_n - min_n + 1))));
  out.group_count = 1 + static_cast<int>(rng.Below(static_cast<std::uint64_t>(max_k)));
  out.gamma = rng.Bernoulli(0.5) ? 0.05 : 0.1;
  const double epsilon = rng.Bernoulli(0.5) ? 0.0 : 0.05;
  const double rho = 0.2 + 0.6 * rng.Uniform();
  out.criterion = StatisticalParity{rho, epsilon};
  for (std::size_t i = 0; i < n; ++i) {
    ScoredExample e;
    e.id = std::to_string(i);
    // Quantize a fifth of the scores so that ties occur.
    const double u = 2.0 * rng.Uniform() - 1.0;
    e.score = rng.Bernoulli(0.2) ? std::round(u * 4.0) / 4.0 : u;
    e.group = i < static_cast<std::size_t>(out.group_count)
                  ? static_cast<int>(i) + 1
                  : 1 + static_cast<int>(rng.Below(
                            static_cast<std::uint64_t>(out.group_count)));
    e.sensitive = rng.Bernoulli(0.5) ? 1 : 0;
    e.label = rng.Bernoulli(0.5 * (e.score + 1.0)) ? 1 : 0;
    out.examples.push_back(std::move(e));
  }
  return out;
}

// Trainer settings for oracle comparisons. Small instances often have a
// nearly flat dual around the optimum (few scores inside the ramp), so the
// check runs a long Robbins-Monro schedule alpha_t = c / (t0 + t) with
// c = 10 N gamma and t0 = 10 N and reports the last iterate. The epoch count
// keeps the step budget near 4e6.
inline TrainConfig OracleCheckConfig(std::uint64_t seed, std::size_t n,
                                     double gamma) {
  const double size = static_cast<double>(std::max<std::size_t>(n, 1));
  TrainConfig config;
  config.schedule = RobbinsMonroRate{10.0 * size * gamma, 10.0 * size};
  config.max_epochs = static_cast<int>(std::clamp(4.0e6 / size, 50.0, 20000.0));
  config.convergence_tolerance = 1e-12;
  config.seed = seed;
  config.use_averaged_iterates = false;
  return config;
}

struct OracleCheckResult {
  double max_objective_gap = 0.0;  // |F(SGD) - min F|, mean scale
  double max_h_difference = 0.0;
  double oracle_duality_gap = 0.0;  // |primal + dual|, sum scale
  double max_group_deviation = 0.0;  // max_k |mean_k(h_SGD) - rho|
  double sgd_parity_gap = 0.0;
  int seeds = 0;
  bool passed = false;
};

inline constexpr double kObjectiveTolerance = 1e-3;
inline constexpr double kPredictionTolerance = 1e-2;

inline OracleCheckResult OracleCheck(std::span<const ScoredExample> examples,
                                     const Criterion& criterion, int group_count,
                                     double gamma, int seeds,
                                     std::uint64_t base_seed,
                                     std::optional<TrainConfig> base_config = {}) {
  if (seeds < 1) Fail(ErrorCode::kInvalidParameter, "seeds must be >= 1");
  const ConstraintSpec spec = CompileConstraint(criterion, examples, group_count);
  const OracleSolution oracle = SolveAll(examples, spec, gamma);
  std::vector<int> groups;
  for (const auto& e : examples) groups.push_back(e.group);
  OracleCheckResult result;
  result.seeds = seeds;
  result.oracle_duality_gap = std::abs(oracle.duality_gap);
  for (int s = 0; s < seeds; ++s) {
    TrainConfig config =
        base_config.value_or(OracleCheckConfig(0, examples.size(), gamma));
    config.seed = DeriveSeed(base_seed, static_cast<std::uint64_t>(s));
    const TrainResult trained = Train(examples, spec, gamma, config);
    const auto h = PredictAll(trained.model, examples);
    result.max_objective_gap =
        std::max(result.max_objective_gap,
                 std::abs(trained.model.metadata().final_dual_objective -
                          oracle.MeanDualObjective()));
    for (std::size_t i = 0; i < h.size(); ++i) {
      result.max_h_difference =
          std::max(result.max_h_difference, std::abs(h[i] - oracle.h[i]));
    }
    const auto means = GroupMeans(h, groups, group_count);
    for (double m : means) {
      result.max_group_deviation =
          std::max(result.max_group_deviation, std::abs(m - CriterionRho(criterion)));
    }
    result.sgd_parity_gap = std::max(result.sgd_parity_gap, GapOfMeans(means));
  }
  result.passed = result.max_objective_gap <= kObjectiveTolerance &&
                  result.max_h_difference <= kPredictionTolerance;
  return result;
}

// A random finite instance for the impossibility inequality: up to 20 points
// with binary predictions, sensitive probabilities and Dirichlet-like weights.
struct WitnessInstance {
  std::vector<int> predictor;
  std::vector<double> sensitive_prob;
  std::vector<double> weights;
};

inline WitnessInstance MakeWitnessInstance(Rng& rng) {
  WitnessInstance w;
  const std::size_t n = 1 + rng.Below(20);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    w.predictor.push_back(rng.Bernoulli(0.5) ? 1 : 0);
    w.sensitive_prob.push_back(rng.Uniform());
    const double weight = -std::log(1.0 - rng.Uniform());
    w.weights.push_back(weight);
    total += weight;
  }
  if (total <= 0.0) {
    w.weights.assign(n, 1.0 / static_cast<double>(n));
  } else {
    for (double& v : w.weights) v /= total;
  }
  return w;
}

struct TrialCount {
  int trials = 0;
  int passed = 0;
};

inline TrialCount ImpossibilityTrials(int trials, std::uint64_t seed) {
  if (trials < 0) Fail(ErrorCode::kInvalidParameter, "trials must be >= 0");
  Rng rng(seed);
  TrialCount count;
  for (int t = 0; t < trials; ++t) {
    const WitnessInstance w = MakeWitnessInstance(rng);
    ++count.trials;
    if (CheckImpossibilityWitness(w.predictor, w.sensitive_prob, w.weights).holds) {
      ++count.passed;
    }
  }
  return count;
}

// Two groups with scores f = 2 u^a_k - 1 (a = 1 for group 1, 2 for group 2),
// u uniform, so the base rates differ. Labels are drawn from eta = (1 + f) / 2.
inline std::vector<ScoredExample> MakeAuditSample(std::size_t n, Rng& rng) {
  std::vector<ScoredExample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    ScoredExample e;
    e.id = std::to_string(i);
    const int s = rng.Bernoulli(0.5) ? 1 : 0;
    const double u = rng.Uniform();
    e.score = 2.0 * (s == 1 ? u * u : u) - 1.0;
    e.group = s + 1;
    e.sensitive = s;
    e.label = rng.Bernoulli(0.5 * (e.score + 1.0)) ? 1 : 0;
    out.push_back(std::move(e));
  }
  return out;
}

struct BoundAudit {
  TrialCount count;
  double bound = 0.0;
  double max_gap = 0.0;
  double mean_gap = 0.0;
};

// Trains on n fresh examples and compares the held-out parity gap to the
// high-probability bound, `trials` times.
inline BoundAudit AuditGeneralization(int trials, std::uint64_t seed,
                                      std::size_t n, double delta,
                                      double epsilon, double rho, double gamma) {
  if (trials < 0) Fail(ErrorCode::kInvalidParameter, "trials must be >= 0");
  BoundAudit audit;
  audit.bound = GeneralizationBound(static_cast<double>(n), 2, delta, epsilon);
  double gap_sum = 0.0;
  for (int t = 0; t < trials; ++t) {
    Rng rng(DeriveSeed(seed, static_cast<std::uint64_t>(t)));
    const auto train = MakeAuditSample(n, rng);
    const auto test = MakeAuditSample(n, rng);
    const Criterion criterion = StatisticalParity{rho, epsilon};
    const ConstraintSpec spec = CompileConstraint(criterion, train, 2);
    TrainConfig config;
    config.seed = rng.Next();
    const TrainResult trained = Train(train, spec, gamma, config);
    std::vector<int> groups;
    for (const auto& e : test) groups.push_back(e.group);
    const double gap = ParityGap(PredictAll(trained.model, test), groups, 2);
    ++audit.count.trials;
    if (gap <= audit.bound) ++audit.count.passed;
    audit.max_gap = std::max(audit.max_gap, gap);
    gap_sum += gap;
  }
  if (trials > 0) audit.mean_gap = gap_sum / trials;
  return audit;
}

inline double MeanLabel(std::span<const ScoredExample> examples) {
  if (examples.empty()) Fail(ErrorCode::kEmptyDataset, "no examples");
  double sum = 0.0;
  for (const auto& e : examples) {
    if (!e.label) Fail(ErrorCode::kMissingField, "label missing on '" + e.id + "'");
    sum += *e.label;
  }
  return sum / static_cast<double>(examples.size());
}

inline std::vector<double> DefaultGammaGrid() {
  return {0.01, 0.02, 0.05, 0.1, 0.2};
}

inline std::vector<double> DefaultRhoOffsets() {
  return {-0.1, -0.05, 0.0, 0.05, 0.1};
}

struct SweepRow {
  double gamma = 0.0;
  double rho = 0.0;
  double val_parity_gap = 0.0;
  double val_accuracy = 0.0;
  bool selected = false;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // sorted by (gamma, rho)
  std::size_t selected = 0;
  bool feasible = true;  // false: the selected row only minimizes the gap
  std::vector<std::string> warnings;
  std::optional<RtoModel> selected_model;
};

struct SweepOptions {
  std::vector<double> gamma_grid = DefaultGammaGrid();
  std::vector<double> rho_grid;  // empty: mean(y) + DefaultRhoOffsets()
  double epsilon = 0.0;
  double target_epsilon = 0.02;
  TrainConfig train;
};

// One model per (gamma, rho); grid point j trains with seed
// DeriveSeed(train.seed, j). The most accurate point whose validation gap is
// within the target is selected; if there is none, the smallest gap.
inline SweepResult Sweep(const Dataset& train, const Dataset& validation,
                         const SweepOptions& options) {
  CheckDisjoint(train, validation);
  if (train.group_count != validation.group_count) {
    Fail(ErrorCode::kMismatch, "train and validation disagree on K");
  }
  if (options.gamma_grid.empty()) {
    Fail(ErrorCode::kInvalidParameter, "empty gamma grid");
  }
  SweepResult result;
  std::vector<double> rhos = options.rho_grid;
  if (rhos.empty()) {
    const double mean = MeanLabel(train.examples);
    for (double offset : DefaultRhoOffsets()) rhos.push_back(mean + offset);
  }
  for (double& rho : rhos) {
    if (rho < 0.0 || rho > 1.0) {
      const double clamped = std::clamp(rho, 0.0, 1.0);
      result.warnings.push_back("rho " + FormatReal(rho) + " clamped to " +
                                FormatReal(clamped));
      rho = clamped;
    }
  }
  std::vector<double> gammas = options.gamma_grid;
  for (double g : gammas) {
    if (!(g > 0.0)) Fail(ErrorCode::kInvalidParameter, "gamma must be > 0");
  }
  std::stable_sort(gammas.begin(), gammas.end());
  std::stable_sort(rhos.begin(), rhos.end());

  std::vector<int> val_groups;
  std::vector<std::optional<int>> val_labels;
  for (const auto& e : validation.examples) {
    val_groups.push_back(e.group);
    val_labels.push_back(e.label);
  }
  std::vector<RtoModel> models;
  std::uint64_t index = 0;
  for (double gamma : gammas) {
    for (double rho : rhos) {
      const Criterion criterion = StatisticalParity{rho, options.epsilon};
      const ConstraintSpec spec =
          CompileConstraint(criterion, train.examples, train.group_count);
      TrainConfig config = options.train;
      config.seed = DeriveSeed(options.train.seed, index++);
      TrainResult trained = Train(train.examples, spec, gamma, config);
      const auto h = PredictAll(trained.model, validation.examples);
      SweepRow row;
      row.gamma = gamma;
      row.rho = rho;
      row.val_parity_gap = ParityGap(h, val_groups, validation.group_count);
      row.val_accuracy = ExpectedAccuracy(h, val_labels);
      result.rows.push_back(row);
      models.push_back(std::move(trained.model));
    }
  }
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    const auto& r = result.rows[i];
    if (r.val_parity_gap > options.target_epsilon) continue;
    if (!best || r.val_accuracy > result.rows[*best].val_accuracy) best = i;
  }
  if (!best) {
    result.feasible = false;
    for (std::size_t i = 0; i < result.rows.size(); ++i) {
      if (!best ||
          result.rows[i].val_parity_gap < result.rows[*best].val_parity_gap) {
        best = i;
      }
    }
  }
  result.selected = *best;
  result.rows[*best].selected = true;
  result.selected_model = std::move(models[*best]);
  return result;
}

inline std::string SweepCsv(const SweepResult& result) {
  std::string out = "gamma,rho,val_parity_gap,val_accuracy,status\n";
  for (const auto& r : result.rows) {
    out += FormatReal(r.gamma) + "," + FormatReal(r.rho) + "," +
           FormatReal(r.val_parity_gap) + "," + FormatReal(r.val_accuracy) + ",";
    if (r.selected) out += result.feasible ? "selected" : "infeasible_min_gap";
    out += "\n";
  }
  return out;
}

struct TradeoffRow {
  double epsilon = 0.0;
  double parity_gap = 0.0;
  double accuracy = 0.0;
};

// Accuracy against bias as epsilon varies, evaluated on `test`.
inline std::vector<TradeoffRow> Tradeoff(const Dataset& train,
                                         const Dataset& test, double gamma,
                                         double rho,
                                         std::span<const double> epsilons,
                                         const TrainConfig& config) {
  std::vector<int> groups;
  std::vector<std::optional<int>> labels;
  for (const auto& e : test.examples) {
    groups.push_back(e.group);
    labels.push_back(e.label);
  }
  std::vector<TradeoffRow> rows;
  std::uint64_t index = 0;
  for (double epsilon : epsilons) {
    const Criterion criterion = StatisticalParity{rho, epsilon};
    const ConstraintSpec spec =
        CompileConstraint(criterion, train.examples, train.group_count);
    TrainConfig c = config;
    c.seed = DeriveSeed(config.seed, index++);
    const TrainResult trained = Train(train.examples, spec, gamma, c);
    const auto h = PredictAll(trained.model, test.examples);
    rows.push_back({epsilon, ParityGap(h, groups, test.group_count),
                    ExpectedAccuracy(h, labels)});
  }
  return rows;
}

// Atoms of the toy population in the order (x, s):
// (-1,0), (-1,1), (0,1), (1,0).
struct ToyPopulation {
  std::vector<double> score = {-1.0, -1.0, 0.0, 1.0};
  std::vector<int> group = {1, 2, 2, 1};
  std::vector<double> weight = {0.25, 0.25, 1.0 / 3.0, 1.0 / 6.0};
  std::vector<double> eta = {0.0, 0.0, 0.5, 1.0};
};

// Population error of a trained model on the toy population.
inline double ToyPopulationError(const RtoModel& model) {
  const ToyPopulation pop;
  std::vector<double> h;
  for (std::size_t i = 0; i < pop.score.size(); ++i) {
    ScoredExample e;
    e.score = pop.score[i];
    e.group = pop.group[i];
    e.sensitive = pop.group[i] - 1;
    h.push_back(PredictProbability(model, e));
  }
  return PopulationError(h, pop.eta, pop.weight);
}

// Error of the best rule with group means exactly rho = 0.4 on the toy
// population:
// h = 0 at x = -1, 7/10 at x = 0 and 1 at x = 1.
inline constexpr double kToyConstrainedRisk = 1.0 / 6.0;

}  // namespace rto
