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

// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "rto/adult.hpp"
#include "rto/baselines.hpp"
#include "rto/data.hpp"
#include "rto/experiments.hpp"
#include "rto/metrics.hpp"
#include "rto/oracle.hpp"
#include "rto/trainer.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int g_failures = 0;

void Report(int id, bool pass, const std::string& detail) {
  std::printf("[%s] AC%d %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string Fmt(const char* format, auto... args) {
  char buffer[512];
  std::snprintf(buffer, sizeof(buffer), format, args...);
  return buffer;
}

std::vector<int> Groups(std::span<const rto::ScoredExample> examples) {
  std::vector<int> g;
  for (const auto& e : examples) g.push_back(e.group);
  return g;
}

// Worst per-group deviation from rho (epsilon = 0) or gap excess over
// epsilon (epsilon > 0) among trained models; fed into criterion 4.
struct ParityLedger {
  int models = 0;
  int violations = 0;
  double worst = 0.0;

  void Add(std::span<const double> means, double rho, double epsilon) {
    ++models;
    double value = 0.0;
    if (epsilon == 0.0) {
      for (double m : means) value = std::max(value, std::abs(m - rho));
    } else {
      value = std::max(0.0, rto::GapOfMeans(means) - epsilon);
    }
    worst = std::max(worst, value);
    if (value > 0.01) ++violations;
  }
};

ParityLedger g_parity;

void Criterion1() {
  const auto start = Clock::now();
  const auto sample = rto::GenerateToy(60000, 1);
  const auto& examples = sample.dataset.examples;
  const rto::Criterion criterion = rto::StatisticalParity{0.4, 0.0};
  const auto spec = rto::CompileConstraint(criterion, examples, 2);
  rto::TrainConfig config;
  config.max_epochs = 50;
  config.seed = 1;
  const auto trained = rto::Train(examples, spec, 0.05, config);
  const auto predict = [&](double f, int group) {
    rto::ScoredExample e;
    e.score = f;
    e.group = group;
    return rto::PredictProbability(trained.model, e);
  };
  // x = -1 appears in both groups, x = 1 only in group 1, x = 0 only in 2.
  const double h_neg = std::max(predict(-1.0, 1), predict(-1.0, 2));
  const double h_pos = predict(1.0, 1);
  const double h_mid = predict(0.0, 2);
  const double elapsed = Seconds(start);
  const auto h = rto::PredictAll(trained.model, examples);
  g_parity.Add(rto::GroupMeans(h, Groups(examples), 2), 0.4, 0.0);
  Report(1,
         h_neg <= 0.01 && h_pos >= 0.99 && std::abs(h_mid - 0.7) <= 0.05 &&
             elapsed < 10.0,
         Fmt("toy population: h(-1)=%.4f h(0)=%.4f h(+1)=%.4f time=%.2fs "
             "(need <=0.01, 0.70+-0.05, >=0.99, <10s)",
             h_neg, h_mid, h_pos, elapsed));
}

void Criteria2And3() {
  const auto start = Clock::now();
  int agree = 0, duality_ok = 0;
  double worst_objective = 0.0, worst_h = 0.0, worst_duality = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto instance = rto::MakeRandomInstance(rto::DeriveSeed(2026, i));
    const auto result = rto::OracleCheck(
        instance.examples, instance.criterion, instance.group_count,
        instance.gamma, 1, static_cast<std::uint64_t>(i));
    worst_objective = std::max(worst_objective, result.max_objective_gap);
    worst_h = std::max(worst_h, result.max_h_difference);
    if (result.passed) ++agree;
    const double n = static_cast<double>(instance.examples.size());
    worst_duality = std::max(worst_duality, result.oracle_duality_gap / n);
    if (result.oracle_duality_gap <= 1e-6 * n) ++duality_ok;

    // Parity of the trained rule on its own sample.
    const double rho = rto::CriterionRho(instance.criterion);
    const double epsilon = rto::CriterionEpsilon(instance.criterion);
    const auto spec = rto::CompileConstraint(instance.criterion,
                                             instance.examples,
                                             instance.group_count);
    const auto trained = rto::Train(
        instance.examples, spec, instance.gamma,
        rto::OracleCheckConfig(rto::DeriveSeed(static_cast<std::uint64_t>(i), 0),
                               instance.examples.size(), instance.gamma));
    const auto h = rto::PredictAll(trained.model, instance.examples);
    g_parity.Add(rto::GroupMeans(h, Groups(instance.examples),
                                 instance.group_count),
                 rho, epsilon);
  }
  const double elapsed = Seconds(start);
  Report(2, agree == 100 && elapsed < 60.0,
         Fmt("oracle agreement: %d/100 instances, max |dF|=%.2e (<=1e-3), "
             "max |dh|=%.2e (<=1e-2), time=%.1fs (<60s)",
             agree, worst_objective, worst_h, elapsed));
  Report(3, duality_ok == 100,
         Fmt("strong duality: %d/100 instances, max |primal+dual|/N=%.2e "
             "(<=1e-6)",
             duality_ok, worst_duality));
}

void Criterion4() {
  Report(4, g_parity.violations == 0,
         Fmt("train-sample parity: %d/%d models within tolerance, worst "
             "deviation=%.2e (<=0.01)",
             g_parity.models - g_parity.violations, g_parity.models,
             g_parity.worst));
}

void Criterion5() {
  const auto start = Clock::now();
  rto::Rng rng(5);
  std::vector<rto::ScoredExample> examples;
  for (int i = 0; i < 500; ++i) {
    rto::ScoredExample e;
    e.id = std::to_string(i);
    e.group = 1 + static_cast<int>(rng.Below(2));
    const double u = rng.Uniform();
    e.score = 2.0 * (e.group == 1 ? u : u * u) - 1.0;
    examples.push_back(e);
  }
  const double rho = 0.4, epsilon = 0.0, gamma = 0.1;
  const rto::Criterion criterion = rto::StatisticalParity{rho, epsilon};
  const auto spec = rto::CompileConstraint(criterion, examples, 2);
  const auto oracle = rto::SolveAll(examples, spec, gamma);
  const double optimum = oracle.MeanDualObjective();
  rto::TrainConfig config;
  config.schedule = rto::AutoFixedRate{1.0};
  config.max_epochs = 50;
  config.convergence_tolerance = 1e-15;
  config.use_averaged_iterates = true;
  config.averaging_start_epoch = 1;  // the bound concerns the full average
  double gap_sum = 0.0;
  double alpha = 0.0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    config.seed = rto::DeriveSeed(55, static_cast<std::uint64_t>(s));
    const auto trained = rto::Train(examples, spec, gamma, config);
    alpha = trained.alpha_initial;
    gap_sum += trained.model.metadata().final_dual_objective - optimum;
  }
  const double mean_gap = gap_sum / seeds;
  const double steps = 50.0 * 500.0;
  const double bound = rto::AveragedGapBound(
      rho, epsilon, alpha, steps, oracle.Lambda(), oracle.Mu());
  const double elapsed = Seconds(start);
  Report(5, mean_gap <= 1.1 * bound && elapsed < 30.0,
         Fmt("convergence rate: mean dual gap=%.3e, bound x1.1=%.3e, "
             "alpha=%.4f, T=%.0f, time=%.2fs (<30s)",
             mean_gap, 1.1 * bound, alpha, steps, elapsed));
}

void Criterion6() {
  const auto audit = rto::AuditGeneralization(50, 6, 5000, 0.1, 0.0, 0.4, 0.05);
  Report(6, audit.count.passed >= 45,
         Fmt("generalization audit: %d/%d trials within bound %.4f (need >=45), "
             "max held-out gap=%.4f, mean=%.4f",
             audit.count.passed, audit.count.trials, audit.bound,
             audit.max_gap, audit.mean_gap));
}

// The excess risk is measured for the exact minimizer of the training
// problem (the rule the trainer targets) and for the SGD-trained rule.
void Criterion7() {
  const std::vector<std::size_t> sizes = {1000, 10000, 100000};
  const int trials = 10;
  std::vector<double> exact, sgd;
  for (std::size_t n : sizes) {
    const double gamma = std::pow(static_cast<double>(n), -1.0 / 6.0);
    double exact_total = 0.0, sgd_total = 0.0;
    for (int t = 0; t < trials; ++t) {
      const std::uint64_t seed =
          rto::DeriveSeed(7000 + n, static_cast<std::uint64_t>(t));
      const auto sample = rto::GenerateToy(n, seed);
      const auto& examples = sample.dataset.examples;
      const auto spec = rto::CompileConstraint(
          rto::StatisticalParity{0.4, 0.0}, examples, 2);
      const auto oracle = rto::SolveAll(examples, spec, gamma);
      const rto::RtoModel minimizer(gamma, spec, oracle.Lambda(), oracle.Mu());
      exact_total += rto::ToyPopulationError(minimizer) -
                     rto::kToyConstrainedRisk;
      rto::TrainConfig config;
      config.seed = seed;
      const auto trained = rto::Train(examples, spec, gamma, config);
      sgd_total += rto::ToyPopulationError(trained.model) -
                   rto::kToyConstrainedRisk;
    }
    exact.push_back(exact_total / trials);
    sgd.push_back(sgd_total / trials);
  }
  const auto monotone = [](const std::vector<double>& r) {
    return r[1] <= 1.1 * r[0] && r[2] <= 1.1 * r[1];
  };
  const bool decreasing = exact[2] < exact[0];
  Report(7, monotone(exact) && decreasing && monotone(sgd),
         Fmt("consistency: mean excess risk, exact minimizer %.3e / %.3e / "
             "%.3e, SGD %.3e / %.3e / %.3e at N=1e3/1e4/1e5; need each <= "
             "1.1 x previous",
             exact[0], exact[1], exact[2], sgd[0], sgd[1], sgd[2]));
}

// Scores on {-1, +1}; group 1 has f = +1 with probability 0.6, group 2 with
// probability 0.3. Labels agree with the score with probability 0.9.
std::vector<rto::ScoredExample> ConcentratedSample(std::size_t n, rto::Rng& rng,
                                                   const std::string& prefix) {
  std::vector<rto::ScoredExample> out;
  for (std::size_t i = 0; i < n; ++i) {
    rto::ScoredExample e;
    e.id = prefix + std::to_string(i);
    const int s = rng.Bernoulli(0.5) ? 1 : 0;
    e.group = 2 - s;
    e.sensitive = s;
    const bool positive = rng.Bernoulli(s == 1 ? 0.6 : 0.3);
    e.score = positive ? 1.0 : -1.0;
    const bool agree = rng.Bernoulli(0.9);
    e.label = (positive == agree) ? 1 : 0;
    out.push_back(e);
  }
  return out;
}

void Criterion8() {
  rto::Rng rng(8);
  const auto train = ConcentratedSample(90000, rng, "tr");
  const auto validation = ConcentratedSample(30000, rng, "va");
  const auto test = ConcentratedSample(90000, rng, "te");
  const auto test_groups = Groups(test);

  const auto roc = rto::FitRoc(train, rto::DefaultThetaGrid(), 0.02,
                               validation, 2);
  const double roc_gap =
      rto::ParityGap(rto::RocPredictAll(roc.rule, test), test_groups, 2);

  const auto shift = rto::FitShiftInference(train);
  auto corrected = rto::ApplyShiftInference(shift, test);
  for (double& p : corrected) p = p > 0.5 ? 1.0 : 0.0;
  const double shift_gap = rto::ParityGap(corrected, test_groups, 2);

  const double rho = rto::MeanLabel(train);
  const auto spec = rto::CompileConstraint(rto::StatisticalParity{rho, 0.0},
                                           train, 2);
  rto::TrainConfig config;
  config.seed = 8;
  const auto trained = rto::Train(train, spec, 0.05, config);
  const double rto_gap =
      rto::ParityGap(rto::PredictAll(trained.model, test), test_groups, 2);
  Report(8, roc_gap >= 0.05 && shift_gap >= 0.05 && rto_gap <= 0.02,
         Fmt("randomization necessity: test gap ROC=%.4f (theta=%.2f, "
             "failed=%d) shift=%.4f (need >=0.05), RTO=%.4f (need <=0.02)",
             roc_gap, roc.rule.theta, roc.failed ? 1 : 0, shift_gap, rto_gap));
}

void Criterion9() {
  const auto start = Clock::now();
  const std::filesystem::path dir = RTO_ADULT_DIR;
  if (!std::filesystem::exists(dir / "adult.data") ||
      !std::filesystem::exists(dir / "adult.test")) {
    Report(9, false, "Adult files not found under " + dir.string());
    return;
  }
  const auto train_rows = rto::ReadAdult((dir / "adult.data").string());
  const auto test_rows = rto::ReadAdult((dir / "adult.test").string());
  const auto encoder = rto::AdultEncoder::Fit(train_rows);
  const auto x_train = encoder.Transform(train_rows);
  const auto x_test = encoder.Transform(test_rows);
  const auto y_train = rto::AdultLabels(train_rows);
  const auto y_test = rto::AdultLabels(test_rows);
  const auto scorer = rto::FitLinearScorer(x_train, y_train);
  const double scorer_accuracy = rto::ScorerAccuracy(scorer, x_test, y_test);
  const auto scores = rto::ScoreRows(scorer, x_test);
  const auto pool = rto::AdultScores(test_rows, scores, "t");
  const auto split = rto::ThreeWaySplit(pool, 0);

  rto::SweepOptions options;
  options.target_epsilon = 0.02;
  options.train.seed = 9;
  options.train.max_epochs = 200;
  const auto sweep = rto::Sweep(split.train_post, split.validation, options);
  const auto& model = *sweep.selected_model;
  const auto h = rto::PredictAll(model, split.test.examples);
  std::vector<std::optional<int>> labels;
  for (const auto& e : split.test.examples) labels.push_back(e.label);
  const double gap = rto::ParityGap(h, Groups(split.test.examples), 2);
  const double accuracy = rto::ExpectedAccuracy(h, labels);
  const double elapsed = Seconds(start);
  const auto& row = sweep.rows[sweep.selected];
  Report(9, gap <= 0.02 && accuracy >= 0.815 && elapsed < 300.0,
         Fmt("Adult: scorer acc=%.4f, selected gamma=%.2f rho=%.3f, test "
             "gap=%.4f (<=0.02), test acc=%.4f (>=0.815), time=%.1fs (<300s)",
             scorer_accuracy, row.gamma, row.rho, gap, accuracy, elapsed));
}

void Criterion10() {
  const auto count = rto::ImpossibilityTrials(1000, 10);
  Report(10, count.passed == 1000 && count.trials == 1000,
         Fmt("impossibility inequality: %d/%d instances hold", count.passed,
             count.trials));
}

}  // namespace

int main() {
  try {
    Criterion1();
    Criteria2And3();
    Criterion4();
    Criterion5();
    Criterion6();
    Criterion7();
    Criterion8();
    Criterion9();
    Criterion10();
  } catch (const rto::Error& e) {
    std::printf("[FAIL] unexpected error (%s): %s\n",
                std::string(rto::ErrorCodeName(e.code())).c_str(), e.what());
    return 1;
  }
  std::printf("%d criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
