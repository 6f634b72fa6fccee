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

// Baseline post-processors and a logistic-regression score producer.
//
// Reject option classification: inside the band |f| <= theta the
// disadvantaged group is predicted positive and the advantaged group
// negative; outside the band the prediction is 1[f > 0].
//
// Shift inference: p(y | x, s) is reweighted by p(y) p(s) / p(y, s) and
// renormalized over y.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "rto/metrics.hpp"
#include "rto/model_core.hpp"
#include "rto/random.hpp"
#include "rto/status.hpp"

namespace rto {

struct RocRule {
  double theta = 0.0;
  int advantaged_group = 1;
  int disadvantaged_group = 2;
};

inline int RocPredict(const RocRule& rule, const ScoredExample& example) {
  if (std::abs(example.score) <= rule.theta) {
    if (example.group == rule.disadvantaged_group) return 1;
    if (example.group == rule.advantaged_group) return 0;
    Fail(ErrorCode::kUnknownGroup,
         "group " + std::to_string(example.group) + " unknown to the rule");
  }
  return example.score > 0.0 ? 1 : 0;
}

inline std::vector<double> RocPredictAll(
    const RocRule& rule, std::span<const ScoredExample> examples) {
  std::vector<double> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(RocPredict(rule, e));
  return out;
}

// theta in {0.01, 0.02, ..., 1.00}.
inline std::vector<double> DefaultThetaGrid() {
  std::vector<double> grid;
  for (int i = 1; i <= 100; ++i) grid.push_back(i / 100.0);
  return grid;
}

struct RocCandidate {
  double theta = 0.0;
  double parity_gap = 0.0;
  double accuracy = 0.0;
};

struct RocFit {
  RocRule rule;
  bool failed = false;  // no theta met the target
  double validation_gap = 0.0;
  double validation_accuracy = 0.0;
  std::vector<RocCandidate> candidates;
};

namespace internal {

inline std::vector<int> GroupsOf(std::span<const ScoredExample> examples) {
  std::vector<int> groups;
  groups.reserve(examples.size());
  for (const auto& e : examples) groups.push_back(e.group);
  return groups;
}

inline std::vector<std::optional<int>> LabelsOf(
    std::span<const ScoredExample> examples) {
  std::vector<std::optional<int>> labels;
  labels.reserve(examples.size());
  for (const auto& e : examples) labels.push_back(e.label);
  return labels;
}

}  // namespace internal

// The advantaged group is the one whose base rate of f > 0 on `examples` is
// higher. Among grid values meeting the validation gap target the most
// accurate wins, ties going to the smaller theta; otherwise the
// gap-minimizing theta is returned with `failed` set.
inline RocFit FitRoc(std::span<const ScoredExample> examples,
                     std::span<const double> theta_grid, double epsilon_target,
                     std::span<const ScoredExample> validation,
                     int group_count) {
  if (group_count != 2) {
    Fail(ErrorCode::kUnsupportedCriterion,
         "reject option classification supports exactly two groups");
  }
  if (theta_grid.empty()) Fail(ErrorCode::kInvalidParameter, "empty theta grid");
  if (examples.empty() || validation.empty()) {
    Fail(ErrorCode::kEmptyDataset, "reject option fit needs data");
  }
  std::vector<double> base;
  base.reserve(examples.size());
  for (const auto& e : examples) {
    ValidateScore(e);
    base.push_back(e.score > 0.0 ? 1.0 : 0.0);
  }
  const auto groups = internal::GroupsOf(examples);
  const auto rates = GroupMeans(base, groups, 2);
  RocFit fit;
  fit.rule.advantaged_group = rates[0] >= rates[1] ? 1 : 2;
  fit.rule.disadvantaged_group = 3 - fit.rule.advantaged_group;

  const auto val_groups = internal::GroupsOf(validation);
  const auto val_labels = internal::LabelsOf(validation);
  for (double theta : theta_grid) {
    if (!(theta > 0.0 && theta <= 1.0)) {
      Fail(ErrorCode::kInvalidParameter, "theta must lie in (0, 1]");
    }
    RocRule rule = fit.rule;
    rule.theta = theta;
    const auto h = RocPredictAll(rule, validation);
    fit.candidates.push_back(
        {theta, ParityGap(h, val_groups, 2), ExpectedAccuracy(h, val_labels)});
  }
  const RocCandidate* best = nullptr;
  for (const auto& c : fit.candidates) {
    if (c.parity_gap > epsilon_target) continue;
    if (best == nullptr || c.accuracy > best->accuracy ||
        (c.accuracy == best->accuracy && c.theta < best->theta)) {
      best = &c;
    }
  }
  if (best == nullptr) {
    fit.failed = true;
    for (const auto& c : fit.candidates) {
      if (best == nullptr || c.parity_gap < best->parity_gap) best = &c;
    }
  }
  fit.rule.theta = best->theta;
  fit.validation_gap = best->parity_gap;
  fit.validation_accuracy = best->accuracy;
  return fit;
}

struct ShiftInferenceRule {
  // Indexed [y][s].
  std::array<std::array<double, 2>, 2> joint{};
  std::array<std::array<double, 2>, 2> factor{};
};

inline ShiftInferenceRule FitShiftInference(
    std::span<const ScoredExample> examples) {
  if (examples.empty()) Fail(ErrorCode::kEmptyDataset, "no examples");
  std::array<std::array<double, 2>, 2> counts{};
  for (const auto& e : examples) {
    if (!e.label || !e.sensitive) {
      Fail(ErrorCode::kMissingField,
           "shift inference needs label and sensitive bit on '" + e.id + "'");
    }
    counts[static_cast<std::size_t>(*e.label)]
          [static_cast<std::size_t>(*e.sensitive)] += 1.0;
  }
  const double n = static_cast<double>(examples.size());
  ShiftInferenceRule rule;
  for (std::size_t y = 0; y < 2; ++y) {
    for (std::size_t s = 0; s < 2; ++s) {
      if (counts[y][s] == 0.0) {
        Fail(ErrorCode::kDegenerateStatistics,
             "cell (y=" + std::to_string(y) + ", s=" + std::to_string(s) +
                 ") has no mass");
      }
      rule.joint[y][s] = counts[y][s] / n;
    }
  }
  for (std::size_t y = 0; y < 2; ++y) {
    for (std::size_t s = 0; s < 2; ++s) {
      const double py = rule.joint[y][0] + rule.joint[y][1];
      const double ps = rule.joint[0][s] + rule.joint[1][s];
      rule.factor[y][s] = py * ps / rule.joint[y][s];
    }
  }
  return rule;
}

inline double ApplyShiftInference(const ShiftInferenceRule& rule,
                                  double probability, int sensitive) {
  if (sensitive != 0 && sensitive != 1) {
    Fail(ErrorCode::kValidation, "sensitive bit must be 0 or 1");
  }
  if (!(probability >= 0.0 && probability <= 1.0)) {
    Fail(ErrorCode::kValidation, "probability outside [0, 1]");
  }
  const auto s = static_cast<std::size_t>(sensitive);
  const double u1 = probability * rule.factor[1][s];
  const double u0 = (1.0 - probability) * rule.factor[0][s];
  return u1 / (u0 + u1);
}

// Corrected probabilities for examples carrying scores 2p - 1.
inline std::vector<double> ApplyShiftInference(
    const ShiftInferenceRule& rule, std::span<const ScoredExample> examples) {
  std::vector<double> out;
  out.reserve(examples.size());
  for (const auto& e : examples) {
    ValidateScore(e);
    if (!e.sensitive) {
      Fail(ErrorCode::kMissingField, "sensitive bit missing on '" + e.id + "'");
    }
    out.push_back(ApplyShiftInference(rule, 0.5 * (e.score + 1.0), *e.sensitive));
  }
  return out;
}

// Row-major dense matrix.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  std::span<const double> Row(std::size_t i) const {
    return {values.data() + i * cols, cols};
  }
};

struct LogisticConfig {
  double c = 1.0;  // inverse regularization strength
  int max_iterations = 500;
  double tolerance = 1e-6;  // on the gradient infinity norm
};

class LinearScorer {
 public:
  LinearScorer() = default;
  LinearScorer(std::vector<double> weights, double bias, double c)
      : weights_(std::move(weights)), bias_(bias), c_(c) {}

  const std::vector<double>& weights() const { return weights_; }
  double bias() const { return bias_; }
  double c() const { return c_; }

  double Margin(std::span<const double> x) const {
    if (x.size() != weights_.size()) {
      Fail(ErrorCode::kMismatch, "feature count does not match the scorer");
    }
    double m = bias_;
    for (std::size_t j = 0; j < x.size(); ++j) m += weights_[j] * x[j];
    return m;
  }
  double Probability(std::span<const double> x) const {
    return 1.0 / (1.0 + std::exp(-Margin(x)));
  }
  // 2 sigmoid(w.x + b) - 1, written as tanh for accuracy near the ends.
  double Score(std::span<const double> x) const {
    return std::tanh(0.5 * Margin(x));
  }

 private:
  std::vector<double> weights_;
  double bias_ = 0.0;
  double c_ = 1.0;
};

namespace internal {

inline double Softplus(double m) {
  return m > 0.0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m));
}

// Mean logistic loss plus (1 / (2 C n)) |w|^2 and its gradient; the last
// coordinate of `theta` is the unpenalized bias.
inline double LogisticLoss(const FeatureMatrix& x, std::span<const int> y,
                           double c, std::span<const double> theta,
                           std::vector<double>* gradient) {
  const std::size_t d = x.cols;
  const double n = static_cast<double>(x.rows);
  const double reg = 1.0 / (c * n);
  double loss = 0.0;
  if (gradient) gradient->assign(d + 1, 0.0);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const auto row = x.Row(i);
    double m = theta[d];
    for (std::size_t j = 0; j < d; ++j) m += theta[j] * row[j];
    const double sign = y[i] == 1 ? 1.0 : -1.0;
    loss += Softplus(-sign * m);
    if (gradient) {
      const double p = 1.0 / (1.0 + std::exp(-m));
      const double r = p - (y[i] == 1 ? 1.0 : 0.0);
      for (std::size_t j = 0; j < d; ++j) (*gradient)[j] += r * row[j];
      (*gradient)[d] += r;
    }
  }
  loss /= n;
  double norm_sq = 0.0;
  for (std::size_t j = 0; j < d; ++j) norm_sq += theta[j] * theta[j];
  loss += 0.5 * reg * norm_sq;
  if (gradient) {
    for (std::size_t j = 0; j <= d; ++j) (*gradient)[j] /= n;
    for (std::size_t j = 0; j < d; ++j) (*gradient)[j] += reg * theta[j];
  }
  return loss;
}

}  // namespace internal

// Accelerated gradient descent with backtracking on the L2-regularized mean
// logistic loss.
inline LinearScorer FitLinearScorer(const FeatureMatrix& x,
                                    std::span<const int> labels,
                                    const LogisticConfig& config = {}) {
  if (x.rows == 0) Fail(ErrorCode::kEmptyDataset, "no training rows");
  if (labels.size() != x.rows) {
    Fail(ErrorCode::kMismatch, "label count does not match feature rows");
  }
  if (!(config.c > 0.0) || config.max_iterations < 1) {
    Fail(ErrorCode::kInvalidParameter, "C must be > 0 and iterations >= 1");
  }
  for (double v : x.values) {
    if (!std::isfinite(v)) Fail(ErrorCode::kData, "non-finite feature value");
  }
  for (int y : labels) {
    if (y != 0 && y != 1) Fail(ErrorCode::kValidation, "labels must be 0 or 1");
  }
  const std::size_t d = x.cols;
  std::vector<double> theta(d + 1, 0.0), previous = theta, look = theta;
  std::vector<double> gradient, candidate(d + 1);
  double step = 1.0;
  double momentum = 1.0;
  for (int iter = 0; iter < config.max_iterations; ++iter) {
    const double look_loss =
        internal::LogisticLoss(x, labels, config.c, look, &gradient);
    double grad_norm = 0.0;
    for (double g : gradient) grad_norm = std::max(grad_norm, std::abs(g));
    if (grad_norm < config.tolerance) {
      theta = look;
      break;
    }
    double grad_sq = 0.0;
    for (double g : gradient) grad_sq += g * g;
    while (true) {
      for (std::size_t j = 0; j <= d; ++j) candidate[j] = look[j] - step * gradient[j];
      const double value =
          internal::LogisticLoss(x, labels, config.c, candidate, nullptr);
      if (value <= look_loss - 0.5 * step * grad_sq || step < 1e-12) break;
      step *= 0.5;
    }
    previous = theta;
    theta = candidate;
    const double next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    const double beta = (momentum - 1.0) / next;
    momentum = next;
    for (std::size_t j = 0; j <= d; ++j) {
      look[j] = theta[j] + beta * (theta[j] - previous[j]);
    }
  }
  const double bias = theta[d];
  theta.resize(d);
  return LinearScorer(std::move(theta), bias, config.c);
}

inline std::vector<double> ScoreRows(const LinearScorer& scorer,
                                     const FeatureMatrix& x) {
  std::vector<double> out;
  out.reserve(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) out.push_back(scorer.Score(x.Row(i)));
  return out;
}

inline double ScorerAccuracy(const LinearScorer& scorer, const FeatureMatrix& x,
                             std::span<const int> labels) {
  if (x.rows == 0) Fail(ErrorCode::kEmptyDataset, "no rows");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < x.rows; ++i) {
    correct += (scorer.Margin(x.Row(i)) > 0.0 ? 1 : 0) == labels[i];
  }
  return static_cast<double>(correct) / static_cast<double>(x.rows);
}

// C in {1e-4, 1e-3, ..., 1e4}.
inline std::vector<double> DefaultCGrid() {
  std::vector<double> grid;
  for (int p = -4; p <= 4; ++p) grid.push_back(std::pow(10.0, p));
  return grid;
}

struct CSelection {
  double c = 1.0;
  std::vector<double> cv_accuracy;  // per grid entry
};

// k-fold cross-validated choice of C; folds come from a seeded shuffle.
inline CSelection SelectC(const FeatureMatrix& x, std::span<const int> labels,
                          std::span<const double> c_grid, int folds,
                          std::uint64_t seed, LogisticConfig base = {}) {
  if (folds < 2 || static_cast<std::size_t>(folds) > x.rows) {
    Fail(ErrorCode::kInvalidParameter, "need 2 <= folds <= rows");
  }
  if (c_grid.empty()) Fail(ErrorCode::kInvalidParameter, "empty C grid");
  std::vector<std::size_t> order(x.rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.Shuffle(std::span<std::size_t>(order));
  std::vector<int> fold_of(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    fold_of[order[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));
  }
  const auto subset = [&](int fold, bool held_out, std::vector<int>& y) {
    FeatureMatrix m;
    m.cols = x.cols;
    y.clear();
    for (std::size_t i = 0; i < x.rows; ++i) {
      if ((fold_of[i] == fold) != held_out) continue;
      const auto row = x.Row(i);
      m.values.insert(m.values.end(), row.begin(), row.end());
      y.push_back(labels[i]);
      ++m.rows;
    }
    return m;
  };
  CSelection out;
  double best = -1.0;
  for (double c : c_grid) {
    double total = 0.0;
    for (int f = 0; f < folds; ++f) {
      std::vector<int> train_y, test_y;
      const FeatureMatrix train = subset(f, false, train_y);
      const FeatureMatrix test = subset(f, true, test_y);
      LogisticConfig config = base;
      config.c = c;
      total += ScorerAccuracy(FitLinearScorer(train, train_y, config), test,
                              test_y);
    }
    const double accuracy = total / folds;
    out.cv_accuracy.push_back(accuracy);
    if (accuracy > best) {
      best = accuracy;
      out.c = c;
    }
  }
  return out;
}

}  // namespace rto
