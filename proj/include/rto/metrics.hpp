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

// Bias and accuracy measurements over expected predictions h in [0, 1].
//
// Sums are taken over sorted values so that every metric is a function of the
// multiset of inputs: permuting the examples leaves results bit-identical.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "rto/model_core.hpp"
#include "rto/status.hpp"

namespace rto {

namespace internal {

inline double SortedSum(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double total = 0.0;
  for (double v : values) total += v;
  return total;
}

inline void CheckSameSize(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    Fail(ErrorCode::kMismatch, std::string(what) + ": size mismatch (" +
                                   std::to_string(a) + " vs " +
                                   std::to_string(b) + ")");
  }
}

}  // namespace internal

// Mean prediction per 1-based group.
inline std::vector<double> GroupMeans(std::span<const double> h,
                                      std::span<const int> groups,
                                      int group_count) {
  internal::CheckSameSize(h.size(), groups.size(), "group means");
  if (group_count < 1) Fail(ErrorCode::kInvalidParameter, "K must be >= 1");
  const auto k_count = static_cast<std::size_t>(group_count);
  std::vector<std::vector<double>> members(k_count);
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (groups[i] < 1 || groups[i] > group_count) {
      Fail(ErrorCode::kUnknownGroup,
           "group " + std::to_string(groups[i]) + " outside [1, K]");
    }
    members[static_cast<std::size_t>(groups[i] - 1)].push_back(h[i]);
  }
  std::vector<double> means(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    if (members[k].empty()) {
      Fail(ErrorCode::kEmptyGroup,
           "group " + std::to_string(k + 1) + " has no examples");
    }
    const double n = static_cast<double>(members[k].size());
    means[k] = internal::SortedSum(std::move(members[k])) / n;
  }
  return means;
}

inline double GapOfMeans(std::span<const double> means) {
  const auto [lo, hi] = std::minmax_element(means.begin(), means.end());
  return *hi - *lo;
}

// max_k mean_k(h) - min_k mean_k(h).
inline double ParityGap(std::span<const double> h, std::span<const int> groups,
                        int group_count) {
  return GapOfMeans(GroupMeans(h, groups, group_count));
}

// Empirical Cov(h, 1_S) over one set of examples.
inline double EmpiricalCovariance(std::span<const double> h,
                                  std::span<const std::optional<int>> bits) {
  internal::CheckSameSize(h.size(), bits.size(), "covariance");
  if (h.empty()) Fail(ErrorCode::kEmptyGroup, "covariance of an empty set");
  std::vector<double> hs, hv, sv;
  hs.reserve(h.size());
  hv.reserve(h.size());
  sv.reserve(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (!bits[i].has_value()) {
      Fail(ErrorCode::kMissingField, "sensitive bit missing");
    }
    const double s = static_cast<double>(*bits[i]);
    hs.push_back(h[i] * s);
    hv.push_back(h[i]);
    sv.push_back(s);
  }
  const double n = static_cast<double>(h.size());
  return internal::SortedSum(std::move(hs)) / n -
         (internal::SortedSum(std::move(hv)) / n) *
             (internal::SortedSum(std::move(sv)) / n);
}

// Mean of h y + (1 - h)(1 - y).
inline double ExpectedAccuracy(std::span<const double> h,
                               std::span<const std::optional<int>> labels) {
  internal::CheckSameSize(h.size(), labels.size(), "accuracy");
  if (h.empty()) Fail(ErrorCode::kEmptyDataset, "accuracy of an empty set");
  std::vector<double> terms;
  terms.reserve(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (!labels[i].has_value()) Fail(ErrorCode::kMissingField, "label missing");
    terms.push_back(*labels[i] == 1 ? h[i] : 1.0 - h[i]);
  }
  return internal::SortedSum(std::move(terms)) / static_cast<double>(h.size());
}

// High-probability bound on the population parity gap of a rule fitted on N
// fresh examples (natural logarithms).
inline double GeneralizationBound(double n, int group_count, double delta,
                                  double epsilon) {
  if (!(n >= 1.0) || group_count < 1 || !(delta > 0.0 && delta < 1.0) ||
      !(epsilon >= 0.0)) {
    Fail(ErrorCode::kInvalidParameter,
         "bound requires N >= 1, K >= 1, delta in (0, 1), epsilon >= 0");
  }
  const double e = std::numbers::e;
  return epsilon + 8.0 * std::sqrt(2.0 * std::log(e * n / 2.0) / n) +
         2.0 * std::sqrt(std::log(2.0 * group_count / delta) / n);
}

// Excess-risk bound of the learned rule against the best fair binary rule.
// Only meaningful when E|2 eta - 1 - f| is known, i.e. on synthetic data.
inline double ExcessRiskBound(double n, int group_count, double delta,
                              double gamma, double score_error) {
  if (!(n >= 1.0) || group_count < 1 || !(delta > 0.0 && delta < 1.0) ||
      !(gamma > 0.0)) {
    Fail(ErrorCode::kInvalidParameter, "invalid excess-risk bound arguments");
  }
  return 2.0 * gamma + 8.0 * (2.0 + 1.0 / gamma) / std::cbrt(n) + score_error +
         4.0 * std::sqrt((2.0 * group_count + 2.0 * std::log(2.0 / delta)) / n);
}

struct ImpossibilityWitness {
  std::vector<bool> in_witness;  // membership in W
  double witness_mass = 0.0;     // p(W)
  double beta = 0.5;             // (E_W f + E_notW f) / 2
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = true;
};

// Builds W = {x : (g(x) - mean g)(f(x) - beta) > 0} for a binary predictor f
// and sensitive probability g, and compares
//   lhs = p(W) |C(f, g | W)| + p(not W) |C(f, g | not W)|
//   rhs = 1/2 E|g - mean g| min{E f, 1 - E f}.
inline ImpossibilityWitness CheckImpossibilityWitness(
    std::span<const int> predictor, std::span<const double> sensitive_prob,
    std::span<const double> weights) {
  internal::CheckSameSize(predictor.size(), sensitive_prob.size(), "witness");
  internal::CheckSameSize(predictor.size(), weights.size(), "witness");
  if (predictor.empty()) {
    Fail(ErrorCode::kInvalidParameter, "witness needs at least one point");
  }
  double weight_sum = 0.0;
  for (std::size_t i = 0; i < predictor.size(); ++i) {
    if (predictor[i] != 0 && predictor[i] != 1) {
      Fail(ErrorCode::kInvalidParameter, "predictor values must be 0 or 1");
    }
    if (!(sensitive_prob[i] >= 0.0 && sensitive_prob[i] <= 1.0)) {
      Fail(ErrorCode::kInvalidParameter, "sensitive probability outside [0,1]");
    }
    if (!(weights[i] >= 0.0)) {
      Fail(ErrorCode::kInvalidParameter, "weights must be nonnegative");
    }
    weight_sum += weights[i];
  }
  if (std::abs(weight_sum - 1.0) > 1e-9) {
    Fail(ErrorCode::kInvalidParameter, "weights must sum to 1");
  }

  double g_bar = 0.0;
  double f_mean = 0.0;
  double abs_dev = 0.0;
  for (std::size_t i = 0; i < predictor.size(); ++i) {
    g_bar += weights[i] * sensitive_prob[i];
    f_mean += weights[i] * predictor[i];
  }
  for (std::size_t i = 0; i < predictor.size(); ++i) {
    abs_dev += weights[i] * std::abs(sensitive_prob[i] - g_bar);
  }

  ImpossibilityWitness out;
  out.in_witness.resize(predictor.size());
  for (std::size_t i = 0; i < predictor.size(); ++i) {
    out.in_witness[i] =
        (sensitive_prob[i] - g_bar) * (predictor[i] - 0.5) > 0.0;
  }

  struct Side {
    double mass = 0.0;
    double f = 0.0;
    double covariance = 0.0;
  };
  const auto side = [&](bool member) {
    Side s;
    double fg = 0.0, g = 0.0;
    for (std::size_t i = 0; i < predictor.size(); ++i) {
      if (out.in_witness[i] != member) continue;
      s.mass += weights[i];
      s.f += weights[i] * predictor[i];
      g += weights[i] * sensitive_prob[i];
      fg += weights[i] * predictor[i] * sensitive_prob[i];
    }
    if (s.mass > 0.0) {
      s.f /= s.mass;
      s.covariance = fg / s.mass - s.f * (g / s.mass);
    }
    return s;
  };
  const Side w = side(true);
  const Side not_w = side(false);
  out.witness_mass = w.mass;
  if (w.mass > 0.0 && not_w.mass > 0.0) {
    out.beta = 0.5 * (w.f + not_w.f);
  } else {
    out.beta = w.mass > 0.0 ? w.f : not_w.f;
  }
  out.lhs = w.mass * std::abs(w.covariance) +
            not_w.mass * std::abs(not_w.covariance);
  out.rhs = 0.5 * abs_dev * std::min(f_mean, 1.0 - f_mean);
  out.holds = out.lhs >= out.rhs - 1e-12;
  return out;
}

// Population misclassification rate of a randomized rule on a finite
// distribution with known Bayes regressor eta.
inline double PopulationError(std::span<const double> h,
                              std::span<const double> eta,
                              std::span<const double> weights) {
  internal::CheckSameSize(h.size(), eta.size(), "population error");
  internal::CheckSameSize(h.size(), weights.size(), "population error");
  double error = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    error += weights[i] * (h[i] * (1.0 - eta[i]) + (1.0 - h[i]) * eta[i]);
  }
  return error;
}

struct MetricsReport {
  std::vector<double> group_means;
  double parity_gap = 0.0;
  std::optional<std::vector<double>> covariances;
  std::optional<double> expected_accuracy;
  std::vector<std::size_t> n_per_group;

  // One JSON-lines record.
  nlohmann::json ToJson() const {
    nlohmann::json j;
    j["group_means"] = group_means;
    j["parity_gap"] = parity_gap;
    j["covariances"] =
        covariances ? nlohmann::json(*covariances) : nlohmann::json(nullptr);
    j["expected_accuracy"] = expected_accuracy
                                 ? nlohmann::json(*expected_accuracy)
                                 : nlohmann::json(nullptr);
    j["n_per_group"] = n_per_group;
    return j;
  }
};

// Full report for predictions h on examples. Covariances are filled when every
// example carries a sensitive bit; accuracy when every example has a label.
inline MetricsReport Evaluate(std::span<const ScoredExample> examples,
                              std::span<const double> h, int group_count) {
  internal::CheckSameSize(examples.size(), h.size(), "evaluate");
  if (examples.empty()) Fail(ErrorCode::kEmptyDataset, "nothing to evaluate");
  std::vector<int> groups;
  groups.reserve(examples.size());
  bool all_bits = true;
  bool all_labels = true;
  for (const auto& e : examples) {
    groups.push_back(e.group);
    all_bits = all_bits && e.sensitive.has_value();
    all_labels = all_labels && e.label.has_value();
  }
  MetricsReport report;
  report.group_means = GroupMeans(h, groups, group_count);
  report.parity_gap = GapOfMeans(report.group_means);
  report.n_per_group.assign(static_cast<std::size_t>(group_count), 0);
  for (int g : groups) ++report.n_per_group[static_cast<std::size_t>(g - 1)];
  if (all_bits) {
    std::vector<std::vector<double>> gh(static_cast<std::size_t>(group_count));
    std::vector<std::vector<std::optional<int>>> gb(gh.size());
    for (std::size_t i = 0; i < examples.size(); ++i) {
      const auto k = static_cast<std::size_t>(examples[i].group - 1);
      gh[k].push_back(h[i]);
      gb[k].push_back(examples[i].sensitive);
    }
    std::vector<double> covariances;
    for (std::size_t k = 0; k < gh.size(); ++k) {
      covariances.push_back(EmpiricalCovariance(gh[k], gb[k]));
    }
    report.covariances = std::move(covariances);
  }
  if (all_labels) {
    std::vector<std::optional<int>> labels;
    labels.reserve(examples.size());
    for (const auto& e : examples) labels.push_back(e.label);
    report.expected_accuracy = ExpectedAccuracy(h, labels);
  }
  return report;
}

}  // namespace rto
