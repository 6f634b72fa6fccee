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

// Core types of the randomized threshold optimizer: scored examples, fairness
// criteria compiled into per-group linear constraints, dual multipliers and
// the ramp prediction rule
//
//   h(x) = clamp((f(x) - nu_k * z(x)) / gamma, 0, 1),  nu_k = lambda_k - mu_k
//
// where k is the group of x and z(x) is the compiled per-sample coefficient.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rto/random.hpp"
#include "rto/status.hpp"

namespace rto {

// One classifier output. `score` is f(x) in [-1, 1]; `group` is 1-based.
struct ScoredExample {
  std::string id;
  double score = 0.0;
  int group = 1;
  std::optional<int> sensitive;  // 1_S(x), required by the covariance criterion
  std::optional<int> label;
};

// |mean_k(h) - rho| <= epsilon / 2 for every group k.
struct StatisticalParity {
  double rho = 0.5;
  double epsilon = 0.0;
};

// |Cov(h, 1_S | group k)| <= epsilon for every group k.
struct ConditionalCovariance {
  double epsilon = 0.0;
};

using Criterion = std::variant<StatisticalParity, ConditionalCovariance>;

inline bool IsCovariance(const Criterion& criterion) {
  return std::holds_alternative<ConditionalCovariance>(criterion);
}

inline double CriterionEpsilon(const Criterion& criterion) {
  return std::visit([](const auto& c) { return c.epsilon; }, criterion);
}

inline double CriterionRho(const Criterion& criterion) {
  if (const auto* parity = std::get_if<StatisticalParity>(&criterion)) {
    return parity->rho;
  }
  return 0.0;
}

// A criterion compiled into the general per-group form
//
//   | sum_{i in S_k} (z_i h_i - b) | <= epsilon_k.
struct ConstraintSpec {
  Criterion criterion;
  int group_count = 0;
  double offset = 0.0;                  // b
  std::vector<double> group_slack;      // epsilon_k
  std::vector<std::size_t> group_sizes;  // |S_k| of the compilation sample
  std::vector<double> sensitive_rate;   // rho_k, covariance criterion only

  // epsilon_k / |S_k|: epsilon / 2 for parity, epsilon for covariance.
  double SlackPerSample() const {
    return IsCovariance(criterion) ? CriterionEpsilon(criterion)
                                   : CriterionEpsilon(criterion) / 2.0;
  }

  // Group index (0-based) of an example, validated against group_count.
  std::size_t GroupIndex(const ScoredExample& example) const {
    if (example.group < 1 || example.group > group_count) {
      Fail(ErrorCode::kUnknownGroup,
           "group " + std::to_string(example.group) + " of example '" +
               example.id + "' is outside [1, " +
               std::to_string(group_count) + "]");
    }
    return static_cast<std::size_t>(example.group - 1);
  }

  // z_i for one example.
  double Coefficient(const ScoredExample& example) const {
    if (!IsCovariance(criterion)) return 1.0;
    const std::size_t k = GroupIndex(example);
    if (!example.sensitive.has_value()) {
      Fail(ErrorCode::kMissingField,
           "example '" + example.id +
               "' has no sensitive bit, required by the covariance criterion");
    }
    return static_cast<double>(*example.sensitive) - sensitive_rate[k];
  }
};

// xi_gamma(w): 0 for w <= 0, w^2 / (2 gamma) on [0, gamma], w - gamma / 2
// above. This is the per-sample conjugate of the regularized primal.
inline double XiGamma(double w, double gamma) {
  if (!(gamma > 0.0)) {
    Fail(ErrorCode::kInvalidParameter, "gamma must be positive");
  }
  if (w <= 0.0) return 0.0;
  if (w <= gamma) return w * w / (2.0 * gamma);
  return w - gamma / 2.0;
}

// d/dw xi_gamma(w) = clamp(w / gamma, 0, 1).
inline double XiGammaDerivative(double w, double gamma) {
  if (!(gamma > 0.0)) {
    Fail(ErrorCode::kInvalidParameter, "gamma must be positive");
  }
  return std::clamp(w / gamma, 0.0, 1.0);
}

// Ramp rule for a single example with effective shift nu and coefficient z.
inline double RampProbability(double score, double nu, double z,
                              double gamma) {
  return XiGammaDerivative(score - nu * z, gamma);
}

// Converts a probability estimate p(y=1|x) into a score 2p - 1.
inline double ProbabilityToScore(double probability) {
  if (!std::isfinite(probability) || probability < 0.0 || probability > 1.0) {
    Fail(ErrorCode::kValidation,
         "probability " + std::to_string(probability) + " outside [0, 1]");
  }
  return 2.0 * probability - 1.0;
}

inline void ValidateScore(const ScoredExample& example) {
  if (!std::isfinite(example.score)) {
    Fail(ErrorCode::kData, "non-finite score for example '" + example.id + "'");
  }
  if (example.score < -1.0 || example.score > 1.0) {
    Fail(ErrorCode::kValidation, "score " + std::to_string(example.score) +
                                     " of example '" + example.id +
                                     "' outside [-1, 1]");
  }
}

// Nonnegative per-group multipliers plus the running mean of every
// post-projection iterate.
struct DualState {
  std::vector<double> lambda;
  std::vector<double> mu;
  std::vector<double> lambda_avg;
  std::vector<double> mu_avg;
  std::uint64_t step_count = 0;

  static DualState Zeros(int group_count) {
    const auto k = static_cast<std::size_t>(group_count);
    return DualState{std::vector<double>(k, 0.0), std::vector<double>(k, 0.0),
                     std::vector<double>(k, 0.0), std::vector<double>(k, 0.0),
                     0};
  }

  // Folds the current iterate into the averages.
  void RecordIterate() {
    ++step_count;
    const double weight = 1.0 / static_cast<double>(step_count);
    for (std::size_t k = 0; k < lambda.size(); ++k) {
      lambda_avg[k] += (lambda[k] - lambda_avg[k]) * weight;
      mu_avg[k] += (mu[k] - mu_avg[k]) * weight;
    }
  }
};

struct TrainingMetadata {
  std::uint64_t seed = 0;
  std::string schedule;
  int epochs = 0;
  double final_dual_objective = 0.0;
};

// Everything needed to evaluate h_gamma on new examples.
class RtoModel {
 public:
  RtoModel(double gamma, ConstraintSpec constraint, std::vector<double> lambda,
           std::vector<double> mu, TrainingMetadata metadata = {})
      : gamma_(gamma),
        constraint_(std::move(constraint)),
        lambda_(std::move(lambda)),
        mu_(std::move(mu)),
        metadata_(std::move(metadata)) {
    if (!(gamma_ > 0.0) || !std::isfinite(gamma_)) {
      Fail(ErrorCode::kInvalidParameter,
           "gamma must be a positive finite number");
    }
    const auto k = static_cast<std::size_t>(constraint_.group_count);
    if (constraint_.group_count < 1 || lambda_.size() != k || mu_.size() != k) {
      Fail(ErrorCode::kMismatch, "multiplier count does not match K");
    }
    if (IsCovariance(constraint_.criterion) &&
        constraint_.sensitive_rate.size() != k) {
      Fail(ErrorCode::kMismatch, "covariance model needs one rate per group");
    }
    for (std::size_t i = 0; i < k; ++i) {
      if (!(lambda_[i] >= 0.0) || !(mu_[i] >= 0.0)) {
        Fail(ErrorCode::kInvalidParameter, "multipliers must be nonnegative");
      }
    }
  }

  double gamma() const { return gamma_; }
  int group_count() const { return constraint_.group_count; }
  const ConstraintSpec& constraint() const { return constraint_; }
  const std::vector<double>& lambda() const { return lambda_; }
  const std::vector<double>& mu() const { return mu_; }
  const TrainingMetadata& metadata() const { return metadata_; }

  // nu_k = lambda_k - mu_k for 1-based group k.
  double Shift(int group) const {
    ScoredExample probe;
    probe.group = group;
    const std::size_t k = constraint_.GroupIndex(probe);
    return lambda_[k] - mu_[k];
  }

 private:
  double gamma_;
  ConstraintSpec constraint_;
  std::vector<double> lambda_;
  std::vector<double> mu_;
  TrainingMetadata metadata_;
};

inline double PredictProbability(const RtoModel& model,
                                 const ScoredExample& example) {
  ValidateScore(example);
  const ConstraintSpec& spec = model.constraint();
  const std::size_t k = spec.GroupIndex(example);
  const double z = spec.Coefficient(example);
  const double nu = model.lambda()[k] - model.mu()[k];
  return RampProbability(example.score, nu, z, model.gamma());
}

// Draws a hard label: 1 with probability PredictProbability(model, example).
inline int SamplePrediction(const RtoModel& model, const ScoredExample& example,
                            Rng& rng) {
  return rng.Bernoulli(PredictProbability(model, example)) ? 1 : 0;
}

inline std::vector<double> PredictAll(const RtoModel& model,
                                      std::span<const ScoredExample> examples) {
  std::vector<double> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(PredictProbability(model, e));
  return out;
}

inline void ValidateCriterion(const Criterion& criterion) {
  const double epsilon = CriterionEpsilon(criterion);
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    Fail(ErrorCode::kInvalidParameter, "epsilon must be >= 0");
  }
  if (const auto* parity = std::get_if<StatisticalParity>(&criterion)) {
    if (!(parity->rho >= 0.0 && parity->rho <= 1.0)) {
      Fail(ErrorCode::kInvalidParameter, "rho must lie in [0, 1]");
    }
  }
}

// Compiles a criterion on a training sample with groups 1..group_count.
inline ConstraintSpec CompileConstraint(const Criterion& criterion,
                                        std::span<const ScoredExample> training,
                                        int group_count) {
  ValidateCriterion(criterion);
  if (group_count < 1) {
    Fail(ErrorCode::kInvalidParameter, "group count must be >= 1");
  }
  ConstraintSpec spec;
  spec.criterion = criterion;
  spec.group_count = group_count;
  const auto k_count = static_cast<std::size_t>(group_count);
  spec.group_sizes.assign(k_count, 0);
  std::vector<double> sensitive_sum(k_count, 0.0);
  for (const auto& e : training) {
    const std::size_t k = spec.GroupIndex(e);
    ++spec.group_sizes[k];
    if (IsCovariance(criterion)) {
      if (!e.sensitive.has_value()) {
        Fail(ErrorCode::kMissingField,
             "example '" + e.id + "' has no sensitive bit");
      }
      sensitive_sum[k] += *e.sensitive;
    }
  }
  for (std::size_t k = 0; k < k_count; ++k) {
    if (spec.group_sizes[k] == 0) {
      Fail(ErrorCode::kEmptyGroup,
           "group " + std::to_string(k + 1) + " has no training examples");
    }
  }
  const double per_sample = spec.SlackPerSample();
  spec.group_slack.resize(k_count);
  for (std::size_t k = 0; k < k_count; ++k) {
    spec.group_slack[k] = static_cast<double>(spec.group_sizes[k]) * per_sample;
  }
  if (IsCovariance(criterion)) {
    spec.offset = 0.0;
    spec.sensitive_rate.resize(k_count);
    for (std::size_t k = 0; k < k_count; ++k) {
      spec.sensitive_rate[k] =
          sensitive_sum[k] / static_cast<double>(spec.group_sizes[k]);
    }
  } else {
    spec.offset = CriterionRho(criterion);
  }
  return spec;
}

}  // namespace rto
