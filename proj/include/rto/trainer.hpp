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

// Projected stochastic gradient descent on the dual objective
//
//   F(lambda, mu) = mean_i [ e (lambda_k + mu_k) + b (lambda_k - mu_k)
//                           + xi_gamma(f_i - (lambda_k - mu_k) z_i) ]
//
// with k the group of example i and e the per-sample slack (epsilon / 2 for
// statistical parity). Each visited example moves only its own group's pair
// (lambda_k, mu_k), followed by projection onto the nonnegative orthant.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "rto/model_core.hpp"
#include "rto/random.hpp"
#include "rto/status.hpp"

namespace rto {

// alpha = scale * sqrt(K / T), T the planned number of steps.
struct AutoFixedRate {
  double scale = 0.1;
};
struct FixedRate {
  double alpha = 0.01;
};
// alpha_t = c / sqrt(t)
struct InverseSqrtRate {
  double c = 0.1;
};
// alpha_t = c / (t0 + t)
struct RobbinsMonroRate {
  double c = 1.0;
  double t0 = 0.0;
};

using Schedule =
    std::variant<AutoFixedRate, FixedRate, InverseSqrtRate, RobbinsMonroRate>;

inline std::string ScheduleName(const Schedule& schedule) {
  struct Visitor {
    std::string operator()(const AutoFixedRate& s) const {
      return "auto:" + std::to_string(s.scale);
    }
    std::string operator()(const FixedRate& s) const {
      return "fixed:" + std::to_string(s.alpha);
    }
    std::string operator()(const InverseSqrtRate& s) const {
      return "invsqrt:" + std::to_string(s.c);
    }
    std::string operator()(const RobbinsMonroRate& s) const {
      std::string name = "robbins-monro:" + std::to_string(s.c);
      if (s.t0 > 0.0) name += ":" + std::to_string(s.t0);
      return name;
    }
  };
  return std::visit(Visitor{}, schedule);
}

struct TrainConfig {
  Schedule schedule = AutoFixedRate{};
  int max_epochs = 50;
  double convergence_tolerance = 1e-6;
  std::uint64_t seed = 0;
  // Unset: on for constant-step schedules, off for Robbins-Monro.
  std::optional<bool> use_averaged_iterates;
  // When false the sample is shuffled once and every epoch replays that order.
  bool shuffle_per_epoch = true;
  bool record_trace = false;
  // First epoch whose iterates enter the reported average. 1 averages every
  // iterate; later values discard the transient from the zero start. Unset:
  // the second half of the planned epochs, max_epochs / 2 + 1.
  std::optional<int> averaging_start_epoch;
};

struct TraceRecord {
  int epoch = 0;
  std::vector<double> nu;  // per-group lambda_k - mu_k of the reported iterate
  double dual_objective = 0.0;
};

struct TrainResult {
  RtoModel model;
  DualState state;
  std::vector<TraceRecord> trace;
  int epochs_run = 0;
  bool converged = false;
  double alpha_initial = 0.0;
};

inline bool UsesAveraging(const TrainConfig& config) {
  if (config.use_averaged_iterates.has_value()) {
    return *config.use_averaged_iterates;
  }
  return !std::holds_alternative<RobbinsMonroRate>(config.schedule);
}

// Per-example terms used by the dual objective and the trainer.
struct CompiledSample {
  std::vector<std::size_t> group;
  std::vector<double> score;
  std::vector<double> coefficient;
};

inline CompiledSample CompileSample(std::span<const ScoredExample> examples,
                                    const ConstraintSpec& spec) {
  CompiledSample out;
  out.group.reserve(examples.size());
  out.score.reserve(examples.size());
  out.coefficient.reserve(examples.size());
  for (const auto& e : examples) {
    ValidateScore(e);
    out.group.push_back(spec.GroupIndex(e));
    out.score.push_back(e.score);
    out.coefficient.push_back(spec.Coefficient(e));
  }
  return out;
}

inline double DualObjective(const CompiledSample& sample,
                            const ConstraintSpec& spec, double gamma,
                            std::span<const double> lambda,
                            std::span<const double> mu) {
  if (!(gamma > 0.0)) Fail(ErrorCode::kInvalidParameter, "gamma must be > 0");
  const auto k_count = static_cast<std::size_t>(spec.group_count);
  if (lambda.size() != k_count || mu.size() != k_count) {
    Fail(ErrorCode::kMismatch, "multiplier count does not match K");
  }
  for (std::size_t k = 0; k < k_count; ++k) {
    if (!(lambda[k] >= 0.0) || !(mu[k] >= 0.0)) {
      Fail(ErrorCode::kInvalidParameter, "multipliers must be nonnegative");
    }
  }
  if (sample.score.empty()) {
    Fail(ErrorCode::kEmptyDataset, "dual objective of an empty sample");
  }
  const double slack = spec.SlackPerSample();
  const double b = spec.offset;
  double total = 0.0;
  for (std::size_t i = 0; i < sample.score.size(); ++i) {
    const std::size_t k = sample.group[i];
    const double nu = lambda[k] - mu[k];
    total += slack * (lambda[k] + mu[k]) + b * nu +
             XiGamma(sample.score[i] - nu * sample.coefficient[i], gamma);
  }
  return total / static_cast<double>(sample.score.size());
}

inline double DualObjective(std::span<const ScoredExample> examples,
                            const ConstraintSpec& spec, double gamma,
                            std::span<const double> lambda,
                            std::span<const double> mu) {
  return DualObjective(CompileSample(examples, spec), spec, gamma, lambda, mu);
}

// Upper bound on E[F(averaged iterate)] - F* after T steps of fixed rate
// alpha, given an optimal (lambda*, mu*).
inline double AveragedGapBound(double rho, double epsilon, double alpha,
                               double steps,
                               std::span<const double> lambda_star,
                               std::span<const double> mu_star) {
  if (!(alpha > 0.0) || !(steps >= 1.0)) {
    Fail(ErrorCode::kInvalidParameter, "alpha must be > 0 and T >= 1");
  }
  double norm_sq = 0.0;
  for (double v : lambda_star) norm_sq += v * v;
  for (double v : mu_star) norm_sq += v * v;
  const double lipschitz = 1.0 + rho + epsilon;
  return lipschitz * lipschitz * alpha + norm_sq / (2.0 * steps * alpha);
}

inline double DefaultLearningRate(int group_count, double steps,
                                  double scale = 0.1) {
  return scale * std::sqrt(static_cast<double>(group_count) / steps);
}

inline TrainResult Train(std::span<const ScoredExample> examples,
                         const ConstraintSpec& spec, double gamma,
                         const TrainConfig& config) {
  if (examples.empty()) {
    Fail(ErrorCode::kEmptyDataset, "no training examples");
  }
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    Fail(ErrorCode::kInvalidParameter, "gamma must be a positive number");
  }
  if (config.max_epochs < 0) {
    Fail(ErrorCode::kInvalidParameter, "max_epochs must be >= 0");
  }
  // Zero epochs returns the zero multipliers and an empty trace.
  const int averaging_start =
      config.averaging_start_epoch.value_or(config.max_epochs / 2 + 1);
  if (averaging_start < 1 ||
      (config.max_epochs > 0 && averaging_start > config.max_epochs)) {
    Fail(ErrorCode::kInvalidParameter,
         "averaging_start_epoch must lie in [1, max_epochs]");
  }
  if (!(config.convergence_tolerance > 0.0)) {
    Fail(ErrorCode::kInvalidParameter, "convergence tolerance must be > 0");
  }
  const CompiledSample sample = CompileSample(examples, spec);
  const auto n = sample.score.size();
  const auto k_count = static_cast<std::size_t>(spec.group_count);
  {
    std::vector<std::size_t> counts(k_count, 0);
    for (std::size_t k : sample.group) ++counts[k];
    for (std::size_t k = 0; k < k_count; ++k) {
      if (counts[k] == 0) {
        Fail(ErrorCode::kEmptyGroup,
             "group " + std::to_string(k + 1) + " has no training examples");
      }
    }
  }

  const double planned_steps = std::max(
      1.0, static_cast<double>(config.max_epochs) * static_cast<double>(n));
  double rate_constant = 0.0;
  double rate_offset = 0.0;
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, AutoFixedRate>) {
          rate_constant =
              DefaultLearningRate(spec.group_count, planned_steps, s.scale);
        } else if constexpr (std::is_same_v<T, FixedRate>) {
          rate_constant = s.alpha;
        } else if constexpr (std::is_same_v<T, RobbinsMonroRate>) {
          rate_constant = s.c;
          rate_offset = s.t0;
        } else {
          rate_constant = s.c;
        }
      },
      config.schedule);
  if (!(rate_constant > 0.0) || !std::isfinite(rate_constant)) {
    Fail(ErrorCode::kInvalidParameter, "learning rate must be positive");
  }
  if (!(rate_offset >= 0.0) || !std::isfinite(rate_offset)) {
    Fail(ErrorCode::kInvalidParameter, "schedule offset must be >= 0");
  }
  const bool inverse_sqrt =
      std::holds_alternative<InverseSqrtRate>(config.schedule);
  const bool robbins_monro =
      std::holds_alternative<RobbinsMonroRate>(config.schedule);
  const bool averaging = UsesAveraging(config);

  const double slack = spec.SlackPerSample();
  const double b = spec.offset;
  double max_abs_z = 0.0;
  for (double z : sample.coefficient) max_abs_z = std::max(max_abs_z, std::abs(z));
  const double gradient_bound = slack + std::abs(b) + max_abs_z + 1e-12;

  DualState state = DualState::Zeros(spec.group_count);
  std::vector<TraceRecord> trace;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(config.seed);
  if (!config.shuffle_per_epoch) rng.Shuffle(std::span<std::size_t>(order));

  // Running mean of the iterates from averaging_start_epoch on. It equals
  // the state's full average when that epoch is 1.
  const bool suffix = averaging_start > 1;
  DualState tail = DualState::Zeros(spec.group_count);
  const auto reported = [&]() -> std::pair<const std::vector<double>&,
                                           const std::vector<double>&> {
    if (averaging && suffix && tail.step_count > 0) {
      return {tail.lambda_avg, tail.mu_avg};
    }
    if (averaging && !suffix) return {state.lambda_avg, state.mu_avg};
    return {state.lambda, state.mu};
  };

  std::uint64_t t = 0;
  int epochs_run = 0;
  bool converged = false;
  std::vector<double> lambda_prev(k_count), mu_prev(k_count);
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    if (config.shuffle_per_epoch) rng.Shuffle(std::span<std::size_t>(order));
    lambda_prev = state.lambda;
    mu_prev = state.mu;
    for (std::size_t i : order) {
      ++t;
      double alpha = rate_constant;
      if (inverse_sqrt) {
        alpha = rate_constant / std::sqrt(static_cast<double>(t));
      } else if (robbins_monro) {
        alpha = rate_constant / (rate_offset + static_cast<double>(t));
      }
      const std::size_t k = sample.group[i];
      const double z = sample.coefficient[i];
      const double nu = state.lambda[k] - state.mu[k];
      const double h = std::clamp((sample.score[i] - nu * z) / gamma, 0.0, 1.0);
      const double g_lambda = slack + b - z * h;
      const double g_mu = slack - b + z * h;
      if (std::abs(g_lambda) > gradient_bound ||
          std::abs(g_mu) > gradient_bound) {
        Fail(ErrorCode::kInternal, "stochastic gradient exceeds its bound");
      }
      state.lambda[k] = std::max(0.0, state.lambda[k] - alpha * g_lambda);
      state.mu[k] = std::max(0.0, state.mu[k] - alpha * g_mu);
      state.RecordIterate();
      if (suffix && epoch >= averaging_start) {
        tail.lambda = state.lambda;
        tail.mu = state.mu;
        tail.RecordIterate();
      }
    }
    epochs_run = epoch;
    double movement = 0.0;
    for (std::size_t k = 0; k < k_count; ++k) {
      movement = std::max(movement, std::abs(state.lambda[k] - lambda_prev[k]) +
                                        std::abs(state.mu[k] - mu_prev[k]));
    }
    if (config.record_trace) {
      const auto [lambda, mu] = reported();
      TraceRecord record;
      record.epoch = epoch;
      record.nu.resize(k_count);
      for (std::size_t k = 0; k < k_count; ++k) record.nu[k] = lambda[k] - mu[k];
      record.dual_objective = DualObjective(sample, spec, gamma, lambda, mu);
      trace.push_back(std::move(record));
    }
    if (movement < config.convergence_tolerance) {
      converged = true;
      break;
    }
  }

  const auto [lambda, mu] = reported();
  TrainingMetadata metadata;
  metadata.seed = config.seed;
  metadata.schedule = ScheduleName(config.schedule);
  metadata.epochs = epochs_run;
  metadata.final_dual_objective = DualObjective(sample, spec, gamma, lambda, mu);
  RtoModel model(gamma, spec, lambda, mu, metadata);
  return TrainResult{std::move(model), std::move(state), std::move(trace),
                     epochs_run, converged, rate_constant};
}

}  // namespace rto
