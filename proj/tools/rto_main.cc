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

// Command-line front end. Exit status: 0 on success, 1 when a check command
// ran but a check failed, 2 for command-line usage errors and 10 + code for
// library errors (see ExitCodeFor).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rto/adult.hpp"
#include "rto/baselines.hpp"
#include "rto/data.hpp"
#include "rto/experiments.hpp"
#include "rto/metrics.hpp"
#include "rto/model_core.hpp"
#include "rto/oracle.hpp"
#include "rto/status.hpp"
#include "rto/trainer.hpp"

namespace {

constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

int ExitCodeFor(rto::ErrorCode code) { return 10 + static_cast<int>(code); }

std::string Fmt(const char* format, double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), format, value);
  return buffer;
}

std::vector<double> ParseList(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto value = rto::internal::ParseReal(item);
    if (!value || !std::isfinite(*value)) {
      rto::Fail(rto::ErrorCode::kInvalidParameter,
                std::string("bad entry '") + item + "' in " + what);
    }
    out.push_back(*value);
  }
  if (out.empty()) {
    rto::Fail(rto::ErrorCode::kInvalidParameter, std::string("empty ") + what);
  }
  return out;
}

// auto[:scale] | fixed:alpha | invsqrt:c | robbins-monro:c[:t0]
rto::Schedule ParseSchedule(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ':')) parts.push_back(item);
  const auto number = [&](std::size_t i) {
    const auto v = rto::internal::ParseReal(parts[i]);
    if (!v || !(*v > 0.0) || !std::isfinite(*v)) {
      rto::Fail(rto::ErrorCode::kInvalidParameter,
                "bad number in schedule '" + text + "'");
    }
    return *v;
  };
  const std::string kind = parts.empty() ? "" : parts[0];
  if (kind == "auto" && parts.size() <= 2) {
    rto::AutoFixedRate s;
    if (parts.size() == 2) s.scale = number(1);
    return s;
  }
  if (kind == "fixed" && parts.size() == 2) return rto::FixedRate{number(1)};
  if (kind == "invsqrt" && parts.size() == 2) {
    return rto::InverseSqrtRate{number(1)};
  }
  if (kind == "robbins-monro" && (parts.size() == 2 || parts.size() == 3)) {
    rto::RobbinsMonroRate s{number(1), 0.0};
    if (parts.size() == 3) s.t0 = number(2);
    return s;
  }
  rto::Fail(rto::ErrorCode::kInvalidParameter,
            "unknown schedule '" + text + "'");
}

rto::Criterion MakeCriterion(const std::string& name, double rho,
                             double epsilon) {
  if (name == "parity") return rto::StatisticalParity{rho, epsilon};
  if (name == "covariance") return rto::ConditionalCovariance{epsilon};
  rto::Fail(rto::ErrorCode::kUnsupportedCriterion,
            "unknown criterion '" + name + "'");
}

void WriteText(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) rto::Fail(rto::ErrorCode::kIo, "cannot write '" + path + "'");
  out << text;
  if (!out) rto::Fail(rto::ErrorCode::kIo, "write to '" + path + "' failed");
}

std::string ShiftsLine(const rto::RtoModel& model) {
  std::string line;
  for (int k = 1; k <= model.group_count(); ++k) {
    line += "  nu_" + std::to_string(k) + " = " + Fmt("%.6f", model.Shift(k));
    line += "\n";
  }
  return line;
}

// Options shared by every command that trains.
struct TrainFlags {
  std::string criterion = "parity";
  double gamma = 0.05;
  std::optional<double> rho;
  double epsilon = 0.0;
  int epochs = 50;
  std::string schedule = "auto";
  std::uint64_t seed = 0;

  void Add(CLI::App* app) {
    app->add_option("--criterion", criterion, "parity or covariance")
        ->capture_default_str();
    app->add_option("--gamma", gamma, "ramp width")->capture_default_str();
    app->add_option("--rho", rho,
                    "target group mean (default: mean training label)");
    app->add_option("--epsilon", epsilon, "allowed violation")
        ->capture_default_str();
    app->add_option("--epochs", epochs, "maximum epochs")->capture_default_str();
    app->add_option("--schedule", schedule,
                    "auto[:scale] | fixed:alpha | invsqrt:c | "
                    "robbins-monro:c[:t0]")
        ->capture_default_str();
    app->add_option("--seed", seed, "random seed")->capture_default_str();
  }

  rto::TrainConfig Config() const {
    rto::TrainConfig config;
    config.schedule = ParseSchedule(schedule);
    config.max_epochs = epochs;
    config.seed = seed;
    return config;
  }

  double ResolveRho(const rto::Dataset& data) const {
    if (rho) return *rho;
    if (criterion == "covariance") return 0.0;
    return rto::MeanLabel(data.examples);
  }
};

int RunTrain(const std::string& input, const TrainFlags& flags,
             const std::string& out_model, const std::string& trace_path) {
  const rto::Dataset data = rto::ReadScores(input);
  const rto::Criterion criterion =
      MakeCriterion(flags.criterion, flags.ResolveRho(data), flags.epsilon);
  const auto spec =
      rto::CompileConstraint(criterion, data.examples, data.group_count);
  rto::TrainConfig config = flags.Config();
  config.record_trace = !trace_path.empty();
  const auto result = rto::Train(data.examples, spec, flags.gamma, config);
  std::cout << "trained on " << data.size() << " examples, K="
            << data.group_count << ", epochs=" << result.epochs_run
            << (result.converged ? " (converged)" : "") << "\n";
  std::cout << "final dual objective = "
            << Fmt("%.9g", result.model.metadata().final_dual_objective)
            << "\n" << ShiftsLine(result.model);
  if (!out_model.empty()) rto::SaveModel(out_model, result.model);
  if (!trace_path.empty()) {
    std::string csv = "epoch,dual_objective";
    for (int k = 1; k <= data.group_count; ++k) csv += ",nu_" + std::to_string(k);
    csv += "\n";
    for (const auto& r : result.trace) {
      csv += std::to_string(r.epoch) + "," + rto::FormatReal(r.dual_objective);
      for (double nu : r.nu) csv += "," + rto::FormatReal(nu);
      csv += "\n";
    }
    WriteText(trace_path, csv);
  }
  return 0;
}

int RunPredict(const std::string& model_path, const std::string& input,
               const std::string& out, std::uint64_t seed) {
  const rto::Dataset data = rto::ReadScores(input);
  std::ifstream in(model_path);
  if (!in) rto::Fail(rto::ErrorCode::kIo, "cannot open '" + model_path + "'");
  const auto model = rto::LoadModel(in, model_path, data.group_count);
  rto::Rng rng(seed);
  std::string csv = "id,probability,prediction\n";
  for (const auto& e : data.examples) {
    const double p = rto::PredictProbability(model, e);
    csv += e.id + "," + rto::FormatReal(p) + "," +
           (rng.Bernoulli(p) ? "1" : "0") + "\n";
  }
  if (out.empty()) {
    std::cout << csv;
  } else {
    WriteText(out, csv);
    std::cout << "wrote " << data.size() << " predictions to " << out << "\n";
  }
  return 0;
}

int RunEvaluate(const std::string& model_path, const std::string& input,
                const std::string& out_report) {
  const rto::Dataset data = rto::ReadScores(input);
  std::ifstream in(model_path);
  if (!in) rto::Fail(rto::ErrorCode::kIo, "cannot open '" + model_path + "'");
  const auto model = rto::LoadModel(in, model_path, data.group_count);
  const auto h = rto::PredictAll(model, data.examples);
  const auto report = rto::Evaluate(data.examples, h, data.group_count);
  for (std::size_t k = 0; k < report.group_means.size(); ++k) {
    std::cout << "group " << k + 1 << ": n=" << report.n_per_group[k]
              << " mean h=" << Fmt("%.6f", report.group_means[k]) << "\n";
  }
  std::cout << "parity gap = " << Fmt("%.6f", report.parity_gap) << "\n";
  if (report.expected_accuracy) {
    std::cout << "expected accuracy = "
              << Fmt("%.6f", *report.expected_accuracy) << "\n";
  }
  if (!out_report.empty()) WriteText(out_report, report.ToJson().dump() + "\n");
  return 0;
}

struct SweepFlags {
  std::string train, val, test, out, out_model;
  std::string gamma_grid, rho_grid;
  double epsilon = 0.0;
  double target_epsilon = 0.02;
  int epochs = 50;
  std::string schedule = "auto";
  std::uint64_t seed = 0;
};

int RunSweep(const SweepFlags& f) {
  const rto::Dataset train = rto::ReadScores(f.train);
  const rto::Dataset val = rto::ReadScores(f.val);
  rto::SweepOptions options;
  if (!f.gamma_grid.empty()) options.gamma_grid = ParseList(f.gamma_grid, "gamma grid");
  if (!f.rho_grid.empty()) options.rho_grid = ParseList(f.rho_grid, "rho grid");
  options.epsilon = f.epsilon;
  options.target_epsilon = f.target_epsilon;
  options.train.schedule = ParseSchedule(f.schedule);
  options.train.max_epochs = f.epochs;
  options.train.seed = f.seed;
  const auto result = rto::Sweep(train, val, options);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
  const std::string csv = rto::SweepCsv(result);
  if (f.out.empty()) {
    std::cout << csv;
  } else {
    WriteText(f.out, csv);
  }
  const auto& row = result.rows[result.selected];
  std::cout << (result.feasible ? "selected" : "no feasible point; minimum gap")
            << ": gamma=" << rto::FormatReal(row.gamma)
            << " rho=" << Fmt("%.6f", row.rho)
            << " val gap=" << Fmt("%.6f", row.val_parity_gap)
            << " val accuracy=" << Fmt("%.6f", row.val_accuracy) << "\n";
  if (!f.out_model.empty()) rto::SaveModel(f.out_model, *result.selected_model);
  if (!f.test.empty()) {
    const rto::Dataset test = rto::ReadScores(f.test);
    rto::CheckDisjoint(train, test);
    rto::CheckDisjoint(val, test);
    const auto h = rto::PredictAll(*result.selected_model, test.examples);
    const auto report = rto::Evaluate(test.examples, h, test.group_count);
    std::cout << "test gap=" << Fmt("%.6f", report.parity_gap);
    if (report.expected_accuracy) {
      std::cout << " test accuracy=" << Fmt("%.6f", *report.expected_accuracy);
    }
    std::cout << "\n";
  }
  return 0;
}

int RunOracleCheck(const std::string& input, const TrainFlags& flags,
                   int seeds) {
  const rto::Dataset data = rto::ReadScores(input);
  const rto::Criterion criterion =
      MakeCriterion(flags.criterion, flags.ResolveRho(data), flags.epsilon);
  const auto result = rto::OracleCheck(data.examples, criterion,
                                       data.group_count, flags.gamma, seeds,
                                       flags.seed);
  std::cout << "seeds=" << result.seeds << "\n"
            << "max |dual objective difference| = "
            << Fmt("%.3e", result.max_objective_gap) << " (<= 1e-3)\n"
            << "max |h difference| = " << Fmt("%.3e", result.max_h_difference)
            << " (<= 1e-2)\n"
            << "oracle |primal + dual| = "
            << Fmt("%.3e", result.oracle_duality_gap) << "\n"
            << (result.passed ? "PASS" : "FAIL") << "\n";
  return result.passed ? 0 : kExitCheckFailed;
}

int RunTheoryCheck(int trials, int audit_trials, std::uint64_t seed) {
  bool ok = true;
  if (trials == 0) {
    std::cerr << "warning: 0 impossibility trials; vacuous pass\n";
  } else {
    const auto count = rto::ImpossibilityTrials(trials, seed);
    std::cout << "impossibility inequality: " << count.passed << "/"
              << count.trials << " hold\n";
    ok = ok && count.passed == count.trials;
  }
  if (audit_trials == 0) {
    std::cerr << "warning: 0 bound-audit trials; vacuous pass\n";
  } else {
    const auto audit = rto::AuditGeneralization(
        audit_trials, rto::DeriveSeed(seed, 1), 5000, 0.1, 0.0, 0.4, 0.05);
    const int needed = static_cast<int>(std::ceil(0.9 * audit_trials));
    std::cout << "bound audit: " << audit.count.passed << "/"
              << audit.count.trials << " within " << Fmt("%.4f", audit.bound)
              << " (need " << needed << ")\n";
    ok = ok && audit.count.passed >= needed;
  }
  std::cout << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? 0 : kExitCheckFailed;
}

int RunTradeoff(const std::string& train_path, const std::string& test_path,
                const TrainFlags& flags, const std::string& epsilons,
                const std::string& out) {
  const rto::Dataset train = rto::ReadScores(train_path);
  const rto::Dataset test = rto::ReadScores(test_path);
  rto::CheckDisjoint(train, test);
  const auto grid = ParseList(epsilons, "epsilon list");
  const auto rows = rto::Tradeoff(train, test, flags.gamma,
                                  flags.ResolveRho(train), grid, flags.Config());
  std::string csv = "epsilon,parity_gap,accuracy\n";
  for (const auto& r : rows) {
    csv += rto::FormatReal(r.epsilon) + "," + rto::FormatReal(r.parity_gap) +
           "," + rto::FormatReal(r.accuracy) + "\n";
  }
  if (out.empty()) {
    std::cout << csv;
  } else {
    WriteText(out, csv);
    std::cout << "wrote " << rows.size() << " rows to " << out << "\n";
  }
  return 0;
}

int RunPrepareAdult(const std::string& dir, const std::string& prefix,
                    double c, std::uint64_t seed) {
  const std::filesystem::path base = dir;
  const auto train_rows = rto::ReadAdult((base / "adult.data").string());
  const auto test_rows = rto::ReadAdult((base / "adult.test").string());
  const auto encoder = rto::AdultEncoder::Fit(train_rows);
  rto::LogisticConfig config;
  config.c = c;
  const auto scorer = rto::FitLinearScorer(encoder.Transform(train_rows),
                                           rto::AdultLabels(train_rows), config);
  const auto x_test = encoder.Transform(test_rows);
  std::cout << "scorer test accuracy = "
            << Fmt("%.4f", rto::ScorerAccuracy(scorer, x_test,
                                               rto::AdultLabels(test_rows)))
            << "\n";
  const auto pool =
      rto::AdultScores(test_rows, rto::ScoreRows(scorer, x_test), "t");
  const auto split = rto::ThreeWaySplit(pool, seed);
  rto::WriteScores(prefix + "train.csv", split.train_post);
  rto::WriteScores(prefix + "val.csv", split.validation);
  rto::WriteScores(prefix + "test.csv", split.test);
  std::cout << "wrote " << prefix << "{train,val,test}.csv ("
            << split.train_post.size() << "/" << split.validation.size() << "/"
            << split.test.size() << " rows)\n";
  return 0;
}

// Reads key=value lines ('#' comments) and appends "--key value" for every
// key not already given on the command line, so flags take precedence.
std::vector<std::string> ApplyConfigFile(std::vector<std::string> args) {
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i),
                 args.begin() + static_cast<std::ptrdiff_t>(i + 2));
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (!path) return args;
  std::ifstream in(*path);
  if (!in) rto::Fail(rto::ErrorCode::kIo, "cannot open config '" + *path + "'");
  const auto given = [&](const std::string& flag) {
    for (const auto& a : args) {
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    }
    return false;
  };
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const std::string_view trimmed = rto::internal::Trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string_view::npos) {
      rto::internal::FailAtLine(rto::ErrorCode::kParse, *path, line_number,
                                "expected key=value");
    }
    const std::string key(rto::internal::Trim(trimmed.substr(0, eq)));
    const std::string value(rto::internal::Trim(trimmed.substr(eq + 1)));
    const std::string flag = "--" + key;
    if (!given(flag)) {
      args.push_back(flag);
      args.push_back(value);
    }
  }
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Randomized threshold post-processing for fair classification"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");
  // Accepted here only so --help lists it; ApplyConfigFile consumes it.
  std::string unused_config;
  app.add_option("--config", unused_config, "key=value file of defaults")
      ->configurable(false);

  std::string input, out, out_model, trace, model, out_report;
  TrainFlags flags;
  SweepFlags sweep;
  int seeds = 1;
  int trials = 1000;
  int audit_trials = 50;
  std::string epsilons = "0,0.01,0.02,0.05,0.1,0.2";
  std::string adult_dir = "data/adult";
  std::string prefix = "adult_";
  double c = 1.0;
  std::size_t n = 60000;

  auto* train = app.add_subcommand("train", "train a post-processor");
  train->add_option("--input", input, "score file")->required();
  flags.Add(train);
  train->add_option("--out-model", out_model, "model output path");
  train->add_option("--trace", trace, "per-epoch trace CSV path");

  auto* predict = app.add_subcommand("predict", "per-example probabilities");
  predict->add_option("--model", model, "model file")->required();
  predict->add_option("--input", input, "score file")->required();
  predict->add_option("--out", out, "CSV output (default: stdout)");
  predict->add_option("--seed", flags.seed, "seed for hard predictions")
      ->capture_default_str();

  auto* evaluate = app.add_subcommand("evaluate", "fairness and accuracy report");
  evaluate->add_option("--model", model, "model file")->required();
  evaluate->add_option("--input", input, "score file")->required();
  evaluate->add_option("--out-report", out_report, "JSON-lines report path");

  auto* sweep_cmd = app.add_subcommand("sweep", "validation grid over gamma, rho");
  sweep_cmd->add_option("--input-train", sweep.train, "training scores")->required();
  sweep_cmd->add_option("--input-val", sweep.val, "validation scores")->required();
  sweep_cmd->add_option("--input-test", sweep.test, "optional test scores");
  sweep_cmd->add_option("--gamma-grid", sweep.gamma_grid,
                        "comma-separated gammas (default 0.01,0.02,0.05,0.1,0.2)");
  sweep_cmd->add_option("--rho-grid", sweep.rho_grid,
                        "comma-separated rhos (default mean(y) + "
                        "{-0.1,-0.05,0,0.05,0.1})");
  sweep_cmd->add_option("--epsilon", sweep.epsilon, "training epsilon")
      ->capture_default_str();
  sweep_cmd->add_option("--target-epsilon", sweep.target_epsilon,
                        "validation gap target")
      ->capture_default_str();
  sweep_cmd->add_option("--epochs", sweep.epochs, "epochs per point")
      ->capture_default_str();
  sweep_cmd->add_option("--schedule", sweep.schedule, "learning-rate schedule")
      ->capture_default_str();
  sweep_cmd->add_option("--seed", sweep.seed, "master seed")->capture_default_str();
  sweep_cmd->add_option("--out", sweep.out, "CSV output (default: stdout)");
  sweep_cmd->add_option("--out-model", sweep.out_model, "selected model path");

  auto* oracle = app.add_subcommand("oracle-check", "compare SGD with the exact solver");
  oracle->add_option("--input", input, "score file")->required();
  flags.Add(oracle);
  oracle->add_option("--seeds", seeds, "number of training seeds")
      ->capture_default_str();

  auto* theory = app.add_subcommand("theory-check", "impossibility and bound audits");
  theory->add_option("--trials", trials, "impossibility instances")
      ->capture_default_str();
  theory->add_option("--audit-trials", audit_trials, "bound-audit trials")
      ->capture_default_str();
  theory->add_option("--seed", flags.seed, "random seed")->capture_default_str();

  auto* tradeoff = app.add_subcommand("tradeoff", "accuracy against epsilon");
  tradeoff->add_option("--input-train", sweep.train, "training scores")->required();
  tradeoff->add_option("--input-test", sweep.test, "test scores")->required();
  flags.Add(tradeoff);
  tradeoff->add_option("--epsilons", epsilons, "comma-separated epsilons")
      ->capture_default_str();
  tradeoff->add_option("--out", out, "CSV output (default: stdout)");

  auto* adult = app.add_subcommand(
      "prepare-adult", "score UCI Adult with logistic regression and split it");
  adult->add_option("--adult-dir", adult_dir, "directory with adult.data, adult.test")
      ->capture_default_str();
  adult->add_option("--out-prefix", prefix, "output path prefix")
      ->capture_default_str();
  adult->add_option("--c", c, "inverse regularization strength")
      ->capture_default_str();
  adult->add_option("--seed", flags.seed, "split seed")->capture_default_str();

  auto* toy = app.add_subcommand("generate-toy",
                                 "sample the three-score toy distribution");
  toy->add_option("--n", n, "sample size")->capture_default_str();
  toy->add_option("--seed", flags.seed, "random seed")->capture_default_str();
  toy->add_option("--out", out, "score file path")->required();

  auto* bias = app.add_subcommand(
      "bias-inject", "drop half the rows whose sensitive bit differs from the label");
  bias->add_option("--input", input, "score file")->required();
  bias->add_option("--out", out, "score file path")->required();
  bias->add_option("--seed", flags.seed, "random seed")->capture_default_str();

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = ApplyConfigFile(std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  } catch (const rto::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ExitCodeFor(e.code());
  }

  try {
    if (*train) return RunTrain(input, flags, out_model, trace);
    if (*predict) return RunPredict(model, input, out, flags.seed);
    if (*evaluate) return RunEvaluate(model, input, out_report);
    if (*sweep_cmd) return RunSweep(sweep);
    if (*oracle) return RunOracleCheck(input, flags, seeds);
    if (*theory) return RunTheoryCheck(trials, audit_trials, flags.seed);
    if (*tradeoff) {
      return RunTradeoff(sweep.train, sweep.test, flags, epsilons, out);
    }
    if (*adult) return RunPrepareAdult(adult_dir, prefix, c, flags.seed);
    if (*toy) {
      rto::WriteScores(out, rto::GenerateToy(n, flags.seed).dataset);
      std::cout << "wrote " << n << " rows to " << out << "\n";
      return 0;
    }
    if (*bias) {
      const auto injected =
          rto::DcccBiasInjection(rto::ReadScores(input), flags.seed);
      rto::WriteScores(out, injected);
      std::cout << "kept " << injected.size() << " rows\n";
      return 0;
    }
  } catch (const rto::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ExitCodeFor(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ExitCodeFor(rto::ErrorCode::kInternal);
  }
  return kExitUsage;
}
