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

// Score files, splits, synthetic generators, bias injection and model files.
//
// Score file: UTF-8 CSV with a header row naming the columns
//   id, score | prob, group, [sensitive], [label]
// in any order. A `prob` column holds p(y=1|x) and is converted to 2p - 1.
// An optional first line "# groups=K" declares K; otherwise K is the largest
// group id present.
//
// Model file: "key=value" header lines (format_version, gamma, criterion,
// rho, epsilon, K, plus optional sensitive_rates and training metadata)
// followed by K lines "k lambda mu". Reals are written with 17 significant
// digits so that a save/load cycle is exact.

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "rto/model_core.hpp"
#include "rto/random.hpp"
#include "rto/status.hpp"

namespace rto {

enum class SplitTag { kUnsplit, kTrainPost, kValidation, kTest };

struct Dataset {
  std::vector<ScoredExample> examples;
  int group_count = 0;
  std::string provenance;
  SplitTag split = SplitTag::kUnsplit;

  std::size_t size() const { return examples.size(); }
};

inline std::string FormatReal(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

namespace internal {

inline std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' ||
                        s.back() == '\r' || s.back() == '\n')) {
    s.remove_suffix(1);
  }
  return s;
}

inline std::vector<std::string> SplitCsvLine(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.emplace_back(Trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

inline std::optional<double> ParseReal(std::string_view text) {
  const std::string s(Trim(text));
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  errno = 0;
  const double value = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE) return std::nullopt;
  return value;
}

inline std::optional<long long> ParseInteger(std::string_view text) {
  const std::string s(Trim(text));
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  errno = 0;
  const long long value = std::strtoll(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size() || errno == ERANGE) return std::nullopt;
  return value;
}

[[noreturn]] inline void FailAtLine(ErrorCode code, const std::string& source,
                                    std::size_t line, const std::string& what) {
  Fail(code, source + ":" + std::to_string(line) + ": " + what);
}

inline std::optional<int> ParseBit(const std::string& field,
                                   const std::string& source, std::size_t line,
                                   const char* column) {
  if (field.empty()) return std::nullopt;
  const auto value = ParseInteger(field);
  if (!value) {
    FailAtLine(ErrorCode::kParse, source, line,
               std::string("malformed ") + column + " '" + field + "'");
  }
  if (*value != 0 && *value != 1) {
    FailAtLine(ErrorCode::kValidation, source, line,
               std::string(column) + " must be 0 or 1");
  }
  return static_cast<int>(*value);
}

}  // namespace internal

inline Dataset ParseScores(std::istream& in, const std::string& source,
                           std::optional<int> group_count = std::nullopt) {
  Dataset dataset;
  dataset.provenance = source;
  std::string line;
  std::size_t line_number = 0;
  std::optional<int> declared_groups;

  bool have_header = false;
  std::map<std::string, std::size_t> columns;
  while (!have_header && std::getline(in, line)) {
    ++line_number;
    const std::string_view trimmed = internal::Trim(line);
    if (trimmed.empty()) continue;
    if (trimmed.front() == '#') {
      const auto eq = trimmed.find("groups=");
      if (eq != std::string_view::npos) {
        const auto k = internal::ParseInteger(trimmed.substr(eq + 7));
        if (!k || *k < 1) {
          internal::FailAtLine(ErrorCode::kParse, source, line_number,
                               "malformed groups directive");
        }
        declared_groups = static_cast<int>(*k);
      }
      continue;
    }
    const auto names = internal::SplitCsvLine(trimmed);
    for (std::size_t i = 0; i < names.size(); ++i) columns[names[i]] = i;
    have_header = true;
  }
  if (!have_header) {
    Fail(ErrorCode::kParse, source + ": missing header row");
  }
  const auto column = [&](const char* name) -> std::optional<std::size_t> {
    const auto it = columns.find(name);
    if (it == columns.end()) return std::nullopt;
    return it->second;
  };
  const auto id_col = column("id");
  const auto score_col = column("score");
  const auto prob_col = column("prob");
  const auto group_col = column("group");
  const auto sensitive_col = column("sensitive");
  const auto label_col = column("label");
  if (!id_col || !group_col || (!score_col && !prob_col)) {
    Fail(ErrorCode::kParse,
         source + ": header must name id, group and score or prob");
  }
  if (score_col && prob_col) {
    Fail(ErrorCode::kParse, source + ": header names both score and prob");
  }

  std::unordered_set<std::string> seen_ids;
  int max_group = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const std::string_view trimmed = internal::Trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    const auto fields = internal::SplitCsvLine(trimmed);
    if (fields.size() != columns.size()) {
      internal::FailAtLine(ErrorCode::kParse, source, line_number,
                           "expected " + std::to_string(columns.size()) +
                               " fields, found " +
                               std::to_string(fields.size()));
    }
    ScoredExample example;
    example.id = fields[*id_col];
    if (example.id.empty()) {
      internal::FailAtLine(ErrorCode::kParse, source, line_number, "empty id");
    }
    if (!seen_ids.insert(example.id).second) {
      internal::FailAtLine(ErrorCode::kValidation, source, line_number,
                           "duplicate id '" + example.id + "'");
    }
    const std::string& raw = fields[prob_col ? *prob_col : *score_col];
    const auto value = internal::ParseReal(raw);
    if (!value) {
      internal::FailAtLine(ErrorCode::kParse, source, line_number,
                           "malformed score '" + raw + "'");
    }
    if (!std::isfinite(*value)) {
      internal::FailAtLine(ErrorCode::kData, source, line_number,
                           "non-finite score");
    }
    if (prob_col) {
      if (*value < 0.0 || *value > 1.0) {
        internal::FailAtLine(ErrorCode::kValidation, source, line_number,
                             "probability " + raw + " outside [0, 1]");
      }
      example.score = 2.0 * *value - 1.0;
    } else {
      if (*value < -1.0 || *value > 1.0) {
        internal::FailAtLine(ErrorCode::kValidation, source, line_number,
                             "score " + raw + " outside [-1, 1]");
      }
      example.score = *value;
    }
    const auto group = internal::ParseInteger(fields[*group_col]);
    if (!group) {
      internal::FailAtLine(ErrorCode::kParse, source, line_number,
                           "malformed group '" + fields[*group_col] + "'");
    }
    if (*group < 1) {
      internal::FailAtLine(ErrorCode::kValidation, source, line_number,
                           "group ids start at 1");
    }
    example.group = static_cast<int>(*group);
    max_group = std::max(max_group, example.group);
    if (sensitive_col) {
      example.sensitive = internal::ParseBit(fields[*sensitive_col], source,
                                             line_number, "sensitive");
    }
    if (label_col) {
      example.label =
          internal::ParseBit(fields[*label_col], source, line_number, "label");
    }
    dataset.examples.push_back(std::move(example));
  }
  const std::optional<int> k = group_count ? group_count : declared_groups;
  if (k) {
    if (max_group > *k) {
      Fail(ErrorCode::kValidation, source + ": group id " +
                                       std::to_string(max_group) +
                                       " exceeds declared K=" +
                                       std::to_string(*k));
    }
    dataset.group_count = *k;
  } else {
    dataset.group_count = max_group;
  }
  return dataset;
}

inline Dataset ReadScores(const std::string& path,
                          std::optional<int> group_count = std::nullopt) {
  std::ifstream in(path);
  if (!in) Fail(ErrorCode::kIo, "cannot open '" + path + "'");
  return ParseScores(in, path, group_count);
}

inline void WriteScores(std::ostream& out, const Dataset& dataset) {
  bool has_sensitive = false, has_label = false;
  for (const auto& e : dataset.examples) {
    has_sensitive = has_sensitive || e.sensitive.has_value();
    has_label = has_label || e.label.has_value();
  }
  out << "# groups=" << dataset.group_count << "\n";
  out << "id,score,group";
  if (has_sensitive) out << ",sensitive";
  if (has_label) out << ",label";
  out << "\n";
  for (const auto& e : dataset.examples) {
    out << e.id << ',' << FormatReal(e.score) << ',' << e.group;
    if (has_sensitive) {
      out << ',';
      if (e.sensitive) out << *e.sensitive;
    }
    if (has_label) {
      out << ',';
      if (e.label) out << *e.label;
    }
    out << "\n";
  }
}

inline void WriteScores(const std::string& path, const Dataset& dataset) {
  std::ofstream out(path);
  if (!out) Fail(ErrorCode::kIo, "cannot write '" + path + "'");
  WriteScores(out, dataset);
  if (!out) Fail(ErrorCode::kIo, "write to '" + path + "' failed");
}

struct ThreeWay {
  Dataset train_post;
  Dataset validation;
  Dataset test;
};

// Seeded shuffle into thirds; the remainder goes to the test part.
inline ThreeWay ThreeWaySplit(const Dataset& dataset, std::uint64_t seed) {
  const std::size_t n = dataset.size();
  if (n < 3) {
    Fail(ErrorCode::kInvalidParameter, "need at least 3 examples to split");
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.Shuffle(std::span<std::size_t>(order));
  const std::size_t third = n / 3;
  ThreeWay out;
  Dataset* parts[3] = {&out.train_post, &out.validation, &out.test};
  const SplitTag tags[3] = {SplitTag::kTrainPost, SplitTag::kValidation,
                            SplitTag::kTest};
  for (int p = 0; p < 3; ++p) {
    parts[p]->group_count = dataset.group_count;
    parts[p]->provenance = dataset.provenance;
    parts[p]->split = tags[p];
  }
  for (std::size_t i = 0; i < n; ++i) {
    const int part = i < third ? 0 : (i < 2 * third ? 1 : 2);
    parts[part]->examples.push_back(dataset.examples[order[i]]);
  }
  return out;
}

// Finite distribution over score atoms. Group membership is the sensitive
// bit s, drawn per atom, mapped to group s + 1.
struct PointMass {
  double score = 0.0;
  double probability = 0.0;
  double eta = 0.5;                    // p(y = 1 | atom)
  double sensitive_probability = 0.5;  // p(s = 1 | atom)
};

struct SyntheticSpec {
  std::vector<PointMass> atoms;
  std::uint64_t seed = 0;
};

struct SyntheticSample {
  Dataset dataset;
  std::vector<std::size_t> atom;  // index of the drawn atom per example
  std::vector<double> eta;
};

inline void ValidateSyntheticSpec(const SyntheticSpec& spec) {
  if (spec.atoms.empty()) {
    Fail(ErrorCode::kInvalidParameter, "synthetic spec has no atoms");
  }
  double total = 0.0;
  for (const auto& a : spec.atoms) {
    if (!(a.probability >= 0.0) || !(a.eta >= 0.0 && a.eta <= 1.0) ||
        !(a.sensitive_probability >= 0.0 && a.sensitive_probability <= 1.0) ||
        !(a.score >= -1.0 && a.score <= 1.0)) {
      Fail(ErrorCode::kInvalidParameter, "invalid point mass");
    }
    total += a.probability;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    Fail(ErrorCode::kInvalidParameter, "atom probabilities must sum to 1");
  }
}

// Per example: one uniform picks the atom by cumulative mass, one Bernoulli
// draws s, one Bernoulli draws the label.
inline SyntheticSample GenerateSynthetic(const SyntheticSpec& spec,
                                         std::size_t n) {
  ValidateSyntheticSpec(spec);
  if (n < 1) Fail(ErrorCode::kInvalidParameter, "n must be >= 1");
  SyntheticSample out;
  out.dataset.group_count = 2;
  out.dataset.provenance = "synthetic";
  out.dataset.examples.reserve(n);
  Rng rng(spec.seed);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.Uniform();
    std::size_t a = 0;
    double cumulative = spec.atoms[0].probability;
    while (u >= cumulative && a + 1 < spec.atoms.size()) {
      ++a;
      cumulative += spec.atoms[a].probability;
    }
    const PointMass& atom = spec.atoms[a];
    const int s = rng.Bernoulli(atom.sensitive_probability) ? 1 : 0;
    const int y = rng.Bernoulli(atom.eta) ? 1 : 0;
    ScoredExample e;
    e.id = std::to_string(i);
    e.score = atom.score;
    e.group = s + 1;
    e.sensitive = s;
    e.label = y;
    out.dataset.examples.push_back(std::move(e));
    out.atom.push_back(a);
    out.eta.push_back(atom.eta);
  }
  return out;
}

// x in {-1, 0, 1} with masses (1/2, 1/3, 1/6), eta = (0, 1/2, 1),
// p(s = 1 | x) = (1/2, 1, 0) and score 2 eta - 1 = x. Group 2 is s = 1.
inline SyntheticSpec ToySpec(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.atoms = {{-1.0, 1.0 / 2.0, 0.0, 0.5},
                {0.0, 1.0 / 3.0, 0.5, 1.0},
                {1.0, 1.0 / 6.0, 1.0, 0.0}};
  spec.seed = seed;
  return spec;
}

inline SyntheticSample GenerateToy(std::size_t n, std::uint64_t seed) {
  SyntheticSample sample = GenerateSynthetic(ToySpec(seed), n);
  sample.dataset.provenance = "toy";
  return sample;
}

// Keeps every example with s == y and drops each other example with
// probability 1/2.
inline Dataset DcccBiasInjection(const Dataset& dataset, std::uint64_t seed) {
  Rng rng(seed);
  Dataset out;
  out.group_count = dataset.group_count;
  out.provenance = dataset.provenance + "+bias";
  out.split = dataset.split;
  for (const auto& e : dataset.examples) {
    if (!e.sensitive || !e.label) {
      Fail(ErrorCode::kMissingField,
           "bias injection needs label and sensitive bit on '" + e.id + "'");
    }
    if (*e.sensitive == *e.label || !rng.Bernoulli(0.5)) {
      out.examples.push_back(e);
    }
  }
  return out;
}

// Fails unless no id appears in both datasets.
inline void CheckDisjoint(const Dataset& a, const Dataset& b) {
  std::unordered_set<std::string> ids;
  for (const auto& e : a.examples) ids.insert(e.id);
  for (const auto& e : b.examples) {
    if (ids.count(e.id)) {
      Fail(ErrorCode::kDisjointness,
           "id '" + e.id + "' appears in both " + a.provenance + " and " +
               b.provenance);
    }
  }
}

inline constexpr int kModelFormatVersion = 1;

inline void SaveModel(std::ostream& out, const RtoModel& model) {
  const ConstraintSpec& spec = model.constraint();
  out << "format_version=" << kModelFormatVersion << "\n";
  out << "gamma=" << FormatReal(model.gamma()) << "\n";
  out << "criterion=" << (IsCovariance(spec.criterion) ? "covariance" : "parity")
      << "\n";
  out << "rho=" << FormatReal(CriterionRho(spec.criterion)) << "\n";
  out << "epsilon=" << FormatReal(CriterionEpsilon(spec.criterion)) << "\n";
  out << "K=" << model.group_count() << "\n";
  if (IsCovariance(spec.criterion)) {
    out << "sensitive_rates=";
    for (std::size_t k = 0; k < spec.sensitive_rate.size(); ++k) {
      out << (k ? "," : "") << FormatReal(spec.sensitive_rate[k]);
    }
    out << "\n";
  }
  const TrainingMetadata& meta = model.metadata();
  out << "seed=" << meta.seed << "\n";
  out << "schedule=" << (meta.schedule.empty() ? "none" : meta.schedule)
      << "\n";
  out << "epochs=" << meta.epochs << "\n";
  out << "final_dual_objective=" << FormatReal(meta.final_dual_objective)
      << "\n";
  for (int k = 0; k < model.group_count(); ++k) {
    const auto idx = static_cast<std::size_t>(k);
    out << (k + 1) << ' ' << FormatReal(model.lambda()[idx]) << ' '
        << FormatReal(model.mu()[idx]) << "\n";
  }
}

inline void SaveModel(const std::string& path, const RtoModel& model) {
  std::ofstream out(path);
  if (!out) Fail(ErrorCode::kIo, "cannot write '" + path + "'");
  SaveModel(out, model);
  if (!out) Fail(ErrorCode::kIo, "write to '" + path + "' failed");
}

inline RtoModel LoadModel(std::istream& in, const std::string& source,
                          std::optional<int> expected_groups = std::nullopt) {
  std::map<std::string, std::string> header;
  std::vector<std::string> rows;
  std::string line;
  while (std::getline(in, line)) {
    const std::string_view trimmed = internal::Trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq != std::string_view::npos) {
      if (!rows.empty()) {
        Fail(ErrorCode::kSerialization, source + ": header after multipliers");
      }
      header[std::string(trimmed.substr(0, eq))] =
          std::string(trimmed.substr(eq + 1));
    } else {
      rows.emplace_back(trimmed);
    }
  }
  const auto require = [&](const std::string& key) -> const std::string& {
    const auto it = header.find(key);
    if (it == header.end()) {
      Fail(ErrorCode::kSerialization, source + ": missing key '" + key + "'");
    }
    return it->second;
  };
  const auto real = [&](const std::string& key) {
    const auto v = internal::ParseReal(require(key));
    if (!v) Fail(ErrorCode::kSerialization, source + ": bad value for " + key);
    return *v;
  };
  const auto version = internal::ParseInteger(require("format_version"));
  if (!version || *version != kModelFormatVersion) {
    Fail(ErrorCode::kVersion, source + ": unsupported format_version '" +
                                  header["format_version"] + "'");
  }
  const auto k_value = internal::ParseInteger(require("K"));
  if (!k_value || *k_value < 1) {
    Fail(ErrorCode::kSerialization, source + ": bad K");
  }
  const int k_count = static_cast<int>(*k_value);
  if (expected_groups && *expected_groups != k_count) {
    Fail(ErrorCode::kMismatch, source + ": model has K=" +
                                   std::to_string(k_count) + " but data has K=" +
                                   std::to_string(*expected_groups));
  }
  const std::string& criterion_name = require("criterion");
  Criterion criterion;
  if (criterion_name == "parity") {
    criterion = StatisticalParity{real("rho"), real("epsilon")};
  } else if (criterion_name == "covariance") {
    criterion = ConditionalCovariance{real("epsilon")};
  } else {
    Fail(ErrorCode::kSerialization,
         source + ": unknown criterion '" + criterion_name + "'");
  }
  ConstraintSpec spec;
  spec.criterion = criterion;
  spec.group_count = k_count;
  spec.offset = CriterionRho(criterion);
  if (IsCovariance(criterion)) {
    std::stringstream rates(require("sensitive_rates"));
    std::string item;
    while (std::getline(rates, item, ',')) {
      const auto v = internal::ParseReal(item);
      if (!v) Fail(ErrorCode::kSerialization, source + ": bad sensitive rate");
      spec.sensitive_rate.push_back(*v);
    }
    if (spec.sensitive_rate.size() != static_cast<std::size_t>(k_count)) {
      Fail(ErrorCode::kSerialization, source + ": sensitive_rates needs K values");
    }
  }
  if (rows.size() != static_cast<std::size_t>(k_count)) {
    Fail(ErrorCode::kSerialization,
         source + ": expected " + std::to_string(k_count) +
             " multiplier lines, found " + std::to_string(rows.size()));
  }
  std::vector<double> lambda(static_cast<std::size_t>(k_count));
  std::vector<double> mu(lambda.size());
  std::vector<bool> seen(lambda.size(), false);
  for (const auto& row : rows) {
    std::istringstream fields(row);
    std::string k_text, l_text, m_text, extra;
    fields >> k_text >> l_text >> m_text;
    const auto k = internal::ParseInteger(k_text);
    const auto l = internal::ParseReal(l_text);
    const auto m = internal::ParseReal(m_text);
    if (!k || !l || !m || (fields >> extra) || *k < 1 || *k > k_count ||
        seen[static_cast<std::size_t>(*k - 1)]) {
      Fail(ErrorCode::kSerialization, source + ": bad multiplier line '" + row + "'");
    }
    const auto idx = static_cast<std::size_t>(*k - 1);
    seen[idx] = true;
    lambda[idx] = *l;
    mu[idx] = *m;
  }
  TrainingMetadata meta;
  if (header.count("seed")) {
    const auto v = internal::ParseInteger(header["seed"]);
    if (v) meta.seed = static_cast<std::uint64_t>(*v);
  }
  if (header.count("schedule")) meta.schedule = header["schedule"];
  if (header.count("epochs")) {
    const auto v = internal::ParseInteger(header["epochs"]);
    if (v) meta.epochs = static_cast<int>(*v);
  }
  if (header.count("final_dual_objective")) {
    const auto v = internal::ParseReal(header["final_dual_objective"]);
    if (v) meta.final_dual_objective = *v;
  }
  return RtoModel(real("gamma"), std::move(spec), std::move(lambda),
                  std::move(mu), std::move(meta));
}

inline RtoModel LoadModel(const std::string& path,
                          std::optional<int> expected_groups = std::nullopt) {
  std::ifstream in(path);
  if (!in) Fail(ErrorCode::kIo, "cannot open '" + path + "'");
  return LoadModel(in, path, expected_groups);
}

}  // namespace rto
