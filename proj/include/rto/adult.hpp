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

// UCI Adult census files. Categorical columns are one-hot encoded with '?'
// kept as its own category; numeric columns are z-scored with statistics of
// the fitting rows. Categories unseen at fit time encode as all zeros.
// Label: income > 50K. Sensitive attribute: sex, with group 1 = Female,
// group 2 = Male and sensitive bit 1 for Male.

#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "rto/baselines.hpp"
#include "rto/data.hpp"
#include "rto/status.hpp"

namespace rto {

inline constexpr int kAdultColumns = 15;
inline constexpr std::array<int, 6> kAdultNumeric = {0, 2, 4, 10, 11, 12};
inline constexpr std::array<int, 8> kAdultCategorical = {1, 3, 5, 6, 7, 8, 9, 13};
inline constexpr int kAdultSexColumn = 9;

struct AdultRecord {
  std::array<std::string, kAdultColumns - 1> fields;
  int label = 0;
  int male = 0;
};

inline std::vector<AdultRecord> ParseAdult(std::istream& in,
                                           const std::string& source) {
  std::vector<AdultRecord> records;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    const std::string_view trimmed = internal::Trim(line);
    if (trimmed.empty() || trimmed.front() == '|') continue;
    const auto fields = internal::SplitCsvLine(trimmed);
    if (fields.size() != kAdultColumns) {
      internal::FailAtLine(ErrorCode::kParse, source, line_number,
                           "expected 15 fields, found " +
                               std::to_string(fields.size()));
    }
    AdultRecord record;
    for (int c = 0; c < kAdultColumns - 1; ++c) {
      record.fields[static_cast<std::size_t>(c)] = fields[static_cast<std::size_t>(c)];
    }
    std::string income = fields[kAdultColumns - 1];
    if (!income.empty() && income.back() == '.') income.pop_back();
    if (income == ">50K") {
      record.label = 1;
    } else if (income == "<=50K") {
      record.label = 0;
    } else {
      internal::FailAtLine(ErrorCode::kParse, source, line_number,
                           "unknown income '" + income + "'");
    }
    const std::string& sex = record.fields[kAdultSexColumn];
    if (sex == "Male") {
      record.male = 1;
    } else if (sex == "Female") {
      record.male = 0;
    } else {
      internal::FailAtLine(ErrorCode::kParse, source, line_number,
                           "unknown sex '" + sex + "'");
    }
    for (int c : kAdultNumeric) {
      if (!internal::ParseReal(record.fields[static_cast<std::size_t>(c)])) {
        internal::FailAtLine(ErrorCode::kParse, source, line_number,
                             "malformed numeric field");
      }
    }
    records.push_back(std::move(record));
  }
  return records;
}

inline std::vector<AdultRecord> ReadAdult(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorCode::kIo, "cannot open '" + path + "'");
  return ParseAdult(in, path);
}

class AdultEncoder {
 public:
  static AdultEncoder Fit(const std::vector<AdultRecord>& records) {
    if (records.empty()) Fail(ErrorCode::kEmptyDataset, "no Adult records");
    AdultEncoder encoder;
    const double n = static_cast<double>(records.size());
    for (std::size_t j = 0; j < kAdultNumeric.size(); ++j) {
      double sum = 0.0, sum_sq = 0.0;
      for (const auto& r : records) {
        const double v = Numeric(r, j);
        sum += v;
        sum_sq += v * v;
      }
      const double mean = sum / n;
      const double var = std::max(sum_sq / n - mean * mean, 0.0);
      encoder.mean_[j] = mean;
      encoder.scale_[j] = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    std::size_t offset = kAdultNumeric.size();
    for (std::size_t j = 0; j < kAdultCategorical.size(); ++j) {
      auto& index = encoder.categories_[j];
      for (const auto& r : records) {
        index.emplace(r.fields[static_cast<std::size_t>(kAdultCategorical[j])], 0);
      }
      for (auto& [name, slot] : index) slot = offset++;
    }
    encoder.width_ = offset;
    return encoder;
  }

  std::size_t width() const { return width_; }

  FeatureMatrix Transform(const std::vector<AdultRecord>& records) const {
    FeatureMatrix m;
    m.rows = records.size();
    m.cols = width_;
    m.values.assign(m.rows * m.cols, 0.0);
    for (std::size_t i = 0; i < records.size(); ++i) {
      double* row = m.values.data() + i * m.cols;
      for (std::size_t j = 0; j < kAdultNumeric.size(); ++j) {
        row[j] = (Numeric(records[i], j) - mean_[j]) / scale_[j];
      }
      for (std::size_t j = 0; j < kAdultCategorical.size(); ++j) {
        const auto& index = categories_[j];
        const auto it = index.find(
            records[i].fields[static_cast<std::size_t>(kAdultCategorical[j])]);
        if (it != index.end()) row[it->second] = 1.0;
      }
    }
    return m;
  }

 private:
  static double Numeric(const AdultRecord& r, std::size_t j) {
    return *internal::ParseReal(r.fields[static_cast<std::size_t>(kAdultNumeric[j])]);
  }

  std::array<double, kAdultNumeric.size()> mean_{};
  std::array<double, kAdultNumeric.size()> scale_{};
  std::array<std::map<std::string, std::size_t>, kAdultCategorical.size()>
      categories_;
  std::size_t width_ = 0;
};

inline std::vector<int> AdultLabels(const std::vector<AdultRecord>& records) {
  std::vector<int> labels;
  labels.reserve(records.size());
  for (const auto& r : records) labels.push_back(r.label);
  return labels;
}

// Score dataset with ids "<prefix><row index>".
inline Dataset AdultScores(const std::vector<AdultRecord>& records,
                           std::span<const double> scores,
                           const std::string& prefix) {
  if (scores.size() != records.size()) {
    Fail(ErrorCode::kMismatch, "score count does not match Adult rows");
  }
  Dataset out;
  out.group_count = 2;
  out.provenance = prefix;
  for (std::size_t i = 0; i < records.size(); ++i) {
    ScoredExample e;
    e.id = prefix + std::to_string(i);
    e.score = scores[i];
    e.group = records[i].male + 1;
    e.sensitive = records[i].male;
    e.label = records[i].label;
    out.examples.push_back(std::move(e));
  }
  return out;
}

}  // namespace rto
