// Copyright 2026 The respkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef RESPKIT_METRICS_HPP_
#define RESPKIT_METRICS_HPP_

#include <array>
#include <cmath>
#include <cstdio>
#include <span>
#include <string>

#include "json.hpp"
#include "respkit/errors.hpp"

namespace respkit {

/// counts[t][p]: cycles of true class t predicted as p.
struct ConfusionCounts {
  std::array<std::array<long, 4>, 4> counts{};

  long total() const {
    long n = 0;
    for (const auto& row : counts) {
      for (long v : row) n += v;
    }
    return n;
  }

  long row_total(int t) const {
    long n = 0;
    for (long v : counts[t]) n += v;
    return n;
  }

  bool operator==(const ConfusionCounts&) const = default;
};

inline ConfusionCounts confusion(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) {
    throw ContractError("confusion: " + std::to_string(truth.size()) + " labels vs " +
                        std::to_string(predicted.size()) + " predictions");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] > 3 || predicted[i] < 0 || predicted[i] > 3) {
      throw ContractError("confusion: label out of range at position " + std::to_string(i));
    }
    ++c.counts[truth[i]][predicted[i]];
  }
  return c;
}

/// Percentages. icb is the unrounded mean of spec and sen.
struct MetricsReport {
  double spec = 0;
  double sen = 0;
  double icb = 0;
  ConfusionCounts counts;
};

/// Specificity from the Normal row; sensitivity counts exact-class hits
/// over the crackle, wheeze and both rows.
inline MetricsReport icbhi_scores(const ConfusionCounts& c) {
  for (const auto& row : c.counts) {
    for (long v : row) {
      if (v < 0) throw ContractError("confusion counts must be non-negative");
    }
  }
  const long normal = c.row_total(0);
  const long anomalous = c.row_total(1) + c.row_total(2) + c.row_total(3);
  if (normal == 0) throw UndefinedMetricError("specificity is undefined without Normal cycles");
  if (anomalous == 0) throw UndefinedMetricError("sensitivity is undefined without anomalous cycles");
  MetricsReport r;
  r.counts = c;
  r.spec = 100.0 * static_cast<double>(c.counts[0][0]) / static_cast<double>(normal);
  r.sen = 100.0 * static_cast<double>(c.counts[1][1] + c.counts[2][2] + c.counts[3][3]) / static_cast<double>(anomalous);
  r.icb = (r.spec + r.sen) / 2.0;
  return r;
}

/// icb from already-computed percentages.
inline double icb_from(double spec, double sen) { return (spec + sen) / 2.0; }

inline nlohmann::json report_to_json(const MetricsReport& r) {
  nlohmann::json counts = nlohmann::json::array();
  for (const auto& row : r.counts.counts) counts.push_back(row);
  return {{"spec", r.spec}, {"sen", r.sen}, {"icb", r.icb}, {"confusion", counts}, {"cycles", r.counts.total()}};
}

inline MetricsReport report_from_json(const nlohmann::json& j) {
  MetricsReport r;
  try {
    r.spec = j.at("spec").get<double>();
    r.sen = j.at("sen").get<double>();
    r.icb = j.at("icb").get<double>();
    const auto& m = j.at("confusion");
    for (int t = 0; t < 4; ++t) {
      for (int p = 0; p < 4; ++p) r.counts.counts[t][p] = m.at(t).at(p).get<long>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed report: ") + e.what());
  }
  return r;
}

/// Half-up rounding to one decimal, as in printed score tables. The nudge
/// absorbs binary representation error, so 55.05 shows as 55.1.
inline std::string one_decimal(double v) {
  const double r = std::round(v * 10.0 + (v < 0 ? -1e-7 : 1e-7)) / 10.0;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", r);
  return buf;
}

/// Markdown table at one decimal. `title` labels the row.
inline std::string report_to_markdown(const MetricsReport& r, const std::string& title) {
  std::string out = "| System | Spec. | Sen. | ICB. |\n|---|---|---|---|\n";
  out += "| " + title + " | " + one_decimal(r.spec) + " | " + one_decimal(r.sen) + " | " + one_decimal(r.icb) + " |\n";
  return out;
}

}  // namespace respkit

#endif  // RESPKIT_METRICS_HPP_
