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

#ifndef RESPKIT_FUSION_HPP_
#define RESPKIT_FUSION_HPP_

#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "respkit/errors.hpp"

namespace respkit {

/// [e1 | e2]. Both inputs must be finite.
inline std::vector<float> concat_embeddings(std::span<const float> e1, std::span<const float> e2) {
  std::vector<float> out;
  out.reserve(e1.size() + e2.size());
  for (float v : e1) {
    if (!std::isfinite(v)) throw ContractError("embedding holds non-finite values");
    out.push_back(v);
  }
  for (float v : e2) {
    if (!std::isfinite(v)) throw ContractError("embedding holds non-finite values");
    out.push_back(v);
  }
  return out;
}

/// fused[c] = (1/S) * prod_s probs[s][c]. Not renormalized.
inline std::vector<double> prod_fusion(std::span<const std::vector<double>> probs) {
  if (probs.empty()) throw ContractError("prod_fusion needs at least one probability vector");
  const std::size_t classes = probs.front().size();
  std::vector<double> out(classes, 1.0);
  for (const auto& p : probs) {
    if (p.size() != classes) throw ContractError("prod_fusion: probability vectors differ in length");
    for (std::size_t c = 0; c < classes; ++c) out[c] *= p[c];
  }
  const double inv = 1.0 / static_cast<double>(probs.size());
  for (double& v : out) v *= inv;
  return out;
}

/// Index of the largest entry; the lowest index wins ties.
inline int predict_label(std::span<const double> fused) {
  if (fused.empty()) throw ContractError("predict_label on an empty vector");
  int best = 0;
  for (std::size_t c = 0; c < fused.size(); ++c) {
    if (!std::isfinite(fused[c])) throw ContractError("predict_label on a non-finite vector");
    if (fused[c] > fused[best]) best = static_cast<int>(c);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Per-cycle predictions.

inline constexpr double kProbabilityTolerance = 1e-5;

/// One framework's class probabilities, keyed by cycle id.
struct PredictionSet {
  std::string framework_id;
  std::map<std::string, std::array<double, 4>> probs;

  void add(const std::string& cycle_id, const std::array<double, 4>& p, bool normalized = true) {
    double sum = 0;
    for (double v : p) {
      if (!std::isfinite(v) || v < 0) throw ContractError("cycle " + cycle_id + ": invalid probability");
      sum += v;
    }
    if (normalized && std::abs(sum - 1.0) > kProbabilityTolerance) {
      throw ContractError("cycle " + cycle_id + ": probabilities sum to " + std::to_string(sum));
    }
    if (!probs.emplace(cycle_id, p).second) throw IntegrityError("duplicate cycle id " + cycle_id);
  }

  std::vector<int> labels() const {
    std::vector<int> out;
    for (const auto& [id, p] : probs) out.push_back(predict_label(p));
    return out;
  }
};

inline constexpr const char* kPredictionHeader = "cycle_id,p_normal,p_crackle,p_wheeze,p_both";

inline std::string predictions_to_csv(const PredictionSet& set) {
  std::ostringstream os;
  os.precision(17);
  os << kPredictionHeader << '\n';
  for (const auto& [id, p] : set.probs) os << id << ',' << p[0] << ',' << p[1] << ',' << p[2] << ',' << p[3] << '\n';
  return os.str();
}

/// Rows must sum to 1 unless `normalized` is false (fused output).
inline PredictionSet predictions_from_csv(const std::string& text, std::string framework_id, bool normalized = true) {
  PredictionSet set;
  set.framework_id = std::move(framework_id);
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != kPredictionHeader) throw ParseError(line_no, "expected header '" + std::string(kPredictionHeader) + "'");
      continue;
    }
    std::vector<std::string> cols;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cols.push_back(cell);
    if (cols.size() != 5) throw ParseError(line_no, "expected 5 columns, found " + std::to_string(cols.size()));
    std::array<double, 4> p{};
    for (int c = 0; c < 4; ++c) {
      try {
        std::size_t used = 0;
        p[c] = std::stod(cols[c + 1], &used);
        if (used != cols[c + 1].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ParseError(line_no, "'" + cols[c + 1] + "' is not a number");
      }
    }
    try {
      set.add(cols[0], p, normalized);
    } catch (const ContractError& e) {
      throw ParseError(line_no, e.what());
    }
  }
  if (line_no == 0) throw ParseError(1, "empty prediction file");
  return set;
}

inline PredictionSet read_predictions(const std::string& path, bool normalized = true) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return predictions_from_csv(os.str(), path, normalized);
}

/// Late PROD fusion of S >= 1 prediction sets over identical cycle ids.
inline PredictionSet fuse_predictions(std::span<const PredictionSet> sets) {
  if (sets.empty()) throw ContractError("nothing to fuse");
  for (const auto& s : sets) {
    if (s.probs.size() != sets.front().probs.size()) {
      throw IntegrityError(s.framework_id + " holds " + std::to_string(s.probs.size()) + " cycles, " +
                           sets.front().framework_id + " holds " + std::to_string(sets.front().probs.size()));
    }
  }
  PredictionSet out;
  for (std::size_t i = 0; i < sets.size(); ++i) out.framework_id += (i ? "*" : "") + sets[i].framework_id;
  for (const auto& [id, first] : sets.front().probs) {
    std::vector<std::vector<double>> rows;
    for (const auto& s : sets) {
      auto it = s.probs.find(id);
      if (it == s.probs.end()) throw IntegrityError("cycle " + id + " missing from " + s.framework_id);
      rows.emplace_back(it->second.begin(), it->second.end());
    }
    const auto fused = prod_fusion(rows);
    out.probs[id] = {fused[0], fused[1], fused[2], fused[3]};
  }
  return out;
}

}  // namespace respkit

#endif  // RESPKIT_FUSION_HPP_
