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

#ifndef RESPKIT_DATAIO_HPP_
#define RESPKIT_DATAIO_HPP_

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "respkit/audio.hpp"
#include "respkit/errors.hpp"

namespace respkit {

enum class CycleLabel { kNormal = 0, kCrackle = 1, kWheeze = 2, kBoth = 3 };

inline constexpr std::array<const char*, 4> kLabelNames = {"normal", "crackle", "wheeze", "both"};

inline const char* label_name(CycleLabel l) { return kLabelNames[static_cast<int>(l)]; }

inline CycleLabel label_from_flags(bool crackle, bool wheeze) {
  return static_cast<CycleLabel>((crackle ? 1 : 0) + (wheeze ? 2 : 0));
}

/// Patient identifier: the first underscore-delimited token of an ICBHI
/// recording stem ("101_1b1_Al_sc_Meditron" -> "101").
inline std::string patient_id_of(std::string_view recording_id) {
  return std::string(recording_id.substr(0, recording_id.find('_')));
}

/// One annotated respiratory cycle.
struct CycleRecord {
  std::string recording_id;
  std::string patient_id;
  double onset = 0;
  double offset = 0;
  bool crackle = false;
  bool wheeze = false;
  CycleLabel label = CycleLabel::kNormal;

  bool operator==(const CycleRecord&) const = default;
};

namespace dataio_detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline double parse_number(std::string_view tok, std::size_t line) {
  double v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
    throw ParseError(line, "'" + std::string(tok) + "' is not a number");
  }
  return v;
}

inline bool parse_flag(std::string_view tok, std::size_t line) {
  if (tok == "0") return false;
  if (tok == "1") return true;
  throw ParseError(line, "flag '" + std::string(tok) + "' must be 0 or 1");
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0, pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    fn(line, line_no);
    if (end == text.size()) break;
    pos = end + 1;
  }
}

}  // namespace dataio_detail

/// Parses one annotation file: rows of `onset offset crackle wheeze`.
/// Blank lines are skipped; anything else malformed raises ParseError with the
/// 1-based line number.
inline std::vector<CycleRecord> parse_annotations(std::string_view text, std::string_view recording_id) {
  using namespace dataio_detail;
  std::vector<CycleRecord> out;
  const std::string patient = patient_id_of(recording_id);
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    const auto cols = split_ws(line);
    if (cols.empty()) return;
    if (cols.size() != 4) {
      throw ParseError(line_no, "expected 4 columns, found " + std::to_string(cols.size()));
    }
    CycleRecord r;
    r.recording_id = std::string(recording_id);
    r.patient_id = patient;
    r.onset = parse_number(cols[0], line_no);
    r.offset = parse_number(cols[1], line_no);
    if (r.onset < 0) throw ParseError(line_no, "negative onset");
    if (r.offset <= r.onset) throw ParseError(line_no, "offset must exceed onset");
    r.crackle = parse_flag(cols[2], line_no);
    r.wheeze = parse_flag(cols[3], line_no);
    r.label = label_from_flags(r.crackle, r.wheeze);
    out.push_back(std::move(r));
  });
  return out;
}

// ---------------------------------------------------------------------------
// Train/test split.

enum class SplitSide { kTrain, kTest };

inline const char* side_name(SplitSide s) { return s == SplitSide::kTrain ? "train" : "test"; }

inline SplitSide parse_side(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "train") return SplitSide::kTrain;
  if (lower == "test") return SplitSide::kTest;
  throw ConfigError("split side must be 'train' or 'test', got '" + std::string(s) + "'");
}

using SplitTable = std::map<std::string, SplitSide>;

/// recording_id -> side, guaranteed patient-disjoint.
struct SplitAssignment {
  std::map<std::string, SplitSide> sides;

  SplitSide side_of(const std::string& recording_id) const {
    auto it = sides.find(recording_id);
    if (it == sides.end()) throw ConfigError("recording '" + recording_id + "' is not in the split");
    return it->second;
  }

  /// Fraction of recordings assigned to Train.
  double train_fraction() const {
    if (sides.empty()) return 0.0;
    const auto n = std::count_if(sides.begin(), sides.end(), [](const auto& kv) { return kv.second == SplitSide::kTrain; });
    return static_cast<double>(n) / static_cast<double>(sides.size());
  }
};

/// Reads the two-column split table (recording stem, train|test).
inline SplitTable parse_split_table(std::string_view text) {
  using namespace dataio_detail;
  SplitTable table;
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    const auto cols = split_ws(line);
    if (cols.empty()) return;
    if (cols.size() != 2) throw ParseError(line_no, "expected 2 columns, found " + std::to_string(cols.size()));
    SplitSide side;
    try {
      side = parse_side(cols[1]);
    } catch (const ConfigError& e) {
      throw ParseError(line_no, e.what());
    }
    const auto [it, inserted] = table.emplace(std::string(cols[0]), side);
    if (!inserted && it->second != side) {
      throw ParseError(line_no, "recording '" + std::string(cols[0]) + "' listed on both sides");
    }
  });
  return table;
}

/// Throws IntegrityError if any patient has recordings on both sides.
inline void check_patient_disjoint(const std::map<std::string, SplitSide>& sides) {
  std::map<std::string, SplitSide> patient_side;
  for (const auto& [rec, side] : sides) {
    const std::string patient = patient_id_of(rec);
    const auto [it, inserted] = patient_side.emplace(patient, side);
    if (!inserted && it->second != side) {
      throw IntegrityError("patient " + patient + " appears in both train and test (recording " + rec + ")");
    }
  }
}

/// Assigns every record's recording to the side given by `table` after
/// verifying that the table is patient-disjoint.
inline SplitAssignment make_split(const std::vector<CycleRecord>& records, const SplitTable& table) {
  check_patient_disjoint(table);
  SplitAssignment out;
  for (const auto& r : records) {
    auto it = table.find(r.recording_id);
    if (it == table.end()) throw ConfigError("recording '" + r.recording_id + "' missing from split table");
    out.sides[r.recording_id] = it->second;
  }
  check_patient_disjoint(out.sides);
  return out;
}

// ---------------------------------------------------------------------------
// Cycle audio.

/// Annotation spans may overrun the audio by this much; they are clamped.
inline constexpr double kAnnotationSlack = 0.05;

inline AudioClip extract_cycle(const AudioClip& recording, const CycleRecord& rec) {
  validate_clip(recording);
  const double dur = recording.duration();
  if (rec.onset >= dur) {
    throw RangeError("cycle onset " + std::to_string(rec.onset) + " s is beyond the recording end (" +
                     std::to_string(dur) + " s)");
  }
  if (rec.offset > dur + kAnnotationSlack) {
    throw RangeError("cycle offset " + std::to_string(rec.offset) + " s exceeds the recording length " +
                     std::to_string(dur) + " s by more than the allowed slack");
  }
  const double sr = recording.sample_rate;
  const std::size_t n = recording.samples.size();
  const auto begin = std::min<std::size_t>(static_cast<std::size_t>(std::llround(rec.onset * sr)), n);
  const auto end = std::min<std::size_t>(static_cast<std::size_t>(std::llround(std::min(rec.offset, dur) * sr)), n);
  if (end <= begin) throw RangeError("cycle span is empty after clamping");
  AudioClip out;
  out.sample_rate = recording.sample_rate;
  out.samples.assign(recording.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                     recording.samples.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

/// Tiles short clips end to end (the last copy truncated) and truncates long
/// ones so the result holds exactly round(target * rate) samples.
inline AudioClip fix_duration(const AudioClip& clip, double target_seconds = 10.0) {
  validate_clip(clip);
  if (!(target_seconds > 0)) throw ContractError("target duration must be positive");
  const auto want = static_cast<std::size_t>(std::llround(target_seconds * clip.sample_rate));
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.resize(want);
  const std::size_t n = clip.samples.size();
  for (std::size_t i = 0; i < want; i += n) {
    const std::size_t len = std::min(n, want - i);
    std::copy_n(clip.samples.begin(), len, out.samples.begin() + static_cast<std::ptrdiff_t>(i));
  }
  return out;
}

}  // namespace respkit

#endif  // RESPKIT_DATAIO_HPP_
