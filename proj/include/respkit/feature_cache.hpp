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


// Per-cycle feature files.
//
//   offset  size  field
//   0       8     magic "RSPKFEAT"
//   8       4     u32 format version (1)
//   12      4     u32 kind (0 logmel, 1 wavelet)
//   16      4     u32 bins
//   20      4     u32 frames
//   24      4     u32 metadata length L
//   28      L     UTF-8 JSON metadata (cycle id, source, ...)
//   28+L    4*B*F float32 values, bin-major
//
// All integers and floats are little-endian.

#ifndef RESPKIT_FEATURE_CACHE_HPP_
#define RESPKIT_FEATURE_CACHE_HPP_

#include <filesystem>
#include <string>

#include "json.hpp"
#include "respkit/binio.hpp"
#include "respkit/errors.hpp"
#include "respkit/features.hpp"

namespace respkit {

inline constexpr std::uint32_t kFeatureCacheVersion = 1;

struct CachedFeature {
  Spectrogram spectrogram;
  nlohmann::json metadata;
};

inline std::string encode_feature(const Spectrogram& s, const nlohmann::json& metadata = nlohmann::json::object()) {
  if (s.values.size() != static_cast<std::size_t>(s.bins) * s.frames) throw ContractError("spectrogram size mismatch");
  binio::Writer w;
  w.bytes("RSPKFEAT", 8);
  w.u32(kFeatureCacheVersion);
  w.u32(s.kind == SpectrogramKind::kLogMel ? 0 : 1);
  w.u32(static_cast<std::uint32_t>(s.bins));
  w.u32(static_cast<std::uint32_t>(s.frames));
  w.str(metadata.dump());
  w.floats(s.values.data(), s.values.size());
  return w.data();
}

inline CachedFeature decode_feature(binio::Reader r) {
  r.expect_magic("RSPKFEAT");
  const auto version = r.u32();
  if (version != kFeatureCacheVersion) {
    throw FormatError(r.source() + ": unsupported feature cache version " + std::to_string(version));
  }
  CachedFeature out;
  const auto kind = r.u32();
  if (kind > 1) throw FormatError(r.source() + ": unknown spectrogram kind " + std::to_string(kind));
  out.spectrogram.kind = kind == 0 ? SpectrogramKind::kLogMel : SpectrogramKind::kWavelet;
  out.spectrogram.bins = static_cast<int>(r.u32());
  out.spectrogram.frames = static_cast<int>(r.u32());
  const std::string meta = r.str();
  try {
    out.metadata = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(r.source() + ": bad metadata: " + e.what());
  }
  const auto n = static_cast<std::size_t>(out.spectrogram.bins) * static_cast<std::size_t>(out.spectrogram.frames);
  if (n > r.remaining() / sizeof(float)) throw FormatError(r.source() + ": truncated file");
  out.spectrogram.values.resize(n);
  r.floats(out.spectrogram.values.data(), n);
  if (!r.at_end()) throw FormatError(r.source() + ": trailing bytes");
  return out;
}

inline void write_feature(const std::filesystem::path& path, const Spectrogram& s,
                          const nlohmann::json& metadata = nlohmann::json::object()) {
  binio::Writer w;
  const auto data = encode_feature(s, metadata);
  w.bytes(data.data(), data.size());
  w.save(path);
}

inline CachedFeature read_feature(const std::filesystem::path& path) { return decode_feature(binio::Reader::load(path)); }

/// <cache>/<kind>/<cycle_id>.feat
inline std::filesystem::path feature_path(const std::filesystem::path& cache_dir, SpectrogramKind kind,
                                          const std::string& cycle_id) {
  return cache_dir / kind_name(kind) / (cycle_id + ".feat");
}

}  // namespace respkit

#endif  // RESPKIT_FEATURE_CACHE_HPP_
