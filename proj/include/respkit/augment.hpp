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

#ifndef RESPKIT_AUGMENT_HPP_
#define RESPKIT_AUGMENT_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <utility>

#include "respkit/dataio.hpp"
#include "respkit/errors.hpp"
#include "respkit/features.hpp"
#include "respkit/random.hpp"

namespace respkit {

/// Probability vector over {normal, crackle, wheeze, both}.
struct SoftLabel {
  std::array<double, 4> probs{};

  static SoftLabel one_hot(CycleLabel label) {
    SoftLabel s;
    s.probs[static_cast<int>(label)] = 1.0;
    return s;
  }

  double sum() const { return std::accumulate(probs.begin(), probs.end(), 0.0); }

  bool valid(double tol = 1e-6) const {
    for (double p : probs) {
      if (!(p >= -tol && p <= 1.0 + tol)) return false;
    }
    return std::abs(sum() - 1.0) <= tol;
  }

  bool operator==(const SoftLabel&) const = default;
};

/// Convex combination lam * (x1, y1) + (1 - lam) * (x2, y2).
inline std::pair<Spectrogram, SoftLabel> mixup_pair(const Spectrogram& x1, const SoftLabel& y1, const Spectrogram& x2,
                                                    const SoftLabel& y2, double lam) {
  if (x1.kind != x2.kind || x1.bins != x2.bins || x1.frames != x2.frames || x1.values.size() != x2.values.size()) {
    throw ContractError("mixup needs two spectrograms of the same kind and shape");
  }
  if (!(lam >= 0.0 && lam <= 1.0)) throw ContractError("mixup weight must lie in [0, 1]");
  Spectrogram x = x1;
  const double mu = 1.0 - lam;
  for (std::size_t i = 0; i < x.values.size(); ++i) {
    x.values[i] = static_cast<float>(lam * x1.values[i] + mu * x2.values[i]);
  }
  SoftLabel y;
  for (std::size_t c = 0; c < y.probs.size(); ++c) y.probs[c] = lam * y1.probs[c] + mu * y2.probs[c];
  return {std::move(x), y};
}

/// Masks `time_masks` bands of exactly `time_width` frames and `freq_masks`
/// bands of exactly `freq_width` bins at seeded random offsets, filling them
/// with the mean of the input.
inline Spectrogram spec_augment(const Spectrogram& x, int time_masks, int time_width, int freq_masks, int freq_width,
                                std::uint64_t seed) {
  if (time_masks < 0 || freq_masks < 0 || time_width < 0 || freq_width < 0) {
    throw ContractError("mask counts and widths must be non-negative");
  }
  if (time_width >= x.frames) throw ContractError("time mask width must be smaller than the frame count");
  if (freq_width >= x.bins) throw ContractError("frequency mask width must be smaller than the bin count");
  Spectrogram out = x;
  if ((time_masks == 0 || time_width == 0) && (freq_masks == 0 || freq_width == 0)) return out;
  double mean = 0;
  for (float v : x.values) mean += v;
  const float fill = static_cast<float>(mean / static_cast<double>(x.values.size()));
  std::mt19937_64 rng(seed);
  if (time_width > 0) {
    std::uniform_int_distribution<int> start(0, x.frames - time_width);
    for (int m = 0; m < time_masks; ++m) {
      const int t0 = start(rng);
      for (int b = 0; b < x.bins; ++b) {
        for (int t = t0; t < t0 + time_width; ++t) out.at(b, t) = fill;
      }
    }
  }
  if (freq_width > 0) {
    std::uniform_int_distribution<int> start(0, x.bins - freq_width);
    for (int m = 0; m < freq_masks; ++m) {
      const int b0 = start(rng);
      for (int b = b0; b < b0 + freq_width; ++b) {
        for (int t = 0; t < x.frames; ++t) out.at(b, t) = fill;
      }
    }
  }
  return out;
}

/// Training-time augmentation settings. Widths are upper bounds: each
/// sample's band widths are drawn uniformly from [0, width].
struct AugmentConfig {
  /// Beta(alpha, alpha) mixup weight; 0 disables mixup.
  double mixup_alpha = 0.4;
  int time_masks = 1;
  int time_width = 100;
  int freq_masks = 1;
  int freq_width = 16;
  std::uint64_t augment_seed = 0;

  static AugmentConfig disabled() { return {0.0, 0, 0, 0, 0, 0}; }

  /// Defaults for `kind`: LogMel as above, Wavelet scaled to its shape.
  static AugmentConfig defaults_for(SpectrogramKind kind) {
    AugmentConfig c;
    if (kind == SpectrogramKind::kWavelet) {
      c.time_width = 100 * 154 / 1000;
      c.freq_width = 16 * 124 / 128;
    }
    return c;
  }

  bool masks_enabled() const { return (time_masks > 0 && time_width > 0) || (freq_masks > 0 && freq_width > 0); }
};

/// Draws per-sample band widths and applies spec_augment.
inline Spectrogram random_spec_augment(const Spectrogram& x, const AugmentConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int tw = std::min(cfg.time_width, x.frames - 1);
  const int fw = std::min(cfg.freq_width, x.bins - 1);
  const int t = tw > 0 ? std::uniform_int_distribution<int>(0, tw)(rng) : 0;
  const int f = fw > 0 ? std::uniform_int_distribution<int>(0, fw)(rng) : 0;
  return spec_augment(x, cfg.time_masks, t, cfg.freq_masks, f, splitmix64(seed));
}

}  // namespace respkit

#endif  // RESPKIT_AUGMENT_HPP_
