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

#ifndef RESPKIT_FEATURES_HPP_
#define RESPKIT_FEATURES_HPP_

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "respkit/audio.hpp"
#include "respkit/errors.hpp"
#include "respkit/tensor.hpp"

namespace respkit {

inline constexpr int kPipelineRate = 32000;
inline constexpr double kCycleSeconds = 10.0;
inline constexpr double kLogFloor = 1e-10;

enum class SpectrogramKind { kLogMel = 0, kWavelet = 1 };

inline const char* kind_name(SpectrogramKind k) { return k == SpectrogramKind::kLogMel ? "logmel" : "wavelet"; }

inline SpectrogramKind parse_kind(std::string_view s) {
  if (s == "logmel") return SpectrogramKind::kLogMel;
  if (s == "wavelet") return SpectrogramKind::kWavelet;
  throw ConfigError("unknown feature kind '" + std::string(s) + "' (expected logmel or wavelet)");
}

struct LogMelConfig {
  int sample_rate = kPipelineRate;
  int window = 1024;
  int hop = 320;
  int mel_bins = 128;
  double fmin = 50.0;
  double fmax = 14000.0;
  int frames = 1000;
};

struct WaveletConfig {
  int scales = 124;
  int frames = 154;
  double fmin = 50.0;
  /// Morlet centre angular frequency.
  double omega0 = 6.0;
  /// Frequency support kept around each centre, in Gaussian standard deviations.
  double support_sigmas = 5.0;
};

/// Time-frequency image, row-major [bins x frames].
struct Spectrogram {
  SpectrogramKind kind = SpectrogramKind::kLogMel;
  int bins = 0;
  int frames = 0;
  std::vector<float> values;

  float at(int bin, int frame) const { return values[static_cast<std::size_t>(bin) * frames + frame]; }
  float& at(int bin, int frame) { return values[static_cast<std::size_t>(bin) * frames + frame]; }

  /// Shape (1, bins, frames).
  Tensor as_tensor() const { return Tensor({1, bins, frames}, values); }

  bool operator==(const Spectrogram&) const = default;
};

inline std::pair<int, int> expected_shape(SpectrogramKind kind) {
  return kind == SpectrogramKind::kLogMel ? std::pair{128, 1000} : std::pair{124, 154};
}

/// Throws ContractError unless the shape matches the kind and every value is finite.
inline void validate_spectrogram(const Spectrogram& s) {
  const auto [bins, frames] = expected_shape(s.kind);
  if (s.bins != bins || s.frames != frames || s.values.size() != static_cast<std::size_t>(bins) * frames) {
    throw ContractError(std::string(kind_name(s.kind)) + " spectrogram must be " + std::to_string(bins) + "x" +
                        std::to_string(frames) + ", got " + std::to_string(s.bins) + "x" + std::to_string(s.frames));
  }
  for (float v : s.values) {
    if (!std::isfinite(v)) throw ContractError("spectrogram holds non-finite values");
  }
}

// ---------------------------------------------------------------------------
// FFT plumbing. FFTW's planner is not re-entrant, so plans are created once
// under a lock and executed through the thread-safe new-array interface.

namespace fft_detail {

class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan real_forward(int n) {
    std::lock_guard lock(mu_);
    auto& p = r2c_[n];
    if (!p) {
      std::vector<double> in(n);
      std::vector<fftw_complex> out(n / 2 + 1);
      p = fftw_plan_dft_r2c_1d(n, in.data(), out.data(), FFTW_ESTIMATE | FFTW_UNALIGNED);
    }
    return p;
  }

  fftw_plan complex_inverse(int n) {
    std::lock_guard lock(mu_);
    auto& p = c2c_[n];
    if (!p) {
      std::vector<fftw_complex> buf(n);
      p = fftw_plan_dft_1d(n, buf.data(), buf.data(), FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
    }
    return p;
  }

  ~PlanCache() {
    for (auto& [n, p] : r2c_) fftw_destroy_plan(p);
    for (auto& [n, p] : c2c_) fftw_destroy_plan(p);
  }

 private:
  std::mutex mu_;
  std::map<int, fftw_plan> r2c_;
  std::map<int, fftw_plan> c2c_;
};

/// Bins 0..n/2 of the unnormalized DFT of `x`.
inline std::vector<std::complex<double>> rfft(const std::vector<double>& x) {
  const int n = static_cast<int>(x.size());
  std::vector<std::complex<double>> out(n / 2 + 1);
  std::vector<double> in = x;
  fftw_execute_dft_r2c(PlanCache::instance().real_forward(n), in.data(),
                       reinterpret_cast<fftw_complex*>(out.data()));
  return out;
}

/// Unnormalized inverse DFT, in place (the plan is in-place too, as FFTW requires).
inline void ifft_inplace(std::vector<std::complex<double>>& x) {
  auto* p = reinterpret_cast<fftw_complex*>(x.data());
  fftw_execute_dft(PlanCache::instance().complex_inverse(static_cast<int>(x.size())), p, p);
}

inline int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace fft_detail

// ---------------------------------------------------------------------------
// Log-mel.

/// Slaney-style mel scale: linear below 1 kHz, logarithmic above.
inline double hz_to_mel(double hz) {
  constexpr double kLinearStep = 200.0 / 3.0;
  constexpr double kBreakHz = 1000.0;
  constexpr double kBreakMel = kBreakHz / kLinearStep;
  const double log_step = std::log(6.4) / 27.0;
  return hz < kBreakHz ? hz / kLinearStep : kBreakMel + std::log(hz / kBreakHz) / log_step;
}

inline double mel_to_hz(double mel) {
  constexpr double kLinearStep = 200.0 / 3.0;
  constexpr double kBreakHz = 1000.0;
  constexpr double kBreakMel = kBreakHz / kLinearStep;
  const double log_step = std::log(6.4) / 27.0;
  return mel < kBreakMel ? mel * kLinearStep : kBreakHz * std::exp(log_step * (mel - kBreakMel));
}

/// Triangular filters with area normalization, [mel_bins x (window/2 + 1)].
inline std::vector<std::vector<double>> mel_filterbank(const LogMelConfig& cfg) {
  const int n_freq = cfg.window / 2 + 1;
  const double lo = hz_to_mel(cfg.fmin), hi = hz_to_mel(cfg.fmax);
  std::vector<double> edges(cfg.mel_bins + 2);
  for (int i = 0; i < cfg.mel_bins + 2; ++i) edges[i] = mel_to_hz(lo + (hi - lo) * i / (cfg.mel_bins + 1));
  std::vector<std::vector<double>> fb(cfg.mel_bins, std::vector<double>(n_freq, 0.0));
  for (int m = 0; m < cfg.mel_bins; ++m) {
    const double norm = 2.0 / (edges[m + 2] - edges[m]);
    for (int k = 0; k < n_freq; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / cfg.window;
      const double rise = (f - edges[m]) / (edges[m + 1] - edges[m]);
      const double fall = (edges[m + 2] - f) / (edges[m + 2] - edges[m + 1]);
      fb[m][k] = std::max(0.0, std::min(rise, fall)) * norm;
    }
  }
  return fb;
}

/// 128 x 1000 natural-log mel energies of a 10 s clip at 32 kHz. Frames are
/// centred on multiples of the hop, with reflect padding at the edges.
inline Spectrogram logmel(const AudioClip& clip, const LogMelConfig& cfg = {}) {
  const auto want = static_cast<std::size_t>(std::llround(kCycleSeconds * cfg.sample_rate));
  if (clip.sample_rate != cfg.sample_rate || clip.samples.size() != want) {
    throw ContractError("logmel expects exactly " + std::to_string(want) + " samples at " +
                        std::to_string(cfg.sample_rate) + " Hz, got " + std::to_string(clip.samples.size()) +
                        " at " + std::to_string(clip.sample_rate) + " Hz");
  }
  static const auto default_bank = mel_filterbank(LogMelConfig{});
  std::vector<std::vector<double>> custom_bank;
  const bool is_default = cfg.window == 1024 && cfg.mel_bins == 128 && cfg.fmin == 50.0 && cfg.fmax == 14000.0 &&
                          cfg.sample_rate == kPipelineRate;
  if (!is_default) custom_bank = mel_filterbank(cfg);
  const auto& fb = is_default ? default_bank : custom_bank;
  const int half = cfg.window / 2;
  const long n = static_cast<long>(clip.samples.size());
  auto sample = [&](long i) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
    return static_cast<double>(clip.samples[static_cast<std::size_t>(std::clamp(i, 0L, n - 1))]);
  };
  std::vector<double> hann(cfg.window);
  for (int i = 0; i < cfg.window; ++i) hann[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / cfg.window);

  Spectrogram out;
  out.kind = SpectrogramKind::kLogMel;
  out.bins = cfg.mel_bins;
  out.frames = cfg.frames;
  out.values.resize(static_cast<std::size_t>(cfg.mel_bins) * cfg.frames);
  const long available = 1 + n / cfg.hop;
  std::vector<double> frame(cfg.window), power(half + 1);
  for (int t = 0; t < cfg.frames; ++t) {
    const long src_t = std::min<long>(t, available - 1);
    const long start = src_t * cfg.hop - half;
    for (int i = 0; i < cfg.window; ++i) frame[i] = sample(start + i) * hann[i];
    const auto spec = fft_detail::rfft(frame);
    for (int k = 0; k <= half; ++k) power[k] = std::norm(spec[k]);
    for (int m = 0; m < cfg.mel_bins; ++m) {
      double e = 0;
      for (int k = 0; k <= half; ++k) e += fb[m][k] * power[k];
      out.at(m, t) = static_cast<float>(std::log(e + kLogFloor));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Wavelet scalogram.

/// Morlet centre frequencies in row order: row 0 is the smallest scale
/// (Nyquist), the last row the largest (cfg.fmin).
inline std::vector<double> wavelet_frequencies(int sample_rate, const WaveletConfig& cfg = {}) {
  const double fmax = sample_rate / 2.0;
  std::vector<double> f(cfg.scales);
  for (int i = 0; i < cfg.scales; ++i) {
    const double u = cfg.scales == 1 ? 0.0 : static_cast<double>(i) / (cfg.scales - 1);
    f[i] = fmax * std::pow(cfg.fmin / fmax, u);
  }
  return f;
}

namespace wavelet_detail {

/// |analytic Morlet response| at one centre frequency, sampled on a uniform
/// grid of `len` points spanning the clip. The band around the centre is
/// shifted to baseband before the inverse transform, which leaves the
/// magnitude unchanged and lets the grid be much coarser than the audio.
struct Envelope {
  std::vector<double> magnitude;
  /// Audio samples per envelope point.
  double step = 1.0;
};

inline Envelope morlet_envelope(const std::vector<std::complex<double>>& spectrum, int n, int sample_rate,
                                double centre, const WaveletConfig& cfg, int min_len) {
  const double sigma = centre / cfg.omega0;
  const double bin_hz = static_cast<double>(sample_rate) / n;
  const int last = n / 2;
  const int k_lo = std::max(1, static_cast<int>(std::floor((centre - cfg.support_sigmas * sigma) / bin_hz)));
  const int k_hi = std::min(last, static_cast<int>(std::ceil((centre + cfg.support_sigmas * sigma) / bin_hz)));
  const int band = std::max(k_hi - k_lo + 1, 1);
  const int len = fft_detail::next_pow2(std::max(band, min_len));
  std::vector<std::complex<double>> buf(len);
  for (int k = k_lo; k <= k_hi; ++k) {
    const double r = (k * bin_hz / centre - 1.0) * cfg.omega0;
    buf[k - k_lo] = spectrum[k] * std::exp(-0.5 * r * r) * (2.0 / n);
  }
  fft_detail::ifft_inplace(buf);
  Envelope env;
  env.magnitude.resize(len);
  for (int i = 0; i < len; ++i) env.magnitude[i] = std::abs(buf[i]);
  env.step = static_cast<double>(n) / len;
  return env;
}

}  // namespace wavelet_detail

/// 124 x 154 log scalogram of a 10 s clip: Morlet CWT magnitudes at 124
/// log-spaced centre frequencies from Nyquist down to 50 Hz, mean-pooled over
/// 154 equal time frames. A unit-amplitude tone at a centre frequency has
/// magnitude 1 in that row.
inline Spectrogram wavelet_scalogram(const AudioClip& clip, const WaveletConfig& cfg = {}) {
  validate_clip(clip);
  const auto want = static_cast<std::size_t>(std::llround(kCycleSeconds * clip.sample_rate));
  if (clip.samples.size() != want) {
    throw ContractError("wavelet scalogram expects a 10 s clip, got " + std::to_string(clip.duration()) + " s");
  }
  const int n = static_cast<int>(clip.samples.size());
  const auto spectrum = fft_detail::rfft(std::vector<double>(clip.samples.begin(), clip.samples.end()));
  const auto centres = wavelet_frequencies(clip.sample_rate, cfg);
  Spectrogram out;
  out.kind = SpectrogramKind::kWavelet;
  out.bins = cfg.scales;
  out.frames = cfg.frames;
  out.values.resize(static_cast<std::size_t>(cfg.scales) * cfg.frames);
  for (int row = 0; row < cfg.scales; ++row) {
    const auto env = wavelet_detail::morlet_envelope(spectrum, n, clip.sample_rate, centres[row], cfg, 16 * cfg.frames);
    const int len = static_cast<int>(env.magnitude.size());
    for (int t = 0; t < cfg.frames; ++t) {
      const int a = static_cast<int>(static_cast<long long>(t) * len / cfg.frames);
      const int b = static_cast<int>(static_cast<long long>(t + 1) * len / cfg.frames);
      double acc = 0;
      for (int i = a; i < b; ++i) acc += env.magnitude[i];
      out.at(row, t) = static_cast<float>(std::log(acc / std::max(b - a, 1) + kLogFloor));
    }
  }
  return out;
}

inline Spectrogram extract_features(const AudioClip& clip, SpectrogramKind kind) {
  return kind == SpectrogramKind::kLogMel ? logmel(clip) : wavelet_scalogram(clip);
}

}  // namespace respkit

#endif  // RESPKIT_FEATURES_HPP_
