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


#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "respkit/features.hpp"
#include "support/fixtures.hpp"

namespace respkit {
namespace {

constexpr double kPi = std::numbers::pi;

AudioClip ten_seconds(std::vector<float> samples) { return {std::move(samples), kPipelineRate}; }

AudioClip mixture(std::uint64_t seed) {
  auto clip = testing::noise(0.05, kPipelineRate, 10.0, seed);
  const auto a = testing::tone(300, 0.3, kPipelineRate, 10.0);
  const auto b = testing::tone(2500, 0.2, kPipelineRate, 10.0);
  for (std::size_t i = 0; i < clip.samples.size(); ++i) clip.samples[i] += a.samples[i] + b.samples[i];
  return clip;
}

AudioClip chirp(double f0, double f1) {
  std::vector<float> s(kPipelineRate * 10);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double t = static_cast<double>(i) / kPipelineRate;
    s[i] = static_cast<float>(0.5 * std::sin(2 * kPi * (f0 * t + 0.5 * (f1 - f0) / 10.0 * t * t)));
  }
  return ten_seconds(std::move(s));
}

int argmax_bin(const Spectrogram& s, int frame) {
  int best = 0;
  for (int b = 1; b < s.bins; ++b) {
    if (s.at(b, frame) > s.at(best, frame)) best = b;
  }
  return best;
}

TEST(LogMel, ShapeAndSilenceFloor) {
  const auto s = logmel(ten_seconds(std::vector<float>(320000, 0.0f)));
  EXPECT_EQ(s.kind, SpectrogramKind::kLogMel);
  EXPECT_EQ(s.bins, 128);
  EXPECT_EQ(s.frames, 1000);
  EXPECT_NO_THROW(validate_spectrogram(s));
  for (float v : s.values) ASSERT_FLOAT_EQ(v, static_cast<float>(std::log(1e-10)));
}

// Independent mel computation: Slaney mel scale written from its closed form,
// a naive DFT and explicit triangular filters.
double slaney_mel(double hz) { return hz <= 1000 ? 3.0 * hz / 200.0 : 15.0 + 27.0 * std::log(hz / 1000.0) / std::log(6.4); }
double slaney_hz(double mel) { return mel <= 15 ? 200.0 * mel / 3.0 : 1000.0 * std::pow(6.4, (mel - 15.0) / 27.0); }

std::vector<double> oracle_logmel_frame(const AudioClip& clip, int frame) {
  const int win = 1024, hop = 320;
  const long n = static_cast<long>(clip.samples.size());
  std::vector<double> x(win);
  for (int i = 0; i < win; ++i) {
    long j = static_cast<long>(frame) * hop - win / 2 + i;
    if (j < 0) j = -j;
    if (j >= n) j = 2 * (n - 1) - j;
    x[i] = clip.samples[j] * (0.5 - 0.5 * std::cos(2 * kPi * i / win));
  }
  std::vector<double> power(win / 2 + 1);
  for (int k = 0; k <= win / 2; ++k) {
    std::complex<double> acc;
    for (int i = 0; i < win; ++i) acc += x[i] * std::polar(1.0, -2 * kPi * k * i / win);
    power[k] = std::norm(acc);
  }
  const double lo = slaney_mel(50), hi = slaney_mel(14000);
  std::vector<double> out(128);
  for (int m = 0; m < 128; ++m) {
    const double fl = slaney_hz(lo + (hi - lo) * m / 129.0);
    const double fc = slaney_hz(lo + (hi - lo) * (m + 1) / 129.0);
    const double fr = slaney_hz(lo + (hi - lo) * (m + 2) / 129.0);
    double e = 0;
    for (int k = 0; k <= win / 2; ++k) {
      const double f = k * 32000.0 / win;
      double w = 0;
      if (f > fl && f <= fc) w = (f - fl) / (fc - fl);
      if (f > fc && f < fr) w = (fr - f) / (fr - fc);
      e += w * 2.0 / (fr - fl) * power[k];
    }
    out[m] = std::log(e + 1e-10);
  }
  return out;
}

TEST(LogMel, MatchesIndependentComputation) {
  const auto clip = mixture(11);
  const auto s = logmel(clip);
  for (int frame : {0, 1, 500, 999}) {
    const auto want = oracle_logmel_frame(clip, frame);
    for (int m = 0; m < 128; ++m) ASSERT_NEAR(s.at(m, frame), want[m], 1e-3) << "frame " << frame << " bin " << m;
  }
}

TEST(LogMel, OneKilohertzTonePeaksAtBin34) {
  const auto s = logmel(testing::tone(1000, 0.5, kPipelineRate, 10.0));
  for (int frame : {10, 500, 990}) EXPECT_EQ(argmax_bin(s, frame), 34);
}

TEST(LogMel, RejectsWrongDurationOrRate) {
  EXPECT_THROW(logmel(testing::tone(100, 0.5, kPipelineRate, 9.0)), ContractError);
  EXPECT_THROW(logmel(testing::tone(100, 0.5, 16000, 10.0)), ContractError);
}

TEST(Wavelet, ShapeSilenceAndFrequencies) {
  const auto s = wavelet_scalogram(ten_seconds(std::vector<float>(320000, 0.0f)));
  EXPECT_EQ(s.bins, 124);
  EXPECT_EQ(s.frames, 154);
  EXPECT_NO_THROW(validate_spectrogram(s));
  for (float v : s.values) ASSERT_FLOAT_EQ(v, static_cast<float>(std::log(1e-10)));
  const auto f = wavelet_frequencies(kPipelineRate);
  EXPECT_DOUBLE_EQ(f.front(), 16000.0);
  EXPECT_NEAR(f.back(), 50.0, 1e-9);
  for (std::size_t i = 1; i < f.size(); ++i) EXPECT_NEAR(f[i - 1] / f[i], f[0] / f[1], 1e-9);
}

// Direct time-domain Morlet convolution, periodic in the clip length.
double oracle_wavelet_magnitude(const AudioClip& clip, double centre, double t_samples) {
  const double sr = clip.sample_rate;
  const double sigma_f = centre / 6.0;
  const double sigma_t = 1.0 / (2 * kPi * sigma_f) * sr;
  const long n = static_cast<long>(clip.samples.size());
  const long reach = static_cast<long>(std::ceil(9 * sigma_t));
  const long c = std::lround(t_samples);
  std::complex<double> acc;
  for (long m = c - reach; m <= c + reach; ++m) {
    const double tau = (t_samples - m) / sr;
    const double g = sigma_f * std::sqrt(2 * kPi) * std::exp(-2 * kPi * kPi * sigma_f * sigma_f * tau * tau);
    acc += static_cast<double>(clip.samples[((m % n) + n) % n]) * g * std::polar(1.0, 2 * kPi * centre * tau);
  }
  return std::abs(acc) * 2.0 / sr;
}

TEST(Wavelet, MatchesDirectConvolution) {
  const auto clip = mixture(5);
  const auto s = wavelet_scalogram(clip);
  const WaveletConfig cfg;
  const auto centres = wavelet_frequencies(kPipelineRate, cfg);
  const auto spectrum = fft_detail::rfft(std::vector<double>(clip.samples.begin(), clip.samples.end()));
  const int n = static_cast<int>(clip.samples.size());
  for (int row : {20, 59, 100}) {
    // Only the pooling grid is taken from the implementation.
    const auto env = wavelet_detail::morlet_envelope(spectrum, n, kPipelineRate, centres[row], cfg, 16 * cfg.frames);
    const int len = static_cast<int>(env.magnitude.size());
    for (int frame : {0, 77, 153}) {
      const int a = frame * len / cfg.frames, b = (frame + 1) * len / cfg.frames;
      double acc = 0;
      for (int i = a; i < b; ++i) acc += oracle_wavelet_magnitude(clip, centres[row], i * env.step);
      const double want = std::log(acc / (b - a) + 1e-10);
      EXPECT_NEAR(s.at(row, frame), want, 1e-3) << "row " << row << " frame " << frame;
    }
  }
}

TEST(Wavelet, UnitToneHasUnitMagnitudeAtItsRow) {
  const auto s = wavelet_scalogram(testing::tone(1000, 1.0, kPipelineRate, 10.0));
  for (int frame : {20, 77, 130}) {
    EXPECT_EQ(argmax_bin(s, frame), 59);
    EXPECT_NEAR(s.at(59, frame), 0.0, 0.01);
  }
}

TEST(Wavelet, RejectsWrongDuration) {
  EXPECT_THROW(wavelet_scalogram(testing::tone(100, 0.5, kPipelineRate, 10.5)), ContractError);
}

TEST(Features, ChirpTracksFrequencyOverTime) {
  const auto clip = chirp(100, 10000);
  const auto mel = logmel(clip);
  int rising = 0;
  for (int t = 1; t < mel.frames; ++t) rising += argmax_bin(mel, t) >= argmax_bin(mel, t - 1);
  EXPECT_GE(rising, 0.9 * (mel.frames - 1));
  const auto wav = wavelet_scalogram(clip);
  int falling = 0;  // row 0 is the highest frequency
  for (int t = 1; t < wav.frames; ++t) falling += argmax_bin(wav, t) <= argmax_bin(wav, t - 1);
  EXPECT_GE(falling, 0.9 * (wav.frames - 1));
}

TEST(Features, ScalingTheSignalShiftsTheLogImage) {
  const auto clip = mixture(8);
  auto louder = clip;
  for (auto& v : louder.samples) v *= 2.0f;
  const auto a = wavelet_scalogram(clip), b = wavelet_scalogram(louder);
  for (std::size_t i = 0; i < a.values.size(); ++i) ASSERT_NEAR(b.values[i] - a.values[i], std::log(2.0), 1e-4);
  const auto c = logmel(clip), d = logmel(louder);
  // The narrowest low-frequency filters catch almost no FFT bins; skip
  // energies close enough to the floor for it to matter.
  for (std::size_t i = 0; i < c.values.size(); ++i) {
    if (c.values[i] > -10) {
      ASSERT_NEAR(d.values[i] - c.values[i], std::log(4.0), 1e-3);
    }
  }
}

TEST(Features, DeterministicAndDispatchedByKind) {
  const auto clip = mixture(2);
  EXPECT_EQ(extract_features(clip, SpectrogramKind::kLogMel), logmel(clip));
  EXPECT_EQ(extract_features(clip, SpectrogramKind::kWavelet), wavelet_scalogram(clip));
  EXPECT_EQ(wavelet_scalogram(clip), wavelet_scalogram(clip));
  EXPECT_EQ(parse_kind("wavelet"), SpectrogramKind::kWavelet);
  EXPECT_THROW(parse_kind("mfcc"), ConfigError);
}

TEST(Features, ValidationCatchesBadImages) {
  Spectrogram s{SpectrogramKind::kWavelet, 124, 154, std::vector<float>(124 * 154, 0.0f)};
  EXPECT_NO_THROW(validate_spectrogram(s));
  s.values[7] = std::nanf("");
  EXPECT_THROW(validate_spectrogram(s), ContractError);
  s.kind = SpectrogramKind::kLogMel;
  EXPECT_THROW(validate_spectrogram(s), ContractError);
}

}  // namespace
}  // namespace respkit
