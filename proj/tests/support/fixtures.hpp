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


// Synthetic data shared by the unit and acceptance suites.

#ifndef RESPKIT_TESTS_SUPPORT_FIXTURES_HPP_
#define RESPKIT_TESTS_SUPPORT_FIXTURES_HPP_

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "respkit/audio.hpp"
#include "respkit/augment.hpp"
#include "respkit/features.hpp"
#include "respkit/train.hpp"

namespace respkit::testing {

namespace fs = std::filesystem;

inline AudioClip tone(double hz, double amplitude, int rate, double seconds) {
  AudioClip c;
  c.sample_rate = rate;
  c.samples.resize(static_cast<std::size_t>(std::llround(seconds * rate)));
  for (std::size_t i = 0; i < c.samples.size(); ++i) {
    c.samples[i] = static_cast<float>(amplitude * std::sin(2 * std::numbers::pi * hz * i / rate));
  }
  return c;
}

inline AudioClip noise(double amplitude, int rate, double seconds, std::uint64_t seed) {
  AudioClip c;
  c.sample_rate = rate;
  c.samples.resize(static_cast<std::size_t>(std::llround(seconds * rate)));
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> nd(0.0f, static_cast<float>(amplitude));
  for (auto& s : c.samples) s = nd(rng);
  return c;
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "respkit") {
    std::string tmpl = (fs::temp_directory_path() / (tag + "-XXXXXX")).string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

inline void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct FixtureCycle {
  double onset, offset;
  bool crackle, wheeze;
};

struct FixtureRecording {
  std::string id;
  int sample_rate;
  double seconds;
  std::vector<FixtureCycle> cycles;
};

/// Six recordings from two patients at three sample rates. Patient 101 is
/// the Train side, 102 the Test side. One annotation overruns its recording
/// by 20 ms to exercise clamping.
inline std::vector<FixtureRecording> fixture_recordings() {
  return {
      {"101_1b1_Al_sc_Meditron", 4000, 7.0, {{0.2, 2.4, false, false}, {2.5, 4.6, true, false}, {4.7, 6.9, false, true}}},
      {"101_1b1_Pr_sc_Meditron", 44100, 6.0, {{0.1, 2.0, false, false}, {2.1, 4.3, true, true}, {4.4, 6.02, false, false}}},
      {"101_2b2_Ar_mc_LittC2SE", 22050, 5.0, {{0.3, 2.2, false, true}, {2.4, 4.8, false, false}}},
      {"102_1b1_Ar_sc_Meditron", 44100, 6.5, {{0.0, 2.1, false, false}, {2.2, 4.0, true, false}, {4.1, 6.4, false, false}}},
      {"102_2b1_Ll_mc_AKGC417L", 4000, 6.0, {{0.5, 2.5, false, true}, {2.6, 5.9, false, false}}},
      {"102_3b2_Tc_mc_LittC2SE", 22050, 5.5, {{0.2, 2.7, true, true}, {2.8, 5.3, false, false}}},
  };
}

inline std::size_t fixture_cycle_count() {
  std::size_t n = 0;
  for (const auto& r : fixture_recordings()) n += r.cycles.size();
  return n;
}

/// Breath-like noise; crackles add sparse clicks, wheezes a 400 Hz tone.
inline AudioClip synthesize_recording(const FixtureRecording& rec, std::uint64_t seed) {
  AudioClip clip = noise(0.05, rec.sample_rate, rec.seconds, seed);
  std::mt19937_64 rng(seed ^ 0x5a5a);
  for (const auto& c : rec.cycles) {
    const auto a = static_cast<std::size_t>(c.onset * rec.sample_rate);
    const auto b = std::min(clip.samples.size(), static_cast<std::size_t>(c.offset * rec.sample_rate));
    for (std::size_t i = a; i < b; ++i) {
      const double t = static_cast<double>(i) / rec.sample_rate;
      if (c.wheeze) clip.samples[i] += static_cast<float>(0.3 * std::sin(2 * std::numbers::pi * 400 * t));
      if (c.crackle && std::uniform_real_distribution<double>(0, 1)(rng) < 40.0 / rec.sample_rate) {
        for (std::size_t k = 0; k < 20 && i + k < b; ++k) clip.samples[i + k] += static_cast<float>(0.6 * std::exp(-0.3 * k));
      }
    }
  }
  return clip;
}

inline std::string annotation_text(const FixtureRecording& rec) {
  std::string out;
  char line[96];
  for (const auto& c : rec.cycles) {
    std::snprintf(line, sizeof line, "%.3f\t%.3f\t%d\t%d\n", c.onset, c.offset, c.crackle ? 1 : 0, c.wheeze ? 1 : 0);
    out += line;
  }
  return out;
}

/// Writes <id>.wav, <id>.txt and split.txt into `dir`; returns the split path.
inline fs::path write_fixture_dataset(const fs::path& dir) {
  fs::create_directories(dir);
  std::string split;
  std::uint64_t seed = 11;
  for (const auto& rec : fixture_recordings()) {
    write_wav(dir / (rec.id + ".wav"), synthesize_recording(rec, seed++), WavEncoding::kPcm16);
    write_file(dir / (rec.id + ".txt"), annotation_text(rec));
    split += rec.id + (rec.id.starts_with("101") ? "\ttrain\n" : "\ttest\n");
  }
  const fs::path split_path = dir.parent_path() / "split.txt";
  write_file(split_path, split);
  return split_path;
}

/// 20 wavelet-shaped samples, 5 per class. Classes differ by the shape of a
/// Gaussian bump (small, wide in time, wide in frequency, large) placed at a
/// random position over unit-scale noise.
inline std::vector<LabeledSpectrogram> blob_dataset(std::size_t n = 20, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> nd(0.0f, 0.3f);
  std::uniform_real_distribution<double> ub(30, 94), ut(30, 124);
  const double sb[4] = {3, 3, 20, 20}, st[4] = {3, 20, 3, 20};
  std::vector<LabeledSpectrogram> set;
  for (std::size_t i = 0; i < n; ++i) {
    const int c = static_cast<int>(i % 4);
    Spectrogram s;
    s.kind = SpectrogramKind::kWavelet;
    s.bins = 124;
    s.frames = 154;
    s.values.resize(124 * 154);
    const double cb = ub(rng), ct = ut(rng);
    for (int b = 0; b < 124; ++b) {
      for (int t = 0; t < 154; ++t) {
        const double g = std::exp(-(b - cb) * (b - cb) / (2 * sb[c] * sb[c]) - (t - ct) * (t - ct) / (2 * st[c] * st[c]));
        s.at(b, t) = nd(rng) + static_cast<float>(3.0 * g);
      }
    }
    set.push_back({std::move(s), SoftLabel::one_hot(static_cast<CycleLabel>(c))});
  }
  return set;
}

/// Class c occupies coordinates {d : d % 4 == c} with value +1 and the rest
/// -1/3, plus small seeded noise, so the linear score sum_{d % 4 == c} x_d
/// separates the classes by a margin of dim/3 minus noise.
inline Tensor separable_embeddings(int dim, int per_class, std::vector<SoftLabel>& labels, std::uint64_t seed = 3,
                                   float noise = 0.05f) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> nd(0.0f, noise);
  Tensor x({4 * per_class, dim});
  labels.clear();
  for (int i = 0; i < 4 * per_class; ++i) {
    const int c = i % 4;
    for (int d = 0; d < dim; ++d) x.at(i, d) = (d % 4 == c ? 1.0f : -1.0f / 3.0f) + nd(rng);
    labels.push_back(SoftLabel::one_hot(static_cast<CycleLabel>(c)));
  }
  return x;
}

inline Tensor stack_spectrograms(const std::vector<LabeledSpectrogram>& set) {
  const int b = set.front().x.bins, f = set.front().x.frames;
  Tensor t({static_cast<int>(set.size()), 1, b, f});
  for (std::size_t i = 0; i < set.size(); ++i) {
    std::copy(set[i].x.values.begin(), set[i].x.values.end(), t.data() + i * static_cast<std::size_t>(b) * f);
  }
  return t;
}

inline int argmax_row(const Tensor& probs, int i) {
  int best = 0;
  for (int c = 1; c < probs.dim(1); ++c) {
    if (probs.at(i, c) > probs.at(i, best)) best = c;
  }
  return best;
}

}  // namespace respkit::testing

#endif  // RESPKIT_TESTS_SUPPORT_FIXTURES_HPP_
