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

#include "respkit/audio.hpp"
#include "support/fixtures.hpp"

namespace respkit {
namespace {

std::vector<unsigned char> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

TEST(Wav, RoundTripsEveryEncoding) {
  const auto clip = testing::tone(440, 0.5, 8000, 0.25);
  const std::pair<WavEncoding, double> cases[] = {
      {WavEncoding::kPcm8, 1.0 / 128}, {WavEncoding::kPcm16, 1.0 / 32768}, {WavEncoding::kPcm24, 1.0 / 8388608}, {WavEncoding::kFloat32, 0}};
  for (const auto& [enc, tol] : cases) {
    const auto back = decode_wav(bytes_of(encode_wav(clip, enc)));
    ASSERT_EQ(back.sample_rate, 8000);
    ASSERT_EQ(back.samples.size(), clip.samples.size());
    for (std::size_t i = 0; i < clip.samples.size(); ++i) ASSERT_NEAR(back.samples[i], clip.samples[i], tol + 1e-7);
  }
}

TEST(Wav, DownmixesStereoAndSkipsUnknownChunks) {
  // 2 channels, 16-bit, with a LIST chunk before the data.
  std::string w = "RIFF";
  auto put32 = [&](std::uint32_t v) { for (int i = 0; i < 4; ++i) w.push_back(static_cast<char>(v >> (8 * i))); };
  auto put16 = [&](std::uint16_t v) { w.push_back(static_cast<char>(v)); w.push_back(static_cast<char>(v >> 8)); };
  put32(0);
  w += "WAVEfmt ";
  put32(16); put16(1); put16(2); put32(1000); put32(4000); put16(4); put16(16);
  w += "LIST"; put32(3); w += "abc"; w.push_back('\0');
  w += "data"; put32(8);
  put16(16384); put16(static_cast<std::uint16_t>(-16384 & 0xffff)); put16(16384); put16(16384);
  const auto clip = decode_wav(bytes_of(w));
  ASSERT_EQ(clip.samples.size(), 2u);
  EXPECT_NEAR(clip.samples[0], 0.0, 1e-7);
  EXPECT_NEAR(clip.samples[1], 0.5, 1e-7);
}

TEST(Wav, RejectsMalformedFiles) {
  EXPECT_THROW(decode_wav(bytes_of("RIFX....WAVE")), FormatError);
  EXPECT_THROW(decode_wav(bytes_of(std::string("RIFF\0\0\0\0WAVE", 12))), FormatError);
  std::string w = encode_wav(testing::tone(100, 0.1, 1000, 0.01));
  w[20] = 2;  // ADPCM
  EXPECT_THROW(decode_wav(bytes_of(w)), FormatError);
}

TEST(Wav, FileRoundTrip) {
  testing::TempDir dir;
  const auto clip = testing::tone(300, 0.25, 22050, 0.1);
  write_wav(dir.path() / "a.wav", clip, WavEncoding::kFloat32);
  EXPECT_EQ(read_wav(dir.path() / "a.wav").samples, clip.samples);
  EXPECT_THROW(read_wav(dir.path() / "missing.wav"), Error);
}

double tone_magnitude(const AudioClip& c, double hz) {
  std::complex<double> acc;
  for (std::size_t i = 0; i < c.samples.size(); ++i) {
    acc += static_cast<double>(c.samples[i]) * std::polar(1.0, -2 * std::numbers::pi * hz * i / c.sample_rate);
  }
  return 2.0 * std::abs(acc) / c.samples.size();
}

TEST(Resample, PreservesToneAndDuration) {
  for (int rate : {4000, 22050, 44100}) {
    const auto in = testing::tone(300, 0.5, rate, 2.0);
    const auto out = resample(in, 32000);
    EXPECT_EQ(out.sample_rate, 32000);
    EXPECT_EQ(out.samples.size(), 64000u);
    // Away from the edges the 300 Hz tone keeps its amplitude.
    AudioClip mid{std::vector<float>(out.samples.begin() + 16000, out.samples.begin() + 48000), 32000};
    EXPECT_NEAR(tone_magnitude(mid, 300), 0.5, 0.01) << rate;
  }
}

TEST(Resample, RemovesContentAboveTargetNyquist) {
  const auto in = testing::tone(15000, 0.5, 44100, 1.0);
  const auto out = resample(in, 16000);
  AudioClip mid{std::vector<float>(out.samples.begin() + 2000, out.samples.end() - 2000), 16000};
  double rms = 0;
  for (float s : mid.samples) rms += s * s;
  EXPECT_LT(std::sqrt(rms / mid.samples.size()), 0.01);
}

TEST(Resample, SameRateIsIdentity) {
  const auto in = testing::noise(0.1, 32000, 0.1, 1);
  EXPECT_EQ(resample(in, 32000).samples, in.samples);
}

}  // namespace
}  // namespace respkit
