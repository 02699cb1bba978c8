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

#ifndef RESPKIT_AUDIO_HPP_
#define RESPKIT_AUDIO_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string>
#include <vector>

#include "respkit/errors.hpp"

namespace respkit {

/// Mono audio with its sample rate.
struct AudioClip {
  std::vector<float> samples;
  int sample_rate = 0;

  double duration() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

inline void validate_clip(const AudioClip& clip) {
  if (clip.sample_rate <= 0) throw InvalidInputError("audio clip has non-positive sample rate");
  if (clip.samples.empty()) throw InvalidInputError("audio clip is empty");
}

// ---------------------------------------------------------------------------
// WAV files.

namespace wav_detail {

inline std::uint32_t le32(const unsigned char* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t le16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

inline void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

}  // namespace wav_detail

/// Decodes a RIFF/WAVE byte buffer: 8/16/24/32-bit integer PCM or 32-bit
/// float, any channel count (downmixed to mono by averaging).
inline AudioClip decode_wav(const std::vector<unsigned char>& bytes) {
  using namespace wav_detail;
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError("not a RIFF/WAVE file");
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::size_t len = le32(chunk + 4);
    const std::size_t avail = std::min(len, bytes.size() - pos - 8);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) throw FormatError("truncated fmt chunk");
      format = le16(chunk + 8);
      channels = le16(chunk + 10);
      rate = le32(chunk + 12);
      bits = le16(chunk + 22);
      if (format == 0xFFFE && avail >= 26) format = le16(chunk + 32);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_len = avail;
    }
    pos += 8 + len + (len & 1);
  }
  if (!channels || !rate || !data) throw FormatError("WAV file lacks fmt or data chunk");
  const bool is_float = format == 3;
  if (!(format == 1 || (is_float && bits == 32))) {
    throw FormatError("unsupported WAV encoding (format " + std::to_string(format) + ", " +
                      std::to_string(bits) + " bits)");
  }
  if (format == 1 && bits != 8 && bits != 16 && bits != 24 && bits != 32) {
    throw FormatError("unsupported PCM bit depth " + std::to_string(bits));
  }
  const std::size_t width = bits / 8;
  const std::size_t frames = data_len / (width * channels);
  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  clip.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0;
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + (i * channels + c) * width;
      double v = 0;
      if (is_float) {
        float f;
        std::uint32_t u = le32(p);
        std::memcpy(&f, &u, 4);
        v = f;
      } else if (bits == 8) {
        v = (static_cast<int>(p[0]) - 128) / 128.0;
      } else if (bits == 16) {
        v = static_cast<std::int16_t>(le16(p)) / 32768.0;
      } else if (bits == 24) {
        std::int32_t s = p[0] | (p[1] << 8) | (p[2] << 16);
        if (s & 0x800000) s -= 0x1000000;
        v = s / 8388608.0;
      } else {
        v = static_cast<std::int32_t>(le32(p)) / 2147483648.0;
      }
      acc += v;
    }
    clip.samples[i] = static_cast<float>(acc / channels);
  }
  return clip;
}

inline AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_wav(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

enum class WavEncoding { kPcm8, kPcm16, kPcm24, kFloat32 };

inline std::string encode_wav(const AudioClip& clip, WavEncoding enc = WavEncoding::kPcm16) {
  using namespace wav_detail;
  const std::uint16_t bits = enc == WavEncoding::kPcm8 ? 8 : enc == WavEncoding::kPcm16 ? 16
                             : enc == WavEncoding::kPcm24 ? 24 : 32;
  const std::uint32_t data_len = static_cast<std::uint32_t>(clip.samples.size() * (bits / 8));
  std::string out = "RIFF";
  put32(out, 36 + data_len);
  out += "WAVEfmt ";
  put32(out, 16);
  put16(out, enc == WavEncoding::kFloat32 ? 3 : 1);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put32(out, static_cast<std::uint32_t>(clip.sample_rate) * (bits / 8));
  put16(out, bits / 8);
  put16(out, bits);
  out += "data";
  put32(out, data_len);
  for (float s : clip.samples) {
    const double v = std::clamp(static_cast<double>(s), -1.0, 1.0);
    switch (enc) {
      case WavEncoding::kPcm8:
        out.push_back(static_cast<char>(std::clamp<long>(std::lround(v * 128.0) + 128, 0, 255)));
        break;
      case WavEncoding::kPcm16:
        put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::clamp<long>(std::lround(v * 32768.0), -32768, 32767))));
        break;
      case WavEncoding::kPcm24: {
        const std::int32_t q = static_cast<std::int32_t>(std::clamp<long>(std::lround(v * 8388608.0), -8388608, 8388607));
        for (int i = 0; i < 3; ++i) out.push_back(static_cast<char>((q >> (8 * i)) & 0xff));
        break;
      }
      case WavEncoding::kFloat32: {
        std::uint32_t u;
        std::memcpy(&u, &s, 4);
        put32(out, u);
        break;
      }
    }
  }
  return out;
}

inline void write_wav(const std::filesystem::path& path, const AudioClip& clip,
                      WavEncoding enc = WavEncoding::kPcm16) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  const std::string bytes = encode_wav(clip, enc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

// ---------------------------------------------------------------------------

/// Band-limited resampling with a Blackman-windowed sinc kernel. The kernel
/// spans 32 zero crossings of the lower of the two Nyquist rates per side.
inline AudioClip resample(const AudioClip& clip, int target_rate) {
  validate_clip(clip);
  if (target_rate <= 0) throw ContractError("target sample rate must be positive");
  if (clip.sample_rate == target_rate) return clip;
  const double ratio = static_cast<double>(target_rate) / clip.sample_rate;
  const double cutoff = std::min(1.0, ratio) * 0.96;
  const double half = 32.0 / std::min(1.0, ratio);
  const std::size_t n_in = clip.samples.size();
  const std::size_t n_out = static_cast<std::size_t>(std::llround(static_cast<double>(n_in) * ratio));
  AudioClip out;
  out.sample_rate = target_rate;
  out.samples.resize(std::max<std::size_t>(n_out, 1));
  const double pi = std::numbers::pi;
  for (std::size_t n = 0; n < out.samples.size(); ++n) {
    const double t = static_cast<double>(n) / ratio;
    const long lo = std::max<long>(0, static_cast<long>(std::ceil(t - half)));
    const long hi = std::min<long>(static_cast<long>(n_in) - 1, static_cast<long>(std::floor(t + half)));
    double acc = 0;
    for (long i = lo; i <= hi; ++i) {
      const double d = t - static_cast<double>(i);
      const double x = cutoff * d;
      const double sinc = std::abs(x) < 1e-12 ? 1.0 : std::sin(pi * x) / (pi * x);
      const double u = (d / half + 1.0) * 0.5;  // window position in [0, 1]
      const double w = 0.42 - 0.5 * std::cos(2 * pi * u) + 0.08 * std::cos(4 * pi * u);
      acc += clip.samples[static_cast<std::size_t>(i)] * cutoff * sinc * w;
    }
    out.samples[n] = static_cast<float>(acc);
  }
  return out;
}

}  // namespace respkit

#endif  // RESPKIT_AUDIO_HPP_
