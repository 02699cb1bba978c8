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

// Embedding providers: frozen feature extractors feeding the MLP head.
//
// Adapter contract. A provider turns one spectrogram of input_kind() into a
// vector of exactly dim() finite floats, deterministically. To plug in an
// external pretrained extractor, derive from EmbeddingProvider and register a
// factory under a new name:
//
//   register_embedding_provider("my_vgg14", [](const nlohmann::json& m) {
//     return std::make_unique<MyVgg14>(m.at("weights").get<std::string>());
//   });
//
// Experiment configs then select it with {"provider": "my_vgg14", ...}; the
// whole JSON object is handed to the factory. The MLP head width is read from
// dim() at runtime, never hard-coded.

#ifndef RESPKIT_EMBEDDING_HPP_
#define RESPKIT_EMBEDDING_HPP_

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "respkit/errors.hpp"
#include "respkit/features.hpp"
#include "respkit/network.hpp"
#include "respkit/tensor.hpp"

namespace respkit {

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual std::string id() const = 0;
  virtual int dim() const = 0;
  virtual SpectrogramKind input_kind() const = 0;
  virtual std::vector<float> embed(const Spectrogram& x) const = 0;

  /// Enough to reconstruct the provider through make_embedding_provider().
  virtual nlohmann::json manifest() const = 0;

  /// (N, dim) rows. Subclasses with a batched path may override.
  virtual Tensor embed_batch(std::span<const Spectrogram> xs) const {
    Tensor out({static_cast<int>(xs.size()), dim()});
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const auto v = checked_embed(xs[i]);
      std::copy(v.begin(), v.end(), out.data() + i * static_cast<std::size_t>(dim()));
    }
    return out;
  }

  /// embed() plus the kind and width contract checks.
  std::vector<float> checked_embed(const Spectrogram& x) const {
    if (x.kind != input_kind()) {
      throw ContractError("provider " + id() + " expects " + kind_name(input_kind()) + " input, got " +
                          kind_name(x.kind));
    }
    auto v = embed(x);
    if (static_cast<int>(v.size()) != dim()) {
      throw ContractError("provider " + id() + " returned width " + std::to_string(v.size()) + ", declared " +
                          std::to_string(dim()));
    }
    return v;
  }
};

/// Stand-in for a pretrained log-mel extractor: a fixed Gaussian projection
/// of per-bin temporal mean and standard deviation.
class FixtureEmbeddingProvider final : public EmbeddingProvider {
 public:
  FixtureEmbeddingProvider(int dim, std::uint64_t seed, int bins = 128) : dim_(dim), seed_(seed), bins_(bins) {
    if (dim <= 0) throw ContractError("embedding dim must be positive");
    if (bins <= 0) throw ContractError("bin count must be positive");
    const int in = 2 * bins;
    projection_.resize(static_cast<std::size_t>(dim) * in);
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> dist(0.0f, 1.0f / std::sqrt(static_cast<float>(in)));
    for (auto& w : projection_) w = dist(rng);
  }

  std::string id() const override { return "fixture"; }
  int dim() const override { return dim_; }
  SpectrogramKind input_kind() const override { return SpectrogramKind::kLogMel; }

  std::vector<float> embed(const Spectrogram& x) const override {
    if (x.bins != bins_ || x.frames <= 0) {
      throw ContractError("fixture provider expects " + std::to_string(bins_) + " bins, got " + std::to_string(x.bins));
    }
    // Per-bin statistics; means are centred on the clip mean so the
    // projection sees spectral shape rather than overall level.
    std::vector<double> stats(2 * static_cast<std::size_t>(bins_));
    double total = 0;
    for (int b = 0; b < bins_; ++b) {
      double s = 0, ss = 0;
      for (int t = 0; t < x.frames; ++t) {
        const double v = x.at(b, t);
        s += v;
        ss += v * v;
      }
      const double mean = s / x.frames;
      stats[b] = mean;
      stats[bins_ + b] = std::sqrt(std::max(0.0, ss / x.frames - mean * mean));
      total += mean;
    }
    total /= bins_;
    for (int b = 0; b < bins_; ++b) stats[b] -= total;
    const std::size_t in = stats.size();
    std::vector<float> out(dim_);
    for (int d = 0; d < dim_; ++d) {
      const float* w = projection_.data() + static_cast<std::size_t>(d) * in;
      double acc = 0;
      for (std::size_t k = 0; k < in; ++k) acc += static_cast<double>(w[k]) * stats[k];
      out[d] = static_cast<float>(acc);
    }
    return out;
  }

  nlohmann::json manifest() const override {
    return {{"provider", "fixture"}, {"dim", dim_}, {"seed", seed_}, {"bins", bins_}};
  }

 private:
  int dim_;
  std::uint64_t seed_;
  int bins_;
  std::vector<float> projection_;
};

inline std::unique_ptr<EmbeddingProvider> fixture_embedding_provider(int dim, std::uint64_t seed) {
  return std::make_unique<FixtureEmbeddingProvider>(dim, seed);
}

/// Activations of a trained network at a named tap, e.g. Inc-03 "GMP".
class NetworkTapProvider final : public EmbeddingProvider {
 public:
  NetworkTapProvider(Network net, std::string tap, SpectrogramKind kind = SpectrogramKind::kWavelet)
      : net_(std::move(net)), tap_(std::move(tap)), kind_(kind), dim_(net_.tap_width(tap_)) {}

  std::string id() const override { return net_.descriptor().name + ":" + tap_; }
  int dim() const override { return dim_; }
  SpectrogramKind input_kind() const override { return kind_; }

  std::vector<float> embed(const Spectrogram& x) const override {
    const Tensor t = net_.embed(x.as_tensor().reshaped({1, 1, x.bins, x.frames}), tap_);
    return {t.data(), t.data() + t.size()};
  }

  Tensor embed_batch(std::span<const Spectrogram> xs) const override {
    if (xs.empty()) return Tensor({0, dim_});
    const auto& in = net_.input_shape();
    Tensor batch({static_cast<int>(xs.size()), in[0], in[1], in[2]});
    const std::size_t plane = batch.stride0();
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (xs[i].kind != kind_ || xs[i].values.size() != plane) {
        throw ContractError("provider " + id() + " got a mismatched spectrogram");
      }
      std::copy(xs[i].values.begin(), xs[i].values.end(), batch.data() + i * plane);
    }
    return net_.embed(batch, tap_);
  }

  nlohmann::json manifest() const override {
    return {{"provider", "network_tap"}, {"network", net_.descriptor().name}, {"tap", tap_}, {"dim", dim_}};
  }

  const Network& network() const { return net_; }
  const std::string& tap() const { return tap_; }

 private:
  Network net_;
  std::string tap_;
  SpectrogramKind kind_;
  int dim_;
};

// ---------------------------------------------------------------------------
// Registry.

using ProviderFactory = std::function<std::unique_ptr<EmbeddingProvider>(const nlohmann::json&)>;

namespace embedding_detail {

struct Registry {
  std::mutex mu;
  std::map<std::string, ProviderFactory> factories;
};

inline Registry& registry() {
  static Registry* r = [] {
    auto* reg = new Registry;
    reg->factories["fixture"] = [](const nlohmann::json& m) -> std::unique_ptr<EmbeddingProvider> {
      return std::make_unique<FixtureEmbeddingProvider>(m.value("dim", 2048), m.value("seed", std::uint64_t{0}),
                                                        m.value("bins", 128));
    };
    return reg;
  }();
  return *r;
}

}  // namespace embedding_detail

/// Adds or replaces the factory for `name`.
inline void register_embedding_provider(const std::string& name, ProviderFactory factory) {
  auto& reg = embedding_detail::registry();
  std::lock_guard lock(reg.mu);
  reg.factories[name] = std::move(factory);
}

/// Builds a provider from a manifest object {"provider": name, ...}.
inline std::unique_ptr<EmbeddingProvider> make_embedding_provider(const nlohmann::json& manifest) {
  if (!manifest.is_object() || !manifest.contains("provider")) {
    throw ConfigError("provider manifest must be an object with a 'provider' field");
  }
  const auto name = manifest.at("provider").get<std::string>();
  ProviderFactory factory;
  {
    auto& reg = embedding_detail::registry();
    std::lock_guard lock(reg.mu);
    auto it = reg.factories.find(name);
    if (it == reg.factories.end()) throw RegistryError("unknown embedding provider '" + name + "'");
    factory = it->second;
  }
  try {
    return factory(manifest);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("provider '" + name + "': " + e.what());
  }
}

}  // namespace respkit

#endif  // RESPKIT_EMBEDDING_HPP_
