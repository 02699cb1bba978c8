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

#ifndef RESPKIT_MODELS_HPP_
#define RESPKIT_MODELS_HPP_

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "respkit/network.hpp"

namespace respkit {

inline constexpr int kNumClasses = 4;
/// Wavelet scalogram input consumed by the inception networks and backbones.
inline constexpr int kWaveletBins = 124;
inline constexpr int kWaveletFrames = 154;

/// Channel and width settings of one inception network.
struct InceptionSpec {
  std::string name;
  bool double_layers = false;
  std::array<int, 4> channels{};
  int fc1 = 0;
  int fc2 = 0;

  void validate() const {
    for (int c : channels) {
      if (c <= 0 || c % 4 != 0) {
        throw ContractError(name + ": inception channel counts must be positive multiples of 4");
      }
    }
    if (fc1 <= 0 || fc2 <= 0) throw ContractError(name + ": fully connected widths must be positive");
  }
};

/// Inc-01 ... Inc-06.
inline const std::vector<InceptionSpec>& canonical_inception_specs() {
  static const std::vector<InceptionSpec> specs = {
      {"Inc-01", false, {32, 64, 128, 256}, 512, 512},
      {"Inc-02", true, {32, 64, 128, 256}, 512, 512},
      {"Inc-03", false, {64, 128, 256, 512}, 1024, 1024},
      {"Inc-04", true, {64, 128, 256, 512}, 1024, 1024},
      {"Inc-05", false, {128, 256, 512, 1024}, 2048, 2048},
      {"Inc-06", true, {128, 256, 512, 1024}, 2048, 2048},
  };
  return specs;
}

inline const InceptionSpec& inception_spec(std::string_view name) {
  for (const auto& s : canonical_inception_specs()) {
    if (s.name == name) return s;
  }
  throw RegistryError("unknown inception network '" + std::string(name) + "'");
}

/// Four parallel branches, each producing out_ch/4 channels at the input's
/// spatial size: 1x1; 1x1 then 3x3; 1x1 then 5x5; 3x3 max-pool then 1x1.
/// The reductions feeding the 3x3 and 5x5 kernels are ReLU-activated.
struct InceptionLayer {
  Conv2d direct;
  Conv2d reduce3, conv3;
  Conv2d reduce5, conv5;
  Conv2d pool_proj;

  Var operator()(const Var& x) const {
    Var b1 = direct(x);
    Var b2 = conv3(ag::relu(reduce3(x)));
    Var b3 = conv5(ag::relu(reduce5(x)));
    Var b4 = pool_proj(ag::max_pool2d(x, 3, 3, 1, 1, ag::Padding::same()));
    return ag::concat<float>({b1, b2, b3, b4});
  }
};

inline InceptionLayer make_inception_layer(LayerFactory& f, const std::string& name, int in_ch, int out_ch) {
  if (in_ch <= 0 || out_ch <= 0 || out_ch % 4 != 0) {
    throw ContractError("inception layer output channels must be a positive multiple of 4, got " +
                        std::to_string(out_ch));
  }
  const int q = out_ch / 4;
  InceptionLayer l;
  l.direct = f.conv(name + ".b1", in_ch, q, 1, 1);
  l.reduce3 = f.conv(name + ".b2_reduce", in_ch, q, 1, 1);
  l.conv3 = f.conv(name + ".b2", q, q, 3, 3);
  l.reduce5 = f.conv(name + ".b3_reduce", in_ch, q, 1, 1);
  l.conv5 = f.conv(name + ".b3", q, q, 5, 5);
  l.pool_proj = f.conv(name + ".b4", in_ch, q, 1, 1);
  return l;
}

namespace detail {

inline Network build_inception_impl(const InceptionSpec& spec, std::uint64_t seed) {
  spec.validate();
  auto store = std::make_shared<ParameterStore>();
  LayerFactory f(*store, seed);

  struct Stage {
    std::vector<InceptionLayer> layers;
    BatchNorm pre_pool;
    BatchNorm post_pool;
  };
  const std::array<double, 4> stage_dropout = {0.10, 0.15, 0.20, 0.25};

  BatchNorm input_norm = f.norm("bn_in", 1);
  std::vector<Stage> stages(4);
  int in_ch = 1;
  for (int s = 0; s < 4; ++s) {
    const int ch = spec.channels[s];
    const std::string prefix = "stage" + std::to_string(s + 1);
    stages[s].layers.push_back(make_inception_layer(f, prefix + ".inc1", in_ch, ch));
    if (spec.double_layers) stages[s].layers.push_back(make_inception_layer(f, prefix + ".inc2", ch, ch));
    stages[s].pre_pool = f.norm(prefix + ".bn_a", ch);
    if (s < 3) stages[s].post_pool = f.norm(prefix + ".bn_b", ch);
    in_ch = ch;
  }
  Linear fc1 = f.dense("fc1", spec.channels[3], spec.fc1);
  Linear fc2 = f.dense("fc2", spec.fc1, spec.fc2);
  Linear out = f.dense("fc_out", spec.fc2, kNumClasses);

  auto forward = [=](const Var& input, const ForwardContext& ctx) {
    Var x = input_norm(input, ctx);
    for (int s = 0; s < 4; ++s) {
      for (const auto& layer : stages[s].layers) x = ag::relu(layer(x));
      x = stages[s].pre_pool(x, ctx);
      if (s < 3) {
        x = ag::max_pool2d(x, 2, 2, 2, 2, ag::Padding::same());
        x = dropout(x, stage_dropout[s], ctx);
        x = stages[s].post_pool(x, ctx);
      } else {
        x = ag::global_max_pool(x);
        ctx.tap("GMP", x);
        x = dropout(x, stage_dropout[s], ctx);
      }
    }
    x = ag::relu(fc1(x));
    ctx.tap("FC1", x);
    x = dropout(x, 0.30, ctx);
    x = ag::relu(fc2(x));
    ctx.tap("FC2", x);
    x = dropout(x, 0.30, ctx);
    return out(x);
  };

  NetworkDescriptor desc{"inception", spec.name, 0, seed};
  std::vector<TapInfo> taps = {{"GMP", spec.channels[3]}, {"FC1", spec.fc1}, {"FC2", spec.fc2}};
  return Network(desc, {1, kWaveletBins, kWaveletFrames}, kNumClasses, store, forward, taps,
                 [spec, seed] { return build_inception_impl(spec, seed); });
}

}  // namespace detail

/// Inception network over (1, 124, 154) wavelet input; taps "GMP", "FC1", "FC2".
inline Network build_inception_net(const InceptionSpec& spec, std::uint64_t seed = 0) {
  return detail::build_inception_impl(spec, seed);
}

inline Network build_inception_net(std::string_view name, std::uint64_t seed = 0) {
  return build_inception_net(inception_spec(name), seed);
}

inline constexpr std::array<int, 3> kMlpHiddenWidths = {4096, 4096, 1024};

/// Classification head for fixed-width embeddings: three ReLU layers with
/// 10% dropout, then a 4-way softmax. Taps "FC1", "FC2", "FC3".
inline Network build_mlp_head(int input_dim, std::uint64_t seed = 0) {
  if (input_dim <= 0) throw ContractError("MLP head input width must be positive");
  auto store = std::make_shared<ParameterStore>();
  LayerFactory f(*store, seed);
  std::vector<Linear> hidden;
  int width = input_dim;
  for (std::size_t i = 0; i < kMlpHiddenWidths.size(); ++i) {
    hidden.push_back(f.dense("fc" + std::to_string(i + 1), width, kMlpHiddenWidths[i], DenseInit::kNormal01));
    width = kMlpHiddenWidths[i];
  }
  Linear out = f.dense("fc_out", width, kNumClasses, DenseInit::kNormal01);
  auto forward = [=](const Var& input, const ForwardContext& ctx) {
    Var x = input;
    for (std::size_t i = 0; i < hidden.size(); ++i) {
      x = ag::relu(hidden[i](x));
      ctx.tap("FC" + std::to_string(i + 1), x);
      x = dropout(x, 0.10, ctx);
    }
    return out(x);
  };
  std::vector<TapInfo> taps;
  for (std::size_t i = 0; i < kMlpHiddenWidths.size(); ++i) {
    taps.push_back({"FC" + std::to_string(i + 1), kMlpHiddenWidths[i]});
  }
  return Network({"mlp", "MLP", input_dim, seed}, {input_dim}, kNumClasses, store, forward, taps,
                 [input_dim, seed] { return build_mlp_head(input_dim, seed); });
}

}  // namespace respkit

#include "respkit/backbones.hpp"

namespace respkit {

/// Rebuilds any registered network from its descriptor.
inline Network build_network(const NetworkDescriptor& d) {
  if (d.family == "inception") return build_inception_net(d.name, d.init_seed);
  if (d.family == "backbone") return build_backbone(d.name, d.init_seed);
  if (d.family == "mlp") return build_mlp_head(d.input_dim, d.init_seed);
  throw RegistryError("unknown network family '" + d.family + "'");
}

}  // namespace respkit

#endif  // RESPKIT_MODELS_HPP_
