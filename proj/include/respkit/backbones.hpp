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

// Standard image backbones rebuilt from scratch for single-channel 124x154
// scalograms. Layer layouts follow the Keras application definitions; every
// network ends in global average pooling and a 4-way softmax.

#ifndef RESPKIT_BACKBONES_HPP_
#define RESPKIT_BACKBONES_HPP_

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "respkit/network.hpp"

namespace respkit {

inline const std::vector<std::string>& backbone_names() {
  static const std::vector<std::string> names = {"VGG16",    "VGG19",       "MobileNetV1", "MobileNetV2",
                                                 "ResNet50", "DenseNet201", "InceptionV3", "Xception"};
  return names;
}

namespace backbone {

using Block = std::function<Var(const Var&, const ForwardContext&)>;

/// Names layers sequentially and wraps the common conv/norm/activation units.
class Builder {
 public:
  Builder(ParameterStore& store, std::uint64_t seed) : f_(store, seed) {}

  LayerFactory& factory() { return f_; }

  std::string next(const char* kind) { return std::string(kind) + std::to_string(counter_++); }

  enum class Act { kNone, kRelu, kRelu6 };

  static Var activate(const Var& x, Act act) {
    switch (act) {
      case Act::kRelu:
        return ag::relu(x);
      case Act::kRelu6:
        return ag::relu6(x);
      case Act::kNone:
        break;
    }
    return x;
  }

  /// conv (no bias) -> BN -> activation.
  Block conv_bn(int in, int out, int kh, int kw, int stride = 1, ag::Padding pad = ag::Padding::same(),
                Act act = Act::kRelu) {
    Conv2d conv = f_.conv(next("conv"), in, out, kh, kw, {stride, stride, pad, 1}, false);
    BatchNorm bn = f_.norm(next("bn"), out);
    return [=](const Var& x, const ForwardContext& ctx) { return activate(bn(conv(x), ctx), act); };
  }

  /// conv with bias -> activation.
  Block conv_act(int in, int out, int k, Act act = Act::kRelu) {
    Conv2d conv = f_.conv(next("conv"), in, out, k, k, {}, true);
    return [=](const Var& x, const ForwardContext&) { return activate(conv(x), act); };
  }

  /// Depthwise kxk (no bias) -> BN -> activation.
  Block depthwise_bn(int ch, int stride, Act act) {
    Conv2d dw = f_.depthwise(next("dw"), ch, 3, 3, {stride, stride, ag::Padding::same(), ch});
    BatchNorm bn = f_.norm(next("bn"), ch);
    return [=](const Var& x, const ForwardContext& ctx) { return activate(bn(dw(x), ctx), act); };
  }

  /// Depthwise 3x3 then pointwise 1x1, both bias-free, then BN.
  Block separable_bn(int in, int out) {
    Conv2d dw = f_.depthwise(next("sep_dw"), in, 3, 3, {});
    Conv2d pw = f_.conv(next("sep_pw"), in, out, 1, 1, {}, false);
    BatchNorm bn = f_.norm(next("bn"), out);
    return [=](const Var& x, const ForwardContext& ctx) { return bn(pw(dw(x)), ctx); };
  }

 private:
  LayerFactory f_;
  int counter_ = 0;
};

using Act = Builder::Act;

inline Block chain(std::vector<Block> blocks) {
  return [blocks = std::move(blocks)](const Var& x, const ForwardContext& ctx) {
    Var y = x;
    for (const auto& b : blocks) y = b(y, ctx);
    return y;
  };
}

inline Block max_pool(int k, int stride, ag::Padding pad) {
  return [=](const Var& x, const ForwardContext&) { return ag::max_pool2d(x, k, k, stride, stride, pad); };
}

inline Block avg_pool(int k, int stride, ag::Padding pad) {
  return [=](const Var& x, const ForwardContext&) { return ag::avg_pool2d(x, k, k, stride, stride, pad); };
}

/// Runs branches on the same input and concatenates channel-wise.
inline Block branches(std::vector<Block> parts) {
  return [parts = std::move(parts)](const Var& x, const ForwardContext& ctx) {
    std::vector<Var> outs;
    outs.reserve(parts.size());
    for (const auto& p : parts) outs.push_back(p(x, ctx));
    return ag::concat(outs);
  };
}

inline Block relu_block() {
  return [](const Var& x, const ForwardContext&) { return ag::relu(x); };
}

/// Result of a body: the feature extractor and its output channel count.
struct Body {
  Block features;
  int channels = 0;
};

inline Body vgg(Builder& b, const std::array<int, 5>& depths) {
  const std::array<int, 5> widths = {64, 128, 256, 512, 512};
  std::vector<Block> blocks;
  int in = 1;
  for (int s = 0; s < 5; ++s) {
    for (int i = 0; i < depths[s]; ++i) {
      blocks.push_back(b.conv_act(in, widths[s], 3));
      in = widths[s];
    }
    blocks.push_back(max_pool(2, 2, ag::Padding::valid()));
  }
  return {chain(std::move(blocks)), in};
}

inline Body mobilenet_v1(Builder& b) {
  std::vector<Block> blocks{b.conv_bn(1, 32, 3, 3, 2, ag::Padding::same(), Act::kRelu6)};
  const std::vector<std::pair<int, int>> layout = {{64, 1},  {128, 2}, {128, 1}, {256, 2}, {256, 1},
                                                   {512, 2}, {512, 1}, {512, 1}, {512, 1}, {512, 1},
                                                   {512, 1}, {1024, 2}, {1024, 1}};
  int in = 32;
  for (const auto& [out, stride] : layout) {
    blocks.push_back(b.depthwise_bn(in, stride, Act::kRelu6));
    blocks.push_back(b.conv_bn(in, out, 1, 1, 1, ag::Padding::same(), Act::kRelu6));
    in = out;
  }
  return {chain(std::move(blocks)), in};
}

inline Body mobilenet_v2(Builder& b) {
  std::vector<Block> blocks{b.conv_bn(1, 32, 3, 3, 2, ag::Padding::same(), Act::kRelu6)};
  // (expansion, output channels, repeats, first stride)
  const std::vector<std::array<int, 4>> layout = {{1, 16, 1, 1},  {6, 24, 2, 2},  {6, 32, 3, 2}, {6, 64, 4, 2},
                                                  {6, 96, 3, 1},  {6, 160, 3, 2}, {6, 320, 1, 1}};
  int in = 32;
  for (const auto& [t, c, n, s] : layout) {
    for (int i = 0; i < n; ++i) {
      const int stride = i == 0 ? s : 1;
      const int hidden = in * t;
      std::vector<Block> parts;
      if (t != 1) parts.push_back(b.conv_bn(in, hidden, 1, 1, 1, ag::Padding::same(), Act::kRelu6));
      parts.push_back(b.depthwise_bn(hidden, stride, Act::kRelu6));
      parts.push_back(b.conv_bn(hidden, c, 1, 1, 1, ag::Padding::same(), Act::kNone));
      Block body = chain(std::move(parts));
      if (stride == 1 && in == c) {
        blocks.push_back([body](const Var& x, const ForwardContext& ctx) { return ag::add(x, body(x, ctx)); });
      } else {
        blocks.push_back(body);
      }
      in = c;
    }
  }
  blocks.push_back(b.conv_bn(in, 1280, 1, 1, 1, ag::Padding::same(), Act::kRelu6));
  return {chain(std::move(blocks)), 1280};
}

inline Body resnet50(Builder& b) {
  auto& f = b.factory();
  Conv2d stem = f.conv(b.next("conv"), 1, 64, 7, 7, {2, 2, ag::Padding::explicit_pad(3, 3), 1}, true);
  BatchNorm stem_bn = f.norm(b.next("bn"), 64);
  std::vector<Block> blocks{
      [=](const Var& x, const ForwardContext& ctx) { return ag::relu(stem_bn(stem(x), ctx)); },
      max_pool(3, 2, ag::Padding::explicit_pad(1, 1))};

  auto unit = [&](int in, int out, int k, int stride, bool relu) {
    Conv2d conv = f.conv(b.next("conv"), in, out, k, k, {stride, stride, ag::Padding::same(), 1}, true);
    BatchNorm bn = f.norm(b.next("bn"), out);
    return Block([=](const Var& x, const ForwardContext& ctx) {
      Var y = bn(conv(x), ctx);
      return relu ? ag::relu(y) : y;
    });
  };

  const std::array<int, 4> filters = {64, 128, 256, 512};
  const std::array<int, 4> repeats = {3, 4, 6, 3};
  int in = 64;
  for (int s = 0; s < 4; ++s) {
    const int width = filters[s], out = 4 * width;
    for (int i = 0; i < repeats[s]; ++i) {
      const int stride = (i == 0 && s > 0) ? 2 : 1;
      Block body = chain({unit(in, width, 1, stride, true), unit(width, width, 3, 1, true), unit(width, out, 1, 1, false)});
      if (i == 0) {
        Block shortcut = unit(in, out, 1, stride, false);
        blocks.push_back([=](const Var& x, const ForwardContext& ctx) {
          return ag::relu(ag::add(body(x, ctx), shortcut(x, ctx)));
        });
      } else {
        blocks.push_back([=](const Var& x, const ForwardContext& ctx) { return ag::relu(ag::add(body(x, ctx), x)); });
      }
      in = out;
    }
  }
  return {chain(std::move(blocks)), in};
}

inline Body densenet201(Builder& b) {
  auto& f = b.factory();
  constexpr int kGrowth = 32;
  const std::array<int, 4> repeats = {6, 12, 48, 32};
  Conv2d stem = f.conv(b.next("conv"), 1, 64, 7, 7, {2, 2, ag::Padding::explicit_pad(3, 3), 1}, false);
  BatchNorm stem_bn = f.norm(b.next("bn"), 64);
  std::vector<Block> blocks{
      [=](const Var& x, const ForwardContext& ctx) { return ag::relu(stem_bn(stem(x), ctx)); },
      max_pool(3, 2, ag::Padding::explicit_pad(1, 1))};

  // BN -> ReLU -> conv, bias-free.
  auto pre_act = [&](int in, int out, int k) {
    BatchNorm bn = f.norm(b.next("bn"), in);
    Conv2d conv = f.conv(b.next("conv"), in, out, k, k, {}, false);
    return Block([=](const Var& x, const ForwardContext& ctx) { return conv(ag::relu(bn(x, ctx))); });
  };

  int channels = 64;
  for (int s = 0; s < 4; ++s) {
    for (int i = 0; i < repeats[s]; ++i) {
      Block grow = chain({pre_act(channels, 4 * kGrowth, 1), pre_act(4 * kGrowth, kGrowth, 3)});
      blocks.push_back([grow](const Var& x, const ForwardContext& ctx) { return ag::concat<float>({x, grow(x, ctx)}); });
      channels += kGrowth;
    }
    if (s < 3) {
      blocks.push_back(pre_act(channels, channels / 2, 1));
      channels /= 2;
      blocks.push_back(avg_pool(2, 2, ag::Padding::valid()));
    }
  }
  BatchNorm final_bn = f.norm(b.next("bn"), channels);
  blocks.push_back([=](const Var& x, const ForwardContext& ctx) { return ag::relu(final_bn(x, ctx)); });
  return {chain(std::move(blocks)), channels};
}

inline Body inception_v3(Builder& b) {
  using ag::Padding;
  auto cb = [&](int in, int out, int kh, int kw, int stride = 1, Padding pad = Padding::same()) {
    return b.conv_bn(in, out, kh, kw, stride, pad, Act::kRelu);
  };
  std::vector<Block> blocks{cb(1, 32, 3, 3, 2, Padding::valid()), cb(32, 32, 3, 3, 1, Padding::valid()),
                            cb(32, 64, 3, 3), max_pool(3, 2, Padding::valid()),
                            cb(64, 80, 1, 1, 1, Padding::valid()), cb(80, 192, 3, 3, 1, Padding::valid()),
                            max_pool(3, 2, Padding::valid())};
  int in = 192;
  for (int pool_proj : {32, 64, 64}) {
    blocks.push_back(branches({
        cb(in, 64, 1, 1),
        chain({cb(in, 48, 1, 1), cb(48, 64, 5, 5)}),
        chain({cb(in, 64, 1, 1), cb(64, 96, 3, 3), cb(96, 96, 3, 3)}),
        chain({avg_pool(3, 1, Padding::same()), cb(in, pool_proj, 1, 1)}),
    }));
    in = 64 + 64 + 96 + pool_proj;
  }
  blocks.push_back(branches({
      cb(in, 384, 3, 3, 2, Padding::valid()),
      chain({cb(in, 64, 1, 1), cb(64, 96, 3, 3), cb(96, 96, 3, 3, 2, Padding::valid())}),
      max_pool(3, 2, Padding::valid()),
  }));
  in = 384 + 96 + in;
  for (int c : {128, 160, 160, 192}) {
    blocks.push_back(branches({
        cb(in, 192, 1, 1),
        chain({cb(in, c, 1, 1), cb(c, c, 1, 7), cb(c, 192, 7, 1)}),
        chain({cb(in, c, 1, 1), cb(c, c, 7, 1), cb(c, c, 1, 7), cb(c, c, 7, 1), cb(c, 192, 1, 7)}),
        chain({avg_pool(3, 1, Padding::same()), cb(in, 192, 1, 1)}),
    }));
    in = 768;
  }
  blocks.push_back(branches({
      chain({cb(in, 192, 1, 1), cb(192, 320, 3, 3, 2, Padding::valid())}),
      chain({cb(in, 192, 1, 1), cb(192, 192, 1, 7), cb(192, 192, 7, 1), cb(192, 192, 3, 3, 2, Padding::valid())}),
      max_pool(3, 2, Padding::valid()),
  }));
  in = 320 + 192 + in;
  for (int i = 0; i < 2; ++i) {
    blocks.push_back(branches({
        cb(in, 320, 1, 1),
        chain({cb(in, 384, 1, 1), branches({cb(384, 384, 1, 3), cb(384, 384, 3, 1)})}),
        chain({cb(in, 448, 1, 1), cb(448, 384, 3, 3), branches({cb(384, 384, 1, 3), cb(384, 384, 3, 1)})}),
        chain({avg_pool(3, 1, Padding::same()), cb(in, 192, 1, 1)}),
    }));
    in = 320 + 768 + 768 + 192;
  }
  return {chain(std::move(blocks)), in};
}

inline Body xception(Builder& b) {
  using ag::Padding;
  std::vector<Block> blocks{b.conv_bn(1, 32, 3, 3, 2, Padding::valid(), Act::kRelu),
                            b.conv_bn(32, 64, 3, 3, 1, Padding::valid(), Act::kRelu)};
  auto downsample = [&](int in, int mid, int out, bool lead_relu) {
    Block shortcut = b.conv_bn(in, out, 1, 1, 2, Padding::same(), Act::kNone);
    std::vector<Block> parts;
    if (lead_relu) parts.push_back(relu_block());
    parts.push_back(b.separable_bn(in, mid));
    parts.push_back(relu_block());
    parts.push_back(b.separable_bn(mid, out));
    parts.push_back(max_pool(3, 2, Padding::same()));
    Block body = chain(std::move(parts));
    return Block([=](const Var& x, const ForwardContext& ctx) { return ag::add(body(x, ctx), shortcut(x, ctx)); });
  };
  blocks.push_back(downsample(64, 128, 128, false));
  blocks.push_back(downsample(128, 256, 256, true));
  blocks.push_back(downsample(256, 728, 728, true));
  for (int i = 0; i < 8; ++i) {
    Block body = chain({relu_block(), b.separable_bn(728, 728), relu_block(), b.separable_bn(728, 728), relu_block(),
                        b.separable_bn(728, 728)});
    blocks.push_back([body](const Var& x, const ForwardContext& ctx) { return ag::add(body(x, ctx), x); });
  }
  blocks.push_back(downsample(728, 728, 1024, true));
  blocks.push_back(b.separable_bn(1024, 1536));
  blocks.push_back(relu_block());
  blocks.push_back(b.separable_bn(1536, 2048));
  blocks.push_back(relu_block());
  return {chain(std::move(blocks)), 2048};
}

}  // namespace backbone

/// One of the eight registered backbones, randomly initialized, mapping
/// (N, 1, 124, 154) to (N, 4) softmax rows. Tap "GAP" exposes the pooled
/// features.
inline Network build_backbone(std::string_view name, std::uint64_t seed = 0) {
  auto store = std::make_shared<ParameterStore>();
  backbone::Builder b(*store, seed);
  backbone::Body body;
  if (name == "VGG16") {
    body = backbone::vgg(b, {2, 2, 3, 3, 3});
  } else if (name == "VGG19") {
    body = backbone::vgg(b, {2, 2, 4, 4, 4});
  } else if (name == "MobileNetV1") {
    body = backbone::mobilenet_v1(b);
  } else if (name == "MobileNetV2") {
    body = backbone::mobilenet_v2(b);
  } else if (name == "ResNet50") {
    body = backbone::resnet50(b);
  } else if (name == "DenseNet201") {
    body = backbone::densenet201(b);
  } else if (name == "InceptionV3") {
    body = backbone::inception_v3(b);
  } else if (name == "Xception") {
    body = backbone::xception(b);
  } else {
    throw RegistryError("unknown backbone '" + std::string(name) + "'");
  }
  Linear head = b.factory().dense("fc_out", body.channels, 4);
  auto features = body.features;
  auto forward = [features, head](const Var& x, const ForwardContext& ctx) {
    Var pooled = ag::global_avg_pool(features(x, ctx));
    ctx.tap("GAP", pooled);
    return head(pooled);
  };
  const std::string n(name);
  return Network({"backbone", n, 0, seed}, {1, 124, 154}, 4, store, forward, {{"GAP", body.channels}},
                 [n, seed] { return build_backbone(n, seed); });
}

}  // namespace respkit

#endif  // RESPKIT_BACKBONES_HPP_
