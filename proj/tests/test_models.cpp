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

#include <random>

#include "respkit/models.hpp"

namespace respkit {
namespace {

Tensor random_batch(Shape shape, std::uint64_t seed) {
  Tensor t(std::move(shape));
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> d(-4.0f, 1.5f);
  for (auto& v : t.values()) v = d(rng);
  return t;
}

Tensor wavelet_batch(int n, std::uint64_t seed = 1) { return random_batch({n, 1, 124, 154}, seed); }

void expect_probability_rows(const Tensor& p, int rows) {
  ASSERT_EQ(p.shape(), (Shape{rows, 4}));
  for (int i = 0; i < rows; ++i) {
    double sum = 0;
    for (int c = 0; c < 4; ++c) {
      EXPECT_GE(p.data()[i * 4 + c], 0.0f);
      sum += p.data()[i * 4 + c];
    }
    EXPECT_NEAR(sum, 1.0, 1e-5);
  }
}

// Scalars of one inception layer: four 1x1 convolutions reading the input,
// a 3x3 and a 5x5 convolution on the reduced maps, all with biases.
std::size_t inception_layer_params(std::size_t in, std::size_t out) {
  const std::size_t q = out / 4;
  return 4 * (in * q + q) + (9 * q * q + q) + (25 * q * q + q);
}

std::size_t inception_params(const InceptionSpec& s) {
  std::size_t n = 2;  // input normalization
  std::size_t in = 1;
  for (int i = 0; i < 4; ++i) {
    const std::size_t ch = s.channels[i];
    n += inception_layer_params(in, ch);
    if (s.double_layers) n += inception_layer_params(ch, ch);
    n += 2 * ch * (i < 3 ? 2 : 1);
    in = ch;
  }
  const std::size_t f1 = s.fc1, f2 = s.fc2;
  return n + (in * f1 + f1) + (f1 * f2 + f2) + (f2 * 4 + 4);
}

TEST(InceptionSpecs, CanonicalTable) {
  const auto& specs = canonical_inception_specs();
  ASSERT_EQ(specs.size(), 6u);
  const std::array<std::array<int, 4>, 3> channels = {{{32, 64, 128, 256}, {64, 128, 256, 512}, {128, 256, 512, 1024}}};
  const std::array<int, 3> fc = {512, 1024, 2048};
  for (int i = 0; i < 6; ++i) {
    EXPECT_EQ(specs[i].name, "Inc-0" + std::to_string(i + 1));
    EXPECT_EQ(specs[i].double_layers, i % 2 == 1);
    EXPECT_EQ(specs[i].channels, channels[i / 2]);
    EXPECT_EQ(specs[i].fc1, fc[i / 2]);
    EXPECT_EQ(specs[i].fc2, fc[i / 2]);
  }
  EXPECT_THROW(inception_spec("Inc-07"), RegistryError);
  InceptionSpec bad{"bad", false, {32, 64, 128, 30}, 8, 8};
  EXPECT_THROW(bad.validate(), ContractError);
  EXPECT_THROW(build_inception_net(bad), ContractError);
}

TEST(InceptionLayer, KeepsSpatialSizeAndSetsChannels) {
  ParameterStore store;
  LayerFactory f(store, 3);
  const auto layer = make_inception_layer(f, "inc", 8, 16);
  const Var y = layer(Var(random_batch({2, 8, 10, 13}, 4)));
  EXPECT_EQ(y.value().shape(), (Shape{2, 16, 10, 13}));
  std::size_t count = 0;
  for (const auto& p : store.parameters()) count += p.var.value().size();
  EXPECT_EQ(count, inception_layer_params(8, 16));
  EXPECT_THROW(make_inception_layer(f, "bad", 8, 30), ContractError);
  EXPECT_THROW(make_inception_layer(f, "bad", 8, 0), ContractError);
}

TEST(InceptionNet, ParameterCountsMatchLayerFormulas) {
  const std::array<std::size_t, 6> pinned = {626422, 899142, 2495206, 3584646, 9959878, 14314758};
  for (int i = 0; i < 6; ++i) {
    const auto& spec = canonical_inception_specs()[i];
    EXPECT_EQ(inception_params(spec), pinned[i]) << spec.name;
    EXPECT_EQ(build_inception_net(spec).parameter_count(), pinned[i]) << spec.name;
  }
  const auto count = [](const char* n) { return build_inception_net(n).parameter_count(); };
  EXPECT_LT(count("Inc-01"), count("Inc-02"));
  EXPECT_LT(count("Inc-03"), count("Inc-04"));
  EXPECT_LT(count("Inc-05"), count("Inc-06"));
  EXPECT_LT(count("Inc-01"), count("Inc-03"));
  EXPECT_LT(count("Inc-03"), count("Inc-05"));
}

TEST(InceptionNet, ForwardGivesProbabilityRowsAndTapWidths) {
  const auto net = build_inception_net("Inc-03", 7);
  const auto x = wavelet_batch(5);
  expect_probability_rows(net.predict(x), 5);
  EXPECT_EQ(net.embed(x, "FC2").shape(), (Shape{5, 1024}));
  EXPECT_EQ(net.embed(x, "GMP").shape(), (Shape{5, 512}));
  EXPECT_EQ(net.tap_width("FC1"), 1024);
  EXPECT_THROW(net.tap_width("FC9"), RegistryError);
  EXPECT_THROW(net.predict(random_batch({2, 1, 128, 1000}, 1)), ContractError);
}

TEST(InceptionNet, EveryVariantRunsABatch) {
  for (const auto& spec : canonical_inception_specs()) {
    const auto net = build_inception_net(spec, 1);
    expect_probability_rows(net.predict(wavelet_batch(2)), 2);
    EXPECT_EQ(net.tap_width("GMP"), spec.channels[3]);
    EXPECT_EQ(net.tap_width("FC2"), spec.fc2);
  }
}

TEST(InceptionNet, EvaluationIsDeterministicAndSeeded) {
  const auto x = wavelet_batch(3, 5);
  const auto a = build_inception_net("Inc-01", 11), b = build_inception_net("Inc-01", 11);
  EXPECT_EQ(a.predict(x), a.predict(x));
  EXPECT_EQ(a.predict(x), b.predict(x));
  EXPECT_NE(a.predict(x), build_inception_net("Inc-01", 12).predict(x));
  // Chunking changes only the float summation order.
  const auto one = a.predict(x, 1), three = a.predict(x, 3);
  for (std::size_t i = 0; i < one.size(); ++i) EXPECT_NEAR(one[i], three[i], 1e-5);
}

TEST(InceptionNet, CloneIsIndependent) {
  const auto x = wavelet_batch(2, 6);
  auto net = build_inception_net("Inc-01", 3);
  auto copy = net.clone();
  EXPECT_EQ(copy.predict(x), net.predict(x));
  auto state = copy.state();
  for (auto& t : state) {
    if (t.name == "fc_out.bias") t.value.values()[0] += 5.0f;
  }
  copy.load_state(state);
  EXPECT_NE(copy.predict(x), net.predict(x));
  EXPECT_EQ(build_network(net.descriptor()).predict(x), net.predict(x));
}

TEST(MlpHead, WidthsAndProbabilityRows) {
  const auto net = build_mlp_head(40, 2);
  const auto x = random_batch({6, 40}, 3);
  expect_probability_rows(net.predict(x), 6);
  EXPECT_EQ(net.embed(x, "FC1").shape(), (Shape{6, 4096}));
  EXPECT_EQ(net.embed(x, "FC2").shape(), (Shape{6, 4096}));
  EXPECT_EQ(net.embed(x, "FC3").shape(), (Shape{6, 1024}));
  EXPECT_EQ(net.parameter_count(), 41u * 4096 + 4097u * 4096 + 4097u * 1024 + 1025u * 4);
  // Hidden widths do not depend on the input width.
  EXPECT_EQ(build_mlp_head(2048).embed(random_batch({1, 2048}, 1), "FC3").shape(), (Shape{1, 1024}));
  EXPECT_THROW(build_mlp_head(0), ContractError);
  EXPECT_THROW(net.predict(random_batch({2, 41}, 1)), ContractError);
}

TEST(MlpHead, DecayCoversWeightsButNotNormalization) {
  const auto net = build_mlp_head(8, 1);
  for (const auto& p : net.parameters()) EXPECT_TRUE(p.decay) << p.name;
  const auto inc = build_inception_net("Inc-01");
  for (const auto& p : inc.parameters()) {
    const bool norm = p.name.ends_with(".gamma") || p.name.ends_with(".beta");
    EXPECT_EQ(p.decay, !norm) << p.name;
  }
}

TEST(Backbones, RegistryHasEightEntriesAndRejectsOthers) {
  EXPECT_EQ(backbone_names().size(), 8u);
  EXPECT_THROW(build_backbone("AlexNet"), RegistryError);
  EXPECT_THROW(build_network({"transformer", "x", 0, 0}), RegistryError);
}

TEST(Backbones, EveryEntryRunsAForwardPass) {
  const auto x = wavelet_batch(2, 9);
  for (const auto& name : backbone_names()) {
    const auto net = build_backbone(name, 1);
    expect_probability_rows(net.predict(x), 2);
    EXPECT_EQ(net.descriptor().family, "backbone");
    EXPECT_GT(net.tap_width("GAP"), 0) << name;
  }
}

}  // namespace
}  // namespace respkit
