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

#ifndef RESPKIT_NETWORK_HPP_
#define RESPKIT_NETWORK_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "respkit/autograd.hpp"
#include "respkit/errors.hpp"
#include "respkit/tensor.hpp"

namespace respkit {

using Var = ag::Var<float>;
using BatchNormState = ag::BatchNormState<float>;

struct Parameter {
  std::string name;
  Var var;
  /// Included in the L2 penalty. False for normalization scale/shift.
  bool decay = true;
};

struct NamedTensor {
  std::string name;
  Tensor value;
};

/// Owns every trainable tensor and normalization buffer of one network.
class ParameterStore {
 public:
  Var add(std::string name, Tensor init, bool decay) {
    Var v(std::move(init), true);
    params_.push_back({std::move(name), v, decay});
    return v;
  }

  std::shared_ptr<BatchNormState> add_norm_state(std::string name, int channels) {
    auto state = std::make_shared<BatchNormState>();
    state->running_mean = Tensor({channels}, 0.0f);
    state->running_var = Tensor({channels}, 1.0f);
    norm_states_.emplace_back(std::move(name), state);
    return state;
  }

  const std::vector<Parameter>& parameters() const { return params_; }

  std::vector<NamedTensor> state() const {
    std::vector<NamedTensor> out;
    for (const auto& p : params_) out.push_back({p.name, p.var.value()});
    for (const auto& [name, s] : norm_states_) {
      out.push_back({name + ".running_mean", s->running_mean});
      out.push_back({name + ".running_var", s->running_var});
    }
    return out;
  }

  void load_state(const std::vector<NamedTensor>& tensors) {
    std::map<std::string, const Tensor*> by_name;
    for (const auto& t : tensors) by_name[t.name] = &t.value;
    auto take = [&](const std::string& name, Tensor& dst) {
      auto it = by_name.find(name);
      if (it == by_name.end()) throw FormatError("state is missing tensor '" + name + "'");
      if (it->second->shape() != dst.shape()) {
        throw FormatError("tensor '" + name + "' has shape " + shape_str(it->second->shape()) +
                          ", expected " + shape_str(dst.shape()));
      }
      dst = *it->second;
    };
    for (auto& p : params_) {
      Var v = p.var;
      take(p.name, v.mutable_value());
    }
    for (auto& [name, s] : norm_states_) {
      take(name + ".running_mean", s->running_mean);
      take(name + ".running_var", s->running_var);
    }
    if (by_name.size() != params_.size() + 2 * norm_states_.size()) {
      throw FormatError("state holds tensors unknown to this network");
    }
  }

 private:
  std::vector<Parameter> params_;
  std::vector<std::pair<std::string, std::shared_ptr<BatchNormState>>> norm_states_;
};

/// Per-call state threaded through a forward pass.
struct ForwardContext {
  bool training = false;
  std::mt19937_64* rng = nullptr;
  std::map<std::string, Var>* taps = nullptr;

  void tap(const std::string& name, const Var& v) const {
    if (taps) (*taps)[name] = v;
  }
};

// ---------------------------------------------------------------------------
// Layers. Each is a cheap handle onto tensors held by a ParameterStore.

struct Conv2d {
  Var weight;
  Var bias;
  ag::ConvOptions options;

  Var operator()(const Var& x) const { return ag::conv2d(x, weight, bias, options); }
};

struct BatchNorm {
  Var gamma;
  Var beta;
  std::shared_ptr<BatchNormState> state;

  Var operator()(const Var& x, const ForwardContext& ctx) const {
    return ag::batch_norm(x, gamma, beta, *state, ctx.training);
  }
};

struct Linear {
  Var weight;
  Var bias;

  Var operator()(const Var& x) const { return ag::linear(x, weight, bias); }
};

inline Var dropout(const Var& x, double rate, const ForwardContext& ctx) {
  if (!ctx.training || rate <= 0.0) return x;
  if (!ctx.rng) throw ContractError("training-mode dropout needs a random stream");
  return ag::dropout(x, rate, *ctx.rng);
}

enum class DenseInit {
  /// Uniform with limit sqrt(6 / (fan_in + fan_out)).
  kGlorotUniform,
  kHeNormal,
  /// Normal with standard deviation 0.1, used for transfer-learning heads.
  kNormal01,
};

/// Creates layers, registering their tensors in a store and drawing initial
/// values from one seeded stream so construction is reproducible.
class LayerFactory {
 public:
  LayerFactory(ParameterStore& store, std::uint64_t seed) : store_(store), rng_(seed) {}

  Conv2d conv(const std::string& name, int in_ch, int out_ch, int kh, int kw,
              ag::ConvOptions options = {}, bool bias = true) {
    const int fan_in = in_ch * kh * kw;
    Conv2d layer;
    layer.weight = store_.add(name + ".weight", he_normal({out_ch, in_ch, kh, kw}, fan_in), true);
    if (bias) layer.bias = store_.add(name + ".bias", Tensor({out_ch}), true);
    options.groups = 1;
    layer.options = options;
    return layer;
  }

  Conv2d depthwise(const std::string& name, int channels, int kh, int kw, ag::ConvOptions options = {},
                   bool bias = false) {
    Conv2d layer;
    layer.weight = store_.add(name + ".weight", he_normal({channels, 1, kh, kw}, kh * kw), true);
    if (bias) layer.bias = store_.add(name + ".bias", Tensor({channels}), true);
    options.groups = channels;
    layer.options = options;
    return layer;
  }

  BatchNorm norm(const std::string& name, int channels) {
    BatchNorm layer;
    layer.gamma = store_.add(name + ".gamma", Tensor({channels}, 1.0f), false);
    layer.beta = store_.add(name + ".beta", Tensor({channels}, 0.0f), false);
    layer.state = store_.add_norm_state(name, channels);
    return layer;
  }

  Linear dense(const std::string& name, int in, int out, DenseInit init = DenseInit::kGlorotUniform) {
    Linear layer;
    Tensor w;
    switch (init) {
      case DenseInit::kGlorotUniform: w = glorot_uniform({out, in}, in, out); break;
      case DenseInit::kHeNormal: w = he_normal({out, in}, in); break;
      case DenseInit::kNormal01: w = normal({out, in}, 0.1f); break;
    }
    layer.weight = store_.add(name + ".weight", std::move(w), true);
    layer.bias = store_.add(name + ".bias", Tensor({out}), true);
    return layer;
  }

 private:
  Tensor normal(Shape shape, float stddev) {
    Tensor t(std::move(shape));
    std::normal_distribution<float> dist(0.0f, stddev);
    for (auto& v : t.values()) v = dist(rng_);
    return t;
  }
  Tensor glorot_uniform(Shape shape, int fan_in, int fan_out) {
    Tensor t(std::move(shape));
    const float limit = std::sqrt(6.0f / static_cast<float>(std::max(fan_in + fan_out, 1)));
    std::uniform_real_distribution<float> dist(-limit, limit);
    for (auto& v : t.values()) v = dist(rng_);
    return t;
  }
  Tensor he_normal(Shape shape, int fan_in) {
    return normal(std::move(shape), std::sqrt(2.0f / static_cast<float>(std::max(fan_in, 1))));
  }

  ParameterStore& store_;
  std::mt19937_64 rng_;
};

// ---------------------------------------------------------------------------

/// Identifies how a network was built, so it can be rebuilt for cloning and
/// checkpoint loading.
struct NetworkDescriptor {
  /// "inception", "backbone" or "mlp".
  std::string family;
  /// "Inc-03", "ResNet50", "MLP", ...
  std::string name;
  /// Input width for "mlp"; unused otherwise.
  int input_dim = 0;
  std::uint64_t init_seed = 0;
};

struct TapInfo {
  std::string name;
  int width = 0;
};

/// Trainable classifier with a fixed per-sample input shape and a softmax
/// output over the four cycle classes. Copies share parameters; use clone()
/// for an independent network.
class Network {
 public:
  /// Maps a batch to logits; the softmax is applied by Network.
  using ForwardFn = std::function<Var(const Var&, const ForwardContext&)>;
  using RebuildFn = std::function<Network()>;

  Network(NetworkDescriptor descriptor, Shape input_shape, int num_classes,
          std::shared_ptr<ParameterStore> store, ForwardFn forward, std::vector<TapInfo> taps,
          RebuildFn rebuild)
      : descriptor_(std::move(descriptor)),
        input_shape_(std::move(input_shape)),
        num_classes_(num_classes),
        store_(std::move(store)),
        forward_(std::move(forward)),
        taps_(std::move(taps)),
        rebuild_(std::move(rebuild)) {}

  const NetworkDescriptor& descriptor() const { return descriptor_; }
  /// Shape of one input sample, without the batch axis.
  const Shape& input_shape() const { return input_shape_; }
  int num_classes() const { return num_classes_; }
  const std::vector<TapInfo>& taps() const { return taps_; }

  int tap_width(std::string_view name) const {
    for (const auto& t : taps_) {
      if (t.name == name) return t.width;
    }
    throw RegistryError("network " + descriptor_.name + " has no tap '" + std::string(name) + "'");
  }

  const std::vector<Parameter>& parameters() const { return store_->parameters(); }

  /// Number of trainable scalars, normalization scale/shift included.
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.var.value().size();
    return n;
  }

  /// Squared L2 norm of the decayed parameters.
  double decay_sq_norm() const {
    double s = 0;
    for (const auto& p : parameters()) {
      if (!p.decay) continue;
      for (float v : p.var.value().values()) s += static_cast<double>(v) * v;
    }
    return s;
  }

  /// Pre-softmax scores (N, classes) for a batch (N, input_shape...).
  Var forward_logits(const Var& x, const ForwardContext& ctx) const {
    check_batch(x.value());
    return forward_(x, ctx);
  }

  /// Class probabilities: softmax rows of forward_logits().
  Var forward(const Var& x, const ForwardContext& ctx) const { return ag::softmax(forward_logits(x, ctx)); }

  /// Evaluation-mode class probabilities, computed in chunks.
  Tensor predict(const Tensor& batch, int chunk = 16) const {
    return run_eval(batch, chunk, [&](const Var& x) { return ag::softmax(forward_(x, ForwardContext{})); });
  }

  /// Evaluation-mode activations captured at a named tap.
  Tensor embed(const Tensor& batch, std::string_view tap, int chunk = 16) const {
    const std::string name(tap);
    tap_width(name);
    return run_eval(batch, chunk, [&](const Var& x) {
      std::map<std::string, Var> taps;
      ForwardContext ctx;
      ctx.taps = &taps;
      forward_(x, ctx);
      return taps.at(name);
    });
  }

  std::vector<NamedTensor> state() const { return store_->state(); }
  void load_state(const std::vector<NamedTensor>& s) { store_->load_state(s); }

  Network clone() const {
    Network copy = rebuild_();
    copy.load_state(state());
    return copy;
  }

 private:
  void check_batch(const Tensor& t) const {
    Shape expected = input_shape_;
    expected.insert(expected.begin(), t.rank() ? t.dim(0) : 0);
    if (t.shape() != expected) {
      throw ContractError(descriptor_.name + " expects input (N, " +
                          shape_str(input_shape_).substr(1) + ", got " + shape_str(t.shape()));
    }
  }

  template <typename Fn>
  Tensor run_eval(const Tensor& batch, int chunk, Fn&& fn) const {
    check_batch(batch);
    ag::NoGradGuard no_grad;
    const int n = batch.dim(0);
    const std::size_t stride = batch.stride0();
    Tensor out;
    for (int start = 0; start < n; start += chunk) {
      const int len = std::min(chunk, n - start);
      Shape shape = batch.shape();
      shape[0] = len;
      std::vector<float> slice(batch.data() + start * stride, batch.data() + (start + len) * stride);
      const Var y = fn(Var(Tensor(shape, std::move(slice))));
      if (out.empty()) out = Tensor({n, y.dim(1)});
      std::copy(y.value().data(), y.value().data() + y.value().size(),
                out.data() + static_cast<std::size_t>(start) * y.dim(1));
    }
    if (n == 0) out = Tensor({0, 0});
    return out;
  }

  NetworkDescriptor descriptor_;
  Shape input_shape_;
  int num_classes_;
  std::shared_ptr<ParameterStore> store_;
  ForwardFn forward_;
  std::vector<TapInfo> taps_;
  RebuildFn rebuild_;
};

}  // namespace respkit

#endif  // RESPKIT_NETWORK_HPP_
