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

// Minimal tape-free reverse-mode differentiation. Every op returns a Var whose
// node keeps its inputs alive and knows how to push its gradient back into
// them; `backward` walks the resulting DAG in reverse topological order.

#ifndef RESPKIT_AUTOGRAD_HPP_
#define RESPKIT_AUTOGRAD_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "respkit/errors.hpp"
#include "respkit/tensor.hpp"

namespace respkit::ag {

template <typename T>
struct Node {
  BasicTensor<T> value;
  BasicTensor<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  BasicTensor<T>& grad_buffer() {
    if (grad.size() != value.size()) grad = BasicTensor<T>(value.shape());
    return grad;
  }
};

namespace detail {
inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}
}  // namespace detail

inline bool grad_enabled() { return detail::grad_mode(); }

/// Disables graph recording for the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode()) { detail::grad_mode() = false; }
  ~NoGradGuard() { detail::grad_mode() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(BasicTensor<T> value, bool requires_grad = false)
      : node_(std::make_shared<Node<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  const BasicTensor<T>& value() const { return node_->value; }
  BasicTensor<T>& mutable_value() { return node_->value; }
  const BasicTensor<T>& grad() const { return node_->grad; }
  BasicTensor<T>& mutable_grad() { return node_->grad_buffer(); }
  bool has_grad() const { return node_->grad.size() == node_->value.size() && !node_->value.empty(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const Shape& shape() const { return node_->value.shape(); }
  int dim(int i) const { return node_->value.dim(i); }
  const std::shared_ptr<Node<T>>& node() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

  void zero_grad() {
    if (node_->grad.size()) node_->grad.fill(T{0});
  }

 private:
  std::shared_ptr<Node<T>> node_;
};

template <typename T, typename Fn>
Var<T> make_result(BasicTensor<T> value, std::vector<Var<T>> inputs, Fn&& backward) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  bool needs = false;
  if (grad_enabled()) {
    for (const auto& in : inputs) needs = needs || in.requires_grad();
  }
  node->requires_grad = needs;
  if (needs) {
    node->inputs.reserve(inputs.size());
    for (auto& in : inputs) node->inputs.push_back(in ? in.node() : nullptr);
    node->backward = std::forward<Fn>(backward);
  }
  return Var<T>(std::move(node));
}

/// Gradient buffer of input `i`, or nullptr when it needs none.
template <typename T>
T* input_grad(Node<T>& self, std::size_t i) {
  auto& in = self.inputs[i];
  if (!in || !in->requires_grad) return nullptr;
  return in->grad_buffer().data();
}

/// Back-propagates from `root`, seeding with ones (scalar losses) or `seed`.
template <typename T>
void backward(const Var<T>& root, const BasicTensor<T>* seed = nullptr) {
  if (!root.requires_grad()) return;
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{root.node().get(), 0}};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node<T>* child = node->inputs[next++].get();
      if (child && child->requires_grad && seen.insert(child).second) stack.push_back({child, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  auto& g = root.node()->grad_buffer();
  if (seed) {
    if (seed->shape() != g.shape()) throw ContractError("backward seed shape mismatch");
    std::transform(g.data(), g.data() + g.size(), seed->data(), g.data(), std::plus<T>());
  } else {
    for (auto& v : g.values()) v += T{1};
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->backward && node->grad.size()) node->backward(*node);
  }
}

// ---------------------------------------------------------------------------
// Elementwise and structural ops.

template <typename T>
Var<T> relu(const Var<T>& x) {
  BasicTensor<T> y(x.shape());
  const T* xv = x.value().data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = xv[i] < T{0} ? T{0} : xv[i];  // NaN propagates
  return make_result<T>(std::move(y), {x}, [](Node<T>& self) {
    T* gx = input_grad(self, 0);
    if (!gx) return;
    const T* xv = self.inputs[0]->value.data();
    const T* gy = self.grad.data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (xv[i] > T{0}) gx[i] += gy[i];
    }
  });
}

/// min(max(x, 0), 6).
template <typename T>
Var<T> relu6(const Var<T>& x) {
  BasicTensor<T> y(x.shape());
  const T* xv = x.value().data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::clamp(xv[i], T{0}, T{6});
  return make_result<T>(std::move(y), {x}, [](Node<T>& self) {
    T* gx = input_grad(self, 0);
    if (!gx) return;
    const T* xv = self.inputs[0]->value.data();
    const T* gy = self.grad.data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (xv[i] > T{0} && xv[i] < T{6}) gx[i] += gy[i];
    }
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  if (a.shape() != b.shape()) {
    throw ContractError("add: shape " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  BasicTensor<T> y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] + b.value()[i];
  return make_result<T>(std::move(y), {a, b}, [](Node<T>& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (T* g = input_grad(self, k)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
      }
    }
  });
}

/// Collapses all axes after the first.
template <typename T>
Var<T> flatten(const Var<T>& x) {
  const int n = x.dim(0);
  const int rest = n ? static_cast<int>(x.value().size() / n) : 0;
  return make_result<T>(x.value().reshaped({n, rest}), {x}, [](Node<T>& self) {
    if (T* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
  });
}

/// Concatenates along axis 1; all other axes must agree.
template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ContractError("concat of zero inputs");
  Shape shape = parts.front().shape();
  const int n = shape.at(0);
  std::size_t inner = 1;
  for (std::size_t d = 2; d < shape.size(); ++d) inner *= shape[d];
  int total = 0;
  for (const auto& p : parts) {
    Shape s = p.shape();
    s[1] = shape[1];
    if (s != shape) throw ContractError("concat: incompatible shape " + shape_str(p.shape()));
    total += p.dim(1);
  }
  shape[1] = total;
  BasicTensor<T> y(shape);
  std::vector<int> widths;
  for (int i = 0; i < n; ++i) {
    T* dst = y.data() + static_cast<std::size_t>(i) * total * inner;
    for (const auto& p : parts) {
      const std::size_t len = static_cast<std::size_t>(p.dim(1)) * inner;
      const T* src = p.value().data() + i * len;
      dst = std::copy(src, src + len, dst);
    }
  }
  for (const auto& p : parts) widths.push_back(p.dim(1));
  return make_result<T>(std::move(y), parts, [n, inner, total, widths](Node<T>& self) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      const std::size_t len = static_cast<std::size_t>(widths[k]) * inner;
      if (T* g = input_grad(self, k)) {
        for (int i = 0; i < n; ++i) {
          const T* src = self.grad.data() + static_cast<std::size_t>(i) * total * inner + offset;
          T* dst = g + i * len;
          for (std::size_t j = 0; j < len; ++j) dst[j] += src[j];
        }
      }
      offset += len;
    }
  });
}

/// Row-wise softmax of a (N, C) tensor.
template <typename T>
Var<T> softmax(const Var<T>& x) {
  if (x.value().rank() != 2) throw ContractError("softmax expects (N, C)");
  const int n = x.dim(0), c = x.dim(1);
  BasicTensor<T> y(x.shape());
  for (int i = 0; i < n; ++i) {
    const T* row = x.value().data() + static_cast<std::size_t>(i) * c;
    T* out = y.data() + static_cast<std::size_t>(i) * c;
    const T mx = *std::max_element(row, row + c);
    T sum{0};
    for (int j = 0; j < c; ++j) sum += (out[j] = std::exp(row[j] - mx));
    for (int j = 0; j < c; ++j) out[j] /= sum;
  }
  return make_result<T>(std::move(y), {x}, [n, c](Node<T>& self) {
    T* gx = input_grad(self, 0);
    if (!gx) return;
    for (int i = 0; i < n; ++i) {
      const T* yv = self.value.data() + static_cast<std::size_t>(i) * c;
      const T* gy = self.grad.data() + static_cast<std::size_t>(i) * c;
      T dot{0};
      for (int j = 0; j < c; ++j) dot += yv[j] * gy[j];
      for (int j = 0; j < c; ++j) gx[static_cast<std::size_t>(i) * c + j] += yv[j] * (gy[j] - dot);
    }
  });
}

/// Inverted dropout; identity when `drop` is 0.
template <typename T, typename Rng>
Var<T> dropout(const Var<T>& x, double drop, Rng& rng) {
  if (drop <= 0.0) return x;
  if (drop >= 1.0) throw ContractError("dropout rate must be < 1");
  std::bernoulli_distribution keep(1.0 - drop);
  const T scale = static_cast<T>(1.0 / (1.0 - drop));
  auto mask = std::make_shared<std::vector<T>>(x.value().size());
  BasicTensor<T> y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) {
    (*mask)[i] = keep(rng) ? scale : T{0};
    y[i] = x.value()[i] * (*mask)[i];
  }
  return make_result<T>(std::move(y), {x}, [mask](Node<T>& self) {
    if (T* g = input_grad(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * (*mask)[i];
    }
  });
}

// ---------------------------------------------------------------------------
// Dense and convolution ops.

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

/// x (N, D) times w (O, D) transposed, plus b (O).
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  if (x.value().rank() != 2 || w.value().rank() != 2 || x.dim(1) != w.dim(1)) {
    throw ContractError("linear: input " + shape_str(x.shape()) + " incompatible with weight " +
                        shape_str(w.shape()));
  }
  const int n = x.dim(0), d = x.dim(1), o = w.dim(0);
  BasicTensor<T> y({n, o});
  MatMap<T> ym(y.data(), n, o);
  ym.noalias() = ConstMatMap<T>(x.value().data(), n, d) * ConstMatMap<T>(w.value().data(), o, d).transpose();
  if (b) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < o; ++j) ym(i, j) += b.value()[j];
    }
  }
  return make_result<T>(std::move(y), {x, w, b}, [n, d, o](Node<T>& self) {
    ConstMatMap<T> gy(self.grad.data(), n, o);
    if (T* gx = input_grad(self, 0)) {
      MatMap<T>(gx, n, d).noalias() += gy * ConstMatMap<T>(self.inputs[1]->value.data(), o, d);
    }
    if (T* gw = input_grad(self, 1)) {
      MatMap<T>(gw, o, d).noalias() += gy.transpose() * ConstMatMap<T>(self.inputs[0]->value.data(), n, d);
    }
    if (self.inputs[2]) {
      if (T* gb = input_grad(self, 2)) {
        for (int i = 0; i < n; ++i) {
          for (int j = 0; j < o; ++j) gb[j] += gy(i, j);
        }
      }
    }
  });
}

enum class PadMode { kSame, kValid, kExplicit };

/// Spatial padding policy. kSame follows the TensorFlow convention: output is
/// ceil(in / stride) and any odd padding goes to the bottom/right edge.
struct Padding {
  PadMode mode = PadMode::kSame;
  int pad_h = 0;
  int pad_w = 0;

  static Padding same() { return {PadMode::kSame, 0, 0}; }
  static Padding valid() { return {PadMode::kValid, 0, 0}; }
  static Padding explicit_pad(int ph, int pw) { return {PadMode::kExplicit, ph, pw}; }
};

struct Window1D {
  int out = 0;
  int pad_before = 0;
};

inline Window1D resolve_window(int in, int k, int stride, PadMode mode, int explicit_pad) {
  Window1D w;
  switch (mode) {
    case PadMode::kSame: {
      w.out = (in + stride - 1) / stride;
      const int total = std::max((w.out - 1) * stride + k - in, 0);
      w.pad_before = total / 2;
      break;
    }
    case PadMode::kValid:
      w.out = in >= k ? (in - k) / stride + 1 : 0;
      break;
    case PadMode::kExplicit:
      w.out = in + 2 * explicit_pad >= k ? (in + 2 * explicit_pad - k) / stride + 1 : 0;
      w.pad_before = explicit_pad;
      break;
  }
  if (w.out <= 0) {
    throw ContractError("window of size " + std::to_string(k) + " does not fit input extent " +
                        std::to_string(in));
  }
  return w;
}

struct ConvGeometry {
  int channels = 0, height = 0, width = 0;
  int kernel_h = 1, kernel_w = 1;
  int stride_h = 1, stride_w = 1;
  int pad_top = 0, pad_left = 0;
  int out_h = 0, out_w = 0;

  bool is_pointwise() const {
    return kernel_h == 1 && kernel_w == 1 && stride_h == 1 && stride_w == 1 && pad_top == 0 &&
           pad_left == 0;
  }
};

inline ConvGeometry make_geometry(int c, int h, int w, int kh, int kw, int sh, int sw, Padding pad) {
  ConvGeometry g{c, h, w, kh, kw, sh, sw};
  const auto rows = resolve_window(h, kh, sh, pad.mode, pad.pad_h);
  const auto cols = resolve_window(w, kw, sw, pad.mode, pad.pad_w);
  g.out_h = rows.out;
  g.out_w = cols.out;
  g.pad_top = rows.pad_before;
  g.pad_left = cols.pad_before;
  return g;
}

/// Unfolds one (C, H, W) image into a (C*KH*KW, OH*OW) patch matrix.
template <typename T>
void im2col(const T* image, const ConvGeometry& g, T* col) {
  const int ohw = g.out_h * g.out_w;
  for (int c = 0; c < g.channels; ++c) {
    const T* plane = image + static_cast<std::size_t>(c) * g.height * g.width;
    for (int ki = 0; ki < g.kernel_h; ++ki) {
      for (int kj = 0; kj < g.kernel_w; ++kj) {
        T* row = col + (static_cast<std::size_t>(c * g.kernel_h + ki) * g.kernel_w + kj) * ohw;
        for (int oh = 0; oh < g.out_h; ++oh) {
          const int ih = oh * g.stride_h - g.pad_top + ki;
          T* dst = row + oh * g.out_w;
          if (ih < 0 || ih >= g.height) {
            std::fill(dst, dst + g.out_w, T{0});
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(ih) * g.width;
          for (int ow = 0; ow < g.out_w; ++ow) {
            const int iw = ow * g.stride_w - g.pad_left + kj;
            dst[ow] = (iw >= 0 && iw < g.width) ? src[iw] : T{0};
          }
        }
      }
    }
  }
}

/// Adjoint of im2col: scatters patch gradients back into the image.
template <typename T>
void col2im(const T* col, const ConvGeometry& g, T* image) {
  const int ohw = g.out_h * g.out_w;
  for (int c = 0; c < g.channels; ++c) {
    T* plane = image + static_cast<std::size_t>(c) * g.height * g.width;
    for (int ki = 0; ki < g.kernel_h; ++ki) {
      for (int kj = 0; kj < g.kernel_w; ++kj) {
        const T* row = col + (static_cast<std::size_t>(c * g.kernel_h + ki) * g.kernel_w + kj) * ohw;
        for (int oh = 0; oh < g.out_h; ++oh) {
          const int ih = oh * g.stride_h - g.pad_top + ki;
          if (ih < 0 || ih >= g.height) continue;
          T* dst = plane + static_cast<std::size_t>(ih) * g.width;
          const T* src = row + oh * g.out_w;
          for (int ow = 0; ow < g.out_w; ++ow) {
            const int iw = ow * g.stride_w - g.pad_left + kj;
            if (iw >= 0 && iw < g.width) dst[iw] += src[ow];
          }
        }
      }
    }
  }
}

struct ConvOptions {
  int stride_h = 1;
  int stride_w = 1;
  Padding padding = Padding::same();
  /// 1 for a dense convolution, or the input channel count for depthwise.
  int groups = 1;
};

namespace detail {

template <typename T>
Var<T> dense_conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, const ConvGeometry& g) {
  const int n = x.dim(0);
  const int out_ch = w.dim(0);
  const int patch = g.channels * g.kernel_h * g.kernel_w;
  const int ohw = g.out_h * g.out_w;
  const std::size_t in_stride = static_cast<std::size_t>(g.channels) * g.height * g.width;
  BasicTensor<T> y({n, out_ch, g.out_h, g.out_w});
  ConstMatMap<T> wm(w.value().data(), out_ch, patch);
  AlignedVector<T> col(g.is_pointwise() ? 0 : static_cast<std::size_t>(patch) * ohw);
  for (int i = 0; i < n; ++i) {
    const T* image = x.value().data() + i * in_stride;
    const T* cols = image;
    if (!g.is_pointwise()) {
      im2col(image, g, col.data());
      cols = col.data();
    }
    MatMap<T> ym(y.data() + static_cast<std::size_t>(i) * out_ch * ohw, out_ch, ohw);
    ym.noalias() = wm * ConstMatMap<T>(cols, patch, ohw);
    if (b) {
      for (int o = 0; o < out_ch; ++o) ym.row(o).array() += b.value()[o];
    }
  }
  return make_result<T>(std::move(y), {x, w, b}, [g, n, out_ch, patch, ohw, in_stride](Node<T>& self) {
    T* gx = input_grad(self, 0);
    T* gw = input_grad(self, 1);
    T* gb = self.inputs[2] ? input_grad(self, 2) : nullptr;
    const T* xv = self.inputs[0]->value.data();
    ConstMatMap<T> wm(self.inputs[1]->value.data(), out_ch, patch);
    AlignedVector<T> col(g.is_pointwise() ? 0 : static_cast<std::size_t>(patch) * ohw);
    AlignedVector<T> dcol(gx && !g.is_pointwise() ? static_cast<std::size_t>(patch) * ohw : 0);
    for (int i = 0; i < n; ++i) {
      ConstMatMap<T> gy(self.grad.data() + static_cast<std::size_t>(i) * out_ch * ohw, out_ch, ohw);
      const T* image = xv + i * in_stride;
      if (gw) {
        const T* cols = image;
        if (!g.is_pointwise()) {
          im2col(image, g, col.data());
          cols = col.data();
        }
        MatMap<T>(gw, out_ch, patch).noalias() += gy * ConstMatMap<T>(cols, patch, ohw).transpose();
      }
      if (gb) {
        for (int o = 0; o < out_ch; ++o) gb[o] += gy.row(o).sum();
      }
      if (gx) {
        if (g.is_pointwise()) {
          MatMap<T>(gx + i * in_stride, patch, ohw).noalias() += wm.transpose() * gy;
        } else {
          MatMap<T>(dcol.data(), patch, ohw).noalias() = wm.transpose() * gy;
          col2im(dcol.data(), g, gx + i * in_stride);
        }
      }
    }
  });
}

template <typename T>
Var<T> depthwise_conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, const ConvGeometry& g) {
  const int n = x.dim(0);
  const int c = g.channels;
  const int kh = g.kernel_h, kw = g.kernel_w;
  BasicTensor<T> y({n, c, g.out_h, g.out_w});
  const std::size_t in_plane = static_cast<std::size_t>(g.height) * g.width;
  const std::size_t out_plane = static_cast<std::size_t>(g.out_h) * g.out_w;
  auto for_each_tap = [g](auto&& fn) {
    for (int oh = 0; oh < g.out_h; ++oh) {
      for (int ki = 0; ki < g.kernel_h; ++ki) {
        const int ih = oh * g.stride_h - g.pad_top + ki;
        if (ih < 0 || ih >= g.height) continue;
        for (int ow = 0; ow < g.out_w; ++ow) {
          for (int kj = 0; kj < g.kernel_w; ++kj) {
            const int iw = ow * g.stride_w - g.pad_left + kj;
            if (iw < 0 || iw >= g.width) continue;
            fn(oh * g.out_w + ow, ih * g.width + iw, ki * g.kernel_w + kj);
          }
        }
      }
    }
  };
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < c; ++ch) {
      const T* src = x.value().data() + (static_cast<std::size_t>(i) * c + ch) * in_plane;
      T* dst = y.data() + (static_cast<std::size_t>(i) * c + ch) * out_plane;
      const T* k = w.value().data() + static_cast<std::size_t>(ch) * kh * kw;
      const T bias = b ? b.value()[ch] : T{0};
      std::fill(dst, dst + out_plane, bias);
      for_each_tap([&](int o, int in, int tap) { dst[o] += k[tap] * src[in]; });
    }
  }
  return make_result<T>(std::move(y), {x, w, b},
                        [n, c, kh, kw, in_plane, out_plane, for_each_tap](Node<T>& self) {
    T* gx = input_grad(self, 0);
    T* gw = input_grad(self, 1);
    T* gb = self.inputs[2] ? input_grad(self, 2) : nullptr;
    for (int i = 0; i < n; ++i) {
      for (int ch = 0; ch < c; ++ch) {
        const std::size_t in_off = (static_cast<std::size_t>(i) * c + ch) * in_plane;
        const T* src = self.inputs[0]->value.data() + in_off;
        const T* gy = self.grad.data() + (static_cast<std::size_t>(i) * c + ch) * out_plane;
        const T* k = self.inputs[1]->value.data() + static_cast<std::size_t>(ch) * kh * kw;
        T* gk = gw ? gw + static_cast<std::size_t>(ch) * kh * kw : nullptr;
        T* gsrc = gx ? gx + in_off : nullptr;
        if (gb) {
          for (std::size_t o = 0; o < out_plane; ++o) gb[ch] += gy[o];
        }
        for_each_tap([&](int o, int in, int tap) {
          if (gk) gk[tap] += gy[o] * src[in];
          if (gsrc) gsrc[in] += gy[o] * k[tap];
        });
      }
    }
  });
}

}  // namespace detail

/// 2-D convolution of x (N, C, H, W) with w (O, C/groups, KH, KW).
/// `b` may be a null Var for bias-free convolutions.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, const ConvOptions& opt) {
  if (x.value().rank() != 4 || w.value().rank() != 4) throw ContractError("conv2d expects rank-4 input and weight");
  const int c = x.dim(1);
  const auto g = make_geometry(c, x.dim(2), x.dim(3), w.dim(2), w.dim(3), opt.stride_h, opt.stride_w,
                               opt.padding);
  if (opt.groups == 1) {
    if (w.dim(1) != c) {
      throw ContractError("conv2d: weight " + shape_str(w.shape()) + " expects " +
                          std::to_string(w.dim(1)) + " input channels, got " + std::to_string(c));
    }
    return detail::dense_conv2d(x, w, b, g);
  }
  if (opt.groups == c && w.dim(0) == c && w.dim(1) == 1) return detail::depthwise_conv2d(x, w, b, g);
  throw ContractError("conv2d: only dense or depthwise (multiplier 1) grouping is supported");
}

// ---------------------------------------------------------------------------
// Pooling.

template <typename T>
Var<T> max_pool2d(const Var<T>& x, int kh, int kw, int sh, int sw, Padding pad) {
  const int n = x.dim(0), c = x.dim(1);
  const auto g = make_geometry(c, x.dim(2), x.dim(3), kh, kw, sh, sw, pad);
  BasicTensor<T> y({n, c, g.out_h, g.out_w});
  auto argmax = std::make_shared<std::vector<std::int32_t>>(y.size(), -1);
  const std::size_t in_plane = static_cast<std::size_t>(g.height) * g.width;
  std::size_t o = 0;
  for (int p = 0; p < n * c; ++p) {
    const T* src = x.value().data() + p * in_plane;
    for (int oh = 0; oh < g.out_h; ++oh) {
      for (int ow = 0; ow < g.out_w; ++ow, ++o) {
        T best = -std::numeric_limits<T>::infinity();
        std::int32_t at = -1;
        for (int ki = 0; ki < kh; ++ki) {
          const int ih = oh * sh - g.pad_top + ki;
          if (ih < 0 || ih >= g.height) continue;
          for (int kj = 0; kj < kw; ++kj) {
            const int iw = ow * sw - g.pad_left + kj;
            if (iw < 0 || iw >= g.width) continue;
            const T v = src[ih * g.width + iw];
            if (at < 0 || v > best) {
              best = v;
              at = ih * g.width + iw;
            }
          }
        }
        y[o] = best;
        (*argmax)[o] = at;
      }
    }
  }
  const std::size_t out_plane = static_cast<std::size_t>(g.out_h) * g.out_w;
  return make_result<T>(std::move(y), {x}, [argmax, in_plane, out_plane, n, c](Node<T>& self) {
    T* gx = input_grad(self, 0);
    if (!gx) return;
    for (int p = 0; p < n * c; ++p) {
      for (std::size_t q = 0; q < out_plane; ++q) {
        const std::size_t o = p * out_plane + q;
        gx[p * in_plane + (*argmax)[o]] += self.grad[o];
      }
    }
  });
}

/// Average pooling; padded cells are excluded from the divisor.
template <typename T>
Var<T> avg_pool2d(const Var<T>& x, int kh, int kw, int sh, int sw, Padding pad) {
  const int n = x.dim(0), c = x.dim(1);
  const auto g = make_geometry(c, x.dim(2), x.dim(3), kh, kw, sh, sw, pad);
  BasicTensor<T> y({n, c, g.out_h, g.out_w});
  const std::size_t in_plane = static_cast<std::size_t>(g.height) * g.width;
  auto visit = [g, kh, kw, sh, sw](int oh, int ow, auto&& fn) {
    const int h0 = std::max(oh * sh - g.pad_top, 0), h1 = std::min(oh * sh - g.pad_top + kh, g.height);
    const int w0 = std::max(ow * sw - g.pad_left, 0), w1 = std::min(ow * sw - g.pad_left + kw, g.width);
    const T inv = T{1} / static_cast<T>((h1 - h0) * (w1 - w0));
    for (int ih = h0; ih < h1; ++ih) {
      for (int iw = w0; iw < w1; ++iw) fn(ih * g.width + iw, inv);
    }
  };
  std::size_t o = 0;
  for (int p = 0; p < n * c; ++p) {
    const T* src = x.value().data() + p * in_plane;
    for (int oh = 0; oh < g.out_h; ++oh) {
      for (int ow = 0; ow < g.out_w; ++ow, ++o) {
        T acc{0};
        visit(oh, ow, [&](int idx, T inv) { acc += src[idx] * inv; });
        y[o] = acc;
      }
    }
  }
  return make_result<T>(std::move(y), {x}, [g, n, c, in_plane, visit](Node<T>& self) {
    T* gx = input_grad(self, 0);
    if (!gx) return;
    std::size_t o = 0;
    for (int p = 0; p < n * c; ++p) {
      T* dst = gx + p * in_plane;
      for (int oh = 0; oh < g.out_h; ++oh) {
        for (int ow = 0; ow < g.out_w; ++ow, ++o) {
          const T gy = self.grad[o];
          visit(oh, ow, [&](int idx, T inv) { dst[idx] += gy * inv; });
        }
      }
    }
  });
}

/// (N, C, H, W) -> (N, C), maximum over each plane.
template <typename T>
Var<T> global_max_pool(const Var<T>& x) {
  const int n = x.dim(0), c = x.dim(1);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  BasicTensor<T> y({n, c});
  auto argmax = std::make_shared<std::vector<std::size_t>>(y.size());
  for (std::size_t p = 0; p < y.size(); ++p) {
    const T* src = x.value().data() + p * plane;
    const auto it = std::max_element(src, src + plane);
    y[p] = *it;
    (*argmax)[p] = p * plane + static_cast<std::size_t>(it - src);
  }
  return make_result<T>(std::move(y), {x}, [argmax](Node<T>& self) {
    if (T* gx = input_grad(self, 0)) {
      for (std::size_t p = 0; p < self.grad.size(); ++p) gx[(*argmax)[p]] += self.grad[p];
    }
  });
}

/// (N, C, H, W) -> (N, C), mean over each plane.
template <typename T>
Var<T> global_avg_pool(const Var<T>& x) {
  const int n = x.dim(0), c = x.dim(1);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  BasicTensor<T> y({n, c});
  for (std::size_t p = 0; p < y.size(); ++p) {
    const T* src = x.value().data() + p * plane;
    y[p] = std::accumulate(src, src + plane, T{0}) / static_cast<T>(plane);
  }
  return make_result<T>(std::move(y), {x}, [plane](Node<T>& self) {
    if (T* gx = input_grad(self, 0)) {
      const T inv = T{1} / static_cast<T>(plane);
      for (std::size_t p = 0; p < self.grad.size(); ++p) {
        for (std::size_t q = 0; q < plane; ++q) gx[p * plane + q] += self.grad[p] * inv;
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Normalization.

/// Running statistics owned by a batch-normalization layer.
template <typename T>
struct BatchNormState {
  BasicTensor<T> running_mean;
  BasicTensor<T> running_var;
  T momentum = T(0.9);
  T eps = T(1e-3);
};

/// Per-channel normalization over (N, H, W) for rank-4 input or N for (N, C).
/// Training mode uses batch statistics and updates `state`.
template <typename T>
Var<T> batch_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, BatchNormState<T>& state,
                  bool training) {
  const int n = x.dim(0), c = x.dim(1);
  const std::size_t plane = x.value().rank() == 4 ? static_cast<std::size_t>(x.dim(2)) * x.dim(3) : 1;
  if (gamma.value().size() != static_cast<std::size_t>(c)) throw ContractError("batch_norm: channel mismatch");
  const std::size_t count = static_cast<std::size_t>(n) * plane;
  std::vector<T> mean(c), invstd(c);
  const T* xv = x.value().data();
  if (training) {
    for (int ch = 0; ch < c; ++ch) {
      double s = 0, ss = 0;
      for (int i = 0; i < n; ++i) {
        const T* src = xv + (static_cast<std::size_t>(i) * c + ch) * plane;
        for (std::size_t q = 0; q < plane; ++q) s += src[q];
      }
      const double m = s / static_cast<double>(count);
      for (int i = 0; i < n; ++i) {
        const T* src = xv + (static_cast<std::size_t>(i) * c + ch) * plane;
        for (std::size_t q = 0; q < plane; ++q) ss += (src[q] - m) * (src[q] - m);
      }
      const double var = ss / static_cast<double>(count);
      mean[ch] = static_cast<T>(m);
      invstd[ch] = static_cast<T>(1.0 / std::sqrt(var + state.eps));
      const double unbiased = count > 1 ? ss / static_cast<double>(count - 1) : var;
      state.running_mean[ch] = state.momentum * state.running_mean[ch] + (1 - state.momentum) * static_cast<T>(m);
      state.running_var[ch] = state.momentum * state.running_var[ch] + (1 - state.momentum) * static_cast<T>(unbiased);
    }
  } else {
    for (int ch = 0; ch < c; ++ch) {
      mean[ch] = state.running_mean[ch];
      invstd[ch] = T{1} / std::sqrt(state.running_var[ch] + state.eps);
    }
  }
  BasicTensor<T> y(x.shape());
  auto xhat = std::make_shared<std::vector<T>>(x.value().size());
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < c; ++ch) {
      const std::size_t off = (static_cast<std::size_t>(i) * c + ch) * plane;
      const T gm = gamma.value()[ch], bt = beta.value()[ch];
      for (std::size_t q = 0; q < plane; ++q) {
        const T h = (xv[off + q] - mean[ch]) * invstd[ch];
        (*xhat)[off + q] = h;
        y[off + q] = gm * h + bt;
      }
    }
  }
  return make_result<T>(std::move(y), {x, gamma, beta},
                        [n, c, plane, count, training, xhat, invstd](Node<T>& self) {
    T* gx = input_grad(self, 0);
    T* gg = input_grad(self, 1);
    T* gbeta = input_grad(self, 2);
    const T* gamma = self.inputs[1]->value.data();
    for (int ch = 0; ch < c; ++ch) {
      T sum_g{0}, sum_gh{0};
      for (int i = 0; i < n; ++i) {
        const std::size_t off = (static_cast<std::size_t>(i) * c + ch) * plane;
        for (std::size_t q = 0; q < plane; ++q) {
          sum_g += self.grad[off + q];
          sum_gh += self.grad[off + q] * (*xhat)[off + q];
        }
      }
      if (gg) gg[ch] += sum_gh;
      if (gbeta) gbeta[ch] += sum_g;
      if (!gx) continue;
      const T scale = gamma[ch] * invstd[ch];
      const T inv_count = T{1} / static_cast<T>(count);
      for (int i = 0; i < n; ++i) {
        const std::size_t off = (static_cast<std::size_t>(i) * c + ch) * plane;
        for (std::size_t q = 0; q < plane; ++q) {
          if (training) {
            gx[off + q] += scale * (self.grad[off + q] - inv_count * sum_g - (*xhat)[off + q] * inv_count * sum_gh);
          } else {
            gx[off + q] += scale * self.grad[off + q];
          }
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Loss.

enum class Reduction { kMean, kSum };

/// Lower bound applied to predicted probabilities before the logarithm.
inline constexpr double kProbabilityFloor = 1e-8;

/// Sum over rows of KL(target || probs), averaged over rows for kMean.
/// Entries with zero target mass contribute nothing; clamped predictions
/// receive no gradient.
template <typename T>
Var<T> kl_divergence(const Var<T>& probs, const BasicTensor<T>& target, Reduction reduction) {
  if (probs.shape() != target.shape() || probs.value().rank() != 2) {
    throw ContractError("kl_divergence: prediction " + shape_str(probs.shape()) + " vs target " +
                        shape_str(target.shape()));
  }
  const int n = probs.dim(0);
  const T floor = static_cast<T>(kProbabilityFloor);
  const T scale = reduction == Reduction::kMean && n > 0 ? T{1} / static_cast<T>(n) : T{1};
  T total{0};
  for (std::size_t i = 0; i < target.size(); ++i) {
    const T y = target[i];
    if (y > T{0}) total += y * std::log(y / std::max(probs.value()[i], floor));
  }
  BasicTensor<T> out({1}, total * scale);
  return make_result<T>(std::move(out), {probs}, [target, floor, scale](Node<T>& self) {
    T* gp = input_grad(self, 0);
    if (!gp) return;
    const T g = self.grad[0] * scale;
    const T* p = self.inputs[0]->value.data();
    for (std::size_t i = 0; i < target.size(); ++i) {
      if (target[i] > T{0} && p[i] > floor) gp[i] -= g * target[i] / p[i];
    }
  });
}

/// kl_divergence(softmax(logits), target) in one step. The value matches the
/// clamped form; the gradient with respect to the logits is the exact
/// p * sum(y) - y, so saturated rows still receive a learning signal.
template <typename T>
Var<T> softmax_kl_divergence(const Var<T>& logits, const BasicTensor<T>& target, Reduction reduction) {
  if (logits.shape() != target.shape() || logits.value().rank() != 2) {
    throw ContractError("softmax_kl_divergence: logits " + shape_str(logits.shape()) + " vs target " +
                        shape_str(target.shape()));
  }
  const int n = logits.dim(0), c = logits.dim(1);
  BasicTensor<T> probs(logits.shape());
  T total{0};
  for (int i = 0; i < n; ++i) {
    const T* z = logits.value().data() + static_cast<std::size_t>(i) * c;
    T* p = probs.data() + static_cast<std::size_t>(i) * c;
    const T mx = *std::max_element(z, z + c);
    T sum{0};
    for (int j = 0; j < c; ++j) sum += (p[j] = std::exp(z[j] - mx));
    const T log_sum = std::log(sum);
    for (int j = 0; j < c; ++j) {
      p[j] /= sum;
      const T y = target[static_cast<std::size_t>(i) * c + j];
      if (y <= T{0}) continue;
      // log p from the logits avoids underflow; the floor mirrors kl_divergence.
      const T log_p = std::max(z[j] - mx - log_sum, static_cast<T>(std::log(kProbabilityFloor)));
      total += y * (std::log(y) - log_p);
    }
  }
  const T scale = reduction == Reduction::kMean && n > 0 ? T{1} / static_cast<T>(n) : T{1};
  BasicTensor<T> out({1}, total * scale);
  return make_result<T>(std::move(out), {logits}, [target, probs, n, c, scale](Node<T>& self) {
    T* gz = input_grad(self, 0);
    if (!gz) return;
    const T g = self.grad[0] * scale;
    for (int i = 0; i < n; ++i) {
      const std::size_t row = static_cast<std::size_t>(i) * c;
      T mass{0};
      for (int j = 0; j < c; ++j) mass += target[row + j];
      for (int j = 0; j < c; ++j) gz[row + j] += g * (probs[row + j] * mass - target[row + j]);
    }
  });
}

}  // namespace respkit::ag

#endif  // RESPKIT_AUTOGRAD_HPP_
