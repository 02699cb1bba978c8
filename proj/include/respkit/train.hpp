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

#ifndef RESPKIT_TRAIN_HPP_
#define RESPKIT_TRAIN_HPP_

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "respkit/augment.hpp"
#include "respkit/autograd.hpp"
#include "respkit/embedding.hpp"
#include "respkit/errors.hpp"
#include "respkit/features.hpp"
#include "respkit/models.hpp"
#include "respkit/random.hpp"

namespace respkit {

using ag::Reduction;

/// KL(y || y_hat) summed (or averaged) over rows plus (lambda / 2) *
/// theta_sq_norm. Predictions are clamped at 1e-8; zero-mass targets add 0.
inline double kl_loss(std::span<const SoftLabel> y, std::span<const std::array<double, 4>> y_hat,
                      double theta_sq_norm, double lambda_reg, Reduction reduction = Reduction::kSum) {
  if (y.size() != y_hat.size()) {
    throw ContractError("kl_loss: " + std::to_string(y.size()) + " targets vs " + std::to_string(y_hat.size()) +
                        " predictions");
  }
  if (theta_sq_norm < 0) throw ContractError("kl_loss: squared norm must be non-negative");
  double kl = 0;
  for (std::size_t n = 0; n < y.size(); ++n) {
    for (std::size_t c = 0; c < 4; ++c) {
      const double t = y[n].probs[c];
      if (t > 0) kl += t * std::log(t / std::max(y_hat[n][c], ag::kProbabilityFloor));
    }
  }
  if (reduction == Reduction::kMean && !y.empty()) kl /= static_cast<double>(y.size());
  return kl + 0.5 * lambda_reg * theta_sq_norm;
}

struct TrainConfig {
  int epochs = 100;
  int batch_size = 100;
  double lambda_reg = 0.0001;
  double learning_rate = 1e-4;
  std::uint64_t seed = 0;
  /// Only "adam" is supported.
  std::string optimizer = "adam";
  /// How the KL term combines the rows of a batch.
  Reduction kl_reduction = Reduction::kMean;

  void validate() const {
    if (epochs < 0) throw ConfigError("epochs must be non-negative");
    if (batch_size <= 0) throw ConfigError("batch_size must be positive");
    if (lambda_reg < 0) throw ConfigError("lambda_reg must be non-negative");
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
    if (optimizer != "adam") throw ConfigError("unsupported optimizer '" + optimizer + "'");
  }
};

struct EpochStats {
  int epoch = 0;
  /// kl + reg.
  double loss = 0;
  double kl = 0;
  double reg = 0;
  double seconds = 0;
  std::size_t steps = 0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;

  std::string to_csv() const {
    std::ostringstream os;
    os.precision(17);
    os << "epoch,loss,kl,reg,seconds\n";
    for (const auto& e : epochs) os << e.epoch << ',' << e.loss << ',' << e.kl << ',' << e.reg << ',' << e.seconds << '\n';
    return os.str();
  }
};

class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  /// One update. Decayed parameters receive the extra gradient lambda * theta.
  void step(const std::vector<Parameter>& params, double lambda_reg) {
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.emplace_back(p.var.value().size(), 0.0f);
        v_.emplace_back(p.var.value().size(), 0.0f);
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    const float step = static_cast<float>(lr_ * std::sqrt(c2) / c1);
    const float b1 = static_cast<float>(beta1_), b2 = static_cast<float>(beta2_);
    const float eps = static_cast<float>(eps_ * std::sqrt(c2));
    for (std::size_t k = 0; k < params.size(); ++k) {
      Var var = params[k].var;
      auto& w = var.mutable_value();
      if (!var.has_grad()) var.mutable_grad();
      const auto& g = var.grad();
      const float decay = params[k].decay ? static_cast<float>(lambda_reg) : 0.0f;
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < w.size(); ++i) {
        const float gi = g[i] + decay * w[i];
        m[i] = b1 * m[i] + (1 - b1) * gi;
        v[i] = b2 * v[i] + (1 - b2) * gi * gi;
        w[i] -= step * m[i] / (std::sqrt(v[i]) + eps);
      }
    }
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<std::vector<float>> m_, v_;
};

/// Inputs and soft targets of one mini-batch.
struct Batch {
  Tensor inputs;
  Tensor targets;
};

/// Builds the batch for `indices`; `epoch` and `batch` index the draw so
/// augmentation streams are reproducible.
using BatchFn = std::function<Batch(std::span<const std::size_t> indices, int epoch, int batch)>;

/// Called after each epoch; returning false stops training early.
using EpochObserver = std::function<bool(const EpochStats&)>;

/// Mini-batch Adam on the KL + L2 objective. Sample order and dropout are
/// drawn from substreams of cfg.seed.
inline TrainHistory fit(Network& net, std::size_t n_samples, const BatchFn& make_batch, const TrainConfig& cfg,
                        const EpochObserver& observer = {}) {
  cfg.validate();
  if (n_samples == 0) throw ContractError("training set is empty");
  TrainHistory history;
  Adam adam(cfg.learning_rate);
  std::mt19937_64 dropout_rng(derive_seed(cfg.seed, "dropout"));
  std::vector<std::size_t> order(n_samples);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, "shuffle", {static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochStats stats;
    stats.epoch = epoch + 1;
    int batch_index = 0;
    for (std::size_t b = 0; b < n_samples; b += static_cast<std::size_t>(cfg.batch_size), ++batch_index) {
      const std::size_t len = std::min<std::size_t>(cfg.batch_size, n_samples - b);
      Batch batch = make_batch(std::span<const std::size_t>(order.data() + b, len), epoch, batch_index);
      for (const auto& p : net.parameters()) {
        Var v = p.var;
        v.zero_grad();
      }
      ForwardContext ctx;
      ctx.training = true;
      ctx.rng = &dropout_rng;
      const double reg = 0.5 * cfg.lambda_reg * net.decay_sq_norm();
      Var logits = net.forward_logits(Var(std::move(batch.inputs)), ctx);
      Var kl = ag::softmax_kl_divergence(logits, batch.targets, cfg.kl_reduction);
      const double kl_value = kl.value()[0];
      if (!std::isfinite(kl_value) || !std::isfinite(reg)) {
        std::ostringstream os;
        os << "non-finite loss at epoch " << epoch + 1 << ", batch " << batch_index << " (kl=" << kl_value
           << ", reg=" << reg << ")";
        throw NumericError(os.str());
      }
      ag::backward(kl);
      adam.step(net.parameters(), cfg.lambda_reg);
      stats.kl += kl_value;
      stats.reg += reg;
      ++stats.steps;
    }
    stats.kl /= static_cast<double>(stats.steps);
    stats.reg /= static_cast<double>(stats.steps);
    stats.loss = stats.kl + stats.reg;
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    history.epochs.push_back(stats);
    if (observer && !observer(stats)) break;
  }
  return history;
}

struct LabeledSpectrogram {
  Spectrogram x;
  SoftLabel y;
};

struct TrainResult {
  Network net;
  TrainHistory history;
};

namespace train_detail {

inline Tensor targets_tensor(std::span<const SoftLabel> labels) {
  Tensor t({static_cast<int>(labels.size()), 4});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (int c = 0; c < 4; ++c) t.at(static_cast<int>(i), c) = static_cast<float>(labels[i].probs[c]);
  }
  return t;
}

/// In-batch mixup: row i is mixed with row perm[i] using lam_i ~ Beta(a, a).
inline void mixup_rows(std::vector<std::vector<float>>& rows, std::vector<SoftLabel>& labels, double alpha,
                       std::uint64_t seed) {
  if (alpha <= 0 || rows.size() < 2) return;
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> perm(rows.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto src_rows = rows;
  const auto src_labels = labels;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double lam = sample_beta(alpha, alpha, rng);
    const auto& other = src_rows[perm[i]];
    for (std::size_t k = 0; k < rows[i].size(); ++k) {
      rows[i][k] = static_cast<float>(lam * src_rows[i][k] + (1 - lam) * other[k]);
    }
    for (int c = 0; c < 4; ++c) labels[i].probs[c] = lam * src_labels[i].probs[c] + (1 - lam) * src_labels[perm[i]].probs[c];
  }
}

}  // namespace train_detail

/// Trains a copy of `net` on spectrogram samples with spectrum masking and
/// mixup applied per `augment`. The input network is left untouched.
inline TrainResult train_model(const Network& net, const std::vector<LabeledSpectrogram>& train_set,
                               const TrainConfig& cfg, const AugmentConfig& augment = AugmentConfig::disabled(),
                               const EpochObserver& observer = {}) {
  if (train_set.empty()) throw ContractError("training set is empty");
  const Shape& in = net.input_shape();
  for (const auto& s : train_set) {
    if (in.size() != 3 || in[0] != 1 || s.x.bins != in[1] || s.x.frames != in[2]) {
      throw ContractError(net.descriptor().name + " expects " + shape_str(in) + " input but got a " +
                          kind_name(s.x.kind) + " spectrogram of " + std::to_string(s.x.bins) + "x" +
                          std::to_string(s.x.frames));
    }
  }
  TrainResult result{net.clone(), {}};
  const std::size_t plane = static_cast<std::size_t>(in[1]) * in[2];
  auto make_batch = [&](std::span<const std::size_t> idx, int epoch, int batch) {
    std::vector<std::vector<float>> rows;
    std::vector<SoftLabel> labels;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const auto& sample = train_set[idx[k]];
      if (augment.masks_enabled()) {
        const auto seed = derive_seed(augment.augment_seed, "mask",
                                      {static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(idx[k])});
        rows.push_back(random_spec_augment(sample.x, augment, seed).values);
      } else {
        rows.push_back(sample.x.values);
      }
      labels.push_back(sample.y);
    }
    train_detail::mixup_rows(rows, labels, augment.mixup_alpha,
                             derive_seed(augment.augment_seed, "mixup",
                                         {static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(batch)}));
    Batch out;
    out.inputs = Tensor({static_cast<int>(idx.size()), 1, in[1], in[2]});
    for (std::size_t k = 0; k < rows.size(); ++k) std::copy(rows[k].begin(), rows[k].end(), out.inputs.data() + k * plane);
    out.targets = train_detail::targets_tensor(labels);
    return out;
  };
  result.history = fit(result.net, train_set.size(), make_batch, cfg, observer);
  return result;
}

/// Trains the MLP head on precomputed (N, D) embedding rows. Mixup, when
/// enabled, is applied to the vectors.
inline TrainResult train_mlp_on_vectors(const Tensor& vectors, const std::vector<SoftLabel>& labels,
                                        const TrainConfig& cfg, const AugmentConfig& augment = AugmentConfig::disabled(),
                                        const EpochObserver& observer = {}) {
  if (vectors.rank() != 2 || vectors.dim(0) == 0) throw ContractError("embedding set is empty");
  if (static_cast<std::size_t>(vectors.dim(0)) != labels.size()) throw ContractError("embedding/label count mismatch");
  const int dim = vectors.dim(1);
  TrainResult result{build_mlp_head(dim, derive_seed(cfg.seed, "init")), {}};
  auto make_batch = [&](std::span<const std::size_t> idx, int epoch, int batch) {
    std::vector<std::vector<float>> rows;
    std::vector<SoftLabel> ys;
    for (std::size_t i : idx) {
      rows.emplace_back(vectors.data() + i * dim, vectors.data() + (i + 1) * dim);
      ys.push_back(labels[i]);
    }
    train_detail::mixup_rows(rows, ys, augment.mixup_alpha,
                             derive_seed(augment.augment_seed, "mixup",
                                         {static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(batch)}));
    Batch out;
    out.inputs = Tensor({static_cast<int>(idx.size()), dim});
    for (std::size_t k = 0; k < rows.size(); ++k) std::copy(rows[k].begin(), rows[k].end(), out.inputs.data() + k * dim);
    out.targets = train_detail::targets_tensor(ys);
    return out;
  };
  result.history = fit(result.net, labels.size(), make_batch, cfg, observer);
  return result;
}

/// Embeds every training spectrogram once, then trains an MLP head whose
/// input width is the provider's dim().
inline TrainResult train_mlp_on_embeddings(const EmbeddingProvider& provider,
                                           const std::vector<LabeledSpectrogram>& train_set, const TrainConfig& cfg,
                                           const AugmentConfig& augment = AugmentConfig::disabled(),
                                           const EpochObserver& observer = {}) {
  if (train_set.empty()) throw ContractError("training set is empty");
  std::vector<Spectrogram> xs;
  std::vector<SoftLabel> ys;
  xs.reserve(train_set.size());
  for (const auto& s : train_set) {
    xs.push_back(s.x);
    ys.push_back(s.y);
  }
  const Tensor vectors = provider.embed_batch(xs);
  if (vectors.rank() != 2 || vectors.dim(1) != provider.dim()) {
    throw ContractError("provider " + provider.id() + " produced width " + std::to_string(vectors.dim(-1)) +
                        " but declares " + std::to_string(provider.dim()));
  }
  return train_mlp_on_vectors(vectors, ys, cfg, augment, observer);
}

}  // namespace respkit

#endif  // RESPKIT_TRAIN_HPP_
