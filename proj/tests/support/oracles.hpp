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


// Independent reference computations shared by the unit and acceptance tests.

#ifndef RESPKIT_TESTS_SUPPORT_ORACLES_HPP_
#define RESPKIT_TESTS_SUPPORT_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "respkit/respkit.hpp"
#include "support/fixtures.hpp"

namespace respkit::testing {

/// Random point on the 4-simplex; with `sparse`, some entries are zero.
inline std::array<double, 4> random_simplex(std::mt19937_64& rng, bool sparse = false) {
  std::exponential_distribution<double> e(1.0);
  std::bernoulli_distribution drop(0.3);
  std::array<double, 4> p{};
  double sum = 0;
  for (auto& v : p) sum += (v = sparse && drop(rng) ? 0.0 : e(rng));
  if (sum == 0) p[rng() % 4] = sum = 1.0;
  for (auto& v : p) v /= sum;
  return p;
}

/// Row-by-row, class-by-class KL with the 1e-8 prediction floor, written
/// without sharing code with the library.
inline double naive_kl_loss(const std::vector<std::array<double, 4>>& y, const std::vector<std::array<double, 4>>& y_hat,
                            double theta_sq_norm, double lambda, bool mean) {
  double total = 0;
  for (std::size_t n = 0; n < y.size(); ++n) {
    double row = 0;
    for (int c = 0; c < 4; ++c) {
      if (y[n][c] == 0) continue;
      const double q = y_hat[n][c] < 1e-8 ? 1e-8 : y_hat[n][c];
      row += y[n][c] * std::log(y[n][c]) - y[n][c] * std::log(q);
    }
    total += row;
  }
  if (mean) total /= static_cast<double>(y.size());
  return total + lambda * theta_sq_norm / 2;
}

/// Largest relative error between autograd and central-difference gradients
/// of the full objective (batch-mean KL + L2) on a 4 -> 3 -> 4 ReLU head.
inline double tiny_head_gradient_error(std::uint64_t seed, double lambda = 0.01) {
  using TD = BasicTensor<double>;
  using VD = ag::Var<double>;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  auto random = [&](Shape s) {
    TD t(std::move(s));
    for (auto& v : t.values()) v = nd(rng);
    return t;
  };
  const int n = 5;
  const TD x = random({n, 4});
  std::vector<TD> theta = {random({3, 4}), random({3}), random({4, 3}), random({4})};
  TD y({n, 4});
  std::vector<SoftLabel> labels(n);
  for (int i = 0; i < n; ++i) {
    labels[i].probs = random_simplex(rng, true);
    for (int c = 0; c < 4; ++c) y.at(i, c) = labels[i].probs[c];
  }
  auto sq_norm = [](const std::vector<TD>& th) {
    double s = 0;
    for (const auto& t : th) for (double v : t.values()) s += v * v;
    return s;
  };
  auto forward = [&](const std::vector<VD>& p) {
    return ag::linear(ag::relu(ag::linear(VD(x), p[0], p[1])), p[2], p[3]);
  };
  // Objective value through the library's kl_loss on softmax outputs.
  auto objective = [&](const std::vector<TD>& th) {
    ag::NoGradGuard guard;
    std::vector<VD> p(th.begin(), th.end());
    const VD probs = ag::softmax(forward(p));
    std::vector<std::array<double, 4>> q(n);
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < 4; ++c) q[i][c] = probs.value().at(i, c);
    }
    return kl_loss(labels, q, sq_norm(th), lambda, Reduction::kMean);
  };
  std::vector<VD> vars;
  for (const auto& t : theta) vars.emplace_back(t, true);
  ag::backward(ag::softmax_kl_divergence(forward(vars), y, Reduction::kMean));
  double worst = 0;
  const double h = 1e-6;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    for (std::size_t i = 0; i < theta[k].size(); ++i) {
      auto plus = theta, minus = theta;
      plus[k][i] += h;
      minus[k][i] -= h;
      const double numeric = (objective(plus) - objective(minus)) / (2 * h);
      const double analytic = vars[k].grad()[i] + lambda * theta[k][i];
      const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-3});
      worst = std::max(worst, std::abs(analytic - numeric) / scale);
    }
  }
  return worst;
}

inline double eval_kl(const Network& net, const Tensor& inputs, const std::vector<SoftLabel>& labels) {
  const Tensor p = net.predict(inputs);
  std::vector<std::array<double, 4>> q(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (int c = 0; c < 4; ++c) q[i][c] = p.at(static_cast<int>(i), c);
  }
  return kl_loss(labels, q, 0, 0, Reduction::kMean);
}

struct OverfitResult {
  std::size_t steps = 0;
  double kl = 0;
};

/// Trains Inc-01 on the blob set in mini-batches of 5, checking the
/// evaluation-mode training KL after every epoch and stopping once it drops
/// below `target` or `max_steps` is reached.
inline OverfitResult overfit_inc01(std::size_t max_steps = 200, double target = 0.1, std::uint64_t seed = 1) {
  const auto set = blob_dataset(20, seed);
  const Tensor inputs = stack_spectrograms(set);
  std::vector<SoftLabel> labels;
  for (const auto& s : set) labels.push_back(s.y);
  TrainConfig cfg;
  cfg.batch_size = 5;
  cfg.learning_rate = 1e-3;
  cfg.seed = seed;
  cfg.epochs = static_cast<int>(max_steps / 4);
  Network net = build_inception_net("Inc-01", derive_seed(seed, "init"));
  const std::size_t plane = set.front().x.values.size();
  auto batch = [&](std::span<const std::size_t> idx, int, int) {
    Batch b{Tensor({static_cast<int>(idx.size()), 1, 124, 154}), Tensor({static_cast<int>(idx.size()), 4})};
    for (std::size_t k = 0; k < idx.size(); ++k) {
      std::copy(set[idx[k]].x.values.begin(), set[idx[k]].x.values.end(), b.inputs.data() + k * plane);
      for (int c = 0; c < 4; ++c) b.targets.at(static_cast<int>(k), c) = static_cast<float>(labels[idx[k]].probs[c]);
    }
    return b;
  };
  OverfitResult out;
  fit(net, set.size(), batch, cfg, [&](const EpochStats& e) {
    out.steps += e.steps;
    out.kl = eval_kl(net, inputs, labels);
    return out.kl >= target;
  });
  return out;
}

struct SeparableResult {
  int epochs = 0;
  int correct = 0;
  int total = 0;
};

/// Trains the MLP head on separable embeddings with the default TrainConfig,
/// stopping at the first epoch after which every training row is classified
/// correctly.
inline SeparableResult mlp_until_separated(int max_epochs = 100, int dim = 64, int per_class = 10,
                                           std::uint64_t seed = 3) {
  std::vector<SoftLabel> labels;
  const Tensor x = separable_embeddings(dim, per_class, labels, seed);
  TrainConfig cfg;
  cfg.epochs = max_epochs;
  cfg.seed = seed;
  Network net = build_mlp_head(dim, derive_seed(seed, "init"));
  auto batch = [&](std::span<const std::size_t> idx, int, int) {
    Batch b{Tensor({static_cast<int>(idx.size()), dim}), Tensor({static_cast<int>(idx.size()), 4})};
    for (std::size_t k = 0; k < idx.size(); ++k) {
      std::copy(x.data() + idx[k] * dim, x.data() + (idx[k] + 1) * dim, b.inputs.data() + k * dim);
      for (int c = 0; c < 4; ++c) b.targets.at(static_cast<int>(k), c) = static_cast<float>(labels[idx[k]].probs[c]);
    }
    return b;
  };
  SeparableResult out;
  out.total = x.dim(0);
  fit(net, labels.size(), batch, cfg, [&](const EpochStats& e) {
    out.epochs = e.epoch;
    const Tensor p = net.predict(x);
    out.correct = 0;
    for (int i = 0; i < out.total; ++i) out.correct += argmax_row(p, i) == i % 4;
    return out.correct < out.total;
  });
  return out;
}

}  // namespace respkit::testing

#endif  // RESPKIT_TESTS_SUPPORT_ORACLES_HPP_
