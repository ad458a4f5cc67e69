// Copyright 2026 The vslab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "vslab/losses.hpp"

#include <cmath>

#include "vslab/error.hpp"
#include "vslab/ops.hpp"

namespace vslab::nn {

double pose_loss(const Label& pred, const Label& label, double beta) {
  if (!(beta > 0.0)) throw InvalidArgument("beta must be positive");
  double t = 0.0, r = 0.0;
  for (int i = 0; i < 3; ++i) {
    t += (pred[i] - label[i]) * (pred[i] - label[i]);
    r += (pred[i + 3] - label[i + 3]) * (pred[i + 3] - label[i + 3]);
  }
  return std::sqrt(t) + beta * std::sqrt(r);
}

Var pose_loss(const Var& pred, const Var& label, double beta) {
  if (!(beta > 0.0)) throw InvalidArgument("beta must be positive");
  if (pred.shape()[1] != 6) throw ShapeMismatch("pose prediction must have 6 channels");
  const Var d = ops::sub(pred, label);
  const Var dt = ops::slice(d, 1, 0, 3);
  const Var dr = ops::slice(d, 1, 3, 3);
  const Var nt = ops::safe_sqrt(ops::channel_sum(ops::mul(dt, dt)));
  const Var nr = ops::safe_sqrt(ops::channel_sum(ops::mul(dr, dr)));
  return ops::mean_all(ops::add(nt, ops::scale(nr, beta)));
}

Var label_tensor(std::span<const Sample* const> samples) {
  const int n = static_cast<int>(samples.size());
  Tensor t({n, 6, 1, 1});
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < 6; ++k) t.at(i, k, 0, 0) = samples[static_cast<std::size_t>(i)]->label[static_cast<std::size_t>(k)];
  }
  return Var::constant(std::move(t));
}

std::array<double, 2> softmax2(double a, double b) {
  const double m = std::max(a, b);
  const double ea = std::exp(a - m);
  const double eb = std::exp(b - m);
  return {ea / (ea + eb), eb / (ea + eb)};
}

double cls_loss(double logit_lsd, double logit_ssd, DatasetKind origin) {
  const double m = std::max(logit_lsd, logit_ssd);
  const double lse = m + std::log(std::exp(logit_lsd - m) + std::exp(logit_ssd - m));
  return lse - (origin == DatasetKind::LSD ? logit_lsd : logit_ssd);
}

Var cls_loss(const Var& logits, std::span<const DatasetKind> origins) {
  const Shape s = logits.shape();
  if (s[1] != 2 || s[2] != 1 || s[3] != 1) throw ShapeMismatch("logits must be (N, 2, 1, 1)");
  if (static_cast<std::size_t>(s[0]) != origins.size()) throw LengthMismatch("one origin per logit row");
  Tensor max_t({s[0], 1, 1, 1});
  Tensor onehot({s[0], 2, 1, 1});
  for (int i = 0; i < s[0]; ++i) {
    max_t.at(i, 0, 0, 0) = std::max(logits.value().at(i, 0, 0, 0), logits.value().at(i, 1, 0, 0));
    onehot.at(i, static_cast<int>(origins[static_cast<std::size_t>(i)]), 0, 0) = 1.0;
  }
  // The row max only shifts for stability; it is held constant.
  const Var z = ops::sub(logits, ops::channel_expand(Var::constant(std::move(max_t)), 2));
  const Var lse = ops::log(ops::channel_sum(ops::exp(z)));
  const Var picked = ops::channel_sum(ops::mul(z, Var::constant(std::move(onehot))));
  return ops::mean_all(ops::sub(lse, picked));
}

Var loss_autobalance(std::span<const Var> losses, const Var& s_hat) {
  if (static_cast<std::size_t>(s_hat.shape()[0]) != losses.size() || s_hat.value().size() != losses.size()) {
    throw LengthMismatch("one balance scale per loss term");
  }
  Var total;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    const Var s = ops::slice(s_hat, 0, static_cast<int>(i), 1);
    const Var term = ops::add(ops::mul(losses[i], ops::exp(ops::neg(s))), s);
    total = total.defined() ? ops::add(total, term) : term;
  }
  if (!total.defined()) throw LengthMismatch("no loss terms");
  return total;
}

double loss_autobalance(std::span<const double> losses, std::span<const double> s_hat) {
  if (losses.size() != s_hat.size()) throw LengthMismatch("one balance scale per loss term");
  double total = 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i) total += losses[i] * std::exp(-s_hat[i]) + s_hat[i];
  return total;
}

}  // namespace vslab::nn
