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

#include "vslab/optim.hpp"

#include <cmath>

#include "vslab/error.hpp"

namespace vslab::nn {

AdamW::AdamW(std::span<const Tensor> params, Options opt) : opt_(opt), t_(params.size(), 0) {
  for (const Tensor& p : params) {
    m_.emplace_back(p.shape(), 0.0);
    v_.emplace_back(p.shape(), 0.0);
  }
}

void AdamW::step(std::span<Tensor> params, std::span<const Tensor> grads, std::span<const std::size_t> which,
                 double lr) {
  if (params.size() != m_.size() || grads.size() != m_.size()) throw LengthMismatch("optimizer state size");
  for (std::size_t i : which) {
    Tensor& p = params[i];
    const Tensor& g = grads[i];
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    const long t = ++t_[i];
    const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t));
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = opt_.beta1 * m[k] + (1.0 - opt_.beta1) * g[k];
      v[k] = opt_.beta2 * v[k] + (1.0 - opt_.beta2) * g[k] * g[k];
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      p[k] -= lr * (mhat / (std::sqrt(vhat) + opt_.eps) + opt_.weight_decay * p[k]);
    }
  }
}

double clip_global_norm(std::span<Tensor> grads, double max_norm) {
  double sq = 0.0;
  for (const Tensor& g : grads) {
    for (double v : g.values()) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && std::isfinite(norm)) {
    const double s = max_norm / norm;
    for (Tensor& g : grads) {
      for (double& v : g.values()) v *= s;
    }
  }
  return norm;
}

}  // namespace vslab::nn
