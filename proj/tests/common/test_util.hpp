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

#pragma once

#include <algorithm>
#include <cmath>
#include <list>
#include <tuple>
#include <span>
#include <string>
#include <vector>

#include "vslab/autodiff.hpp"
#include "vslab/dataset.hpp"
#include "vslab/rng.hpp"
#include "vslab/train.hpp"

namespace vslab::testing {

/// |a - n| <= rtol * max(|a|, |n|) + atol.
inline bool close(double a, double n, double rtol, double atol) {
  return std::abs(a - n) <= rtol * std::max(std::abs(a), std::abs(n)) + atol;
}

inline nn::Tensor random_tensor(nn::Shape s, Rng rng, double lo = -1.0, double hi = 1.0) {
  nn::Tensor t(s);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

struct FdReport {
  double worst_excess = 0.0;  // max of |a-n| - tolerance, <= 0 when all pass
  double worst_rel = 0.0;     // |a-n| / max(|a|, |n|) at entries above atol
  std::string where;
};

struct FdOptions {
  double h = 1e-5;
  double rtol = 1e-5;
  double atol = 1e-10;
  /// > 0: check that many random coordinates per tensor instead of all.
  int coords_per_tensor = 0;
  std::uint64_t seed = 0;
  /// Evaluate f on trainable leaves, for closures that take gradients
  /// themselves.
  bool needs_graph = false;
};

/// Compares the analytic gradient of f at params with central differences.
/// The absolute tolerance never drops below the rounding noise of the
/// difference quotient, 16 eps |f| / h.
inline FdReport fd_check(std::span<const nn::Tensor> params, const nn::Closure& f, const FdOptions& o = {}) {
  const double h = o.h;
  const double rtol = o.rtol;
  const std::vector<nn::Tensor> analytic = nn::grad(params, f);
  auto eval = [&](const std::vector<nn::Tensor>& p) {
    std::vector<nn::Var> vars;
    if (o.needs_graph) {
      for (const nn::Tensor& t : p) vars.push_back(nn::Var::leaf(t));
      return f(vars).item();
    }
    nn::NoGradGuard guard;
    for (const nn::Tensor& t : p) vars.push_back(nn::Var::constant(t));
    return f(vars).item();
  };
  std::vector<nn::Tensor> p(params.begin(), params.end());
  const double atol = std::max(o.atol, 16.0 * 2.220446049250313e-16 * std::abs(eval(p)) / h);
  const int coords_per_tensor = o.coords_per_tensor;
  FdReport r;
  r.worst_excess = -1.0;
  Rng rng = Rng(o.seed).split("fd");
  for (std::size_t i = 0; i < p.size(); ++i) {
    std::vector<std::size_t> coords;
    if (coords_per_tensor <= 0 || static_cast<std::size_t>(coords_per_tensor) >= p[i].size()) {
      for (std::size_t k = 0; k < p[i].size(); ++k) coords.push_back(k);
    } else {
      for (int c = 0; c < coords_per_tensor; ++c) coords.push_back(rng.below(p[i].size()));
    }
    for (std::size_t k : coords) {
      const double orig = p[i][k];
      p[i][k] = orig + h;
      const double fp = eval(p);
      p[i][k] = orig - h;
      const double fm = eval(p);
      p[i][k] = orig;
      const double n = (fp - fm) / (2.0 * h);
      const double a = analytic[i][k];
      const double tol = rtol * std::max(std::abs(a), std::abs(n)) + atol;
      const double excess = std::abs(a - n) - tol;
      if (excess > r.worst_excess) {
        r.worst_excess = excess;
        r.where = "tensor " + std::to_string(i) + " entry " + std::to_string(k) + ": analytic " +
                  std::to_string(a) + " numeric " + std::to_string(n);
      }
      if (std::abs(a - n) > atol) {
        r.worst_rel = std::max(r.worst_rel, std::abs(a - n) / std::max(std::abs(a), std::abs(n)));
      }
    }
  }
  return r;
}

/// Small rendered datasets for training tests.
inline const Dataset& tiny_dataset(DatasetKind kind, std::size_t n = 24, int size = 16) {
  static std::list<std::pair<std::tuple<DatasetKind, std::size_t, int>, Dataset>> cache;
  for (auto& [key, d] : cache) {
    if (key == std::tuple{kind, n, size}) return d;
  }
  DatasetOptions opt;
  opt.intr = CameraIntrinsics::desk(size);
  cache.emplace_back(std::tuple{kind, n, size}, generate_dataset(kind, n, 7, DrConfig{}, opt));
  return cache.back().second;
}

inline train::TrainConfig tiny_config() {
  train::TrainConfig c;
  c.learning_rate = 1e-3;
  c.fine_learning_rate = 1e-4;
  c.epochs_main = 2;
  c.epochs_fine = 1;
  c.batch_size = 8;
  c.net.widths = {4, 4, 8, 8};
  c.net.head_hidden = 8;
  return c;
}

inline train::MamlConfig tiny_maml() {
  train::MamlConfig m;
  m.iterations = 3;
  m.k_shot = 2;
  m.log_every = 2;
  return m;
}

}  // namespace vslab::testing
