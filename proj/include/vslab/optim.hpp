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

#include <span>
#include <vector>

#include "vslab/autodiff.hpp"

namespace vslab::nn {

/// Adam with decoupled weight decay. State is kept per tensor index, so a
/// trainer may step any subset of a fixed parameter list.
class AdamW {
 public:
  struct Options {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
  };

  AdamW(std::span<const Tensor> params, Options opt);

  /// Updates params[i] for every i in `which` using grads[i].
  void step(std::span<Tensor> params, std::span<const Tensor> grads, std::span<const std::size_t> which,
            double lr);

 private:
  Options opt_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::vector<long> t_;
};

/// Scales grads in place so their joint L2 norm is at most max_norm; returns
/// the norm before scaling.
double clip_global_norm(std::span<Tensor> grads, double max_norm);

}  // namespace vslab::nn
