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
#include "vslab/dataset.hpp"

namespace vslab::nn {

/// Weight of the rotation term in the pose loss.
inline constexpr double kPoseBeta = 0.2;

/// |t_hat - t| + beta |r_hat - r| for one 6-vector (translation, theta-u).
double pose_loss(const Label& pred, const Label& label, double beta = kPoseBeta);

/// Batch mean of the pose loss. pred and label are (N, 6, 1, 1).
Var pose_loss(const Var& pred, const Var& label, double beta = kPoseBeta);

/// Labels as a constant (N, 6, 1, 1) tensor.
Var label_tensor(std::span<const Sample* const> samples);

/// Softmax cross-entropy of 2-way logits against origin, one example.
double cls_loss(double logit_lsd, double logit_ssd, DatasetKind origin);

/// Batch mean softmax cross-entropy. logits are (N, 2, 1, 1); class index is
/// the DatasetKind value.
Var cls_loss(const Var& logits, std::span<const DatasetKind> origins);

/// sum_i L_i exp(-s_i) + s_i. `s_hat` has shape (K, 1, 1, 1).
Var loss_autobalance(std::span<const Var> losses, const Var& s_hat);
double loss_autobalance(std::span<const double> losses, std::span<const double> s_hat);

/// Softmax of 2 logits.
std::array<double, 2> softmax2(double a, double b);

}  // namespace vslab::nn
