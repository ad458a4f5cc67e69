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

#include "vslab/autodiff.hpp"

/// Differentiable tensor operations. Elementwise binary ops require equal
/// shapes; broadcasting is explicit through the expand/sum pairs.
namespace vslab::nn::ops {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var neg(const Var& x);
Var scale(const Var& x, double s);
Var add_scalar(const Var& x, double s);

Var exp(const Var& x);
/// Natural log; the gradient uses safe_recip, so log(0) has zero slope.
Var log(const Var& x);
Var relu(const Var& x);
/// sqrt with a zero subgradient at 0.
Var safe_sqrt(const Var& x);
/// 1/x, defined as 0 at x == 0.
Var safe_recip(const Var& x);
Var rsqrt(const Var& x);
/// Rounds to nearest integer; has no gradient.
Var round(const Var& x);

/// Sum of all elements, shape (1,1,1,1).
Var sum_all(const Var& x);
Var mean_all(const Var& x);
/// Broadcasts a scalar to `shape`.
Var broadcast_scalar(const Var& s, const Shape& shape);

/// (N,C,H,W) -> (N,C,1,1) and back.
Var spatial_sum(const Var& x);
Var spatial_mean(const Var& x);
Var spatial_expand(const Var& x, int h, int w);

/// (N,C,H,W) -> (N,1,H,W) and back.
Var channel_sum(const Var& x);
Var channel_expand(const Var& x, int c);

/// (N,C,H,W) -> (1,C,1,1) summing over N, H, W; and its broadcast.
Var sum_to_channel(const Var& x);
Var expand_channel(const Var& b, const Shape& shape);

Var reshape(const Var& x, const Shape& shape);
/// Concatenation and slicing along axis 0 (batch) or 1 (channel).
Var concat(const Var& a, const Var& b, int axis);
Var slice(const Var& x, int axis, int begin, int len);
/// Zero tensor of extent `total` along `axis` with x placed at `begin`.
Var embed(const Var& x, int axis, int begin, int total);
/// Swaps the first two axes.
Var permute01(const Var& x);

/// op(A) * op(B) where A and B are viewed as (dim0, rest) matrices. The
/// result has shape (rows, cols, 1, 1).
Var matmul(const Var& a, const Var& b, bool trans_a = false, bool trans_b = false);

/// Patch extraction for a square kernel; result (C*k*k, N*Ho*Wo, 1, 1).
Var im2col(const Var& x, int k, int stride, int pad);
/// Adjoint of im2col: scatters columns back onto an image of `in_shape`.
Var col2im(const Var& cols, const Shape& in_shape, int k, int stride, int pad);

Var detach(const Var& x);

// Layers built from the primitives above.

/// x (N,Ci,H,W), w (Co,Ci,k,k), b (1,Co,1,1).
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
/// x (N,F,1,1), w (O,F,1,1), b (1,O,1,1) -> (N,O,1,1).
Var linear(const Var& x, const Var& w, const Var& b);
/// Per-sample, per-channel zero mean and unit variance over H x W.
Var channel_standardize(const Var& x, double eps = 1e-5);

}  // namespace vslab::nn::ops
