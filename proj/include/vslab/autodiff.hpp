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

#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace vslab::nn {

/// Every tensor is 4-D (N, C, H, W); scalars are (1, 1, 1, 1) and matrices
/// are (rows, cols, 1, 1).
using Shape = std::array<int, 4>;

std::size_t numel(const Shape& s);
std::string to_string(const Shape& s);

/// Dense float64 tensor with value semantics.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor({1, 1, 1, 1}, v); }

  [[nodiscard]] const Shape& shape() const { return shape_; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }
  [[nodiscard]] int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }

  double* data() { return data_.data(); }
  [[nodiscard]] const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  [[nodiscard]] const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(int n, int c, int h, int w) { return data_[offset(n, c, h, w)]; }
  [[nodiscard]] double at(int n, int c, int h, int w) const { return data_[offset(n, c, h, w)]; }

  [[nodiscard]] double item() const;
  [[nodiscard]] bool all_finite() const;

  bool operator==(const Tensor&) const = default;

 private:
  [[nodiscard]] std::size_t offset(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
  }
  Shape shape_{0, 0, 0, 0};
  std::vector<double> data_;
};

class Var;

struct Node;

/// Receives the node's own output and the incoming gradient and returns one
/// gradient per input (null Var for inputs that need none). Backward rules
/// are written with differentiable ops, so gradients can be differentiated
/// again when the graph is kept.
using BackwardFn = std::function<std::vector<Var>(const Var& self, const Var& grad)>;

/// Handle to a node of the computation graph.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  /// Trainable leaf.
  static Var leaf(Tensor value);
  static Var constant(Tensor value);

  [[nodiscard]] const Tensor& value() const;
  [[nodiscard]] const Shape& shape() const { return value().shape(); }
  [[nodiscard]] bool requires_grad() const;
  [[nodiscard]] bool defined() const { return node_ != nullptr; }
  [[nodiscard]] Node* node() const { return node_.get(); }
  [[nodiscard]] double item() const { return value().item(); }

 private:
  std::shared_ptr<Node> node_;
};

struct Node {
  Tensor value;
  bool requires_grad = false;
  std::vector<Var> inputs;
  BackwardFn backward;  // empty for leaves and non-differentiable ops
  const char* op = "leaf";
};

/// Creates the output node of an op. Inputs and backward are recorded only
/// when gradient recording is on and some input requires a gradient.
/// Passing an empty backward marks the op as non-differentiable.
Var make_result(Tensor value, std::vector<Var> inputs, BackwardFn backward, const char* op);

/// Thread-local switch for graph recording.
bool grad_mode_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

/// Reverse-mode gradients of a scalar `output` with respect to `wrt`. With
/// `create_graph` the returned gradients are themselves differentiable.
/// Throws UnsupportedOp when the path to an input crosses a
/// non-differentiable op.
std::vector<Var> gradients(const Var& output, std::span<const Var> wrt, bool create_graph = false);

using Closure = std::function<Var(std::span<const Var>)>;

/// Gradient of closure(params) at `params`, congruent to `params`.
std::vector<Tensor> grad(std::span<const Tensor> params, const Closure& closure);

struct MetaGradOptions {
  double alpha = 0.01;
  bool first_order = false;
};

/// Gradient with respect to theta of outer(theta - alpha * grad inner(theta)).
/// The exact mode differentiates through the inner gradient; first-order mode
/// treats the inner gradient as a constant.
std::vector<Tensor> meta_grad(std::span<const Tensor> params, const Closure& inner,
                              const Closure& outer, const MetaGradOptions& opt);

}  // namespace vslab::nn
