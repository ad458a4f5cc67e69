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

#include "vslab/autodiff.hpp"

#include <malloc.h>

#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "vslab/error.hpp"
#include "vslab/ops.hpp"

namespace {

// Tensors are freed and reallocated on every step. Keep large blocks in the
// heap instead of handing them back to the kernel each time.
[[maybe_unused]] const bool kAllocatorTuned = [] {
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, std::numeric_limits<int>::max());
  return true;
}();

}  // namespace

namespace vslab::nn {

namespace {

thread_local bool g_grad_mode = true;

}  // namespace

std::size_t numel(const Shape& s) {
  return static_cast<std::size_t>(s[0]) * s[1] * s[2] * s[3];
}

std::string to_string(const Shape& s) {
  std::ostringstream os;
  os << '(' << s[0] << ", " << s[1] << ", " << s[2] << ", " << s[3] << ')';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(shape), data_(numel(shape), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(shape), data_(std::move(values)) {
  if (data_.size() != numel(shape_)) throw ShapeMismatch("value count does not match " + to_string(shape_));
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeMismatch("item() on tensor of shape " + to_string(shape_));
  return data_[0];
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Var Var::leaf(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return Var(std::move(n));
}

Var Var::constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = "constant";
  return Var(std::move(n));
}

const Tensor& Var::value() const { return node_->value; }

bool Var::requires_grad() const { return node_ && node_->requires_grad; }

bool grad_mode_enabled() { return g_grad_mode; }

NoGradGuard::NoGradGuard() : prev_(g_grad_mode) { g_grad_mode = false; }
NoGradGuard::~NoGradGuard() { g_grad_mode = prev_; }

Var make_result(Tensor value, std::vector<Var> inputs, BackwardFn backward, const char* op) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->op = op;
  if (g_grad_mode) {
    bool any = false;
    for (const Var& v : inputs) any = any || v.requires_grad();
    if (any) {
      n->requires_grad = true;
      n->inputs = std::move(inputs);
      n->backward = std::move(backward);
    }
  }
  return Var(std::move(n));
}

std::vector<Var> gradients(const Var& output, std::span<const Var> wrt, bool create_graph) {
  if (output.value().size() != 1) throw ShapeMismatch("gradients() needs a scalar output");

  // Reverse topological order via iterative post-order DFS.
  std::vector<Node*> order;
  std::unordered_map<Node*, std::shared_ptr<Node>> owners;
  {
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Var, std::size_t>> stack;
    if (output.requires_grad()) {
      stack.emplace_back(output, 0);
      seen.insert(output.node());
    }
    while (!stack.empty()) {
      auto& [v, next] = stack.back();
      Node* n = v.node();
      if (next < n->inputs.size()) {
        const Var& in = n->inputs[next++];
        if (in.requires_grad() && seen.insert(in.node()).second) stack.emplace_back(in, 0);
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }
  }

  std::unordered_map<Node*, Var> grads;
  bool prev = g_grad_mode;
  g_grad_mode = create_graph;
  try {
    if (output.requires_grad()) grads[output.node()] = Var::constant(Tensor::scalar(1.0));

    // The output Var for `self` must be rebuilt from raw nodes; keep a map
    // from node to a handle that shares ownership.
    std::unordered_map<Node*, Var> handles;
    handles[output.node()] = output;
    for (Node* n : order) {
      for (const Var& in : n->inputs) handles.emplace(in.node(), in);
    }

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* n = *it;
      auto git = grads.find(n);
      if (git == grads.end()) continue;
      if (n->inputs.empty()) continue;  // leaf
      if (!n->backward) {
        throw UnsupportedOp(std::string("no gradient defined for op '") + n->op + "'");
      }
      const Var g = git->second;
      std::vector<Var> in_grads = n->backward(handles.at(n), g);
      for (std::size_t i = 0; i < n->inputs.size(); ++i) {
        const Var& in = n->inputs[i];
        if (!in.requires_grad() || !in_grads[i].defined()) continue;
        auto [slot, inserted] = grads.try_emplace(in.node(), in_grads[i]);
        if (!inserted) slot->second = ops::add(slot->second, in_grads[i]);
      }
      if (!create_graph) grads.erase(git);
    }

    std::vector<Var> result;
    result.reserve(wrt.size());
    for (const Var& w : wrt) {
      auto it = grads.find(w.node());
      if (it == grads.end()) {
        result.push_back(Var::constant(Tensor(w.shape(), 0.0)));
      } else {
        result.push_back(it->second);
      }
    }
    g_grad_mode = prev;
    return result;
  } catch (...) {
    g_grad_mode = prev;
    throw;
  }
}

std::vector<Tensor> grad(std::span<const Tensor> params, const Closure& closure) {
  std::vector<Var> leaves;
  leaves.reserve(params.size());
  for (const Tensor& p : params) leaves.push_back(Var::leaf(p));
  const Var loss = closure(leaves);
  std::vector<Var> g = gradients(loss, leaves, false);
  std::vector<Tensor> out;
  out.reserve(g.size());
  for (Var& v : g) out.push_back(v.value());
  return out;
}

std::vector<Tensor> meta_grad(std::span<const Tensor> params, const Closure& inner,
                              const Closure& outer, const MetaGradOptions& opt) {
  if (!(opt.alpha >= 0.0)) throw InvalidArgument("alpha must be non-negative");
  std::vector<Var> leaves;
  leaves.reserve(params.size());
  for (const Tensor& p : params) leaves.push_back(Var::leaf(p));

  const Var inner_loss = inner(leaves);
  std::vector<Var> g = gradients(inner_loss, leaves, !opt.first_order);
  std::vector<Var> adapted;
  adapted.reserve(leaves.size());
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    adapted.push_back(ops::sub(leaves[i], ops::scale(g[i], opt.alpha)));
  }
  const Var outer_loss = outer(adapted);
  std::vector<Var> mg = gradients(outer_loss, leaves, false);
  std::vector<Tensor> out;
  out.reserve(mg.size());
  for (Var& v : mg) out.push_back(v.value());
  return out;
}

}  // namespace vslab::nn
