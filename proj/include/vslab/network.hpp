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
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vslab/autodiff.hpp"
#include "vslab/dataset.hpp"

namespace vslab::nn {

/// Feature-encoder wiring.
///   Single:       both images stacked channel-wise, one conv stack.
///   Siamese:      one shared conv stack per image, pooled features concatenated.
///   SharedConcat: shared early layers per image, depth-wise concatenation,
///                 then joint layers.
enum class EncoderVariant : std::uint8_t { Single = 0, Siamese = 1, SharedConcat = 2 };

enum class HeadId : std::uint8_t { RegLSD = 0, RegSSD = 1, Cls = 2 };

enum class ParamGroup : std::uint8_t { Trunk = 0, HeadLSD = 1, HeadSSD = 2, HeadCls = 3 };

inline constexpr std::array<HeadId, 3> kAllHeads{HeadId::RegLSD, HeadId::RegSSD, HeadId::Cls};

std::string_view to_string(EncoderVariant v);
std::string_view to_string(HeadId h);
ParamGroup group_of(HeadId h);

struct NetConfig {
  EncoderVariant variant = EncoderVariant::SharedConcat;
  int image_size = 64;
  std::array<int, 4> widths{8, 16, 32, 128};  // last width is the pooled feature size
  int head_hidden = 64;

  [[nodiscard]] int feature_dim() const;
  bool operator==(const NetConfig&) const = default;
};

struct ParamSpec {
  std::string name;
  Shape shape;
  ParamGroup group;
};

/// Parameter layout for a configuration, in a fixed order.
std::vector<ParamSpec> param_specs(const NetConfig& cfg);
/// Total scalar parameter count of the given groups.
std::size_t param_count(const NetConfig& cfg, std::span<const ParamGroup> groups);

/// Per-channel input normalization computed over a training set.
struct NormStats {
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> stddev{1.0, 1.0, 1.0};
  bool operator==(const NormStats&) const = default;
};

/// Learnable loss-balance scales, one per balanced term.
struct LossBalance {
  std::vector<double> s_hat;
  bool operator==(const LossBalance&) const = default;
};

/// Trainable state of one network: parameter tensors in param_specs order,
/// the heads that are present, normalization statistics and balance scales.
struct ModelParams {
  NetConfig config;
  std::vector<Tensor> values;
  std::uint8_t present = 0;  // bit i set when ParamGroup i is stored
  NormStats norm;
  LossBalance balance;

  [[nodiscard]] bool has(ParamGroup g) const { return (present >> static_cast<int>(g)) & 1u; }
  void set_present(ParamGroup g) { present |= static_cast<std::uint8_t>(1u << static_cast<int>(g)); }
  [[nodiscard]] std::vector<std::size_t> indices(ParamGroup g) const;
  [[nodiscard]] std::size_t count() const;

  [[nodiscard]] std::vector<double> flatten() const;
  void unflatten(std::span<const double> flat);

  bool operator==(const ModelParams&) const = default;
};

/// Fan-in scaled uniform weights and zero biases. The trunk is always
/// present, heads as listed; absent heads are all zeros, as after loading.
ModelParams init_params(const NetConfig& cfg, std::uint64_t seed, std::span<const HeadId> heads);

/// Sets the final affine layer of a regression head to zero.
void zero_final_layer(ModelParams& p, HeadId h);

/// Normalized image pairs, each (N, 3, S, S).
struct PairBatch {
  Tensor reference;
  Tensor current;
  [[nodiscard]] int size() const { return reference.dim(0); }
};

PairBatch make_batch(std::span<const Sample* const> samples, const NormStats& norm);
PairBatch make_batch(const Image& reference, const Image& current, const NormStats& norm);

/// Mean and standard deviation of each channel over both images of all samples.
NormStats compute_norm_stats(std::span<const Sample* const> samples);

/// Pooled feature vector (N, F, 1, 1).
Var encode(const NetConfig& cfg, std::span<const Var> params, const PairBatch& batch);
Var head_output(const NetConfig& cfg, std::span<const Var> params, const Var& features, HeadId head);

/// Network output for `head`: (N, 6, 1, 1) for regression heads, (N, 2, 1, 1)
/// logits for Cls. `params` follow param_specs(cfg) order and may be any
/// differentiable expressions.
Var forward(const NetConfig& cfg, std::span<const Var> params, const PairBatch& batch, HeadId head);

/// Convenience: leaves as constants, no graph recorded.
Tensor predict(const ModelParams& p, const PairBatch& batch, HeadId head);

}  // namespace vslab::nn
