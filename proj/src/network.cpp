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

#include "vslab/network.hpp"

#include <cmath>

#include "vslab/error.hpp"
#include "vslab/ops.hpp"
#include "vslab/rng.hpp"

namespace vslab::nn {

namespace {

constexpr int kKernel = 3;
constexpr int kStride = 2;
constexpr int kPad = 1;
constexpr int kConvLayers = 4;
// Layers before this index run on each image separately in SharedConcat.
constexpr int kSharedConcatSplit = 2;

std::array<int, 4> conv_inputs(const NetConfig& cfg) {
  const auto& w = cfg.widths;
  switch (cfg.variant) {
    case EncoderVariant::Single: return {6, w[0], w[1], w[2]};
    case EncoderVariant::Siamese: return {3, w[0], w[1], w[2]};
    case EncoderVariant::SharedConcat: break;
  }
  std::array<int, 4> in{3, w[0], w[1], w[2]};
  in[kSharedConcatSplit] *= 2;
  return in;
}


std::size_t head_first(HeadId h) {
  const std::size_t trunk = 2 * kConvLayers;
  switch (h) {
    case HeadId::RegLSD: return trunk;
    case HeadId::RegSSD: return trunk + 4;
    case HeadId::Cls: return trunk + 8;
  }
  return trunk;
}

Var conv_block(const Var& x, std::span<const Var> params, int layer, bool standardize) {
  Var y = ops::conv2d(x, params[2 * layer], params[2 * layer + 1], kStride, kPad);
  if (standardize) y = ops::channel_standardize(y);
  return ops::relu(y);
}

// The last conv layer feeds global pooling directly; standardizing it would
// erase the per-channel means the pooled features are made of.
Var conv_stack(const Var& x, std::span<const Var> params, int from, int to) {
  Var y = x;
  for (int l = from; l < to; ++l) y = conv_block(y, params, l, l + 1 < kConvLayers);
  return y;
}

void fill_uniform(Tensor& t, double bound, Rng rng) {
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
}

}  // namespace

std::string_view to_string(EncoderVariant v) {
  switch (v) {
    case EncoderVariant::Single: return "single";
    case EncoderVariant::Siamese: return "siamese";
    case EncoderVariant::SharedConcat: return "shared-concat";
  }
  return "?";
}

std::string_view to_string(HeadId h) {
  switch (h) {
    case HeadId::RegLSD: return "lsd";
    case HeadId::RegSSD: return "ssd";
    case HeadId::Cls: return "cls";
  }
  return "?";
}

ParamGroup group_of(HeadId h) {
  switch (h) {
    case HeadId::RegLSD: return ParamGroup::HeadLSD;
    case HeadId::RegSSD: return ParamGroup::HeadSSD;
    case HeadId::Cls: return ParamGroup::HeadCls;
  }
  return ParamGroup::Trunk;
}

int NetConfig::feature_dim() const {
  return variant == EncoderVariant::Siamese ? 2 * widths[3] : widths[3];
}

std::vector<ParamSpec> param_specs(const NetConfig& cfg) {
  std::vector<ParamSpec> specs;
  const auto in = conv_inputs(cfg);
  for (int l = 0; l < kConvLayers; ++l) {
    const std::string base = "trunk.conv" + std::to_string(l + 1);
    specs.push_back({base + ".weight", {cfg.widths[l], in[l], kKernel, kKernel}, ParamGroup::Trunk});
    specs.push_back({base + ".bias", {1, cfg.widths[l], 1, 1}, ParamGroup::Trunk});
  }
  const int f = cfg.feature_dim();
  for (auto [name, group] : {std::pair{"head_lsd", ParamGroup::HeadLSD}, std::pair{"head_ssd", ParamGroup::HeadSSD}}) {
    const std::string base = name;
    specs.push_back({base + ".fc1.weight", {cfg.head_hidden, f, 1, 1}, group});
    specs.push_back({base + ".fc1.bias", {1, cfg.head_hidden, 1, 1}, group});
    specs.push_back({base + ".fc2.weight", {6, cfg.head_hidden, 1, 1}, group});
    specs.push_back({base + ".fc2.bias", {1, 6, 1, 1}, group});
  }
  specs.push_back({"head_cls.fc.weight", {2, f, 1, 1}, ParamGroup::HeadCls});
  specs.push_back({"head_cls.fc.bias", {1, 2, 1, 1}, ParamGroup::HeadCls});
  return specs;
}

std::size_t param_count(const NetConfig& cfg, std::span<const ParamGroup> groups) {
  std::size_t n = 0;
  for (const ParamSpec& s : param_specs(cfg)) {
    for (ParamGroup g : groups) {
      if (s.group == g) n += numel(s.shape);
    }
  }
  return n;
}

std::vector<std::size_t> ModelParams::indices(ParamGroup g) const {
  std::vector<std::size_t> out;
  const auto specs = param_specs(config);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (specs[i].group == g) out.push_back(i);
  }
  return out;
}

std::size_t ModelParams::count() const {
  std::size_t n = 0;
  for (const Tensor& t : values) n += t.size();
  return n;
}

std::vector<double> ModelParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(count());
  for (const Tensor& t : values) flat.insert(flat.end(), t.values().begin(), t.values().end());
  return flat;
}

void ModelParams::unflatten(std::span<const double> flat) {
  if (flat.size() != count()) throw LengthMismatch("flat parameter vector has wrong length");
  std::size_t off = 0;
  for (Tensor& t : values) {
    std::copy_n(flat.data() + off, t.size(), t.data());
    off += t.size();
  }
}

ModelParams init_params(const NetConfig& cfg, std::uint64_t seed, std::span<const HeadId> heads) {
  ModelParams p;
  p.config = cfg;
  const Rng root = Rng(seed).split("init");
  p.set_present(ParamGroup::Trunk);
  for (HeadId h : heads) p.set_present(group_of(h));
  const auto specs = param_specs(cfg);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    Tensor t(specs[i].shape, 0.0);
    const bool is_bias = specs[i].shape[0] == 1;
    if (!is_bias && p.has(specs[i].group)) {
      const std::size_t fan_in = numel(specs[i].shape) / specs[i].shape[0];
      fill_uniform(t, std::sqrt(3.0 / static_cast<double>(fan_in)), root.split(static_cast<std::uint64_t>(i)));
    }
    p.values.push_back(std::move(t));
  }
  return p;
}

void zero_final_layer(ModelParams& p, HeadId h) {
  const std::size_t first = head_first(h);
  const std::size_t last = h == HeadId::Cls ? first : first + 2;
  p.values[last] = Tensor(p.values[last].shape(), 0.0);
  p.values[last + 1] = Tensor(p.values[last + 1].shape(), 0.0);
}

namespace {

void write_image(const std::uint8_t* hwc, int size, const NormStats& norm, double* nchw) {
  const std::size_t plane = static_cast<std::size_t>(size) * size;
  for (std::size_t i = 0; i < plane; ++i) {
    for (int c = 0; c < 3; ++c) {
      nchw[c * plane + i] = (hwc[i * 3 + c] / 255.0 - norm.mean[c]) / norm.stddev[c];
    }
  }
}

void write_image(const Image& img, const NormStats& norm, double* nchw) {
  const std::size_t plane = static_cast<std::size_t>(img.width) * img.height;
  for (std::size_t i = 0; i < plane; ++i) {
    for (int c = 0; c < 3; ++c) {
      nchw[c * plane + i] = (img.data[i * 3 + c] - norm.mean[c]) / norm.stddev[c];
    }
  }
}

}  // namespace

PairBatch make_batch(std::span<const Sample* const> samples, const NormStats& norm) {
  if (samples.empty()) throw EmptyDataset("empty batch");
  const int size = samples.front()->width;
  const int n = static_cast<int>(samples.size());
  PairBatch b{Tensor({n, 3, size, size}), Tensor({n, 3, size, size})};
  const std::size_t stride = 3u * size * size;
  for (int i = 0; i < n; ++i) {
    const Sample& s = *samples[static_cast<std::size_t>(i)];
    if (s.width != size || s.height != size) throw ShapeMismatch("batch mixes image sizes");
    write_image(s.reference.data(), size, norm, b.reference.data() + i * stride);
    write_image(s.current.data(), size, norm, b.current.data() + i * stride);
  }
  return b;
}

PairBatch make_batch(const Image& reference, const Image& current, const NormStats& norm) {
  if (reference.width != current.width || reference.height != current.height ||
      reference.width != reference.height) {
    throw ShapeMismatch("image pair must be square and of equal size");
  }
  const int size = reference.width;
  PairBatch b{Tensor({1, 3, size, size}), Tensor({1, 3, size, size})};
  write_image(reference, norm, b.reference.data());
  write_image(current, norm, b.current.data());
  return b;
}

NormStats compute_norm_stats(std::span<const Sample* const> samples) {
  if (samples.empty()) throw EmptyDataset("no samples for normalization statistics");
  std::array<double, 3> sum{}, sq{};
  std::size_t count = 0;
  for (const Sample* s : samples) {
    for (const auto* img : {&s->reference, &s->current}) {
      for (std::size_t i = 0; i < img->size(); i += 3) {
        for (int c = 0; c < 3; ++c) {
          const double v = (*img)[i + c] / 255.0;
          sum[c] += v;
          sq[c] += v * v;
        }
      }
      count += img->size() / 3;
    }
  }
  NormStats st;
  for (int c = 0; c < 3; ++c) {
    st.mean[c] = sum[c] / static_cast<double>(count);
    const double var = sq[c] / static_cast<double>(count) - st.mean[c] * st.mean[c];
    st.stddev[c] = std::sqrt(std::max(var, 1e-12));
  }
  return st;
}

Var encode(const NetConfig& cfg, std::span<const Var> params, const PairBatch& batch) {
  if (params.size() != param_specs(cfg).size()) throw LengthMismatch("parameter list does not match network");
  const Shape s = batch.reference.shape();
  if (s != batch.current.shape() || s[1] != 3 || s[2] != cfg.image_size || s[3] != cfg.image_size) {
    throw ShapeMismatch("image batch " + to_string(s) + " does not match network input size " +
                        std::to_string(cfg.image_size));
  }
  const int n = s[0];
  const Var ref = Var::constant(batch.reference);
  const Var cur = Var::constant(batch.current);

  switch (cfg.variant) {
    case EncoderVariant::Single: {
      const Var x = ops::concat(ref, cur, 1);
      return ops::spatial_mean(conv_stack(x, params, 0, kConvLayers));
    }
    case EncoderVariant::Siamese: {
      const Var x = ops::concat(ref, cur, 0);
      const Var f = ops::spatial_mean(conv_stack(x, params, 0, kConvLayers));
      return ops::concat(ops::slice(f, 0, 0, n), ops::slice(f, 0, n, n), 1);
    }
    case EncoderVariant::SharedConcat: {
      const Var x = ops::concat(ref, cur, 0);
      const Var early = conv_stack(x, params, 0, kSharedConcatSplit);
      const Var joined = ops::concat(ops::slice(early, 0, 0, n), ops::slice(early, 0, n, n), 1);
      return ops::spatial_mean(conv_stack(joined, params, kSharedConcatSplit, kConvLayers));
    }
  }
  throw InvalidArgument("unknown encoder variant");
}

Var head_output(const NetConfig&, std::span<const Var> params, const Var& features, HeadId head) {
  const std::size_t i = head_first(head);
  if (head == HeadId::Cls) return ops::linear(features, params[i], params[i + 1]);
  const Var hidden = ops::relu(ops::linear(features, params[i], params[i + 1]));
  return ops::linear(hidden, params[i + 2], params[i + 3]);
}

Var forward(const NetConfig& cfg, std::span<const Var> params, const PairBatch& batch, HeadId head) {
  return head_output(cfg, params, encode(cfg, params, batch), head);
}

Tensor predict(const ModelParams& p, const PairBatch& batch, HeadId head) {
  NoGradGuard guard;
  std::vector<Var> vars;
  vars.reserve(p.values.size());
  for (const Tensor& t : p.values) vars.push_back(Var::constant(t));
  return forward(p.config, vars, batch, head).value();
}

}  // namespace vslab::nn
