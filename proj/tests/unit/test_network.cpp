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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "test_util.hpp"
#include "vslab/binary_io.hpp"
#include "vslab/error.hpp"
#include "vslab/losses.hpp"
#include "vslab/model_io.hpp"
#include "vslab/network.hpp"
#include "vslab/ops.hpp"
#include "vslab/optim.hpp"

using namespace vslab;
using namespace vslab::nn;
using vslab::testing::random_tensor;
using vslab::testing::tiny_dataset;

namespace {

constexpr std::array kAllGroups{ParamGroup::Trunk, ParamGroup::HeadLSD, ParamGroup::HeadSSD, ParamGroup::HeadCls};

// Independent count: conv layers k*k*in*out + out, heads F*H + H + H*6 + 6
// twice and 2F + 2.
std::size_t expected_count(EncoderVariant v, const std::array<int, 4>& w, int hidden) {
  std::array<int, 4> in{};
  int f = w[3];
  switch (v) {
    case EncoderVariant::Single: in = {6, w[0], w[1], w[2]}; break;
    case EncoderVariant::Siamese: in = {3, w[0], w[1], w[2]}; f = 2 * w[3]; break;
    case EncoderVariant::SharedConcat: in = {3, w[0], 2 * w[1], w[2]}; break;
  }
  std::size_t n = 0;
  for (int l = 0; l < 4; ++l) n += static_cast<std::size_t>(9 * in[l] * w[l] + w[l]);
  n += 2 * static_cast<std::size_t>(f * hidden + hidden + hidden * 6 + 6);
  n += static_cast<std::size_t>(2 * f + 2);
  return n;
}

PairBatch pair_batch(const Dataset& d, std::size_t first, std::size_t n) {
  std::vector<const Sample*> s;
  for (std::size_t i = first; i < first + n; ++i) s.push_back(&d.samples[i]);
  return make_batch(s, compute_norm_stats(s));
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("vslab_test_" + name);
}

}  // namespace

TEST(Network, ParamCountsPerVariant) {
  std::array<std::size_t, 3> counts{};
  for (int v = 0; v < 3; ++v) {
    NetConfig cfg;
    cfg.variant = static_cast<EncoderVariant>(v);
    counts[static_cast<std::size_t>(v)] = param_count(cfg, kAllGroups);
    EXPECT_EQ(counts[static_cast<std::size_t>(v)], expected_count(cfg.variant, cfg.widths, cfg.head_hidden));
    const ModelParams p = init_params(cfg, 1, kAllHeads);
    EXPECT_EQ(p.count(), counts[static_cast<std::size_t>(v)]);
  }
  EXPECT_EQ(counts[0], 60790u);
  EXPECT_EQ(counts[2], 65182u);
  EXPECT_EQ(counts[1], 77214u);
  EXPECT_LT(counts[0], counts[2]);
  EXPECT_LT(counts[2], counts[1]);
}

TEST(Network, ParamLayout) {
  const auto specs = param_specs(NetConfig{});
  ASSERT_EQ(specs.size(), 18u);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(specs[i].group, ParamGroup::Trunk);
  for (std::size_t i = 8; i < 12; ++i) EXPECT_EQ(specs[i].group, ParamGroup::HeadLSD);
  for (std::size_t i = 12; i < 16; ++i) EXPECT_EQ(specs[i].group, ParamGroup::HeadSSD);
  EXPECT_EQ(specs[16].group, ParamGroup::HeadCls);
  EXPECT_EQ(specs[16].shape, (Shape{2, 128, 1, 1}));
  EXPECT_EQ(specs[10].shape, (Shape{6, 64, 1, 1}));
  EXPECT_EQ(NetConfig{}.feature_dim(), 128);
}

TEST(Network, FlattenRoundTrip) {
  ModelParams p = init_params(NetConfig{}, 3, kAllHeads);
  const std::vector<double> flat = p.flatten();
  EXPECT_EQ(flat.size(), p.count());
  ModelParams q = init_params(NetConfig{}, 4, kAllHeads);
  EXPECT_NE(q, p);
  q.unflatten(flat);
  EXPECT_EQ(q, p);
  EXPECT_THROW(q.unflatten(std::span(flat).first(10)), LengthMismatch);
}

TEST(Network, InitIsSeededAndScaled) {
  const ModelParams a = init_params(NetConfig{}, 9, kAllHeads);
  EXPECT_EQ(a, init_params(NetConfig{}, 9, kAllHeads));
  EXPECT_NE(a, init_params(NetConfig{}, 10, kAllHeads));
  const auto specs = param_specs(NetConfig{});
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const bool bias = specs[i].shape[0] == 1;
    const double bound = bias ? 0.0 : std::sqrt(3.0 / static_cast<double>(numel(specs[i].shape) / specs[i].shape[0]));
    for (double v : a.values[i].values()) ASSERT_LE(std::abs(v), bound);
  }
  std::array<HeadId, 1> lsd{HeadId::RegLSD};
  const ModelParams b = init_params(NetConfig{}, 9, lsd);
  EXPECT_TRUE(b.has(ParamGroup::Trunk));
  EXPECT_TRUE(b.has(ParamGroup::HeadLSD));
  EXPECT_FALSE(b.has(ParamGroup::HeadSSD));
  EXPECT_FALSE(b.has(ParamGroup::HeadCls));
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (b.has(specs[i].group)) {
      EXPECT_EQ(b.values[i], a.values[i]);
    } else {
      for (double v : b.values[i].values()) ASSERT_EQ(v, 0.0);
    }
  }
}

TEST(Network, ZeroFinalLayerGivesZeroPose) {
  const Dataset& d = tiny_dataset(DatasetKind::LSD, 24, 16);
  for (int v = 0; v < 3; ++v) {
    NetConfig cfg;
    cfg.variant = static_cast<EncoderVariant>(v);
    cfg.image_size = 16;
    ModelParams p = init_params(cfg, 2, kAllHeads);
    zero_final_layer(p, HeadId::RegLSD);
    const Image img = d.samples[0].reference_image();
    const Tensor out = predict(p, make_batch(img, img, {}), HeadId::RegLSD);
    EXPECT_EQ(out.values(), std::vector<double>(6, 0.0));
    const Tensor other = predict(p, pair_batch(d, 0, 3), HeadId::RegSSD);
    EXPECT_NE(other.values(), std::vector<double>(18, 0.0));
  }
}

TEST(Network, OutputShapesAndSoftmax) {
  const Dataset& d = tiny_dataset(DatasetKind::SSD, 24, 16);
  NetConfig cfg;
  cfg.image_size = 16;
  const ModelParams p = init_params(cfg, 3, kAllHeads);
  const PairBatch b = pair_batch(d, 0, 5);
  EXPECT_EQ(predict(p, b, HeadId::RegLSD).shape(), (Shape{5, 6, 1, 1}));
  const Tensor logits = predict(p, b, HeadId::Cls);
  ASSERT_EQ(logits.shape(), (Shape{5, 2, 1, 1}));
  EXPECT_TRUE(logits.all_finite());
  for (int i = 0; i < 5; ++i) {
    const auto s = softmax2(logits.at(i, 0, 0, 0), logits.at(i, 1, 0, 0));
    EXPECT_NEAR(s[0] + s[1], 1.0, 1e-12);
  }
  const auto big = softmax2(800.0, -800.0);
  EXPECT_EQ(big[0], 1.0);
  EXPECT_EQ(big[1], 0.0);
}

TEST(Network, ForwardIsDeterministicAndBatchIndependent) {
  const Dataset& d = tiny_dataset(DatasetKind::LSD, 24, 16);
  NetConfig cfg;
  cfg.image_size = 16;
  const ModelParams p = init_params(cfg, 4, kAllHeads);
  std::vector<const Sample*> s{&d.samples[0], &d.samples[1], &d.samples[2]};
  const NormStats norm = compute_norm_stats(s);
  const Tensor all = predict(p, make_batch(s, norm), HeadId::RegSSD);
  EXPECT_EQ(all, predict(p, make_batch(s, norm), HeadId::RegSSD));
  const Tensor one = predict(p, make_batch(d.samples[1].reference_image(), d.samples[1].current_image(), norm),
                             HeadId::RegSSD);
  for (int k = 0; k < 6; ++k) EXPECT_NEAR(one.at(0, k, 0, 0), all.at(1, k, 0, 0), 1e-12);
}

TEST(Network, ShapeErrors) {
  const Dataset& d = tiny_dataset(DatasetKind::LSD, 24, 16);
  NetConfig cfg;
  cfg.image_size = 32;
  const ModelParams p = init_params(cfg, 1, kAllHeads);
  EXPECT_THROW(predict(p, pair_batch(d, 0, 2), HeadId::RegLSD), ShapeMismatch);
  EXPECT_THROW(make_batch(Image(16, 16), Image(8, 8), {}), ShapeMismatch);
  EXPECT_THROW(make_batch(std::span<const Sample* const>{}, {}), EmptyDataset);
}

TEST(Network, NormStatsMatchDirectComputation) {
  const Dataset& d = tiny_dataset(DatasetKind::LSD, 24, 16);
  std::vector<const Sample*> s{&d.samples[0], &d.samples[1]};
  const NormStats st = compute_norm_stats(s);
  for (int c = 0; c < 3; ++c) {
    double sum = 0, sq = 0;
    int n = 0;
    for (const Sample* x : s) {
      for (const auto* img : {&x->reference, &x->current}) {
        for (std::size_t i = static_cast<std::size_t>(c); i < img->size(); i += 3) {
          const double v = (*img)[i] / 255.0;
          sum += v;
          ++n;
        }
      }
    }
    const double mean = sum / n;
    for (const Sample* x : s) {
      for (const auto* img : {&x->reference, &x->current}) {
        for (std::size_t i = static_cast<std::size_t>(c); i < img->size(); i += 3) {
          sq += ((*img)[i] / 255.0 - mean) * ((*img)[i] / 255.0 - mean);
        }
      }
    }
    EXPECT_NEAR(st.mean[c], mean, 1e-12);
    EXPECT_NEAR(st.stddev[c], std::sqrt(sq / n), 1e-9);
  }
}

TEST(Losses, PoseLossExamples) {
  const Label a{0.1, -0.2, 0.3, 0.01, 0.02, -0.03};
  EXPECT_EQ(pose_loss(a, a), 0.0);
  EXPECT_DOUBLE_EQ(pose_loss(Label{0.3, 0, 0, 0, 0, 0}, Label{}, 0.2), 0.3);
  EXPECT_DOUBLE_EQ(pose_loss(Label{0, 0, 0, 0, 0.5, 0}, Label{}, 0.2), 0.1);
  EXPECT_DOUBLE_EQ(pose_loss(Label{0.3, 0.4, 0, 0, 0, 0}, Label{}), 0.5);
  EXPECT_EQ(kPoseBeta, 0.2);
  EXPECT_THROW(pose_loss(a, a, 0.0), InvalidArgument);
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    Label p, l;
    for (int k = 0; k < 6; ++k) {
      p[static_cast<std::size_t>(k)] = rng.uniform(-1, 1);
      l[static_cast<std::size_t>(k)] = rng.uniform(-1, 1);
    }
    ASSERT_GT(pose_loss(p, l), 0.0);
  }
}

TEST(Losses, BatchPoseLossIsMeanOfScalarLoss) {
  const Tensor pred = random_tensor({4, 6, 1, 1}, Rng(2));
  const Tensor label = random_tensor({4, 6, 1, 1}, Rng(3));
  NoGradGuard g;
  const double batch = pose_loss(Var::constant(pred), Var::constant(label)).item();
  double sum = 0.0;
  for (int i = 0; i < 4; ++i) {
    Label p, l;
    for (int k = 0; k < 6; ++k) {
      p[static_cast<std::size_t>(k)] = pred.at(i, k, 0, 0);
      l[static_cast<std::size_t>(k)] = label.at(i, k, 0, 0);
    }
    sum += pose_loss(p, l);
  }
  EXPECT_NEAR(batch, sum / 4, 1e-15);
}

TEST(Losses, ClsLossExamples) {
  EXPECT_LT(cls_loss(20, -20, DatasetKind::LSD), 1e-8);
  EXPECT_NEAR(cls_loss(20, -20, DatasetKind::SSD), 40.0, 1e-12);
  EXPECT_DOUBLE_EQ(cls_loss(0, 0, DatasetKind::LSD), std::log(2.0));
  EXPECT_DOUBLE_EQ(cls_loss(0, 0, DatasetKind::SSD), std::log(2.0));
  EXPECT_TRUE(std::isfinite(cls_loss(1000, -1000, DatasetKind::SSD)));
}

TEST(Losses, ClsGradientMatchesDifferences) {
  // d/dz of -log softmax = softmax - onehot.
  for (double a : {-3.0, 0.0, 0.7, 5.0}) {
    for (double b : {-1.0, 0.0, 2.5}) {
      for (DatasetKind k : {DatasetKind::LSD, DatasetKind::SSD}) {
        const std::vector<Tensor> z{Tensor({1, 2, 1, 1}, {a, b})};
        const std::vector<DatasetKind> o{k};
        const auto g = grad(z, [&](std::span<const Var> p) { return cls_loss(p[0], o); });
        const double h = 1e-5;
        const double da = (cls_loss(a + h, b, k) - cls_loss(a - h, b, k)) / (2 * h);
        const double db = (cls_loss(a, b + h, k) - cls_loss(a, b - h, k)) / (2 * h);
        EXPECT_NEAR(g[0][0], da, 1e-7);
        EXPECT_NEAR(g[0][1], db, 1e-7);
        const auto s = softmax2(a, b);
        EXPECT_NEAR(g[0][0], s[0] - (k == DatasetKind::LSD ? 1.0 : 0.0), 1e-15);
      }
    }
  }
}

TEST(Losses, BatchClsLossIsMean) {
  const Tensor z = random_tensor({3, 2, 1, 1}, Rng(4), -3, 3);
  const std::vector<DatasetKind> o{DatasetKind::LSD, DatasetKind::SSD, DatasetKind::LSD};
  NoGradGuard g;
  const double batch = cls_loss(Var::constant(z), o).item();
  double sum = 0;
  for (int i = 0; i < 3; ++i) sum += cls_loss(z.at(i, 0, 0, 0), z.at(i, 1, 0, 0), o[static_cast<std::size_t>(i)]);
  EXPECT_NEAR(batch, sum / 3, 1e-15);
  EXPECT_THROW(cls_loss(Var::constant(z), std::span(o).first(2)), LengthMismatch);
}

TEST(Losses, AutobalanceExamples) {
  const std::vector<double> l{2.0, 3.0};
  EXPECT_EQ(loss_autobalance(l, std::vector<double>{0.0, 0.0}), 5.0);
  EXPECT_DOUBLE_EQ(loss_autobalance(l, std::vector<double>{1.0, -1.0}),
                   2.0 * std::exp(-1.0) + 1.0 + 3.0 * std::exp(1.0) - 1.0);
  EXPECT_THROW(loss_autobalance(l, std::vector<double>{0.0}), LengthMismatch);

  // Var form agrees and is exact at s = 0.
  NoGradGuard g;
  const std::vector<Var> lv{Var::constant(Tensor::scalar(0.1)), Var::constant(Tensor::scalar(0.7)),
                            Var::constant(Tensor::scalar(1.3))};
  EXPECT_EQ(loss_autobalance(lv, Var::constant(Tensor({3, 1, 1, 1}, 0.0))).item(), (0.1 + 0.7) + 1.3);
  EXPECT_THROW(loss_autobalance(lv, Var::constant(Tensor({2, 1, 1, 1}, 0.0))), LengthMismatch);
}

TEST(Losses, AutobalanceStationaryPoint) {
  // For one loss L the minimizer of L e^-s + s is s* = ln L; for L = 1, s* = 0.
  for (double L : {1.0, 0.5, 4.0}) {
    const std::vector<Tensor> s{Tensor({1, 1, 1, 1}, std::log(L))};
    const auto g = grad(s, [&](std::span<const Var> p) {
      const std::vector<Var> l{Var::constant(Tensor::scalar(L))};
      return loss_autobalance(l, p[0]);
    });
    EXPECT_NEAR(g[0].item(), 0.0, 1e-15);
  }
}

TEST(Losses, GradientIdentities) {
  const std::vector<Tensor> theta{random_tensor({3, 4, 1, 1}, Rng(5))};
  const auto zero = grad(theta, [](std::span<const Var>) { return Var::constant(Tensor::scalar(3.0)); });
  EXPECT_EQ(zero[0], Tensor({3, 4, 1, 1}, 0.0));
  const auto same = grad(theta, [](std::span<const Var> p) { return ops::scale(ops::sum_all(ops::mul(p[0], p[0])), 0.5); });
  EXPECT_EQ(same[0], theta[0]);
}

TEST(ModelIo, RoundTripAllVariants) {
  for (int v = 0; v < 3; ++v) {
    NetConfig cfg;
    cfg.variant = static_cast<EncoderVariant>(v);
    cfg.image_size = 32;
    ModelParams p = init_params(cfg, 5, kAllHeads);
    p.norm = {{0.1, 0.2, 0.3}, {0.4, 0.5, 0.6}};
    p.balance.s_hat = {-0.5, 0.25, 1.0 / 3.0};
    const auto path = temp_file("model.vsnn");
    save_model(p, path);
    EXPECT_EQ(load_model(path), p);
    std::filesystem::remove(path);
  }
}

TEST(ModelIo, AbsentHeadsNotStored) {
  std::array<HeadId, 1> one{HeadId::RegLSD};
  const ModelParams full = init_params(NetConfig{}, 6, kAllHeads);
  const ModelParams part = init_params(NetConfig{}, 6, one);
  const auto a = serialize_model(full);
  const auto b = serialize_model(part);
  const std::size_t missing = param_count(NetConfig{}, std::array{ParamGroup::HeadSSD, ParamGroup::HeadCls});
  EXPECT_GT(a.size(), b.size() + missing * sizeof(double));
  const ModelParams back = deserialize_model(b);
  EXPECT_TRUE(back.has(ParamGroup::HeadLSD));
  EXPECT_FALSE(back.has(ParamGroup::HeadSSD));
  for (std::size_t i : back.indices(ParamGroup::HeadSSD)) EXPECT_EQ(back.values[i], Tensor(back.values[i].shape(), 0.0));
  for (std::size_t i : back.indices(ParamGroup::Trunk)) EXPECT_EQ(back.values[i], part.values[i]);
}

TEST(ModelIo, Corruption) {
  const ModelParams p = init_params(NetConfig{}, 7, kAllHeads);
  std::vector<std::uint8_t> bytes = serialize_model(p);
  EXPECT_THROW(deserialize_model(std::span(bytes).first(bytes.size() - 1)), ChecksumMismatch);
  bytes[100] ^= 1;
  EXPECT_THROW(deserialize_model(bytes), ChecksumMismatch);
  EXPECT_THROW(load_model("/nonexistent/model.vsnn"), IoFailure);
}

TEST(ModelIo, TrunkChecksumTracksTrunkOnly) {
  ModelParams p = init_params(NetConfig{}, 8, kAllHeads);
  const std::uint32_t c = trunk_checksum(p);
  p.values[10][0] += 1.0;
  EXPECT_EQ(trunk_checksum(p), c);
  p.values[3][0] += 1e-12;
  EXPECT_NE(trunk_checksum(p), c);
}

TEST(Optim, AdamFirstStepIsSignTimesLr) {
  // With bias correction the first step is lr * g / (|g| + eps).
  std::vector<Tensor> p{Tensor({1, 3, 1, 1}, {1.0, -2.0, 0.5})};
  const std::vector<Tensor> g{Tensor({1, 3, 1, 1}, {0.3, -4.0, 0.0})};
  AdamW opt(p, {});
  const std::vector<std::size_t> which{0};
  opt.step(p, g, which, 0.1);
  EXPECT_NEAR(p[0][0], 1.0 - 0.1 * 0.3 / (0.3 + 1e-8), 1e-15);
  EXPECT_NEAR(p[0][1], -2.0 + 0.1 * 4.0 / (4.0 + 1e-8), 1e-15);
  EXPECT_EQ(p[0][2], 0.5);
}

TEST(Optim, DecoupledWeightDecay) {
  std::vector<Tensor> p{Tensor({1, 1, 1, 1}, 2.0)};
  const std::vector<Tensor> g{Tensor({1, 1, 1, 1}, 0.0)};
  AdamW opt(p, {.weight_decay = 0.1});
  const std::vector<std::size_t> which{0};
  opt.step(p, g, which, 0.5);
  EXPECT_DOUBLE_EQ(p[0][0], 2.0 - 0.5 * 0.1 * 2.0);
}

TEST(Optim, StepsOnlySelectedTensors) {
  std::vector<Tensor> p{Tensor({1, 1, 1, 1}, 1.0), Tensor({1, 1, 1, 1}, 1.0)};
  const std::vector<Tensor> g{Tensor({1, 1, 1, 1}, 1.0), Tensor({1, 1, 1, 1}, 1.0)};
  AdamW opt(p, {});
  const std::vector<std::size_t> which{1};
  opt.step(p, g, which, 0.1);
  EXPECT_EQ(p[0][0], 1.0);
  EXPECT_LT(p[1][0], 1.0);
}

TEST(Optim, ClipGlobalNorm) {
  std::vector<Tensor> g{Tensor({1, 2, 1, 1}, {3.0, 0.0}), Tensor({1, 1, 1, 1}, 4.0)};
  EXPECT_DOUBLE_EQ(clip_global_norm(g, 10.0), 5.0);
  EXPECT_EQ(g[0][0], 3.0);
  EXPECT_DOUBLE_EQ(clip_global_norm(g, 1.0), 5.0);
  EXPECT_DOUBLE_EQ(g[0][0], 0.6);
  EXPECT_DOUBLE_EQ(g[1][0], 0.8);
}
