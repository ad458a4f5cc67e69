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

#include <Eigen/Dense>
#include <functional>

#include "gradient_suite.hpp"
#include "test_util.hpp"
#include "vslab/error.hpp"
#include "vslab/losses.hpp"
#include "vslab/network.hpp"
#include "vslab/ops.hpp"

using namespace vslab;
using namespace vslab::nn;
using vslab::testing::close;
using vslab::testing::fd_check;
using vslab::testing::random_tensor;
using namespace vslab::testing;

namespace {

constexpr int kSeeds = vslab::testing::kGradSeeds;

class OpGradient : public ::testing::TestWithParam<std::size_t> {};

TEST_P(OpGradient, MatchesCentralDifferences) {
  const std::vector<OpCase> cases = op_cases();
  const OpCase& c = cases[GetParam()];
  for (int seed = 0; seed < kSeeds; ++seed) {
    const auto r = check_op(c, seed);
    ASSERT_LE(r.worst_excess, 0.0) << c.name << " seed " << seed << ": " << r.where;
    EXPECT_LT(r.worst_rel, 1e-5) << c.name << " seed " << seed;
  }
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradient, ::testing::Range<std::size_t>(0, op_cases().size()),
                         [](const auto& info) { return std::string(op_cases()[info.param].name); });

// Gradient of a gradient: d/dx of sum(w * d/dx f(x)), built with create_graph.
TEST(Autodiff, SecondOrderMatchesDifferences) {
  using namespace ops;
  const std::vector<std::function<Var(const Var&)>> fns = {
      [](const Var& x) { return sum_all(mul(exp(x), mul(x, x))); },
      [](const Var& x) { return sum_all(log(add_scalar(mul(x, x), 1.0))); },
      [](const Var& x) {
        const Var w = Var::constant(random_tensor({1, 2, 4, 4}, Rng(2)));
        return sum_all(mul(channel_standardize(mul(x, x)), w));
      },
      [](const Var& x) { return sum_all(rsqrt(add_scalar(mul(x, x), 0.5))); },
      [](const Var& x) {
        const Var w = Var::constant(random_tensor({2, 2, 3, 3}, Rng(3)));
        const Var b = Var::constant(random_tensor({1, 2, 1, 1}, Rng(4)));
        return sum_all(mul(conv2d(x, w, b, 2, 1), conv2d(x, w, b, 2, 1)));
      },
  };
  for (std::size_t k = 0; k < fns.size(); ++k) {
    for (int seed = 0; seed < kSeeds; ++seed) {
      const std::vector<Tensor> x{random_tensor({1, 2, 4, 4}, Rng(seed).split(k))};
      const Var w = Var::constant(random_tensor({1, 2, 4, 4}, Rng(seed).split("w")));
      const Closure second = [&](std::span<const Var> p) {
        const std::vector<Var> g = gradients(fns[k](p[0]), p, true);
        return sum_all(mul(g[0], w));
      };
      const auto r = fd_check(x, second, {.needs_graph = true});
      ASSERT_LE(r.worst_excess, 0.0) << "fn " << k << " seed " << seed << ": " << r.where;
    }
  }
}

TEST(Autodiff, RoundHasNoGradient) {
  const std::vector<Tensor> x{Tensor({1, 1, 1, 2}, {0.3, 1.6})};
  EXPECT_THROW(grad(x, [](std::span<const Var> p) { return ops::sum_all(ops::round(p[0])); }), UnsupportedOp);
  // A non-differentiable op off the gradient path is fine.
  const auto g = grad(x, [](std::span<const Var> p) {
    return ops::add(ops::sum_all(p[0]), ops::sum_all(ops::round(ops::detach(p[0]))));
  });
  EXPECT_EQ(g[0].values(), (std::vector<double>{1.0, 1.0}));
}

TEST(Autodiff, RoundValues) {
  NoGradGuard guard;
  const Var r = ops::round(Var::constant(Tensor({1, 1, 1, 3}, {0.4, -1.6, 2.5})));
  EXPECT_EQ(r.value().values(), (std::vector<double>{0.0, -2.0, 2.0}));
}

TEST(Autodiff, DetachBlocksGradient) {
  const std::vector<Tensor> x{Tensor({1, 1, 1, 1}, 3.0)};
  const auto g = grad(x, [](std::span<const Var> p) { return ops::mul(p[0], ops::detach(p[0])); });
  EXPECT_EQ(g[0].item(), 3.0);
}

TEST(Autodiff, SafeOpsAtZero) {
  const std::vector<Tensor> x{Tensor({1, 1, 1, 1}, 0.0)};
  EXPECT_EQ(grad(x, [](std::span<const Var> p) { return ops::safe_sqrt(p[0]); })[0].item(), 0.0);
  EXPECT_EQ(grad(x, [](std::span<const Var> p) { return ops::safe_recip(p[0]); })[0].item(), 0.0);
  const std::vector<Tensor> y{Tensor({1, 1, 1, 2}, {0.0, 4.0})};
  const auto g = grad(y, [](std::span<const Var> p) { return ops::sum_all(ops::safe_sqrt(p[0])); });
  EXPECT_EQ(g[0][0], 0.0);
  EXPECT_EQ(g[0][1], 0.25);
}

TEST(Autodiff, NoGradRecordsNothing) {
  const Var a = Var::leaf(Tensor::scalar(2.0));
  {
    NoGradGuard guard;
    EXPECT_FALSE(grad_mode_enabled());
    const Var b = ops::mul(a, a);
    EXPECT_FALSE(b.requires_grad());
    EXPECT_TRUE(b.node()->inputs.empty());
  }
  EXPECT_TRUE(grad_mode_enabled());
  EXPECT_TRUE(ops::mul(a, a).requires_grad());
}

TEST(Autodiff, UnreachedInputsGetZeros) {
  const Var a = Var::leaf(Tensor::scalar(2.0));
  const Var b = Var::leaf(Tensor({1, 2, 1, 1}, 1.0));
  const std::vector<Var> wrt{a, b};
  const auto g = gradients(ops::mul(a, a), wrt);
  EXPECT_EQ(g[0].item(), 4.0);
  EXPECT_EQ(g[1].value(), Tensor({1, 2, 1, 1}, 0.0));
  EXPECT_THROW(gradients(b, wrt), ShapeMismatch);
}

TEST(Autodiff, ShapeErrors) {
  const Var a = Var::constant(Tensor({1, 2, 1, 1}));
  const Var b = Var::constant(Tensor({2, 1, 1, 1}));
  EXPECT_THROW(ops::add(a, b), ShapeMismatch);
  EXPECT_THROW(ops::matmul(a, a), ShapeMismatch);
  EXPECT_THROW(ops::slice(a, 1, 1, 2), ShapeMismatch);
}

TEST(Autodiff, MatmulMatchesEigen) {
  const Tensor a = random_tensor({3, 4, 1, 1}, Rng(1));
  const Tensor b = random_tensor({4, 2, 1, 1}, Rng(2));
  NoGradGuard g;
  const Tensor c = ops::matmul(Var::constant(a), Var::constant(b)).value();
  Eigen::Matrix<double, 3, 4, Eigen::RowMajor> ea;
  Eigen::Matrix<double, 4, 2, Eigen::RowMajor> eb;
  std::copy_n(a.data(), 12, ea.data());
  std::copy_n(b.data(), 8, eb.data());
  const Eigen::Matrix<double, 3, 2, Eigen::RowMajor> ec = ea * eb;
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(c[static_cast<std::size_t>(i)], ec.data()[i], 1e-15);
}

TEST(Autodiff, ConvMatchesDirectLoop) {
  const Tensor x = random_tensor({2, 3, 5, 6}, Rng(5));
  const Tensor w = random_tensor({4, 3, 3, 3}, Rng(6));
  const Tensor b = random_tensor({1, 4, 1, 1}, Rng(7));
  NoGradGuard g;
  const Tensor y = ops::conv2d(Var::constant(x), Var::constant(w), Var::constant(b), 2, 1).value();
  ASSERT_EQ(y.shape(), (Shape{2, 4, 3, 3}));
  for (int n = 0; n < 2; ++n) {
    for (int o = 0; o < 4; ++o) {
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          double acc = b[static_cast<std::size_t>(o)];
          for (int c = 0; c < 3; ++c) {
            for (int ki = 0; ki < 3; ++ki) {
              for (int kj = 0; kj < 3; ++kj) {
                const int yi = 2 * i - 1 + ki;
                const int xj = 2 * j - 1 + kj;
                if (yi < 0 || yi >= 5 || xj < 0 || xj >= 6) continue;
                acc += w.at(o, c, ki, kj) * x.at(n, c, yi, xj);
              }
            }
          }
          ASSERT_NEAR(y.at(n, o, i, j), acc, 1e-13);
        }
      }
    }
  }
}

TEST(Autodiff, Col2imIsAdjointOfIm2col) {
  // <im2col(x), c> == <x, col2im(c)>.
  const Shape s{2, 3, 5, 4};
  const Tensor x = random_tensor(s, Rng(8));
  NoGradGuard g;
  const Tensor cols = ops::im2col(Var::constant(x), 3, 2, 1).value();
  const Tensor c = random_tensor(cols.shape(), Rng(9));
  const Tensor back = ops::col2im(Var::constant(c), s, 3, 2, 1).value();
  double lhs = 0, rhs = 0;
  for (std::size_t i = 0; i < c.size(); ++i) lhs += cols[i] * c[i];
  for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * back[i];
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

// Whole network, every encoder variant and head.
TEST(Autodiff, FullNetworkMatchesDifferences) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    const auto r = check_network(seed);
    ASSERT_LE(r.worst_excess, 0.0) << "seed " << seed << ": " << r.where;
    EXPECT_LT(r.worst_rel, 1e-5);
  }
}

TEST(MetaGrad, QuadraticClosedForm) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    const auto r = check_meta_quadratic(seed);
    EXPECT_LT(r.exact_rel, 1e-8) << "seed " << seed;
    EXPECT_LT(r.first_order_rel, 1e-8) << "seed " << seed;
  }
}

TEST(MetaGrad, AlphaZeroIsPlainGradient) {
  const std::vector<Tensor> p{random_tensor({2, 3, 1, 1}, Rng(1))};
  const Closure f = [](std::span<const Var> v) { return ops::sum_all(ops::exp(ops::mul(v[0], v[0]))); };
  EXPECT_EQ(meta_grad(p, f, f, {0.0, false})[0], grad(p, f)[0]);
  EXPECT_THROW(meta_grad(p, f, f, {-1.0, false}), InvalidArgument);
}

TEST(MetaGrad, SmallNetworkMatchesDifferences) {
  const NetConfig cfg = small_meta_net();
  ASSERT_LE(param_count(cfg, std::array{ParamGroup::Trunk, ParamGroup::HeadLSD, ParamGroup::HeadSSD,
                                        ParamGroup::HeadCls}),
            500u);
  for (int seed = 0; seed < kSeeds; ++seed) {
    const auto r = check_meta_network(seed);
    EXPECT_LE(r.worst_excess, 0.0) << "seed " << seed << ": " << r.where;
  }
}

}  // namespace
