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

#include "vslab/ops.hpp"

#include <Eigen/Core>
#include <cmath>

#include "vslab/error.hpp"

namespace vslab::nn::ops {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

void require_same(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeMismatch(std::string(op) + ": " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

template <typename F>
Tensor map_values(const Tensor& x, F&& f) {
  Tensor out(x.shape());
  const double* in = x.data();
  double* o = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) o[i] = f(in[i]);
  return out;
}

template <typename F>
Tensor zip_values(const Tensor& a, const Tensor& b, F&& f) {
  Tensor out(a.shape());
  const double* pa = a.data();
  const double* pb = b.data();
  double* o = out.data();
  for (std::size_t i = 0; i < a.size(); ++i) o[i] = f(pa[i], pb[i]);
  return out;
}

// Axis 0 or 1 view as (outer, extent, inner) blocks.
struct AxisView {
  std::size_t outer;
  std::size_t extent;
  std::size_t inner;
};

AxisView axis_view(const Shape& s, int axis) {
  if (axis == 0) return {1, static_cast<std::size_t>(s[0]), numel(s) / s[0]};
  if (axis == 1) {
    return {static_cast<std::size_t>(s[0]), static_cast<std::size_t>(s[1]),
            static_cast<std::size_t>(s[2]) * s[3]};
  }
  throw InvalidArgument("only axes 0 and 1 are supported");
}

std::size_t rows_of(const Shape& s) { return static_cast<std::size_t>(s[0]); }
std::size_t cols_of(const Shape& s) { return numel(s) / s[0]; }

int conv_out(int n, int k, int stride, int pad) { return (n + 2 * pad - k) / stride + 1; }

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same(a, b, "add");
  return make_result(zip_values(a.value(), b.value(), [](double x, double y) { return x + y; }), {a, b},
                     [](const Var&, const Var& g) { return std::vector<Var>{g, g}; }, "add");
}

Var sub(const Var& a, const Var& b) {
  require_same(a, b, "sub");
  return make_result(zip_values(a.value(), b.value(), [](double x, double y) { return x - y; }), {a, b},
                     [](const Var&, const Var& g) { return std::vector<Var>{g, neg(g)}; }, "sub");
}

Var mul(const Var& a, const Var& b) {
  require_same(a, b, "mul");
  return make_result(zip_values(a.value(), b.value(), [](double x, double y) { return x * y; }), {a, b},
                     [a, b](const Var&, const Var& g) {
                       return std::vector<Var>{a.requires_grad() ? mul(g, b) : Var(),
                                               b.requires_grad() ? mul(g, a) : Var()};
                     },
                     "mul");
}

Var neg(const Var& x) {
  return make_result(map_values(x.value(), [](double v) { return -v; }), {x},
                     [](const Var&, const Var& g) { return std::vector<Var>{neg(g)}; }, "neg");
}

Var scale(const Var& x, double s) {
  return make_result(map_values(x.value(), [s](double v) { return v * s; }), {x},
                     [s](const Var&, const Var& g) { return std::vector<Var>{scale(g, s)}; }, "scale");
}

Var add_scalar(const Var& x, double s) {
  return make_result(map_values(x.value(), [s](double v) { return v + s; }), {x},
                     [](const Var&, const Var& g) { return std::vector<Var>{g}; }, "add_scalar");
}

Var exp(const Var& x) {
  return make_result(map_values(x.value(), [](double v) { return std::exp(v); }), {x},
                     [](const Var& self, const Var& g) { return std::vector<Var>{mul(g, self)}; }, "exp");
}

Var log(const Var& x) {
  return make_result(map_values(x.value(), [](double v) { return std::log(v); }), {x},
                     [x](const Var&, const Var& g) { return std::vector<Var>{mul(g, safe_recip(x))}; }, "log");
}

Var relu(const Var& x) {
  return make_result(map_values(x.value(), [](double v) { return v > 0.0 ? v : 0.0; }), {x},
                     [x](const Var&, const Var& g) {
                       const Var mask =
                           Var::constant(map_values(x.value(), [](double v) { return v > 0.0 ? 1.0 : 0.0; }));
                       return std::vector<Var>{mul(g, mask)};
                     },
                     "relu");
}

Var safe_sqrt(const Var& x) {
  return make_result(map_values(x.value(), [](double v) { return std::sqrt(v); }), {x},
                     [](const Var& self, const Var& g) {
                       return std::vector<Var>{mul(g, scale(safe_recip(self), 0.5))};
                     },
                     "safe_sqrt");
}

Var safe_recip(const Var& x) {
  return make_result(map_values(x.value(), [](double v) { return v == 0.0 ? 0.0 : 1.0 / v; }), {x},
                     [](const Var& self, const Var& g) {
                       return std::vector<Var>{neg(mul(g, mul(self, self)))};
                     },
                     "safe_recip");
}

Var rsqrt(const Var& x) {
  return make_result(map_values(x.value(), [](double v) { return 1.0 / std::sqrt(v); }), {x},
                     [](const Var& self, const Var& g) {
                       return std::vector<Var>{mul(g, scale(mul(self, mul(self, self)), -0.5))};
                     },
                     "rsqrt");
}

Var round(const Var& x) {
  return make_result(map_values(x.value(), [](double v) { return std::nearbyint(v); }), {x}, {}, "round");
}

Var sum_all(const Var& x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  const Shape shape = x.shape();
  return make_result(Tensor::scalar(s), {x},
                     [shape](const Var&, const Var& g) { return std::vector<Var>{broadcast_scalar(g, shape)}; },
                     "sum_all");
}

Var mean_all(const Var& x) { return scale(sum_all(x), 1.0 / static_cast<double>(x.value().size())); }

Var broadcast_scalar(const Var& s, const Shape& shape) {
  return make_result(Tensor(shape, s.value().item()), {s},
                     [](const Var&, const Var& g) { return std::vector<Var>{sum_all(g)}; }, "broadcast_scalar");
}

Var spatial_sum(const Var& x) {
  const Shape s = x.shape();
  const std::size_t hw = static_cast<std::size_t>(s[2]) * s[3];
  Tensor out({s[0], s[1], 1, 1});
  const double* in = x.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < hw; ++j) acc += in[i * hw + j];
    out[i] = acc;
  }
  return make_result(std::move(out), {x},
                     [s](const Var&, const Var& g) { return std::vector<Var>{spatial_expand(g, s[2], s[3])}; },
                     "spatial_sum");
}

Var spatial_mean(const Var& x) {
  return scale(spatial_sum(x), 1.0 / (static_cast<double>(x.shape()[2]) * x.shape()[3]));
}

Var spatial_expand(const Var& x, int h, int w) {
  const Shape s = x.shape();
  if (s[2] != 1 || s[3] != 1) throw ShapeMismatch("spatial_expand expects (N,C,1,1)");
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  Tensor out({s[0], s[1], h, w});
  for (std::size_t i = 0; i < x.value().size(); ++i) {
    std::fill_n(out.data() + i * hw, hw, x.value()[i]);
  }
  return make_result(std::move(out), {x},
                     [](const Var&, const Var& g) { return std::vector<Var>{spatial_sum(g)}; }, "spatial_expand");
}

Var channel_sum(const Var& x) {
  const Shape s = x.shape();
  const std::size_t hw = static_cast<std::size_t>(s[2]) * s[3];
  Tensor out({s[0], 1, s[2], s[3]});
  const double* in = x.value().data();
  for (int n = 0; n < s[0]; ++n) {
    double* o = out.data() + n * hw;
    for (int c = 0; c < s[1]; ++c) {
      const double* p = in + (static_cast<std::size_t>(n) * s[1] + c) * hw;
      for (std::size_t j = 0; j < hw; ++j) o[j] += p[j];
    }
  }
  return make_result(std::move(out), {x},
                     [c = s[1]](const Var&, const Var& g) { return std::vector<Var>{channel_expand(g, c)}; },
                     "channel_sum");
}

Var channel_expand(const Var& x, int c) {
  const Shape s = x.shape();
  if (s[1] != 1) throw ShapeMismatch("channel_expand expects (N,1,H,W)");
  const std::size_t hw = static_cast<std::size_t>(s[2]) * s[3];
  Tensor out({s[0], c, s[2], s[3]});
  for (int n = 0; n < s[0]; ++n) {
    const double* p = x.value().data() + n * hw;
    for (int k = 0; k < c; ++k) std::copy_n(p, hw, out.data() + (static_cast<std::size_t>(n) * c + k) * hw);
  }
  return make_result(std::move(out), {x},
                     [](const Var&, const Var& g) { return std::vector<Var>{channel_sum(g)}; }, "channel_expand");
}

Var sum_to_channel(const Var& x) {
  const Shape s = x.shape();
  const std::size_t hw = static_cast<std::size_t>(s[2]) * s[3];
  Tensor out({1, s[1], 1, 1});
  const double* in = x.value().data();
  for (int n = 0; n < s[0]; ++n) {
    for (int c = 0; c < s[1]; ++c) {
      const double* p = in + (static_cast<std::size_t>(n) * s[1] + c) * hw;
      double acc = 0.0;
      for (std::size_t j = 0; j < hw; ++j) acc += p[j];
      out[static_cast<std::size_t>(c)] += acc;
    }
  }
  return make_result(std::move(out), {x},
                     [s](const Var&, const Var& g) { return std::vector<Var>{expand_channel(g, s)}; },
                     "sum_to_channel");
}

Var expand_channel(const Var& b, const Shape& shape) {
  const Shape bs = b.shape();
  if (bs[0] != 1 || bs[1] != shape[1] || bs[2] != 1 || bs[3] != 1) {
    throw ShapeMismatch("expand_channel: " + to_string(bs) + " onto " + to_string(shape));
  }
  const std::size_t hw = static_cast<std::size_t>(shape[2]) * shape[3];
  Tensor out(shape);
  for (int n = 0; n < shape[0]; ++n) {
    for (int c = 0; c < shape[1]; ++c) {
      std::fill_n(out.data() + (static_cast<std::size_t>(n) * shape[1] + c) * hw, hw,
                  b.value()[static_cast<std::size_t>(c)]);
    }
  }
  return make_result(std::move(out), {b},
                     [](const Var&, const Var& g) { return std::vector<Var>{sum_to_channel(g)}; }, "expand_channel");
}

Var reshape(const Var& x, const Shape& shape) {
  if (numel(shape) != x.value().size()) {
    throw ShapeMismatch("reshape " + to_string(x.shape()) + " to " + to_string(shape));
  }
  const Shape orig = x.shape();
  return make_result(Tensor(shape, x.value().values()), {x},
                     [orig](const Var&, const Var& g) { return std::vector<Var>{reshape(g, orig)}; }, "reshape");
}

Var concat(const Var& a, const Var& b, int axis) {
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  for (int i = 0; i < 4; ++i) {
    if (i != axis && sa[i] != sb[i]) throw ShapeMismatch("concat " + to_string(sa) + " with " + to_string(sb));
  }
  Shape so = sa;
  so[axis] += sb[axis];
  const AxisView va = axis_view(sa, axis);
  const AxisView vb = axis_view(sb, axis);
  Tensor out(so);
  double* o = out.data();
  for (std::size_t i = 0; i < va.outer; ++i) {
    const std::size_t na = va.extent * va.inner;
    const std::size_t nb = vb.extent * vb.inner;
    std::copy_n(a.value().data() + i * na, na, o);
    o += na;
    std::copy_n(b.value().data() + i * nb, nb, o);
    o += nb;
  }
  const int la = sa[axis];
  const int lb = sb[axis];
  return make_result(std::move(out), {a, b},
                     [axis, la, lb](const Var&, const Var& g) {
                       return std::vector<Var>{slice(g, axis, 0, la), slice(g, axis, la, lb)};
                     },
                     "concat");
}

Var slice(const Var& x, int axis, int begin, int len) {
  const Shape s = x.shape();
  if (begin < 0 || len < 0 || begin + len > s[axis]) throw ShapeMismatch("slice out of range");
  Shape so = s;
  so[axis] = len;
  const AxisView v = axis_view(s, axis);
  Tensor out(so);
  const std::size_t chunk = static_cast<std::size_t>(len) * v.inner;
  for (std::size_t i = 0; i < v.outer; ++i) {
    std::copy_n(x.value().data() + (i * v.extent + begin) * v.inner, chunk, out.data() + i * chunk);
  }
  const int total = s[axis];
  return make_result(std::move(out), {x},
                     [axis, begin, total](const Var&, const Var& g) {
                       return std::vector<Var>{embed(g, axis, begin, total)};
                     },
                     "slice");
}

Var embed(const Var& x, int axis, int begin, int total) {
  const Shape s = x.shape();
  const int len = s[axis];
  if (begin < 0 || begin + len > total) throw ShapeMismatch("embed out of range");
  Shape so = s;
  so[axis] = total;
  const AxisView v = axis_view(so, axis);
  Tensor out(so);
  const std::size_t chunk = static_cast<std::size_t>(len) * v.inner;
  for (std::size_t i = 0; i < v.outer; ++i) {
    std::copy_n(x.value().data() + i * chunk, chunk, out.data() + (i * v.extent + begin) * v.inner);
  }
  return make_result(std::move(out), {x},
                     [axis, begin, len](const Var&, const Var& g) {
                       return std::vector<Var>{slice(g, axis, begin, len)};
                     },
                     "embed");
}

Var permute01(const Var& x) {
  const Shape s = x.shape();
  const std::size_t hw = static_cast<std::size_t>(s[2]) * s[3];
  Tensor out({s[1], s[0], s[2], s[3]});
  for (int a = 0; a < s[0]; ++a) {
    for (int b = 0; b < s[1]; ++b) {
      std::copy_n(x.value().data() + (static_cast<std::size_t>(a) * s[1] + b) * hw, hw,
                  out.data() + (static_cast<std::size_t>(b) * s[0] + a) * hw);
    }
  }
  return make_result(std::move(out), {x},
                     [](const Var&, const Var& g) { return std::vector<Var>{permute01(g)}; }, "permute01");
}

Var matmul(const Var& a, const Var& b, bool trans_a, bool trans_b) {
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  const auto ar = static_cast<Eigen::Index>(rows_of(sa));
  const auto ac = static_cast<Eigen::Index>(cols_of(sa));
  const auto br = static_cast<Eigen::Index>(rows_of(sb));
  const auto bc = static_cast<Eigen::Index>(cols_of(sb));
  const Eigen::Index m = trans_a ? ac : ar;
  const Eigen::Index k = trans_a ? ar : ac;
  const Eigen::Index k2 = trans_b ? bc : br;
  const Eigen::Index n = trans_b ? br : bc;
  if (k != k2) throw ShapeMismatch("matmul " + to_string(sa) + " x " + to_string(sb));

  Tensor out({static_cast<int>(m), static_cast<int>(n), 1, 1});
  // Eigen-owned copies: small products reduce in an order that depends on
  // the operands' address alignment, which would make results vary from run
  // to run.
  const RowMat A = ConstMap(a.value().data(), ar, ac);
  const RowMat B = ConstMap(b.value().data(), br, bc);
  RowMat C(m, n);
  if (!trans_a && !trans_b) C.noalias() = A * B;
  else if (trans_a && !trans_b) C.noalias() = A.transpose() * B;
  else if (!trans_a && trans_b) C.noalias() = A * B.transpose();
  else C.noalias() = A.transpose() * B.transpose();
  MutMap(out.data(), m, n) = C;

  return make_result(
      std::move(out), {a, b},
      [a, b, trans_a, trans_b, sa, sb](const Var&, const Var& g) {
        // Matrix views of the operands; gradients are reshaped back.
        const Shape ma{sa[0], static_cast<int>(cols_of(sa)), 1, 1};
        const Shape mb{sb[0], static_cast<int>(cols_of(sb)), 1, 1};
        const Var A = ma == sa ? a : reshape(a, ma);
        const Var B = mb == sb ? b : reshape(b, mb);
        Var ga, gb;
        if (a.requires_grad()) {
          ga = trans_a ? matmul(B, g, trans_b, true) : matmul(g, B, false, !trans_b);
          if (ma != sa) ga = reshape(ga, sa);
        }
        if (b.requires_grad()) {
          gb = trans_b ? matmul(g, A, true, trans_a) : matmul(A, g, !trans_a, false);
          if (mb != sb) gb = reshape(gb, sb);
        }
        return std::vector<Var>{ga, gb};
      },
      "matmul");
}

Var im2col(const Var& x, int k, int stride, int pad) {
  const Shape s = x.shape();
  const int N = s[0], C = s[1], H = s[2], W = s[3];
  const int Ho = conv_out(H, k, stride, pad);
  const int Wo = conv_out(W, k, stride, pad);
  if (Ho <= 0 || Wo <= 0) throw ShapeMismatch("im2col: kernel larger than input");
  const std::size_t cols = static_cast<std::size_t>(N) * Ho * Wo;
  Tensor out({C * k * k, static_cast<int>(cols), 1, 1});
  const double* in = x.value().data();
  double* o = out.data();
  for (int c = 0; c < C; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = o + static_cast<std::size_t>((c * k + ky) * k + kx) * cols;
        for (int n = 0; n < N; ++n) {
          const double* plane = in + (static_cast<std::size_t>(n) * C + c) * H * W;
          double* dst = row + static_cast<std::size_t>(n) * Ho * Wo;
          for (int oy = 0; oy < Ho; ++oy) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= H) {
              dst += Wo;
              continue;
            }
            const double* src = plane + static_cast<std::size_t>(iy) * W;
            for (int ox = 0; ox < Wo; ++ox) {
              const int ix = ox * stride - pad + kx;
              *dst++ = (ix >= 0 && ix < W) ? src[ix] : 0.0;
            }
          }
        }
      }
    }
  }
  return make_result(std::move(out), {x},
                     [s, k, stride, pad](const Var&, const Var& g) {
                       return std::vector<Var>{col2im(g, s, k, stride, pad)};
                     },
                     "im2col");
}

Var col2im(const Var& cols_var, const Shape& in_shape, int k, int stride, int pad) {
  const int N = in_shape[0], C = in_shape[1], H = in_shape[2], W = in_shape[3];
  const int Ho = conv_out(H, k, stride, pad);
  const int Wo = conv_out(W, k, stride, pad);
  const std::size_t cols = static_cast<std::size_t>(N) * Ho * Wo;
  if (cols_var.shape() != Shape{C * k * k, static_cast<int>(cols), 1, 1}) {
    throw ShapeMismatch("col2im: columns " + to_string(cols_var.shape()));
  }
  Tensor out(in_shape);
  const double* src_all = cols_var.value().data();
  double* o = out.data();
  for (int c = 0; c < C; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row = src_all + static_cast<std::size_t>((c * k + ky) * k + kx) * cols;
        for (int n = 0; n < N; ++n) {
          double* plane = o + (static_cast<std::size_t>(n) * C + c) * H * W;
          const double* src = row + static_cast<std::size_t>(n) * Ho * Wo;
          for (int oy = 0; oy < Ho; ++oy) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= H) {
              src += Wo;
              continue;
            }
            double* dst = plane + static_cast<std::size_t>(iy) * W;
            for (int ox = 0; ox < Wo; ++ox, ++src) {
              const int ix = ox * stride - pad + kx;
              if (ix >= 0 && ix < W) dst[ix] += *src;
            }
          }
        }
      }
    }
  }
  return make_result(std::move(out), {cols_var},
                     [k, stride, pad](const Var&, const Var& g) {
                       return std::vector<Var>{im2col(g, k, stride, pad)};
                     },
                     "col2im");
}

Var detach(const Var& x) { return Var::constant(x.value()); }

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  const Shape xs = x.shape();
  const Shape ws = w.shape();
  if (ws[1] != xs[1] || ws[2] != ws[3]) {
    throw ShapeMismatch("conv2d: input " + to_string(xs) + " weight " + to_string(ws));
  }
  const int k = ws[2];
  const int Ho = conv_out(xs[2], k, stride, pad);
  const int Wo = conv_out(xs[3], k, stride, pad);
  const Var cols = im2col(x, k, stride, pad);
  const Var y = matmul(w, cols);  // (Co, N*Ho*Wo)
  const Var nchw = permute01(reshape(y, {ws[0], xs[0], Ho, Wo}));
  return add(nchw, expand_channel(b, nchw.shape()));
}

Var linear(const Var& x, const Var& w, const Var& b) {
  const Var y = matmul(x, w, false, true);
  return add(y, expand_channel(b, y.shape()));
}

Var channel_standardize(const Var& x, double eps) {
  const Shape s = x.shape();
  const Var mu = spatial_mean(x);
  const Var centered = sub(x, spatial_expand(mu, s[2], s[3]));
  const Var var = spatial_mean(mul(centered, centered));
  const Var inv = rsqrt(add_scalar(var, eps));
  return mul(centered, spatial_expand(inv, s[2], s[3]));
}

}  // namespace vslab::nn::ops
