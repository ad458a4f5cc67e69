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

#include "vslab/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>

#include "vslab/error.hpp"

namespace vslab::plot {

namespace {

constexpr int kMargin = 24;

void put(Image& img, int x, int y, const std::array<double, 3>& c) {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  for (int k = 0; k < 3; ++k) img.at(x, y, k) = c[static_cast<std::size_t>(k)];
}

// Bresenham.
void line(Image& img, int x0, int y0, int x1, int y1, const std::array<double, 3>& c) {
  const int dx = std::abs(x1 - x0);
  const int dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1;
  const int sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    put(img, x0, y0, c);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

}  // namespace

std::array<double, 3> palette(std::size_t i) {
  static constexpr std::array<std::array<double, 3>, 8> kColors{{{0.12, 0.47, 0.71},
                                                                  {1.00, 0.50, 0.05},
                                                                  {0.17, 0.63, 0.17},
                                                                  {0.84, 0.15, 0.16},
                                                                  {0.58, 0.40, 0.74},
                                                                  {0.55, 0.34, 0.29},
                                                                  {0.89, 0.47, 0.76},
                                                                  {0.50, 0.50, 0.50}}};
  return kColors[i % kColors.size()];
}

Image line_plot(std::span<const Series> series, const PlotOptions& opt) {
  if (opt.width <= 2 * kMargin || opt.height <= 2 * kMargin) throw InvalidArgument("plot too small");
  Image img(opt.width, opt.height, 1.0);

  auto map_y = [&](double v) { return opt.log_y ? std::log10(std::max(v, opt.log_floor)) : v; };
  std::size_t max_len = 1;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const Series& s : series) {
    max_len = std::max(max_len, s.y.size());
    for (double v : s.y) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, map_y(v));
      hi = std::max(hi, map_y(v));
    }
  }
  if (!(lo <= hi)) {
    lo = 0.0;
    hi = 1.0;
  }
  if (!opt.log_y) lo = std::min(lo, 0.0);
  if (hi - lo < 1e-300) hi = lo + 1.0;

  const int x0 = kMargin;
  const int x1 = opt.width - kMargin;
  const int y0 = opt.height - kMargin;
  const int y1 = kMargin;
  const std::array<double, 3> black{0.0, 0.0, 0.0};
  line(img, x0, y0, x1, y0, black);
  line(img, x0, y1, x1, y1, black);
  line(img, x0, y0, x0, y1, black);
  line(img, x1, y0, x1, y1, black);

  const double xs = max_len > 1 ? double(x1 - x0) / double(max_len - 1) : 0.0;
  for (const Series& s : series) {
    bool have_prev = false;
    int px = 0, py = 0;
    for (std::size_t i = 0; i < s.y.size(); ++i) {
      if (!std::isfinite(s.y[i])) {
        have_prev = false;
        continue;
      }
      const int x = x0 + static_cast<int>(std::lround(double(i) * xs));
      const int y = y0 - static_cast<int>(std::lround((map_y(s.y[i]) - lo) / (hi - lo) * double(y0 - y1)));
      if (have_prev) {
        line(img, px, py, x, y, s.color);
      } else {
        put(img, x, y, s.color);
      }
      px = x;
      py = y;
      have_prev = true;
    }
  }
  return img;
}

}  // namespace vslab::plot
