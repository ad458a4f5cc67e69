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
#include <span>
#include <vector>

#include "vslab/scene.hpp"

namespace vslab::plot {

struct Series {
  std::vector<double> y;  // sampled at x = 0, 1, 2, ...
  std::array<double, 3> color{0.0, 0.0, 0.0};
};

struct PlotOptions {
  int width = 640;
  int height = 360;
  bool log_y = false;
  double log_floor = 1e-12;  // values below are drawn at the floor
};

/// Line chart of all series on shared axes, white background, black frame.
/// Non-finite points break the line.
Image line_plot(std::span<const Series> series, const PlotOptions& opt);

/// Distinct color for series group i.
std::array<double, 3> palette(std::size_t i);

}  // namespace vslab::plot
