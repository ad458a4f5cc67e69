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

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "vslab/geometry.hpp"

namespace vslab {

/// Pinhole camera. Pixel (i, j) has its center at (i + 0.5, j + 0.5).
struct CameraIntrinsics {
  double focal = 48.0;  // pixels
  double cx = 32.0;
  double cy = 32.0;
  int width = 64;
  int height = 64;

  /// Square image of side `size` with the default 67.4 degree field of view.
  static CameraIntrinsics desk(int size = 64);
  void validate() const;
};

/// Three-channel float image, row-major, channel-interleaved, values in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, double fill = 0.0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, fill) {}

  double& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  [[nodiscard]] double at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  [[nodiscard]] std::size_t size() const { return data.size(); }

  /// 8-bit encoding, round(255 v) per value.
  [[nodiscard]] std::vector<std::uint8_t> to_bytes() const;
  static Image from_bytes(int w, int h, std::span<const std::uint8_t> bytes);

  bool operator==(const Image&) const = default;
};

/// Domain-randomization toggles. Disabled toggles use canonical values.
struct DrConfig {
  bool randomize_texture = true;
  bool include_distractors = true;
  bool randomize_lighting = true;

  [[nodiscard]] std::uint8_t bits() const;
  static DrConfig from_bits(std::uint8_t b);
  bool operator==(const DrConfig&) const = default;
};

struct PlaneTexture {
  std::vector<Eigen::Vector3d> palette;
  double period = 0.08;  // tile edge, meters
  int cells = 8;         // table is cells x cells, repeated
  std::vector<std::uint8_t> table;  // palette index per cell
};

struct RectTarget {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  Eigen::Vector2d size{0.16, 0.08};
  Eigen::Vector3d color{0.80, 0.30, 0.20};
};

/// Convex polygon on the ground plane, vertices counter-clockwise.
struct Distractor {
  std::vector<Eigen::Vector2d> vertices;
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
};

struct Lighting {
  Eigen::Vector3d gain = Eigen::Vector3d::Ones();  // per channel, [0.3, 1.7]
  Eigen::Vector3d bias = Eigen::Vector3d::Zero();  // per channel, [-0.2, 0.2]
};

/// Flat scene on the z = 0 world plane.
struct Scene {
  PlaneTexture texture;
  RectTarget target;
  std::vector<Distractor> distractors;  // later entries are drawn on top
  Lighting lighting;
  std::uint64_t seed = 0;
};

Scene make_scene(std::uint64_t seed, const DrConfig& dr);

/// Primitive hit by a pixel ray: kPlaneHit, kTargetHit, kMissHit, or a
/// distractor index.
inline constexpr int kPlaneHit = -1;
inline constexpr int kTargetHit = -2;
inline constexpr int kMissHit = -3;

/// Ray-casts every pixel onto the ground plane. Throws DegenerateView when
/// the camera is below 0.05 m or its optical axis does not meet the plane.
Image render(const Scene& scene, const Pose& camera, const CameraIntrinsics& intr);
std::vector<int> render_hits(const Scene& scene, const Pose& camera, const CameraIntrinsics& intr);

/// Camera at (x, y, height) looking straight down, image x along world x.
Pose nadir_camera(double x, double y, double height);

/// Mean over pixels and channels of the squared difference. Throws
/// ShapeMismatch for images of different size.
double photometric_mse(const Image& a, const Image& b);

/// Binary PPM (P6), 8 bits per channel.
void write_ppm(const std::filesystem::path& path, const Image& img);

}  // namespace vslab
