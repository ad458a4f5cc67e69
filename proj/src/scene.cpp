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

#include "vslab/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <string>

#include "vslab/error.hpp"
#include "vslab/rng.hpp"

namespace vslab {

namespace {

constexpr double kMinHeight = 0.05;
constexpr double kParallelTol = 1e-6;  // radians between optical axis and plane

Eigen::Vector3d random_color(Rng& rng) { return {rng.uniform(), rng.uniform(), rng.uniform()}; }

PlaneTexture canonical_texture() {
  PlaneTexture t;
  t.palette = {{0.85, 0.85, 0.80}, {0.35, 0.40, 0.45}, {0.60, 0.55, 0.30}, {0.20, 0.25, 0.20}};
  t.period = 0.08;
  t.cells = 8;
  Rng rng(0x7e47e8);
  t.table.resize(static_cast<std::size_t>(t.cells) * t.cells);
  for (auto& c : t.table) c = static_cast<std::uint8_t>(rng.below(t.palette.size()));
  return t;
}

bool inside_convex(const Distractor& d, const Eigen::Vector2d& p) {
  const std::size_t n = d.vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d& a = d.vertices[i];
    const Eigen::Vector2d& b = d.vertices[(i + 1) % n];
    const double cross = (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
    if (cross < 0.0) return false;
  }
  return true;
}

int hit_primitive(const Scene& s, const Eigen::Vector2d& p) {
  const RectTarget& t = s.target;
  if (std::abs(p.x() - t.center.x()) <= 0.5 * t.size.x() &&
      std::abs(p.y() - t.center.y()) <= 0.5 * t.size.y()) {
    return kTargetHit;
  }
  for (int i = static_cast<int>(s.distractors.size()) - 1; i >= 0; --i) {
    if (inside_convex(s.distractors[i], p)) return i;
  }
  return kPlaneHit;
}

Eigen::Vector3d texture_color(const PlaneTexture& t, const Eigen::Vector2d& p) {
  const auto cell = [&](double x) {
    const long long k = static_cast<long long>(std::floor(x / t.period));
    const long long m = k % t.cells;
    return static_cast<int>(m < 0 ? m + t.cells : m);
  };
  return t.palette[t.table[static_cast<std::size_t>(cell(p.y())) * t.cells + cell(p.x())]];
}

void check_view(const Pose& camera) {
  if (!camera.rotation.allFinite() || !camera.translation.allFinite()) {
    throw DegenerateView("non-finite camera pose");
  }
  if (camera.translation.z() < kMinHeight) {
    throw DegenerateView("camera below minimum height");
  }
  // Optical axis is the camera z column; it must point down into the plane.
  const double axis_z = camera.rotation(2, 2);
  if (axis_z > -std::sin(kParallelTol)) {
    throw DegenerateView("optical axis does not intersect the ground plane");
  }
}

// Calls fn(x, y, hit, ground_point) per pixel.
template <typename Fn>
void cast_rays(const Pose& camera, const CameraIntrinsics& intr, const Scene& scene, Fn&& fn) {
  intr.validate();
  check_view(camera);
  const Eigen::Matrix3d& R = camera.rotation;
  const Eigen::Vector3d& c = camera.translation;
  for (int y = 0; y < intr.height; ++y) {
    for (int x = 0; x < intr.width; ++x) {
      const Eigen::Vector3d d_cam((x + 0.5 - intr.cx) / intr.focal, (y + 0.5 - intr.cy) / intr.focal, 1.0);
      const Eigen::Vector3d d = R * d_cam;
      if (d.z() >= 0.0) {
        fn(x, y, kMissHit, Eigen::Vector2d::Zero());
        continue;
      }
      const double s = -c.z() / d.z();
      const Eigen::Vector2d p(c.x() + s * d.x(), c.y() + s * d.y());
      fn(x, y, hit_primitive(scene, p), p);
    }
  }
}

}  // namespace

CameraIntrinsics CameraIntrinsics::desk(int size) {
  CameraIntrinsics k;
  k.width = size;
  k.height = size;
  k.focal = 0.75 * size;
  k.cx = 0.5 * size;
  k.cy = 0.5 * size;
  return k;
}

void CameraIntrinsics::validate() const {
  if (!(focal > 0.0) || width <= 0 || height <= 0 || !(cx > 0.0 && cx < width) ||
      !(cy > 0.0 && cy < height)) {
    throw InvalidArgument("invalid camera intrinsics");
  }
}

std::vector<std::uint8_t> Image::to_bytes() const {
  std::vector<std::uint8_t> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(data[i], 0.0, 1.0) * 255.0));
  }
  return out;
}

Image Image::from_bytes(int w, int h, std::span<const std::uint8_t> bytes) {
  Image img(w, h);
  if (bytes.size() != img.data.size()) throw ShapeMismatch("image byte count");
  for (std::size_t i = 0; i < bytes.size(); ++i) img.data[i] = bytes[i] / 255.0;
  return img;
}

std::uint8_t DrConfig::bits() const {
  return static_cast<std::uint8_t>((randomize_texture ? 1 : 0) | (include_distractors ? 2 : 0) |
                                   (randomize_lighting ? 4 : 0));
}

DrConfig DrConfig::from_bits(std::uint8_t b) {
  return {(b & 1) != 0, (b & 2) != 0, (b & 4) != 0};
}

Scene make_scene(std::uint64_t seed, const DrConfig& dr) {
  Scene s;
  s.seed = seed;
  const Rng root(seed);

  if (dr.randomize_texture) {
    Rng rng = root.split("texture");
    PlaneTexture& t = s.texture;
    t = canonical_texture();
    for (auto& c : t.palette) {
      for (int k = 0; k < 3; ++k) c[k] = std::clamp(c[k] + rng.uniform(-0.2, 0.2), 0.0, 1.0);
    }
    s.target.color = random_color(rng);
  } else {
    s.texture = canonical_texture();
  }

  if (dr.include_distractors) {
    Rng rng = root.split("distractors");
    const int count = 3 + static_cast<int>(rng.below(4));
    for (int i = 0; i < count; ++i) {
      Distractor d;
      const Eigen::Vector2d center(rng.uniform(-0.45, 0.45), rng.uniform(-0.45, 0.45));
      const double radius = rng.uniform(0.03, 0.08);
      const int sides = 3 + static_cast<int>(rng.below(4));
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      for (int k = 0; k < sides; ++k) {
        const double a = phase + 2.0 * std::numbers::pi * k / sides;
        d.vertices.emplace_back(center.x() + radius * std::cos(a), center.y() + radius * std::sin(a));
      }
      d.color = random_color(rng);
      s.distractors.push_back(std::move(d));
    }
  }

  if (dr.randomize_lighting) {
    Rng rng = root.split("lighting");
    for (int c = 0; c < 3; ++c) {
      s.lighting.gain[c] = rng.uniform(0.3, 1.7);
      s.lighting.bias[c] = rng.uniform(-0.2, 0.2);
    }
  }
  return s;
}

std::vector<int> render_hits(const Scene& scene, const Pose& camera, const CameraIntrinsics& intr) {
  std::vector<int> hits(static_cast<std::size_t>(intr.width) * intr.height);
  cast_rays(camera, intr, scene, [&](int x, int y, int hit, const Eigen::Vector2d&) {
    hits[static_cast<std::size_t>(y) * intr.width + x] = hit;
  });
  return hits;
}

Image render(const Scene& scene, const Pose& camera, const CameraIntrinsics& intr) {
  Image img(intr.width, intr.height);
  const Lighting& L = scene.lighting;
  cast_rays(camera, intr, scene, [&](int x, int y, int hit, const Eigen::Vector2d& p) {
    Eigen::Vector3d color;
    switch (hit) {
      case kMissHit: color.setZero(); break;
      case kTargetHit: color = scene.target.color; break;
      case kPlaneHit: color = texture_color(scene.texture, p); break;
      default: color = scene.distractors[static_cast<std::size_t>(hit)].color; break;
    }
    for (int c = 0; c < 3; ++c) {
      const double v = std::clamp(color[c] * L.gain[c] + L.bias[c], 0.0, 1.0);
      // Quantized to 8-bit levels like a real sensor.
      img.at(x, y, c) = static_cast<double>(std::lround(v * 255.0)) / 255.0;
    }
  });
  return img;
}

Pose nadir_camera(double x, double y, double height) {
  Pose p;
  p.rotation = Eigen::Vector3d(1.0, -1.0, -1.0).asDiagonal();
  p.translation = {x, y, height};
  return p;
}

double photometric_mse(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height || a.data.size() != b.data.size()) {
    throw ShapeMismatch("photometric_mse on images of different size");
  }
  if (a.data.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.data.size());
}

void write_ppm(const std::filesystem::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoFailure("cannot open " + path.string());
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  const auto bytes = img.to_bytes();
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoFailure("write failed for " + path.string());
}

}  // namespace vslab
