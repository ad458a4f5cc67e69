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
#include <filesystem>
#include <string_view>
#include <vector>

#include "vslab/geometry.hpp"
#include "vslab/rng.hpp"
#include "vslab/scene.hpp"

namespace vslab {

enum class DatasetKind : std::uint8_t { LSD = 0, SSD = 1 };
enum class Sampler : std::uint8_t { Uniform = 0, Gaussian = 1 };

std::string_view to_string(DatasetKind k);

/// Relative pose label: (tx, ty, tz) in meters then theta-u in radians.
using Label = std::array<double, 6>;

/// Symmetric per-component bounds on a camera offset.
struct OffsetLimits {
  double xy_translation;
  double z_translation;
  double xy_rotation;
  double z_rotation;

  static const OffsetLimits kLSD;
  static const OffsetLimits kSSD;

  /// Throws InvalidArgument unless every bound is positive and finite.
  static OffsetLimits make(double xy_t, double z_t, double xy_r, double z_r);
  static const OffsetLimits& of(DatasetKind k);

  /// Bound of label component i.
  [[nodiscard]] double bound(int i) const;
  [[nodiscard]] bool contains(const Label& l) const;
  bool operator==(const OffsetLimits&) const = default;
};

struct Offset {
  Label value{};
  Sampler sampler = Sampler::Uniform;

  [[nodiscard]] Pose pose() const;
};

/// Mixture sampler: half the draws are uniform per component; the other half
/// are zero-mean Gaussian with a per-component sigma drawn in (0, bound/3],
/// clipped to the bound.
Offset sample_offset(const OffsetLimits& limits, Rng& rng);

struct Sample {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> reference;  // RGB8, row-major
  std::vector<std::uint8_t> current;
  Label label{};
  DatasetKind origin = DatasetKind::LSD;
  Sampler sampler = Sampler::Uniform;

  [[nodiscard]] Image reference_image() const;
  [[nodiscard]] Image current_image() const;
  bool operator==(const Sample&) const = default;
};

struct PairPoses {
  Pose reference;
  Pose current;
};

/// Renders the reference view at `base` and the current view at base * offset.
Sample generate_pair(const Scene& scene, const Pose& base, const Offset& offset,
                     const CameraIntrinsics& intr, DatasetKind origin, PairPoses* poses = nullptr);

struct DatasetOptions {
  CameraIntrinsics intr = CameraIntrinsics::desk(64);
  double nominal_height = 0.6;
  double lateral_jitter = 0.05;
};

struct Dataset {
  DatasetKind kind = DatasetKind::LSD;
  OffsetLimits limits = OffsetLimits::kLSD;
  std::uint64_t master_seed = 0;
  DrConfig dr;
  int width = 0;
  int height = 0;
  std::vector<Sample> samples;

  [[nodiscard]] std::size_t size() const { return samples.size(); }
  bool operator==(const Dataset&) const = default;
};

inline constexpr int kMaxDegenerateRetries = 16;

/// Reference camera for dataset slot draws: nadir view at the nominal height
/// with a uniform lateral jitter.
Pose jittered_base(Rng& rng, const DatasetOptions& opt);

Dataset generate_dataset(DatasetKind kind, std::size_t n, std::uint64_t master_seed,
                         const DrConfig& dr, const DatasetOptions& opt = {});

std::vector<std::uint8_t> serialize_dataset(const Dataset& d);
Dataset deserialize_dataset(std::span<const std::uint8_t> bytes);
void save_dataset(const Dataset& d, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace vslab
