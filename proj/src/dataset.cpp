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

#include "vslab/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "vslab/binary_io.hpp"
#include "vslab/error.hpp"

namespace vslab {

namespace {

constexpr std::string_view kMagic = "VSDS";
constexpr std::uint16_t kVersion = 1;

}  // namespace

const OffsetLimits OffsetLimits::kLSD{0.30, 0.20, 0.15, 0.40};
const OffsetLimits OffsetLimits::kSSD{0.05, 0.04, 0.05, 0.10};

std::string_view to_string(DatasetKind k) { return k == DatasetKind::LSD ? "lsd" : "ssd"; }

OffsetLimits OffsetLimits::make(double xy_t, double z_t, double xy_r, double z_r) {
  for (double b : {xy_t, z_t, xy_r, z_r}) {
    if (!(b > 0.0) || !std::isfinite(b)) throw InvalidArgument("offset bounds must be positive");
  }
  return {xy_t, z_t, xy_r, z_r};
}

const OffsetLimits& OffsetLimits::of(DatasetKind k) { return k == DatasetKind::LSD ? kLSD : kSSD; }

double OffsetLimits::bound(int i) const {
  switch (i) {
    case 0:
    case 1: return xy_translation;
    case 2: return z_translation;
    case 3:
    case 4: return xy_rotation;
    default: return z_rotation;
  }
}

bool OffsetLimits::contains(const Label& l) const {
  for (int i = 0; i < 6; ++i) {
    if (!(std::abs(l[i]) <= bound(i))) return false;
  }
  return true;
}

Pose Offset::pose() const {
  return pose_from({value[0], value[1], value[2]}, ThetaU{{value[3], value[4], value[5]}});
}

Offset sample_offset(const OffsetLimits& limits, Rng& rng) {
  Offset o;
  o.sampler = rng.uniform() < 0.5 ? Sampler::Uniform : Sampler::Gaussian;
  for (int i = 0; i < 6; ++i) {
    const double b = limits.bound(i);
    if (o.sampler == Sampler::Uniform) {
      o.value[i] = rng.uniform(-b, b);
    } else {
      const double sigma = rng.uniform_open_closed() * (b / 3.0);
      o.value[i] = std::clamp(sigma * rng.normal(), -b, b);
    }
  }
  return o;
}

Image Sample::reference_image() const { return Image::from_bytes(width, height, reference); }
Image Sample::current_image() const { return Image::from_bytes(width, height, current); }

Sample generate_pair(const Scene& scene, const Pose& base, const Offset& offset,
                     const CameraIntrinsics& intr, DatasetKind origin, PairPoses* poses) {
  const Pose current = compose(base, offset.pose());
  Sample s;
  s.width = intr.width;
  s.height = intr.height;
  s.reference = render(scene, base, intr).to_bytes();
  s.current = render(scene, current, intr).to_bytes();
  s.label = offset.value;
  s.origin = origin;
  s.sampler = offset.sampler;
  if (poses != nullptr) *poses = {base, current};
  return s;
}

Pose jittered_base(Rng& rng, const DatasetOptions& opt) {
  const double x = rng.uniform(-opt.lateral_jitter, opt.lateral_jitter);
  const double y = rng.uniform(-opt.lateral_jitter, opt.lateral_jitter);
  return nadir_camera(x, y, opt.nominal_height);
}

Dataset generate_dataset(DatasetKind kind, std::size_t n, std::uint64_t master_seed,
                         const DrConfig& dr, const DatasetOptions& opt) {
  if (n == 0) throw InvalidArgument("dataset size must be positive");
  Dataset d;
  d.kind = kind;
  d.limits = OffsetLimits::of(kind);
  d.master_seed = master_seed;
  d.dr = dr;
  d.width = opt.intr.width;
  d.height = opt.intr.height;
  d.samples.reserve(n);

  const Rng stream = Rng(master_seed).split("dataset").split(to_string(kind));
  for (std::size_t i = 0; i < n; ++i) {
    const Rng slot = stream.split(static_cast<std::uint64_t>(i));
    bool done = false;
    for (int attempt = 0; attempt < kMaxDegenerateRetries && !done; ++attempt) {
      Rng rng = slot.split(static_cast<std::uint64_t>(attempt));
      const Scene scene = make_scene(rng.next_u64(), dr);
      const Pose base = jittered_base(rng, opt);
      const Offset offset = sample_offset(d.limits, rng);
      try {
        d.samples.push_back(generate_pair(scene, base, offset, opt.intr, kind));
        done = true;
      } catch (const DegenerateView&) {
      }
    }
    if (!done) throw RejectionExhausted("slot " + std::to_string(i) + " kept producing degenerate views");
  }
  return d;
}

std::vector<std::uint8_t> serialize_dataset(const Dataset& d) {
  if (d.samples.empty()) throw InvalidArgument("refusing to save an empty dataset");
  ByteWriter w;
  w.magic(kMagic);
  w.u16(kVersion);
  w.u8(static_cast<std::uint8_t>(d.kind));
  w.u32(static_cast<std::uint32_t>(d.samples.size()));
  for (double b : {d.limits.xy_translation, d.limits.z_translation, d.limits.xy_rotation, d.limits.z_rotation}) {
    w.f64(-b);
    w.f64(b);
  }
  w.u64(d.master_seed);
  w.u16(static_cast<std::uint16_t>(d.width));
  w.u16(static_cast<std::uint16_t>(d.height));
  w.u8(d.dr.bits());
  const std::size_t image_bytes = static_cast<std::size_t>(d.width) * d.height * 3;
  for (const Sample& s : d.samples) {
    if (s.reference.size() != image_bytes || s.current.size() != image_bytes) {
      throw ShapeMismatch("sample image size differs from dataset resolution");
    }
    w.bytes(s.reference);
    w.bytes(s.current);
    for (double v : s.label) w.f64(v);
    w.u8(static_cast<std::uint8_t>(s.origin));
    w.u8(static_cast<std::uint8_t>(s.sampler));
  }
  w.seal();
  return w.take();
}

Dataset deserialize_dataset(std::span<const std::uint8_t> bytes) {
  ByteReader r(verify_sealed(bytes));
  r.expect_magic(kMagic);
  if (const auto v = r.u16(); v != kVersion) {
    throw FormatVersionMismatch("dataset version " + std::to_string(v));
  }
  Dataset d;
  d.kind = static_cast<DatasetKind>(r.u8());
  const std::uint32_t n = r.u32();
  std::array<double, 4> b{};
  for (double& x : b) {
    r.f64();  // lower bound, the negation of the upper one
    x = r.f64();
  }
  d.limits = OffsetLimits::make(b[0], b[1], b[2], b[3]);
  d.master_seed = r.u64();
  d.width = r.u16();
  d.height = r.u16();
  d.dr = DrConfig::from_bits(r.u8());
  const std::size_t image_bytes = static_cast<std::size_t>(d.width) * d.height * 3;
  d.samples.resize(n);
  for (Sample& s : d.samples) {
    s.width = d.width;
    s.height = d.height;
    auto ref = r.bytes(image_bytes);
    s.reference.assign(ref.begin(), ref.end());
    auto cur = r.bytes(image_bytes);
    s.current.assign(cur.begin(), cur.end());
    for (double& v : s.label) v = r.f64();
    s.origin = static_cast<DatasetKind>(r.u8());
    s.sampler = static_cast<Sampler>(r.u8());
  }
  if (r.remaining() != 0) throw ChecksumMismatch("trailing bytes after samples");
  return d;
}

void save_dataset(const Dataset& d, const std::filesystem::path& path) {
  write_file(path, serialize_dataset(d));
}

Dataset load_dataset(const std::filesystem::path& path) { return deserialize_dataset(read_file(path)); }

}  // namespace vslab
