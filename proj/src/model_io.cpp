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

#include "vslab/model_io.hpp"

#include <bit>

#include "vslab/binary_io.hpp"
#include "vslab/error.hpp"

namespace vslab::nn {

namespace {

constexpr std::string_view kMagic = "VSNN";
constexpr std::uint16_t kVersion = 1;

}  // namespace

std::vector<std::uint8_t> serialize_model(const ModelParams& p) {
  const auto specs = param_specs(p.config);
  if (specs.size() != p.values.size()) throw LengthMismatch("parameter list does not match configuration");
  ByteWriter w;
  w.magic(kMagic);
  w.u16(kVersion);
  w.u8(static_cast<std::uint8_t>(p.config.variant));
  w.u16(static_cast<std::uint16_t>(p.config.image_size));
  for (int width : p.config.widths) w.u16(static_cast<std::uint16_t>(width));
  w.u16(static_cast<std::uint16_t>(p.config.head_hidden));
  for (int c = 0; c < 3; ++c) w.f64(p.norm.mean[c]);
  for (int c = 0; c < 3; ++c) w.f64(p.norm.stddev[c]);
  w.u8(static_cast<std::uint8_t>(p.balance.s_hat.size()));
  for (double s : p.balance.s_hat) w.f64(s);
  w.u8(p.present);

  std::uint16_t stored = 0;
  for (const ParamSpec& s : specs) stored += p.has(s.group) ? 1 : 0;
  w.u16(stored);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (!p.has(specs[i].group)) continue;
    w.str(specs[i].name);
    for (int d : specs[i].shape) w.u32(static_cast<std::uint32_t>(d));
    for (double v : p.values[i].values()) w.f64(v);
  }
  w.seal();
  return w.take();
}

ModelParams deserialize_model(std::span<const std::uint8_t> bytes) {
  ByteReader r(verify_sealed(bytes));
  r.expect_magic(kMagic);
  if (const auto v = r.u16(); v != kVersion) throw FormatVersionMismatch("model version " + std::to_string(v));
  ModelParams p;
  const std::uint8_t variant = r.u8();
  if (variant > 2) throw FormatVersionMismatch("unknown encoder variant");
  p.config.variant = static_cast<EncoderVariant>(variant);
  p.config.image_size = r.u16();
  for (int& width : p.config.widths) width = r.u16();
  p.config.head_hidden = r.u16();
  for (int c = 0; c < 3; ++c) p.norm.mean[c] = r.f64();
  for (int c = 0; c < 3; ++c) p.norm.stddev[c] = r.f64();
  p.balance.s_hat.resize(r.u8());
  for (double& s : p.balance.s_hat) s = r.f64();
  p.present = r.u8();

  const auto specs = param_specs(p.config);
  for (const ParamSpec& s : specs) p.values.emplace_back(s.shape, 0.0);
  const std::uint16_t stored = r.u16();
  for (std::uint16_t k = 0; k < stored; ++k) {
    const std::string name = r.str();
    Shape shape{};
    for (int& d : shape) d = static_cast<int>(r.u32());
    std::size_t idx = specs.size();
    for (std::size_t i = 0; i < specs.size(); ++i) {
      if (specs[i].name == name) idx = i;
    }
    if (idx == specs.size()) throw FormatVersionMismatch("unknown parameter " + name);
    if (shape != specs[idx].shape) throw ShapeMismatch("stored shape of " + name);
    for (double& v : p.values[idx].values()) v = r.f64();
  }
  if (r.remaining() != 0) throw ChecksumMismatch("trailing bytes in model");
  return p;
}

void save_model(const ModelParams& p, const std::filesystem::path& path) { write_file(path, serialize_model(p)); }

ModelParams load_model(const std::filesystem::path& path) { return deserialize_model(read_file(path)); }

std::uint32_t trunk_checksum(const ModelParams& p) {
  std::vector<std::uint8_t> bytes;
  for (std::size_t i : p.indices(ParamGroup::Trunk)) {
    for (double v : p.values[i].values()) {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      for (int k = 0; k < 8; ++k) bytes.push_back(static_cast<std::uint8_t>(bits >> (8 * k)));
    }
  }
  return crc32(bytes);
}

}  // namespace vslab::nn
