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

#include "vslab/bundle_io.hpp"

#include <string>

#include "vslab/binary_io.hpp"
#include "vslab/error.hpp"
#include "vslab/model_io.hpp"

namespace vslab::train {

namespace {

constexpr std::string_view kMagic = "VSBN";
constexpr std::uint16_t kVersion = 1;

}  // namespace

std::vector<std::uint8_t> serialize_bundle(const TrainedBundle& b) {
  if (b.models.size() != model_count(b.regime)) {
    throw IncompatibleBundle(std::string(to_string(b.regime)) + " bundle needs " +
                             std::to_string(model_count(b.regime)) + " models");
  }
  ByteWriter w;
  w.magic(kMagic);
  w.u16(kVersion);
  w.u8(static_cast<std::uint8_t>(b.regime));
  w.u8(static_cast<std::uint8_t>(b.models.size()));
  for (const nn::ModelParams& m : b.models) {
    const std::vector<std::uint8_t> blob = nn::serialize_model(m);
    w.u32(static_cast<std::uint32_t>(blob.size()));
    w.bytes(blob);
  }
  w.u8(b.threshold.has_value() ? 1 : 0);
  w.f64(b.threshold.value_or(0.0));
  w.u32(static_cast<std::uint32_t>(b.log.size()));
  for (const LogRow& r : b.log) {
    w.str(r.phase);
    w.u32(static_cast<std::uint32_t>(r.epoch));
    for (double v : r.head_loss) w.f64(v);
    w.u8(static_cast<std::uint8_t>(r.s_hat.size()));
    for (double v : r.s_hat) w.f64(v);
    w.f64(r.total);
    w.u32(static_cast<std::uint32_t>(r.clipped));
  }
  w.seal();
  return w.take();
}

TrainedBundle deserialize_bundle(std::span<const std::uint8_t> bytes) {
  ByteReader r(verify_sealed(bytes));
  r.expect_magic(kMagic);
  if (const auto v = r.u16(); v != kVersion) throw FormatVersionMismatch("bundle version " + std::to_string(v));
  TrainedBundle b;
  const std::uint8_t regime = r.u8();
  if (regime >= kAllRegimes.size()) throw FormatVersionMismatch("unknown regime tag");
  b.regime = static_cast<Regime>(regime);
  const std::uint8_t n = r.u8();
  if (n != model_count(b.regime)) throw IncompatibleBundle("model count does not match regime");
  for (std::uint8_t i = 0; i < n; ++i) {
    const std::uint32_t len = r.u32();
    b.models.push_back(nn::deserialize_model(r.bytes(len)));
  }
  const bool has_threshold = r.u8() != 0;
  const double threshold = r.f64();
  if (has_threshold) b.threshold = threshold;
  const std::uint32_t rows = r.u32();
  for (std::uint32_t i = 0; i < rows; ++i) {
    LogRow row;
    row.phase = r.str();
    row.epoch = static_cast<int>(r.u32());
    for (double& v : row.head_loss) v = r.f64();
    row.s_hat.resize(r.u8());
    for (double& v : row.s_hat) v = r.f64();
    row.total = r.f64();
    row.clipped = static_cast<int>(r.u32());
    b.log.push_back(std::move(row));
  }
  if (r.remaining() != 0) throw FormatVersionMismatch("trailing bytes in bundle");
  return b;
}

void save_bundle(const TrainedBundle& b, const std::filesystem::path& path) { write_file(path, serialize_bundle(b)); }

TrainedBundle load_bundle(const std::filesystem::path& path) { return deserialize_bundle(read_file(path)); }

}  // namespace vslab::train
