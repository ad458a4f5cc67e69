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

#include "vslab/network.hpp"

namespace vslab::nn {

/// Model file: "VSNN", version, encoder tag, network shape, normalization
/// statistics, balance scales, then every present parameter tensor with its
/// name and shape, little-endian float64, sealed with CRC32. Absent heads are
/// not stored and load as zeros.
std::vector<std::uint8_t> serialize_model(const ModelParams& p);
ModelParams deserialize_model(std::span<const std::uint8_t> bytes);

void save_model(const ModelParams& p, const std::filesystem::path& path);
ModelParams load_model(const std::filesystem::path& path);

/// CRC32 over the trunk tensors' bytes.
std::uint32_t trunk_checksum(const ModelParams& p);

}  // namespace vslab::nn
