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

#include "vslab/train.hpp"

namespace vslab::train {

/// Bundle file: "VSBN", version, regime tag, each model as an embedded model
/// file, the optional switching threshold and the training log, sealed with
/// CRC32.
std::vector<std::uint8_t> serialize_bundle(const TrainedBundle& b);
TrainedBundle deserialize_bundle(std::span<const std::uint8_t> bytes);

void save_bundle(const TrainedBundle& b, const std::filesystem::path& path);
TrainedBundle load_bundle(const std::filesystem::path& path);

}  // namespace vslab::train
