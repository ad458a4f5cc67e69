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
#include <string_view>

namespace vslab {

/// Counter-based generator: the n-th output is a pure function of (key, n).
///
/// Streams are split by hashing a label or an index into the key, so the
/// scene, dataset and training streams derived from one master seed never
/// depend on the order in which they are consumed.
class Rng {
 public:
  explicit Rng(std::uint64_t key) : key_(key) {}

  /// Child stream identified by a fixed label, e.g. "scene" or "train".
  [[nodiscard]] Rng split(std::string_view label) const;
  /// Child stream identified by an index, e.g. a sample slot.
  [[nodiscard]] Rng split(std::uint64_t index) const;

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi);
  /// Uniform in (0, 1].
  double uniform_open_closed();
  /// Standard normal via Box-Muller; one draw per call.
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  [[nodiscard]] std::uint64_t key() const { return key_; }
  [[nodiscard]] std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

}  // namespace vslab
