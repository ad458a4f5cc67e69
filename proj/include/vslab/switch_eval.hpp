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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vslab/dataset.hpp"
#include "vslab/servo.hpp"
#include "vslab/train.hpp"

namespace vslab::eval {

enum class Scenario : std::uint8_t { Proximal = 0, Distal = 1 };

std::string_view to_string(Scenario s);
std::optional<Scenario> parse_scenario(std::string_view s);
/// Start-offset limits of each scenario.
const OffsetLimits& scenario_limits(Scenario s);

/// One paired experiment: the scene, the goal camera and the start offset
/// relative to the goal.
struct Experiment {
  std::size_t index = 0;
  std::uint64_t scene_seed = 0;
  Pose goal;
  Offset offset;

  [[nodiscard]] Pose start() const { return compose(goal, offset.pose()); }
};

/// Depends only on (scenario, seed, index); offsets are uniform per
/// component within the scenario limits.
Experiment draw_experiment(Scenario s, std::uint64_t seed, std::size_t index, const DatasetOptions& opt = {});

struct Contender {
  std::string name;
  const train::TrainedBundle* bundle = nullptr;  // null for the oracle
  servo::SwitchPolicy policy;
};

/// Contender for a trained bundle under its regime's switching rule.
Contender contender(const train::TrainedBundle& b);

struct RunRecord {
  std::string name;
  Experiment experiment;
  servo::ServoTrace trace;
};

struct ComparisonRow {
  std::string regime;
  Scenario scenario = Scenario::Distal;
  std::uint64_t model_bytes = 0;
  double pos_mean = 0.0;
  double pos_std = 0.0;
  double rot_mean = 0.0;
  double rot_std = 0.0;
  int runs = 0;
  int failures = 0;
};

struct BatchResult {
  std::vector<ComparisonRow> rows;
  std::vector<RunRecord> runs;  // ordered by contender, then experiment
};

/// Runs every contender on the same n experiments. Failed runs count at
/// their last valid error.
BatchResult run_batch(std::span<const Contender> contenders, Scenario s, int n, std::uint64_t seed,
                      const servo::ServoConfig& cfg = {}, const DatasetOptions& opt = {});

/// Mean and population standard deviation; both 0 for a single value.
std::pair<double, double> mean_std(std::span<const double> v);

/// "full" or "no-texture", "no-distractor", "no-lighting" for one disabled
/// toggle; other combinations as "dr-<bits>".
std::string dr_label(const DrConfig& dr);

struct AblationOptions {
  std::size_t samples_per_dataset = 4000;
  train::TrainConfig train;
  train::MamlConfig maml;
  DatasetOptions data;
  servo::ServoConfig servo;
};

/// Trains one bundle per randomization variant and evaluates each on fully
/// randomized scenes. Rows are named by dr_label.
std::vector<ComparisonRow> ablation_batch(std::span<const DrConfig> variants, train::Regime regime, Scenario s, int n,
                                          std::uint64_t seed, const AblationOptions& opt);

std::string comparison_csv(std::span<const ComparisonRow> rows);
/// Per-run final errors and start offsets.
std::string runs_csv(std::span<const RunRecord> runs);

/// comparison.csv always; with runs also runs.csv, trace_<name>_<index>.csv
/// and the photometric error and twist norm plots.
void emit_outputs(std::span<const ComparisonRow> rows, std::span<const RunRecord> runs,
                  const std::filesystem::path& out_dir);

}  // namespace vslab::eval
