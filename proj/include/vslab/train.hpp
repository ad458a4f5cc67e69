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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vslab/autodiff.hpp"
#include "vslab/dataset.hpp"
#include "vslab/network.hpp"

namespace vslab::train {

enum class Regime : std::uint8_t { LsdOnly = 0, Comb, VanillaSwitch, CnnSwitch, ImplicitSwitch, MetaSwitch };

inline constexpr std::array<Regime, 6> kAllRegimes{Regime::LsdOnly,   Regime::Comb,           Regime::VanillaSwitch,
                                                   Regime::CnnSwitch, Regime::ImplicitSwitch, Regime::MetaSwitch};

std::string_view to_string(Regime r);
std::optional<Regime> parse_regime(std::string_view s);
/// Number of separately stored networks a regime needs.
std::size_t model_count(Regime r);

struct TrainConfig {
  double learning_rate = 1e-4;
  double fine_learning_rate = 1e-5;
  double weight_decay = 4e-5;
  int epochs_main = 50;
  int epochs_fine = 20;
  int batch_size = 32;
  double beta = 0.2;
  std::uint64_t master_seed = 0;
  double clip_norm = 10.0;
  /// Tail fraction of each dataset held out for early stopping during
  /// per-head finetuning.
  double holdout_fraction = 0.1;
  nn::NetConfig net;

  void validate() const;
};

struct MamlConfig {
  double alpha = 0.01;      // inner step size
  double beta_meta = 1e-4;  // meta step size
  int k_shot = 8;
  int iterations = 1000;
  bool first_order = false;
  int log_every = 50;

  void validate() const;
};

/// Schedule used for desk-scale runs on a single CPU core.
TrainConfig desk_config();
MamlConfig desk_maml_config();

/// One row of the training log. Inactive heads carry NaN.
struct LogRow {
  std::string phase;
  int epoch = 0;
  std::array<double, 3> head_loss{};  // indexed by HeadId
  std::vector<double> s_hat;
  double total = 0.0;
  int clipped = 0;  // batches whose gradient norm was clipped
};

struct TrainedBundle {
  Regime regime = Regime::LsdOnly;
  /// LsdOnly/Comb/ImplicitSwitch/MetaSwitch: {model}. VanillaSwitch:
  /// {lsd, ssd}. CnnSwitch: {lsd, ssd, classifier}.
  std::vector<nn::ModelParams> models;
  std::optional<double> threshold;  // VanillaSwitch only
  std::vector<LogRow> log;

  bool operator==(const TrainedBundle&) const;
};

std::vector<const Sample*> sample_pointers(std::span<const Dataset* const> datasets);

/// Trains all `heads` jointly on the union of `datasets` with AdamW, first at
/// the main rate then at the fine rate. Several heads are combined with the
/// learned loss balance.
nn::ModelParams train_supervised(std::span<const Dataset* const> datasets, std::span<const nn::HeadId> heads,
                                 const TrainConfig& cfg, std::uint64_t seed, std::vector<LogRow>* log = nullptr);

/// Index halves [0, n/2) and [n/2, n).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_halves(std::size_t n);

/// One task of the meta-objective: its loss on the inner (adaptation)
/// samples and on the meta samples, both as functions of the parameters.
struct MetaTask {
  nn::Closure inner_loss;
  nn::Closure outer_loss;
};

struct MetaStep {
  std::vector<nn::Tensor> theta_grad;
  std::vector<double> s_grad;
  std::vector<double> outer_losses;  // L_i at the adapted parameters
  double objective = 0.0;            // sum_i L_i exp(-s_i) + s_i
};

/// theta - alpha * grad inner(theta), evaluated without keeping a graph.
std::vector<nn::Tensor> inner_adapt(std::span<const nn::Tensor> theta, const nn::Closure& inner, double alpha);

/// Evaluates the balanced meta-objective and its gradient in theta and s.
/// Each task adapts theta by one gradient step of size alpha on its inner
/// loss, then is scored by its outer loss at the adapted point.
MetaStep meta_objective(std::span<const nn::Tensor> theta, std::span<const double> s_hat,
                        std::span<const MetaTask> tasks, double alpha, bool first_order);

/// Plain gradient descent on theta and s with step beta_meta.
void apply_meta_step(std::span<nn::Tensor> theta, std::span<double> s_hat, const MetaStep& step, double beta_meta);

/// Meta-trains one network with all three heads: RegLSD on LSD, RegSSD on
/// SSD, Cls on both. Each dataset is split into an inner half and a meta
/// half.
nn::ModelParams maml_train(const Dataset& lsd, const Dataset& ssd, const MamlConfig& mcfg, const TrainConfig& cfg,
                           std::vector<LogRow>* log = nullptr);

struct FinetuneReport {
  std::array<double, 3> holdout_before{};
  std::array<double, 3> holdout_after{};
};

/// Trains each head separately with the trunk frozen, keeping per head the
/// epoch with the lowest hold-out loss (the starting point included).
nn::ModelParams finetune_heads(const nn::ModelParams& params, const Dataset& lsd, const Dataset& ssd,
                               const TrainConfig& cfg, std::vector<LogRow>* log = nullptr,
                               FinetuneReport* report = nullptr);

struct ValidationState {
  double mse = 0.0;
  bool use_ssd = false;
};

/// Photometric MSE of every sample pair, labelled by origin.
std::vector<ValidationState> validation_states(std::span<const Dataset* const> datasets);

/// Balanced accuracy of the rule "use SSD when mse < threshold".
double balanced_accuracy(std::span<const ValidationState> states, double threshold);

/// Threshold maximizing balanced accuracy over the candidate list; ties go
/// to the earliest candidate. Without candidates every gap between sorted
/// mse values is tried at its midpoint, plus one below and one above all.
double calibrate_vanilla_threshold(std::span<const ValidationState> states, std::span<const double> candidates = {});

TrainedBundle build_bundle(Regime regime, const Dataset* lsd, const Dataset* ssd, const TrainConfig& cfg,
                           const MamlConfig& mcfg);

/// Training log as CSV: phase, epoch, per-head losses, s_hat values, total.
std::string log_csv(std::span<const LogRow> log);

}  // namespace vslab::train
