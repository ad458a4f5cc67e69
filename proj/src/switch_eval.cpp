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

#include "vslab/switch_eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "vslab/binary_io.hpp"
#include "vslab/bundle_io.hpp"
#include "vslab/error.hpp"
#include "vslab/plot.hpp"

namespace vslab::eval {

namespace {

constexpr OffsetLimits kProximal{0.15, 0.10, 0.07, 0.15};
constexpr OffsetLimits kDistal{0.30, 0.20, 0.15, 0.40};

static_assert(kProximal.xy_translation == 0.15 && kProximal.z_translation == 0.10 &&
              kProximal.xy_rotation == 0.07 && kProximal.z_rotation == 0.15);
static_assert(kDistal.xy_translation == 0.30 && kDistal.z_translation == 0.20 && kDistal.xy_rotation == 0.15 &&
              kDistal.z_rotation == 0.40);

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace

std::string_view to_string(Scenario s) { return s == Scenario::Proximal ? "proximal" : "distal"; }

std::optional<Scenario> parse_scenario(std::string_view s) {
  if (s == "proximal") return Scenario::Proximal;
  if (s == "distal") return Scenario::Distal;
  return std::nullopt;
}

const OffsetLimits& scenario_limits(Scenario s) { return s == Scenario::Proximal ? kProximal : kDistal; }

Experiment draw_experiment(Scenario s, std::uint64_t seed, std::size_t index, const DatasetOptions& opt) {
  Rng rng = Rng(seed).split("eval").split(to_string(s)).split(static_cast<std::uint64_t>(index));
  Experiment e;
  e.index = index;
  e.scene_seed = rng.next_u64();
  e.goal = jittered_base(rng, opt);
  const OffsetLimits& lim = scenario_limits(s);
  for (int i = 0; i < 6; ++i) {
    const double b = lim.bound(i);
    e.offset.value[static_cast<std::size_t>(i)] = rng.uniform(-b, b);
  }
  e.offset.sampler = Sampler::Uniform;
  return e;
}

Contender contender(const train::TrainedBundle& b) {
  return {std::string(train::to_string(b.regime)), &b, servo::default_policy(b)};
}

std::pair<double, double> mean_std(std::span<const double> v) {
  if (v.empty()) throw InvalidArgument("no values");
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size()))};
}

BatchResult run_batch(std::span<const Contender> contenders, Scenario s, int n, std::uint64_t seed,
                      const servo::ServoConfig& cfg, const DatasetOptions& opt) {
  if (n < 1) throw InvalidArgument("experiment count must be at least 1");
  cfg.validate();
  std::vector<Experiment> experiments;
  for (int i = 0; i < n; ++i) experiments.push_back(draw_experiment(s, seed, static_cast<std::size_t>(i), opt));

  BatchResult out;
  for (const Contender& c : contenders) {
    ComparisonRow row;
    row.regime = c.name;
    row.scenario = s;
    row.model_bytes = c.bundle != nullptr ? train::serialize_bundle(*c.bundle).size() : 0;
    std::vector<double> pos;
    std::vector<double> rot;
    for (const Experiment& e : experiments) {
      const Scene scene = make_scene(e.scene_seed, DrConfig{});
      servo::ServoTrace t = servo::run_servo(scene, e.goal, e.start(), c.bundle, c.policy, opt.intr, cfg);
      pos.push_back(t.final_pos_err);
      rot.push_back(t.final_rot_err);
      row.failures += t.failed ? 1 : 0;
      out.runs.push_back({c.name, e, std::move(t)});
    }
    row.runs = n;
    std::tie(row.pos_mean, row.pos_std) = mean_std(pos);
    std::tie(row.rot_mean, row.rot_std) = mean_std(rot);
    out.rows.push_back(std::move(row));
  }
  return out;
}

std::string dr_label(const DrConfig& dr) {
  const int off = !dr.randomize_texture + !dr.include_distractors + !dr.randomize_lighting;
  if (off == 0) return "full";
  if (off == 1) {
    if (!dr.randomize_texture) return "no-texture";
    if (!dr.include_distractors) return "no-distractor";
    return "no-lighting";
  }
  return "dr-" + std::to_string(dr.bits());
}

std::vector<ComparisonRow> ablation_batch(std::span<const DrConfig> variants, train::Regime regime, Scenario s, int n,
                                          std::uint64_t seed, const AblationOptions& opt) {
  std::vector<ComparisonRow> rows;
  const Rng root = Rng(seed).split("ablation");
  for (const DrConfig& dr : variants) {
    const std::uint64_t data_seed = root.split("data").next_u64();
    const Dataset lsd = generate_dataset(DatasetKind::LSD, opt.samples_per_dataset, data_seed, dr, opt.data);
    const Dataset ssd = generate_dataset(DatasetKind::SSD, opt.samples_per_dataset, data_seed, dr, opt.data);
    train::TrainConfig tc = opt.train;
    tc.master_seed = root.split("train").next_u64();
    const train::TrainedBundle b = train::build_bundle(regime, &lsd, &ssd, tc, opt.maml);
    Contender c = contender(b);
    c.name = dr_label(dr);
    BatchResult r = run_batch(std::span(&c, 1), s, n, seed, opt.servo, opt.data);
    rows.push_back(std::move(r.rows.front()));
  }
  return rows;
}

std::string comparison_csv(std::span<const ComparisonRow> rows) {
  std::ostringstream out;
  out << std::setprecision(17);
  // Rotation error is the norm of theta-u of the final relative rotation.
  out << "regime,scenario,model_bytes,pos_err_mean_m,pos_err_std_m,rot_err_mean_rad,rot_err_std_rad,runs,failures\n";
  for (const ComparisonRow& r : rows) {
    out << r.regime << ',' << to_string(r.scenario) << ',' << r.model_bytes << ',' << r.pos_mean << ',' << r.pos_std
        << ',' << r.rot_mean << ',' << r.rot_std << ',' << r.runs << ',' << r.failures << '\n';
  }
  return out.str();
}

std::string runs_csv(std::span<const RunRecord> runs) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "regime,experiment,scene_seed,off_tx,off_ty,off_tz,off_ux,off_uy,off_uz,final_pos_err_m,final_rot_err_rad,"
         "steps,failed\n";
  for (const RunRecord& r : runs) {
    out << r.name << ',' << r.experiment.index << ',' << r.experiment.scene_seed;
    for (double v : r.experiment.offset.value) out << ',' << v;
    out << ',' << r.trace.final_pos_err << ',' << r.trace.final_rot_err << ',' << r.trace.steps_used << ','
        << (r.trace.failed ? 1 : 0) << '\n';
  }
  return out.str();
}

void emit_outputs(std::span<const ComparisonRow> rows, std::span<const RunRecord> runs,
                  const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoFailure("cannot create " + out_dir.string() + ": " + ec.message());
  write_text(out_dir / "comparison.csv", comparison_csv(rows));
  if (runs.empty()) return;
  write_text(out_dir / "runs.csv", runs_csv(runs));

  std::vector<std::string> names;
  std::vector<plot::Series> photometric;
  std::vector<plot::Series> twist;
  for (const RunRecord& r : runs) {
    write_text(out_dir / ("trace_" + r.name + "_" + std::to_string(r.experiment.index) + ".csv"),
               servo::trace_csv(r.trace));
    auto it = std::find(names.begin(), names.end(), r.name);
    if (it == names.end()) it = names.insert(names.end(), r.name);
    const auto color = plot::palette(static_cast<std::size_t>(it - names.begin()));
    plot::Series p{{}, color};
    plot::Series t{{}, color};
    for (const servo::StepRecord& s : r.trace.steps) {
      p.y.push_back(s.mse);
      t.y.push_back(s.twist.norm());
    }
    photometric.push_back(std::move(p));
    twist.push_back(std::move(t));
  }
  write_ppm(out_dir / "photometric.ppm", plot::line_plot(photometric, {}));
  write_ppm(out_dir / "twistnorm.ppm", plot::line_plot(twist, {.log_y = true}));
}

}  // namespace vslab::eval
