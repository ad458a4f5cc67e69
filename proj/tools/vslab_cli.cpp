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

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "vslab/binary_io.hpp"
#include "vslab/bundle_io.hpp"
#include "vslab/dataset.hpp"
#include "vslab/error.hpp"
#include "vslab/servo.hpp"
#include "vslab/switch_eval.hpp"
#include "vslab/train.hpp"

namespace {

using namespace vslab;

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale visual servoing lab"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Render an LSD or SSD dataset");
  std::string kind = "lsd";
  std::size_t gen_n = 4000;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  int gen_size = 64;
  bool no_texture = false, no_distractors = false, no_lighting = false;
  gen->add_option("--kind", kind)->check(CLI::IsMember({"lsd", "ssd"}))->required();
  gen->add_option("--n", gen_n)->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed);
  gen->add_option("--out", gen_out)->required();
  gen->add_option("--size", gen_size, "Image side in pixels")->check(CLI::Range(8, 1024));
  gen->add_flag("--no-texture", no_texture);
  gen->add_flag("--no-distractors", no_distractors);
  gen->add_flag("--no-lighting", no_lighting);

  // train
  auto* tr = app.add_subcommand("train", "Train one regime into a bundle");
  std::string regime_name, lsd_path, ssd_path, bundle_out, log_out;
  std::string preset = "desk";
  std::uint64_t train_seed = 0;
  bool first_order = false;
  int epochs_main = -1, epochs_fine = -1, iterations = -1;
  tr->add_option("--regime", regime_name)
      ->check(CLI::IsMember({"lsd-only", "comb", "vanilla-switch", "cnn-switch", "implicit-switch", "meta-switch"}))
      ->required();
  tr->add_option("--lsd", lsd_path);
  tr->add_option("--ssd", ssd_path);
  tr->add_option("--seed", train_seed);
  tr->add_option("--out", bundle_out)->required();
  tr->add_option("--log", log_out, "Training log CSV (default: <out>.log.csv)");
  tr->add_option("--preset", preset, "Hyperparameter preset")->check(CLI::IsMember({"desk", "paper"}));
  tr->add_option("--epochs-main", epochs_main);
  tr->add_option("--epochs-fine", epochs_fine);
  tr->add_option("--iterations", iterations, "Meta-training iterations");
  tr->add_flag("--first-order", first_order);

  // servo
  auto* sv = app.add_subcommand("servo", "Run one closed-loop servo experiment");
  std::string sv_bundle, policy_text = "auto", trace_out, sv_scenario = "distal";
  std::uint64_t sv_seed = 0;
  sv->add_option("--bundle", sv_bundle);
  sv->add_option("--policy", policy_text, "oracle|single-lsd|single-ssd|mse:THRESH|cls|auto");
  sv->add_option("--seed", sv_seed);
  sv->add_option("--scenario", sv_scenario)->check(CLI::IsMember({"proximal", "distal"}));
  sv->add_option("--trace", trace_out)->required();

  // eval
  auto* ev = app.add_subcommand("eval", "Compare bundles on paired servo experiments");
  std::string ev_scenario, bundles_arg, ev_out;
  int ev_n = 30;
  std::uint64_t ev_seed = 0;
  bool with_oracle = false;
  ev->add_option("--scenario", ev_scenario)->check(CLI::IsMember({"proximal", "distal"}))->required();
  ev->add_option("--n", ev_n)->check(CLI::PositiveNumber);
  ev->add_option("--seed", ev_seed);
  ev->add_option("--bundles", bundles_arg)->required();
  ev->add_option("--out", ev_out)->required();
  ev->add_flag("--oracle", with_oracle, "Add a ground-truth row");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const DrConfig dr{!no_texture, !no_distractors, !no_lighting};
      DatasetOptions opt;
      opt.intr = CameraIntrinsics::desk(gen_size);
      const Dataset d = generate_dataset(kind == "lsd" ? DatasetKind::LSD : DatasetKind::SSD, gen_n, gen_seed, dr, opt);
      save_dataset(d, gen_out);
    } else if (*tr) {
      const train::Regime regime = *train::parse_regime(regime_name);
      train::TrainConfig cfg = preset == "desk" ? train::desk_config() : train::TrainConfig{};
      train::MamlConfig mcfg = preset == "desk" ? train::desk_maml_config() : train::MamlConfig{};
      cfg.master_seed = train_seed;
      if (epochs_main >= 0) cfg.epochs_main = epochs_main;
      if (epochs_fine >= 0) cfg.epochs_fine = epochs_fine;
      if (iterations >= 0) mcfg.iterations = iterations;
      mcfg.first_order = first_order;
      std::optional<Dataset> lsd, ssd;
      if (!lsd_path.empty()) lsd = load_dataset(lsd_path);
      if (!ssd_path.empty()) ssd = load_dataset(ssd_path);
      const train::TrainedBundle b = train::build_bundle(regime, lsd ? &*lsd : nullptr, ssd ? &*ssd : nullptr, cfg, mcfg);
      train::save_bundle(b, bundle_out);
      write_text(log_out.empty() ? bundle_out + ".log.csv" : log_out, train::log_csv(b.log));
    } else if (*sv) {
      std::optional<train::TrainedBundle> bundle;
      if (!sv_bundle.empty()) bundle = train::load_bundle(sv_bundle);
      const servo::SwitchPolicy policy = servo::parse_policy(policy_text, bundle ? &*bundle : nullptr);
      if (policy.kind != servo::PolicyKind::Oracle && !bundle) throw InvalidArgument("policy needs --bundle");
      DatasetOptions opt;
      if (bundle) opt.intr = CameraIntrinsics::desk(bundle->models.front().config.image_size);
      const eval::Experiment e = eval::draw_experiment(*eval::parse_scenario(sv_scenario), sv_seed, 0, opt);
      const Scene scene = make_scene(e.scene_seed, DrConfig{});
      const servo::ServoTrace t =
          servo::run_servo(scene, e.goal, e.start(), bundle ? &*bundle : nullptr, policy, opt.intr, {});
      write_text(trace_out, servo::trace_csv(t));
      std::cout.precision(17);
      std::cout << "final_pos_err_m " << t.final_pos_err << "\nfinal_rot_err_rad " << t.final_rot_err << "\nsteps "
                << t.steps_used << (t.failed ? "\nfailed " + t.failure : "") << '\n';
    } else if (*ev) {
      std::vector<train::TrainedBundle> bundles;
      for (const std::string& path : split_commas(bundles_arg)) bundles.push_back(train::load_bundle(path));
      if (bundles.empty() && !with_oracle) throw InvalidArgument("no bundles given");
      std::vector<eval::Contender> contenders;
      if (with_oracle) contenders.push_back({"oracle", nullptr, servo::SwitchPolicy::oracle()});
      for (const train::TrainedBundle& b : bundles) {
        eval::Contender c = eval::contender(b);
        int same = 0;
        for (const eval::Contender& o : contenders) same += o.name.rfind(c.name, 0) == 0 ? 1 : 0;
        if (same > 0) c.name += "-" + std::to_string(same + 1);
        contenders.push_back(std::move(c));
      }
      DatasetOptions opt;
      if (!bundles.empty()) opt.intr = CameraIntrinsics::desk(bundles.front().models.front().config.image_size);
      for (const train::TrainedBundle& b : bundles) {
        if (b.models.front().config.image_size != opt.intr.width) {
          throw IncompatibleBundle("bundles were trained on different image sizes");
        }
      }
      const eval::BatchResult r = eval::run_batch(contenders, *eval::parse_scenario(ev_scenario), ev_n, ev_seed, {}, opt);
      eval::emit_outputs(r.rows, r.runs, ev_out);
      std::cout << eval::comparison_csv(r.rows);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
