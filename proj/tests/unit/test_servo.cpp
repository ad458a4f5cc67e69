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

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "test_util.hpp"
#include "vslab/error.hpp"
#include "vslab/servo.hpp"

namespace vslab::servo {
namespace {

using nn::HeadId;
using nn::ParamGroup;
using train::Regime;
using train::TrainedBundle;

Pose offset_pose(double tx, double ty, double tz, double rx, double ry, double rz) {
  return pose_from({tx, ty, tz}, ThetaU{Eigen::Vector3d(rx, ry, rz)});
}

// Network whose heads ignore the image: zero final weights, chosen biases.
nn::ModelParams constant_model(std::span<const HeadId> heads) {
  nn::NetConfig cfg = testing::tiny_config().net;
  cfg.image_size = 16;
  nn::ModelParams p = nn::init_params(cfg, 4, heads);
  for (HeadId h : heads) {
    const std::vector<std::size_t> idx = p.indices(nn::group_of(h));
    const std::size_t w = idx[idx.size() - 2];
    p.values[w] = nn::Tensor(p.values[w].shape(), 0.0);
  }
  return p;
}

void set_output(nn::ModelParams& p, HeadId h, std::span<const double> bias) {
  const std::size_t b = p.indices(nn::group_of(h)).back();
  ASSERT_EQ(p.values[b].size(), bias.size());
  for (std::size_t k = 0; k < bias.size(); ++k) p.values[b][k] = bias[k];
}

const Image& blank() {
  static const Image img(16, 16, 0.5);
  return img;
}

TEST(ControlLaw, MatchesFormula) {
  const Pose rel = offset_pose(0.1, -0.2, 0.05, 0.2, 0.1, -0.3);
  const Twist tw = control_law(rel, 0.15);
  const Eigen::Vector3d v = -0.15 * rel.rotation.transpose() * rel.translation;
  EXPECT_LT((tw.linear - v).norm(), 1e-15);
  EXPECT_LT((tw.angular - Eigen::Vector3d(-0.03, -0.015, 0.045)).norm(), 1e-12);
  EXPECT_EQ(control_law(Pose{}, 0.15).norm(), 0.0);
}

TEST(ControlLaw, OneStepContractsByOneMinusLambda) {
  Rng rng = Rng(5).split("contract");
  for (int i = 0; i < 50; ++i) {
    const Pose rel = offset_pose(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2),
                                 rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
    for (double lambda : {0.15, 0.5}) {
      const Pose next = integrate_twist(rel, control_law(rel, lambda), 1.0);
      EXPECT_LT((next.translation - (1.0 - lambda) * rel.translation).norm(), 1e-14);
      const ThetaU u0 = rotmat_to_thetau(rel.rotation);
      const ThetaU u1 = rotmat_to_thetau(next.rotation);
      EXPECT_LT((u1.v - (1.0 - lambda) * u0.v).norm(), 1e-12);
    }
  }
}

TEST(Config, Validation) {
  ServoConfig c;
  EXPECT_NO_THROW(c.validate());
  c.lambda = 1.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.max_steps = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  EXPECT_THROW(SwitchPolicy::single(HeadId::Cls).validate(), InvalidArgument);
  EXPECT_THROW(SwitchPolicy::mse(0.1, 0.5).validate(), InvalidArgument);
  EXPECT_THROW(SwitchPolicy::classifier(0).validate(), InvalidArgument);
}

class OracleServo : public ::testing::Test {
 protected:
  Scene scene = make_scene(11, DrConfig{});
  Pose goal = nadir_camera(0.02, -0.01, 0.6);
  CameraIntrinsics intr = CameraIntrinsics::desk(32);
};

TEST_F(OracleServo, ErrorsDecayGeometrically) {
  const Pose start = compose(goal, offset_pose(0.05, -0.03, 0.04, 0.1, -0.05, 0.3));
  const ServoConfig cfg;
  const ServoTrace t = run_servo(scene, goal, start, nullptr, SwitchPolicy::oracle(), intr, cfg);
  ASSERT_FALSE(t.failed) << t.failure;
  ASSERT_GT(t.steps.size(), 10u);
  const double p0 = t.steps[0].pos_err;
  const double r0 = t.steps[0].rot_err;
  EXPECT_NEAR(p0, std::sqrt(0.05 * 0.05 + 0.03 * 0.03 + 0.04 * 0.04), 1e-12);
  for (const StepRecord& s : t.steps) {
    const double f = std::pow(1.0 - cfg.lambda, s.step);
    EXPECT_NEAR(s.pos_err, f * p0, 1e-12) << "step " << s.step;
    EXPECT_NEAR(s.rot_err, f * r0, 1e-11) << "step " << s.step;
    EXPECT_EQ(s.active, HeadId::RegLSD);
  }
  // Stops on the first step whose twist is below the floor.
  EXPECT_LT(t.steps.back().twist.norm(), cfg.stop_velocity_norm);
  for (std::size_t k = 0; k + 1 < t.steps.size(); ++k) EXPECT_GE(t.steps[k].twist.norm(), cfg.stop_velocity_norm);
  EXPECT_EQ(t.steps_used, static_cast<int>(t.steps.size()));
  EXPECT_LT(t.final_pos_err, 1e-4);
  EXPECT_EQ(t.final_pos_err, t.steps.back().pos_err);
}

TEST_F(OracleServo, StepCapEndsRun) {
  const Pose start = compose(goal, offset_pose(0.05, 0.0, 0.0, 0.0, 0.0, 0.0));
  ServoConfig cfg;
  cfg.max_steps = 4;
  const ServoTrace t = run_servo(scene, goal, start, nullptr, SwitchPolicy::oracle(), intr, cfg);
  EXPECT_FALSE(t.failed);
  EXPECT_EQ(t.steps_used, 4);
  EXPECT_NEAR(t.final_pos_err, 0.05 * std::pow(0.85, 4), 1e-14);
}

TEST_F(OracleServo, AlreadyAtGoalStopsImmediately) {
  const ServoTrace t = run_servo(scene, goal, goal, nullptr, SwitchPolicy::oracle(), intr, ServoConfig{});
  ASSERT_EQ(t.steps.size(), 1u);
  EXPECT_EQ(t.steps[0].mse, 0.0);
  EXPECT_EQ(t.final_pos_err, 0.0);
}

TEST_F(OracleServo, InvalidStartFails) {
  const Pose start = nadir_camera(0.0, 0.0, -1.0);
  const ServoTrace t = run_servo(scene, goal, start, nullptr, SwitchPolicy::oracle(), intr, ServoConfig{});
  EXPECT_TRUE(t.failed);
  EXPECT_TRUE(t.steps.empty());
  EXPECT_NEAR(t.final_pos_err, relative_pose(goal, start).translation.norm(), 1e-12);
}

TEST_F(OracleServo, TraceCsv) {
  const Pose start = compose(goal, offset_pose(0.01, 0.0, 0.0, 0.0, 0.0, 0.0));
  ServoConfig cfg;
  cfg.max_steps = 2;
  const ServoTrace t = run_servo(scene, goal, start, nullptr, SwitchPolicy::oracle(), intr, cfg);
  std::istringstream in(trace_csv(t));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "step,pos_err_m,rot_err_rad,photometric_mse,twist_norm,active_head");
  for (int k = 0; k < 2; ++k) {
    ASSERT_TRUE(std::getline(in, line));
    std::vector<std::string> cells;
    std::istringstream row(line);
    for (std::string c; std::getline(row, c, ',');) cells.push_back(c);
    ASSERT_EQ(cells.size(), 6u) << line;
    EXPECT_EQ(std::stoi(cells[0]), k);
    EXPECT_NEAR(std::stod(cells[1]), 0.01 * std::pow(0.85, k), 1e-15);
    EXPECT_EQ(std::stod(cells[2]), 0.0);
    EXPECT_EQ(std::stod(cells[3]), t.steps[std::size_t(k)].mse);
    EXPECT_NEAR(std::stod(cells[4]), 0.15 * 0.01 * std::pow(0.85, k), 1e-15);
    EXPECT_EQ(cells[5], "lsd");
  }
  EXPECT_FALSE(std::getline(in, line));
}

TEST(Estimate, SingleModelReadsHeadOutput) {
  const std::array<HeadId, 1> heads{HeadId::RegLSD};
  TrainedBundle b;
  b.regime = Regime::LsdOnly;
  b.models.push_back(constant_model(heads));
  const std::array<double, 6> out{0.01, -0.02, 0.03, 0.1, 0.0, -0.2};
  set_output(b.models[0], HeadId::RegLSD, out);
  const Estimate e = estimate_step(&b, SwitchPolicy::single(HeadId::RegLSD), blank(), blank(), 0.0);
  for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(e.raw[k], out[k], 1e-15);
  EXPECT_LT((e.pose.translation - Eigen::Vector3d(0.01, -0.02, 0.03)).norm(), 1e-15);
  EXPECT_LT((rotmat_to_thetau(e.pose.rotation).v - Eigen::Vector3d(0.1, 0.0, -0.2)).norm(), 1e-12);
  EXPECT_THROW(estimate_step(&b, SwitchPolicy::single(HeadId::RegSSD), blank(), blank(), 0.0), IncompatibleBundle);
  EXPECT_THROW(estimate_step(nullptr, SwitchPolicy::oracle(), blank(), blank(), 0.0), InvalidArgument);
}

TEST(Estimate, WrapsLongRotation) {
  const std::array<HeadId, 1> heads{HeadId::RegLSD};
  TrainedBundle b;
  b.models.push_back(constant_model(heads));
  const std::array<double, 6> out{0.0, 0.0, 0.0, 0.0, 0.0, 4.0};
  set_output(b.models[0], HeadId::RegLSD, out);
  const Estimate e = estimate_step(&b, SwitchPolicy::single(HeadId::RegLSD), blank(), blank(), 0.0);
  EXPECT_NEAR(e.raw[5], 4.0 - 2.0 * std::numbers::pi, 1e-12);
}

TEST(Estimate, MseThresholdHysteresis) {
  const std::array<HeadId, 1> lsd{HeadId::RegLSD};
  const std::array<HeadId, 1> ssd{HeadId::RegSSD};
  TrainedBundle b;
  b.regime = Regime::VanillaSwitch;
  b.models = {constant_model(lsd), constant_model(ssd)};
  b.threshold = 0.01;
  const std::array<double, 6> a{1, 0, 0, 0, 0, 0};
  const std::array<double, 6> c{2, 0, 0, 0, 0, 0};
  set_output(b.models[0], HeadId::RegLSD, a);
  set_output(b.models[1], HeadId::RegSSD, c);

  SwitchPolicy p = default_policy(b);
  ASSERT_EQ(p.kind, PolicyKind::MseThreshold);
  const std::vector<std::pair<double, HeadId>> seq{{0.02, HeadId::RegLSD}, {0.0101, HeadId::RegLSD},
                                                   {0.005, HeadId::RegSSD}, {0.015, HeadId::RegSSD},
                                                   {0.02, HeadId::RegSSD},  {0.025, HeadId::RegLSD},
                                                   {0.012, HeadId::RegLSD}, {0.009, HeadId::RegSSD}};
  for (const auto& [mse, want] : seq) {
    const Estimate e = estimate_step(&b, p, blank(), blank(), mse);
    EXPECT_EQ(e.active, want) << "mse " << mse;
    EXPECT_EQ(e.raw[0], want == HeadId::RegLSD ? 1.0 : 2.0);
    p = e.policy;
  }
}

TEST(Estimate, ClassifierVotesOverWindow) {
  TrainedBundle ssd_b;
  ssd_b.regime = Regime::MetaSwitch;
  ssd_b.models.push_back(constant_model(nn::kAllHeads));
  const std::array<double, 2> vote_ssd{0.0, 1.0};
  const std::array<double, 2> vote_lsd{1.0, 0.0};
  set_output(ssd_b.models[0], HeadId::Cls, vote_ssd);
  TrainedBundle lsd_b = ssd_b;
  set_output(lsd_b.models[0], HeadId::Cls, vote_lsd);

  SwitchPolicy p = default_policy(ssd_b);
  ASSERT_EQ(p.kind, PolicyKind::ClassifierDriven);
  ASSERT_EQ(p.window, 3);
  // Votes S, L, L, S, S with a window of three.
  const std::vector<std::pair<const TrainedBundle*, HeadId>> seq{
      {&ssd_b, HeadId::RegSSD},  // S: 1-0
      {&lsd_b, HeadId::RegSSD},  // S L: tie keeps the current head
      {&lsd_b, HeadId::RegLSD},  // S L L
      {&ssd_b, HeadId::RegLSD},  // L L S
      {&ssd_b, HeadId::RegSSD},  // L S S
  };
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const Estimate e = estimate_step(seq[i].first, p, blank(), blank(), 0.0);
    EXPECT_EQ(e.active, seq[i].second) << "step " << i;
    EXPECT_LE(e.policy.votes.size(), 3u);
    p = e.policy;
  }

  TrainedBundle no_cls;
  const std::array<HeadId, 1> lsd{HeadId::RegLSD};
  no_cls.models.push_back(constant_model(lsd));
  EXPECT_THROW(estimate_step(&no_cls, SwitchPolicy::classifier(), blank(), blank(), 0.0), IncompatibleBundle);
}

TEST(Policy, Parse) {
  EXPECT_EQ(parse_policy("oracle", nullptr).kind, PolicyKind::Oracle);
  EXPECT_EQ(parse_policy("single-ssd", nullptr).head, HeadId::RegSSD);
  EXPECT_EQ(parse_policy("single-lsd", nullptr).active, HeadId::RegLSD);
  EXPECT_EQ(parse_policy("cls", nullptr).kind, PolicyKind::ClassifierDriven);
  const SwitchPolicy m = parse_policy("mse:0.0125", nullptr);
  EXPECT_EQ(m.kind, PolicyKind::MseThreshold);
  EXPECT_EQ(m.threshold, 0.0125);
  EXPECT_THROW(parse_policy("mse:", nullptr), InvalidArgument);
  EXPECT_THROW(parse_policy("mse:0.1x", nullptr), InvalidArgument);
  EXPECT_THROW(parse_policy("auto", nullptr), InvalidArgument);
  EXPECT_THROW(parse_policy("bogus", nullptr), InvalidArgument);

  TrainedBundle b;
  b.regime = Regime::CnnSwitch;
  EXPECT_EQ(parse_policy("auto", &b).kind, PolicyKind::ClassifierDriven);
  b.regime = Regime::Comb;
  EXPECT_EQ(parse_policy("auto", &b).kind, PolicyKind::SingleModel);
  b.regime = Regime::VanillaSwitch;
  EXPECT_THROW(parse_policy("auto", &b), IncompatibleBundle);
  b.threshold = 0.5;
  EXPECT_EQ(parse_policy("auto", &b).threshold, 0.5);
}

}  // namespace
}  // namespace vslab::servo
