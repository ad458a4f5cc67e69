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
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "vslab/geometry.hpp"
#include "vslab/network.hpp"
#include "vslab/scene.hpp"
#include "vslab/train.hpp"

namespace vslab::servo {

struct ServoConfig {
  double lambda = 0.15;
  double dt = 1.0;
  int max_steps = 200;
  double stop_velocity_norm = 1e-5;

  void validate() const;
};

/// v = -lambda R^T t, w = -lambda theta-u(R), for the pose of the current
/// camera in the goal frame.
Twist control_law(const Pose& rel, double lambda);

enum class PolicyKind : std::uint8_t { Oracle = 0, SingleModel, MseThreshold, ClassifierDriven };

struct SwitchPolicy {
  PolicyKind kind = PolicyKind::Oracle;
  nn::HeadId head = nn::HeadId::RegLSD;  // SingleModel
  double threshold = 0.0;                // MseThreshold
  double hysteresis = 2.0;               // MseThreshold: switch back above threshold * hysteresis
  int window = 3;                        // ClassifierDriven

  // Runtime state.
  nn::HeadId active = nn::HeadId::RegLSD;
  std::deque<bool> votes;  // true for an SSD vote, newest last

  static SwitchPolicy oracle();
  static SwitchPolicy single(nn::HeadId h);
  static SwitchPolicy mse(double threshold, double hysteresis = 2.0);
  static SwitchPolicy classifier(int window = 3);

  void validate() const;
};

/// Switching rule a regime is evaluated with: one fixed regressor for
/// LsdOnly, Comb and ImplicitSwitch, the calibrated threshold for
/// VanillaSwitch, classifier votes for CnnSwitch and MetaSwitch.
SwitchPolicy default_policy(const train::TrainedBundle& b);

/// Parses oracle | single-lsd | single-ssd | mse:THRESH | cls | auto.
/// `auto` needs the bundle.
SwitchPolicy parse_policy(const std::string& text, const train::TrainedBundle* bundle);

struct Estimate {
  Pose pose;
  Label raw{};  // (t, theta-u) after wrapping
  nn::HeadId active = nn::HeadId::RegLSD;
  SwitchPolicy policy;  // state after this step
};

/// Estimates the current camera's pose in the goal frame. Oracle needs
/// `truth`; the others need a bundle holding the heads they use.
Estimate estimate_step(const train::TrainedBundle* bundle, const SwitchPolicy& policy, const Image& ref,
                       const Image& cur, double mse, const Pose* truth = nullptr);

struct StepRecord {
  int step = 0;
  double pos_err = 0.0;  // true error before the step
  double rot_err = 0.0;
  Label estimate{};
  Twist twist;
  double mse = 0.0;
  nn::HeadId active = nn::HeadId::RegLSD;
};

struct ServoTrace {
  std::vector<StepRecord> steps;
  double final_pos_err = 0.0;
  double final_rot_err = 0.0;
  int steps_used = 0;
  bool failed = false;
  std::string failure;
};

/// Closed loop from `start` toward the view at `goal`. A camera that leaves
/// the valid viewing region ends the run as failed, with the error of the
/// last rendered step.
ServoTrace run_servo(const Scene& scene, const Pose& goal, const Pose& start, const train::TrainedBundle* bundle,
                     SwitchPolicy policy, const CameraIntrinsics& intr, const ServoConfig& cfg);

/// step,pos_err_m,rot_err_rad,photometric_mse,twist_norm,active_head
std::string trace_csv(const ServoTrace& t);

}  // namespace vslab::servo
