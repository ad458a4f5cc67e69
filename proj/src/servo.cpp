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

#include "vslab/servo.hpp"

#include <cmath>
#include <iomanip>
#include <initializer_list>
#include <tuple>
#include <sstream>

#include "vslab/error.hpp"

namespace vslab::servo {

using nn::HeadId;
using nn::ModelParams;
using train::Regime;
using train::TrainedBundle;

namespace {

const ModelParams* find_model(const TrainedBundle* b, HeadId h) {
  if (b == nullptr) return nullptr;
  for (const ModelParams& m : b->models) {
    if (m.has(nn::group_of(h))) return &m;
  }
  return nullptr;
}

const ModelParams& require_model(const TrainedBundle* b, HeadId h) {
  const ModelParams* m = find_model(b, h);
  if (m == nullptr) {
    throw IncompatibleBundle("bundle has no " + std::string(nn::to_string(h)) + " head");
  }
  return *m;
}

// Runs one model on the pair and returns the requested head outputs,
// encoding the pair once.
std::vector<nn::Tensor> run_heads(const ModelParams& m, const Image& ref, const Image& cur,
                                  std::initializer_list<HeadId> heads) {
  nn::NoGradGuard guard;
  std::vector<nn::Var> vars;
  vars.reserve(m.values.size());
  for (const nn::Tensor& t : m.values) vars.push_back(nn::Var::constant(t));
  const nn::Var features = nn::encode(m.config, vars, nn::make_batch(ref, cur, m.norm));
  std::vector<nn::Tensor> out;
  for (HeadId h : heads) out.push_back(nn::head_output(m.config, vars, features, h).value());
  return out;
}

}  // namespace

void ServoConfig::validate() const {
  if (!(lambda > 0.0) || !(dt > 0.0)) throw InvalidArgument("lambda and dt must be positive");
  if (!(lambda * dt < 1.0)) throw InvalidArgument("lambda * dt must be below 1");
  if (max_steps < 1) throw InvalidArgument("max_steps must be positive");
  if (!(stop_velocity_norm >= 0.0)) throw InvalidArgument("stop velocity must be non-negative");
}

Twist control_law(const Pose& rel, double lambda) {
  Twist tw;
  tw.linear = -lambda * (rel.rotation.transpose() * rel.translation);
  tw.angular = -lambda * rotmat_to_thetau(rel.rotation).v;
  return tw;
}

SwitchPolicy SwitchPolicy::oracle() { return {}; }

SwitchPolicy SwitchPolicy::single(HeadId h) {
  SwitchPolicy p;
  p.kind = PolicyKind::SingleModel;
  p.head = h;
  p.active = h;
  return p;
}

SwitchPolicy SwitchPolicy::mse(double threshold, double hysteresis) {
  SwitchPolicy p;
  p.kind = PolicyKind::MseThreshold;
  p.threshold = threshold;
  p.hysteresis = hysteresis;
  return p;
}

SwitchPolicy SwitchPolicy::classifier(int window) {
  SwitchPolicy p;
  p.kind = PolicyKind::ClassifierDriven;
  p.window = window;
  return p;
}

void SwitchPolicy::validate() const {
  if (kind == PolicyKind::SingleModel && head == HeadId::Cls) throw InvalidArgument("Cls is not a regression head");
  if (active == HeadId::Cls) throw InvalidArgument("active head must be a regressor");
  if (kind == PolicyKind::MseThreshold && (!std::isfinite(threshold) || !(hysteresis >= 1.0))) {
    throw InvalidArgument("threshold must be finite and hysteresis at least 1");
  }
  if (kind == PolicyKind::ClassifierDriven && window < 1) throw InvalidArgument("window must be at least 1");
}

SwitchPolicy default_policy(const TrainedBundle& b) {
  switch (b.regime) {
    case Regime::LsdOnly:
    case Regime::Comb:
    case Regime::ImplicitSwitch:
      return SwitchPolicy::single(HeadId::RegLSD);
    case Regime::VanillaSwitch:
      if (!b.threshold) throw IncompatibleBundle("vanilla-switch bundle without threshold");
      return SwitchPolicy::mse(*b.threshold);
    case Regime::CnnSwitch:
    case Regime::MetaSwitch:
      return SwitchPolicy::classifier();
  }
  throw InvalidArgument("unknown regime");
}

SwitchPolicy parse_policy(const std::string& text, const TrainedBundle* bundle) {
  if (text == "oracle") return SwitchPolicy::oracle();
  if (text == "single-lsd") return SwitchPolicy::single(HeadId::RegLSD);
  if (text == "single-ssd") return SwitchPolicy::single(HeadId::RegSSD);
  if (text == "cls") return SwitchPolicy::classifier();
  if (text == "auto") {
    if (bundle == nullptr) throw InvalidArgument("policy auto needs a bundle");
    return default_policy(*bundle);
  }
  if (text.rfind("mse:", 0) == 0) {
    std::size_t used = 0;
    double t = 0.0;
    try {
      t = std::stod(text.substr(4), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != text.size() - 4) throw InvalidArgument("bad threshold in policy '" + text + "'");
    return SwitchPolicy::mse(t);
  }
  throw InvalidArgument("unknown policy '" + text + "'");
}

Estimate estimate_step(const TrainedBundle* bundle, const SwitchPolicy& policy, const Image& ref, const Image& cur,
                       double mse, const Pose* truth) {
  policy.validate();
  Estimate e;
  e.policy = policy;
  SwitchPolicy& next = e.policy;

  if (policy.kind == PolicyKind::Oracle) {
    if (truth == nullptr) throw InvalidArgument("oracle policy needs the true pose");
    e.pose = *truth;
    const Eigen::Vector3d u = rotmat_to_thetau(truth->rotation).v;
    e.raw = {truth->translation.x(), truth->translation.y(), truth->translation.z(), u.x(), u.y(), u.z()};
    e.active = next.active;
    return e;
  }

  switch (policy.kind) {
    case PolicyKind::SingleModel:
      next.active = policy.head;
      break;
    case PolicyKind::MseThreshold:
      require_model(bundle, HeadId::RegLSD);
      require_model(bundle, HeadId::RegSSD);
      if (next.active == HeadId::RegLSD && mse < policy.threshold) {
        next.active = HeadId::RegSSD;
      } else if (next.active == HeadId::RegSSD && mse > policy.threshold * policy.hysteresis) {
        next.active = HeadId::RegLSD;
      }
      break;
    case PolicyKind::ClassifierDriven: {
      const ModelParams& cls = require_model(bundle, HeadId::Cls);
      require_model(bundle, HeadId::RegSSD);
      const nn::Tensor logits = run_heads(cls, ref, cur, {HeadId::Cls}).front();
      next.votes.push_back(logits[1] > logits[0]);
      while (next.votes.size() > static_cast<std::size_t>(policy.window)) next.votes.pop_front();
      std::size_t ssd = 0;
      for (bool v : next.votes) ssd += v ? 1 : 0;
      const std::size_t lsd = next.votes.size() - ssd;
      if (ssd > lsd) next.active = HeadId::RegSSD;
      if (lsd > ssd) next.active = HeadId::RegLSD;
      break;
    }
    case PolicyKind::Oracle:
      break;
  }

  const ModelParams& reg = require_model(bundle, next.active);
  const nn::Tensor out = run_heads(reg, ref, cur, {next.active}).front();
  const Eigen::Vector3d t(out[0], out[1], out[2]);
  const ThetaU u = wrap_thetau(Eigen::Vector3d(out[3], out[4], out[5]));
  e.pose = pose_from(t, u);
  e.raw = {t.x(), t.y(), t.z(), u.v.x(), u.v.y(), u.v.z()};
  e.active = next.active;
  return e;
}

ServoTrace run_servo(const Scene& scene, const Pose& goal, const Pose& start, const TrainedBundle* bundle,
                     SwitchPolicy policy, const CameraIntrinsics& intr, const ServoConfig& cfg) {
  cfg.validate();
  policy.validate();
  const Image ref = render(scene, goal, intr);

  ServoTrace trace;
  Pose current = start;
  auto errors = [&](const Pose& cam) {
    const Pose rel = relative_pose(goal, cam);
    return std::pair{rel.translation.norm(), rotmat_to_thetau(rel.rotation).angle()};
  };
  auto fail = [&](const std::string& why) {
    trace.failed = true;
    trace.failure = why;
    if (trace.steps.empty()) {
      std::tie(trace.final_pos_err, trace.final_rot_err) = errors(start);
    } else {
      trace.final_pos_err = trace.steps.back().pos_err;
      trace.final_rot_err = trace.steps.back().rot_err;
    }
  };

  for (int k = 0; k <= cfg.max_steps; ++k) {
    Image cur;
    try {
      cur = render(scene, current, intr);
    } catch (const DegenerateView& e) {
      fail(e.what());
      break;
    }
    const auto [pos_err, rot_err] = errors(current);
    if (k == cfg.max_steps) {
      trace.final_pos_err = pos_err;
      trace.final_rot_err = rot_err;
      break;
    }
    const double mse = photometric_mse(cur, ref);
    const Pose truth = relative_pose(goal, current);
    Estimate e = estimate_step(bundle, policy, ref, cur, mse, &truth);
    policy = std::move(e.policy);
    const Twist tw = control_law(e.pose, cfg.lambda);
    trace.steps.push_back({k, pos_err, rot_err, e.raw, tw, mse, e.active});
    if (tw.norm() < cfg.stop_velocity_norm) {
      trace.final_pos_err = pos_err;
      trace.final_rot_err = rot_err;
      break;
    }
    current = integrate_twist(current, tw, cfg.dt);
  }
  trace.steps_used = static_cast<int>(trace.steps.size());
  return trace;
}

std::string trace_csv(const ServoTrace& t) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "step,pos_err_m,rot_err_rad,photometric_mse,twist_norm,active_head\n";
  for (const StepRecord& r : t.steps) {
    out << r.step << ',' << r.pos_err << ',' << r.rot_err << ',' << r.mse << ',' << r.twist.norm() << ','
        << nn::to_string(r.active) << '\n';
  }
  return out.str();
}

}  // namespace vslab::servo
