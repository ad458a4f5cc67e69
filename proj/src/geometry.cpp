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

#include "vslab/geometry.hpp"

#include <cmath>
#include <numbers>

#include "vslab/error.hpp"

namespace vslab {

namespace {

constexpr double kSmallAngle = 1e-8;
// Below this distance from pi the antisymmetric part is too small to give
// the axis accurately, so the symmetric part is used instead.
constexpr double kNearPi = 1e-3;

Eigen::Vector3d vee(const Eigen::Matrix3d& A) {
  return {A(2, 1) - A(1, 2), A(0, 2) - A(2, 0), A(1, 0) - A(0, 1)};
}

}  // namespace

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d T = Eigen::Matrix4d::Identity();
  T.topLeftCorner<3, 3>() = rotation;
  T.topRightCorner<3, 1>() = translation;
  return T;
}

Eigen::Matrix3d skew(const Eigen::Vector3d& w) {
  Eigen::Matrix3d S;
  S << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return S;
}

double orthonormality_error(const Eigen::Matrix3d& R) {
  return (R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
}

ThetaU rotmat_to_thetau(const Eigen::Matrix3d& R) {
  if (!R.allFinite() || orthonormality_error(R) > 1e-6 || std::abs(R.determinant() - 1.0) > 1e-6) {
    throw NonOrthonormalInput("rotation matrix is not in SO(3)");
  }
  const Eigen::Vector3d w = 0.5 * vee(R);  // sin(theta) * axis
  const double s = w.norm();
  const double c = std::clamp(0.5 * (R.trace() - 1.0), -1.0, 1.0);
  const double theta = std::atan2(s, c);

  if (theta < kSmallAngle) return {w};
  if (theta < std::numbers::pi - kNearPi) return {w * (theta / s)};

  // Largest-diagonal branch: (R + R^T)/2 = c I + (1 - c) a a^T.
  const Eigen::Matrix3d aat =
      (0.5 * (R + R.transpose()) - c * Eigen::Matrix3d::Identity()) / (1.0 - c);
  int k = 0;
  aat.diagonal().maxCoeff(&k);
  Eigen::Vector3d axis = aat.col(k) / std::sqrt(aat(k, k));
  axis.normalize();
  if (axis.dot(w) < 0.0) axis = -axis;
  return {axis * theta};
}

Eigen::Matrix3d thetau_to_rotmat(const ThetaU& u) {
  const double theta = u.v.norm();
  const Eigen::Matrix3d K = skew(u.v);
  if (theta < kSmallAngle) {
    return Eigen::Matrix3d::Identity() + K + 0.5 * K * K;
  }
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Eigen::Matrix3d::Identity() + a * K + b * K * K;
}

Pose compose(const Pose& a, const Pose& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

Pose inverse(const Pose& p) {
  const Eigen::Matrix3d Rt = p.rotation.transpose();
  return {Rt, -(Rt * p.translation)};
}

Pose relative_pose(const Pose& goal, const Pose& current) {
  // Written out so that goal == current gives an exact identity.
  const Eigen::Matrix3d Rt = goal.rotation.transpose();
  return {Rt * current.rotation, Rt * (current.translation - goal.translation)};
}

Pose integrate_twist(const Pose& p, const Twist& tw, double dt) {
  if (!(dt > 0.0)) throw InvalidArgument("integration step must be positive");
  if (tw.linear.isZero(0.0) && tw.angular.isZero(0.0)) return p;
  const Eigen::Matrix3d dR = thetau_to_rotmat({tw.angular * dt});
  return {p.rotation * dR, p.translation + p.rotation * (tw.linear * dt)};
}

Pose pose_from(const Eigen::Vector3d& t, const ThetaU& u) { return {thetau_to_rotmat(u), t}; }

ThetaU wrap_thetau(const Eigen::Vector3d& v) {
  const double theta = v.norm();
  if (theta <= std::numbers::pi) return {v};
  const double wrapped = std::remainder(theta, 2.0 * std::numbers::pi);  // (-pi, pi]
  Eigen::Vector3d axis = v / theta;
  if (wrapped < 0.0) return {-axis * (-wrapped)};
  return {axis * wrapped};
}

}  // namespace vslab
