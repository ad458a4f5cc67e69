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

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace vslab {

/// Axis-angle rotation vector: direction is the axis, norm the angle in [0, pi].
struct ThetaU {
  Eigen::Vector3d v = Eigen::Vector3d::Zero();

  [[nodiscard]] double angle() const { return v.norm(); }
};

/// Body-frame velocity of the camera, expressed in the current camera frame.
struct Twist {
  Eigen::Vector3d linear = Eigen::Vector3d::Zero();   // m / step
  Eigen::Vector3d angular = Eigen::Vector3d::Zero();  // rad / step

  [[nodiscard]] double norm() const {
    return std::sqrt(linear.squaredNorm() + angular.squaredNorm());
  }
};

/// Rigid transform. For a camera pose this maps camera coordinates to world
/// coordinates: x_world = rotation * x_cam + translation.
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static Pose identity() { return {}; }
  [[nodiscard]] Eigen::Matrix4d matrix() const;
};

Eigen::Matrix3d skew(const Eigen::Vector3d& w);

/// Throws NonOrthonormalInput when |R^T R - I|_max > 1e-6 or det(R) is not 1.
ThetaU rotmat_to_thetau(const Eigen::Matrix3d& R);
Eigen::Matrix3d thetau_to_rotmat(const ThetaU& u);

Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& p);

/// Pose of `current` expressed in the frame of `goal`: inverse(goal) * current.
Pose relative_pose(const Pose& goal, const Pose& current);

/// Right-composes p with the decoupled update (exp(w dt), v dt) of a
/// body-frame twist.
Pose integrate_twist(const Pose& p, const Twist& tw, double dt);

/// Builds a pose from a translation and a rotation vector.
Pose pose_from(const Eigen::Vector3d& t, const ThetaU& u);

/// Wraps an unconstrained rotation vector onto the [0, pi] branch.
ThetaU wrap_thetau(const Eigen::Vector3d& v);

double orthonormality_error(const Eigen::Matrix3d& R);

}  // namespace vslab
