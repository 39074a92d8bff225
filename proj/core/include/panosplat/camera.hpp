#pragma once

#include <Eigen/Dense>
#include <array>

namespace panosplat {

struct Intrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;
};

/// World-to-camera rigid transform: x_cam = R * x_world + t.
/// Camera frame: x right, y down, z forward.
struct Pose {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  Eigen::Vector3d to_camera(const Eigen::Vector3d& x) const { return R * x + t; }
  Eigen::Vector3d to_world(const Eigen::Vector3d& x) const {
    return R.transpose() * (x - t);
  }
  Eigen::Vector3d center() const { return -R.transpose() * t; }
  Pose inverse() const { return {R.transpose(), -R.transpose() * t}; }

  /// Composition (a then applied after b): result maps world -> a(b(x)).
  static Pose compose(const Pose& a, const Pose& b) {
    return {a.R * b.R, a.R * b.t + a.t};
  }
};

/// Rotation from a (possibly unnormalized) quaternion, w-x-y-z order.
Eigen::Matrix3d quat_to_rot(const Eigen::Vector4d& q_wxyz);

Eigen::Vector4d rot_to_quat(const Eigen::Matrix3d& R);

/// dR/dq_k for the raw (unnormalized) quaternion components, including the
/// normalization Jacobian.
std::array<Eigen::Matrix3d, 4> quat_to_rot_jacobian(const Eigen::Vector4d& q_wxyz);

/// Rotation axis-angle magnitude in radians, clamped for numeric safety.
double rotation_angle(const Eigen::Matrix3d& R);

/// Rotation by angle about a unit axis.
Eigen::Matrix3d axis_angle_to_rot(const Eigen::Vector3d& axis, double angle);

}  // namespace panosplat
