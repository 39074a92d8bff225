#include "panosplat/camera.hpp"

#include <algorithm>
#include <cmath>

namespace panosplat {

static Eigen::Matrix3d rot_from_unit_quat(double w, double x, double y, double z) {
  Eigen::Matrix3d R;
  R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return R;
}

Eigen::Matrix3d quat_to_rot(const Eigen::Vector4d& q) {
  const Eigen::Vector4d u = q / q.norm();
  return rot_from_unit_quat(u[0], u[1], u[2], u[3]);
}

Eigen::Vector4d rot_to_quat(const Eigen::Matrix3d& R) {
  Eigen::Quaterniond q(R);
  q.normalize();
  if (q.w() < 0) q.coeffs() *= -1.0;
  return {q.w(), q.x(), q.y(), q.z()};
}

std::array<Eigen::Matrix3d, 4> quat_to_rot_jacobian(const Eigen::Vector4d& q) {
  const double n = q.norm();
  const Eigen::Vector4d u = q / n;
  const double w = u[0], x = u[1], y = u[2], z = u[3];

  // dR/du for the unit quaternion.
  std::array<Eigen::Matrix3d, 4> dRdu;
  dRdu[0] << 0, -2 * z, 2 * y,
             2 * z, 0, -2 * x,
             -2 * y, 2 * x, 0;
  dRdu[1] << 0, 2 * y, 2 * z,
             2 * y, -4 * x, -2 * w,
             2 * z, 2 * w, -4 * x;
  dRdu[2] << -4 * y, 2 * x, 2 * w,
             2 * x, 0, 2 * z,
             -2 * w, 2 * z, -4 * y;
  dRdu[3] << -4 * z, -2 * w, 2 * x,
             2 * w, -4 * z, 2 * y,
             2 * x, 2 * y, 0;

  // du/dq = (I - u u^T) / |q|
  std::array<Eigen::Matrix3d, 4> out;
  for (int k = 0; k < 4; ++k) {
    Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
    for (int j = 0; j < 4; ++j) {
      const double dj = ((j == k) ? 1.0 : 0.0) - u[j] * u[k];
      m += dRdu[j] * (dj / n);
    }
    out[k] = m;
  }
  return out;
}

double rotation_angle(const Eigen::Matrix3d& R) {
  const double c = std::clamp((R.trace() - 1.0) * 0.5, -1.0, 1.0);
  return std::acos(c);
}

Eigen::Matrix3d axis_angle_to_rot(const Eigen::Vector3d& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

}  // namespace panosplat
