#include "unitele/core/angles.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace unitele {

double normalize_angle(double a) {
  if (!std::isfinite(a)) {
    throw std::invalid_argument("normalize_angle: non-finite angle " + std::to_string(a));
  }
  double r = std::remainder(a, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  if (r > kPi) r -= 2.0 * kPi;
  return r;
}

double angle_diff(double a, double b) { return normalize_angle(a - b); }

Matrix3 rpy_to_matrix(const Vector3& rpy) {
  return (Eigen::AngleAxisd(rpy.z(), Vector3::UnitZ()) *
          Eigen::AngleAxisd(rpy.y(), Vector3::UnitY()) *
          Eigen::AngleAxisd(rpy.x(), Vector3::UnitX()))
      .toRotationMatrix();
}

Vector3 matrix_to_rpy(const Matrix3& R) {
  const double pitch = std::asin(std::clamp(-R(2, 0), -1.0, 1.0));
  double roll = 0.0;
  double yaw = 0.0;
  if (std::abs(std::cos(pitch)) > 1e-9) {
    roll = std::atan2(R(2, 1), R(2, 2));
    yaw = std::atan2(R(1, 0), R(0, 0));
  } else {
    // gimbal lock: fold all rotation about z into yaw
    yaw = std::atan2(-R(0, 1), R(1, 1));
  }
  return {normalize_angle(roll), normalize_angle(pitch), normalize_angle(yaw)};
}

Vector3 rotation_log(const Matrix3& R) {
  const Eigen::AngleAxisd aa(R);
  return aa.axis() * aa.angle();
}

}  // namespace unitele
