#pragma once

#include <array>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

namespace unitele {

inline constexpr double kPi = std::numbers::pi;

using Vector3 = Eigen::Vector3d;
using Vector6 = Eigen::Matrix<double, 6, 1>;
using Matrix3 = Eigen::Matrix3d;
using Matrix4 = Eigen::Matrix4d;
using Matrix6 = Eigen::Matrix<double, 6, 6>;
using Matrix7 = Eigen::Matrix<double, 7, 7>;

/// Seven joint values. Units depend on the use site: rad, rad/s or N·m.
using JointVector7 = Eigen::Matrix<double, 7, 1>;

/// Planar pose of the mobile base in the world frame.
/// gamma is the heading, CCW from world +x, kept in (-pi, pi].
struct Pose2D {
  double x = 0.0;      // m
  double y = 0.0;      // m
  double gamma = 0.0;  // rad

  bool operator==(const Pose2D&) const = default;
};

/// End-effector pose: position in meters plus roll/pitch/yaw (omega, theta, gamma)
/// with R = Rz(gamma) * Ry(theta) * Rx(omega).
struct Pose6 {
  Vector3 position = Vector3::Zero();
  Vector3 rpy = Vector3::Zero();

  double x() const { return position.x(); }
  double y() const { return position.y(); }
  double z() const { return position.z(); }
  double roll() const { return rpy.x(); }
  double pitch() const { return rpy.y(); }
  double yaw() const { return rpy.z(); }
};

/// Force (N) and torque (N·m), both in the frame named at the use site.
struct Wrench6 {
  Vector3 force = Vector3::Zero();
  Vector3 torque = Vector3::Zero();

  static Wrench6 from_vector(const Vector6& v) {
    return Wrench6{v.head<3>(), v.tail<3>()};
  }
  Vector6 as_vector() const {
    Vector6 v;
    v << force, torque;
    return v;
  }
  bool is_zero() const { return force.isZero(0.0) && torque.isZero(0.0); }
  bool all_finite() const { return force.allFinite() && torque.allFinite(); }

  Wrench6 operator+(const Wrench6& o) const { return {force + o.force, torque + o.torque}; }
  Wrench6 operator*(double s) const { return {force * s, torque * s}; }
  bool operator==(const Wrench6& o) const { return force == o.force && torque == o.torque; }
};

/// Forward speed and yaw-rate command for the mobile base.
struct BaseVelocity {
  double v_x = 0.0;      // m/s
  double v_gamma = 0.0;  // rad/s

  bool is_zero() const { return v_x == 0.0 && v_gamma == 0.0; }
  bool operator==(const BaseVelocity&) const = default;
};

inline JointVector7 to_joint_vector(const std::array<double, 7>& a) {
  return Eigen::Map<const JointVector7>(a.data());
}

inline std::array<double, 7> to_array(const JointVector7& v) {
  std::array<double, 7> a{};
  for (int i = 0; i < 7; ++i) a[i] = v[i];
  return a;
}

}  // namespace unitele
