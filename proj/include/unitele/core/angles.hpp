#pragma once

#include "unitele/core/types.hpp"

namespace unitele {

/// Wraps an angle into (-pi, pi]. Throws std::invalid_argument for NaN/inf.
double normalize_angle(double a);

/// normalize_angle(a - b)
double angle_diff(double a, double b);

/// Rotation matrix for R = Rz(yaw) * Ry(pitch) * Rx(roll).
Matrix3 rpy_to_matrix(const Vector3& rpy);

/// Inverse of rpy_to_matrix. Each angle is normalized to (-pi, pi].
Vector3 matrix_to_rpy(const Matrix3& R);

/// Rotation vector (axis * angle) of R, angle in [0, pi].
Vector3 rotation_log(const Matrix3& R);

}  // namespace unitele
