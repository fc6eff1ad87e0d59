#pragma once

#include "unitele/core/config.hpp"
#include "unitele/core/types.hpp"

namespace unitele {

/// Yaw rate the vehicle actually realizes for a command. Ackermann: steering angle
/// atan(L v_gamma / v_x) saturated to max_steer, no turning below min_turn_speed.
double realized_yaw_rate(const BaseVelocity& cmd, const VehicleConfig& v);

/// Exact integration along the constant-curvature arc over dt.
Pose2D integrate_motion(const Pose2D& p, const BaseVelocity& cmd, double dt, const VehicleConfig& v);

}  // namespace unitele
