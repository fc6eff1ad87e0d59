#include "unitele/core/motion.hpp"

#include <algorithm>
#include <cmath>

#include "unitele/core/angles.hpp"

namespace unitele {

double realized_yaw_rate(const BaseVelocity& cmd, const VehicleConfig& v) {
  if (v.model == MotionModelKind::Unicycle) return cmd.v_gamma;
  if (std::abs(cmd.v_x) < v.min_turn_speed_mps || cmd.v_gamma == 0.0) return 0.0;
  const double delta = std::clamp(std::atan(v.wheelbase_m * cmd.v_gamma / cmd.v_x), -v.max_steer_rad, v.max_steer_rad);
  return cmd.v_x * std::tan(delta) / v.wheelbase_m;
}

Pose2D integrate_motion(const Pose2D& p, const BaseVelocity& cmd, double dt, const VehicleConfig& v) {
  const double w = realized_yaw_rate(cmd, v);
  Pose2D out = p;
  if (std::abs(w) < 1e-12) {
    out.x += cmd.v_x * std::cos(p.gamma) * dt;
    out.y += cmd.v_x * std::sin(p.gamma) * dt;
  } else {
    const double g1 = p.gamma + w * dt;
    const double r = cmd.v_x / w;
    out.x += r * (std::sin(g1) - std::sin(p.gamma));
    out.y -= r * (std::cos(g1) - std::cos(p.gamma));
    out.gamma = normalize_angle(g1);
  }
  return out;
}

}  // namespace unitele
