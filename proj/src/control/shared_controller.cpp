#include "unitele/control/shared_controller.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "unitele/core/angles.hpp"

namespace unitele::control {

ControllerGains::ControllerGains(const JointVector7& kp_, const JointVector7& kd_, double alpha_,
                                 const Vector6& k_fmr_, double kv_free_, double kv_obstacle_, double kr_)
    : kp(kp_),
      kd(kd_),
      alpha(alpha_),
      beta(2.0 * std::sqrt(alpha_)),
      k_fmr(k_fmr_),
      kv_free(kv_free_),
      kv_obstacle(kv_obstacle_),
      kr(kr_) {
  if ((kp.array() < 0).any() || (kd.array() < 0).any()) throw std::invalid_argument("Kp and Kd must be >= 0");
  if (!(alpha >= 0)) throw std::invalid_argument("alpha must be >= 0");
  if ((k_fmr.array() < 0).any()) throw std::invalid_argument("K_fmr entries must be >= 0");
}

ControllerGains ControllerGains::from_config(const ControllerConfig& c) {
  ControllerGains g(to_joint_vector(c.kp_nm_per_rad), to_joint_vector(c.kd_nms_per_rad), c.nullspace_alpha,
                    Eigen::Map<const Vector6>(c.k_fmr_diag.data()), c.kv_free, c.kv_obstacle, c.kr);
  g.paper_literal_damping = c.paper_literal_damping;
  return g;
}

VirtualBoundary::VirtualBoundary(double i, double e) : vb_i(i), vb_e(e) {
  if (!(vb_i > 0 && vb_i < vb_e)) throw std::invalid_argument("virtual boundary needs 0 < vb_i < vb_e");
}

const char* boundary_zone_name(BoundaryZone z) {
  switch (z) {
    case BoundaryZone::Deadzone: return "deadzone";
    case BoundaryZone::Active: return "active";
    case BoundaryZone::Beyond: return "beyond";
  }
  return "?";
}

HoldGains HoldGains::from_config(const ControllerConfig& c) {
  HoldGains g;
  g.stiffness = Eigen::Map<const Eigen::Vector4d>(c.hold_stiffness.data());
  g.damping = Eigen::Map<const Eigen::Vector4d>(c.hold_damping.data());
  return g;
}

JointVector7 saturate(const JointVector7& tau, const JointVector7& limit) {
  return tau.cwiseMax(-limit).cwiseMin(limit);
}

JointVector7 nullspace_torque(const Jacobian6x7& J, const JointVector7& q, const JointVector7& qdot,
                              const JointVector7& q_ns, const ControllerGains& g) {
  return kinematics::nullspace_projector(J) * (g.alpha * (q_ns - q) - g.beta * qdot);
}

JointVector7 nullspace_torque(const KinematicChain& chain, const JointVector7& q, const JointVector7& qdot,
                              const JointVector7& q_ns, const ControllerGains& g) {
  return nullspace_torque(kinematics::jacobian(chain, q), q, qdot, q_ns, g);
}

JointVector7 leader_torque(int phi, const JointVector7& tau_ns, const Jacobian6x7& J, const Wrench6& f_fra,
                           const Wrench6& f_fmr, const JointVector7& tau_t, const JointVector7& tau_max) {
  JointVector7 tau = tau_ns;
  if (phi == 1) {
    tau += J.transpose() * f_fra.as_vector();
  } else {
    tau += tau_t + J.transpose() * f_fmr.as_vector();
  }
  return saturate(tau, tau_max);
}

Wrench6 hold_wrench(const Pose6& p_lra, const Pose6& p_home, const Vector6& twist, const HoldGains& g) {
  const Vector3 e_p = p_home.position - p_lra.position;
  const Vector3 e_r = rotation_log(rpy_to_matrix(p_home.rpy) * rpy_to_matrix(p_lra.rpy).transpose());
  Wrench6 w;
  w.force.y() = g.stiffness[0] * e_p.y() - g.damping[0] * twist[1];
  w.force.z() = g.stiffness[1] * e_p.z() - g.damping[1] * twist[2];
  w.torque.x() = g.stiffness[2] * e_r.x() - g.damping[2] * twist[3];
  w.torque.y() = g.stiffness[3] * e_r.y() - g.damping[3] * twist[4];
  return w;
}

JointVector7 hold_torque(const Pose6& p_lra, const Pose6& p_home, const Jacobian6x7& J, const JointVector7& qdot,
                         const HoldGains& g) {
  const Vector6 twist = J * qdot;
  return J.transpose() * hold_wrench(p_lra, p_home, twist, g).as_vector();
}

JointVector7 follower_mirror_torque(const JointVector7& q_lra, const JointVector7& q_fra,
                                    const JointVector7& qdot_fra, const ControllerGains& g,
                                    const JointVector7& tau_max) {
  const double sign = g.paper_literal_damping ? 1.0 : -1.0;
  const JointVector7 tau = g.kp.cwiseProduct(q_lra - q_fra) + sign * g.kd.cwiseProduct(qdot_fra);
  return saturate(tau, tau_max);
}

BaseVelocityResult base_velocity_from_leader(const Pose6& p_lra, const Pose6& p_home, const VirtualBoundary& vb,
                                             const ControllerGains& g, bool obstacle_near, double v_x_cap) {
  BaseVelocityResult r;
  const double d = p_lra.x() - p_home.x();
  r.displacement = d;
  if (std::abs(d) > vb.vb_e) {
    r.zone = BoundaryZone::Beyond;
    r.home_return = true;
    return r;
  }
  r.command.v_gamma = g.kr * angle_diff(p_lra.yaw(), p_home.yaw());
  if (std::abs(d) < vb.vb_i) {
    r.zone = BoundaryZone::Deadzone;
    return r;
  }
  r.zone = BoundaryZone::Active;
  const double kv = obstacle_near ? g.kv_obstacle : g.kv_free;
  r.command.v_x = std::clamp(kv * d / (vb.vb_e - vb.vb_i), -v_x_cap, v_x_cap);
  return r;
}

Wrench6 navigation_cue(const Pose2D& p_fmr, const Pose2D& p_look, const Vector6& k_fmr) {
  const double dx = (p_look.x - p_fmr.x) * std::cos(p_fmr.gamma) + (p_look.y - p_fmr.y) * std::sin(p_fmr.gamma);
  const double dg = angle_diff(p_look.gamma, p_fmr.gamma);
  Wrench6 w;
  w.force.x() = k_fmr[0] * dx;
  w.torque.z() = k_fmr[5] * dg;
  return w;
}

Wrench6 render_cue_for_leader(const Wrench6& cue, const ControllerGains& g) {
  Wrench6 w = cue;
  if (g.kv_free < 0) w.force.x() = -w.force.x();
  if (g.kr < 0) w.torque.z() = -w.torque.z();
  return w;
}

Wrench6 manipulation_cue(const Vector3& follower_ee, const Vector3& object, const Vector3& k_fra, double f_max) {
  Wrench6 w;
  w.force = k_fra.cwiseProduct(object - follower_ee);
  const double n = w.force.norm();
  if (n > f_max && n > 0) w.force *= f_max / n;
  return w;
}

const char* leader_phase_name(LeaderPhase p) {
  switch (p) {
    case LeaderPhase::Free: return "free";
    case LeaderPhase::Stiffen: return "stiffen";
    case LeaderPhase::Home: return "home";
    case LeaderPhase::Locked: return "locked";
  }
  return "?";
}

LeaderBehaviorParams LeaderBehaviorParams::from_config(const ControllerConfig& c) {
  return {c.stiffen_kp_nm_per_rad, c.stiffen_kd_nms_per_rad, c.home_kp_nm_per_rad, c.home_kd_nms_per_rad,
          c.stiffen_duration_s,    c.eps_home_rad,           c.home_speed_tol_radps};
}

LeaderStepResult leader_behavior_step(LeaderAction action, LeaderState& s, const JointVector7& q,
                                      const JointVector7& qdot, const JointVector7& q_home,
                                      const JointVector7& normal_torque, const LeaderBehaviorParams& p,
                                      const JointVector7& tau_max, double dt) {
  switch (action) {
    case LeaderAction::BeginSwitch:
      s = LeaderState{LeaderPhase::Stiffen, 0.0, q, true};
      break;
    case LeaderAction::ReturnHome:
      if (s.phase == LeaderPhase::Free) s = LeaderState{LeaderPhase::Home, 0.0, q};
      break;
    case LeaderAction::Lock:
      s = LeaderState{LeaderPhase::Locked, 0.0, q};
      break;
    case LeaderAction::Release:
      s = LeaderState{LeaderPhase::Free, 0.0, q};
      break;
    case LeaderAction::None:
      break;
  }

  LeaderStepResult r;
  if (s.phase == LeaderPhase::Stiffen && s.phase_time >= p.stiffen_duration_s) {
    s.phase = LeaderPhase::Home;
    s.phase_time = 0.0;
  }
  if (s.phase == LeaderPhase::Home && (q - q_home).cwiseAbs().maxCoeff() < p.eps_home_rad &&
      qdot.cwiseAbs().maxCoeff() < p.home_speed_tol_radps) {
    s = LeaderState{LeaderPhase::Free, 0.0, q};
    r.homed = true;
  }

  switch (s.phase) {
    case LeaderPhase::Free:
      r.command.torque = normal_torque;
      break;
    case LeaderPhase::Stiffen:
    case LeaderPhase::Locked:
      r.command.torque = p.stiffen_kp * (s.q_hold - q) - p.stiffen_kd * qdot;
      r.command.stiffen = true;
      break;
    case LeaderPhase::Home:
      r.command.torque = p.home_kp * (q_home - q) - p.home_kd * qdot;
      r.command.home = true;
      // a switch keeps the joints stiff until home is reached; a boundary return does not
      r.command.stiffen = s.switching;
      break;
  }
  r.command.torque = saturate(r.command.torque, tau_max);
  s.phase_time += dt;
  return r;
}

}  // namespace unitele::control
