#pragma once

#include "unitele/core/config.hpp"
#include "unitele/core/types.hpp"
#include "unitele/kinematics/chain.hpp"

namespace unitele::control {

using kinematics::Jacobian6x7;
using kinematics::KinematicChain;

struct ControllerGains {
  JointVector7 kp = JointVector7::Zero();
  JointVector7 kd = JointVector7::Zero();
  double alpha = 0.0;
  double beta = 0.0;  // always 2*sqrt(alpha)
  Vector6 k_fmr = Vector6::Zero();
  double kv_free = 0.5;
  double kv_obstacle = 0.2;
  double kr = -1.0;
  bool paper_literal_damping = false;

  /// Throws std::invalid_argument on negative gains.
  ControllerGains(const JointVector7& kp, const JointVector7& kd, double alpha, const Vector6& k_fmr,
                  double kv_free = 0.5, double kv_obstacle = 0.2, double kr = -1.0);
  static ControllerGains from_config(const ControllerConfig& c);
};

struct VirtualBoundary {
  double vb_i = 0.05;
  double vb_e = 0.4;
  /// Throws std::invalid_argument unless 0 < vb_i < vb_e.
  VirtualBoundary(double vb_i, double vb_e);
};

enum class BoundaryZone { Deadzone, Active, Beyond };
const char* boundary_zone_name(BoundaryZone z);

struct BaseVelocityResult {
  BaseVelocity command;
  BoundaryZone zone = BoundaryZone::Deadzone;
  bool home_return = false;
  double displacement = 0.0;  // d = x_lra - x_home
};

/// Spring-damper on the leader's non-driving axes: force on y, z and torque on roll, pitch.
struct HoldGains {
  Eigen::Vector4d stiffness = Eigen::Vector4d::Zero();  // N/m, N/m, N·m/rad, N·m/rad
  Eigen::Vector4d damping = Eigen::Vector4d::Zero();
  static HoldGains from_config(const ControllerConfig& c);
};

struct LeaderCommand {
  JointVector7 torque = JointVector7::Zero();
  bool stiffen = false;
  bool home = false;
};

JointVector7 saturate(const JointVector7& tau, const JointVector7& limit);

/// tau_ns = N(J) (alpha (q_ns - q) - beta qdot).
JointVector7 nullspace_torque(const Jacobian6x7& J, const JointVector7& q, const JointVector7& qdot,
                              const JointVector7& q_ns, const ControllerGains& gains);
JointVector7 nullspace_torque(const KinematicChain& chain, const JointVector7& q, const JointVector7& qdot,
                              const JointVector7& q_ns, const ControllerGains& gains);

/// tau = tau_ns + phi J^T F_fra + (1 - phi)(tau_T + J^T F_fmr), saturated to tau_max.
JointVector7 leader_torque(int phi, const JointVector7& tau_ns, const Jacobian6x7& J, const Wrench6& f_fra,
                           const Wrench6& f_fmr, const JointVector7& tau_t, const JointVector7& tau_max);

/// Task-space hold wrench. `twist` is the end-effector velocity (linear, angular), world frame.
Wrench6 hold_wrench(const Pose6& p_lra, const Pose6& p_home, const Vector6& twist, const HoldGains& g);
JointVector7 hold_torque(const Pose6& p_lra, const Pose6& p_home, const Jacobian6x7& J, const JointVector7& qdot,
                         const HoldGains& g);

/// tau_fra = Kp (q_lra - q_fra) - Kd qdot_fra, saturated. The sign of the damping term
/// flips when gains.paper_literal_damping is set.
JointVector7 follower_mirror_torque(const JointVector7& q_lra, const JointVector7& q_fra,
                                    const JointVector7& qdot_fra, const ControllerGains& gains,
                                    const JointVector7& tau_max);

BaseVelocityResult base_velocity_from_leader(const Pose6& p_lra, const Pose6& p_home, const VirtualBoundary& vb,
                                             const ControllerGains& gains, bool obstacle_near,
                                             double v_x_cap = 0.5);

/// F_fmr = K_fmr (dx_body, 0, 0, 0, 0, dgamma), expressed on the vehicle axes.
Wrench6 navigation_cue(const Pose2D& p_fmr, const Pose2D& p_lookahead, const Vector6& k_fmr);

/// Maps a vehicle-axis cue into the leader frame so that following it produces the
/// suggested motion through the velocity mapping (flips with the signs of K_v and K_r).
Wrench6 render_cue_for_leader(const Wrench6& cue, const ControllerGains& gains);

/// Attraction of the leader toward the object during manipulation, capped in magnitude.
Wrench6 manipulation_cue(const Vector3& follower_ee, const Vector3& object, const Vector3& k_fra, double f_max);

enum class LeaderPhase { Free, Stiffen, Home, Locked };
const char* leader_phase_name(LeaderPhase p);

enum class LeaderAction { None, BeginSwitch, ReturnHome, Lock, Release };

struct LeaderState {
  LeaderPhase phase = LeaderPhase::Free;
  double phase_time = 0.0;
  JointVector7 q_hold = JointVector7::Zero();
  bool switching = false;  // homing that belongs to a mode switch
  bool operator==(const LeaderState&) const = default;
};

struct LeaderBehaviorParams {
  double stiffen_kp = 800.0;
  double stiffen_kd = 55.0;
  double home_kp = 400.0;
  double home_kd = 35.0;
  double stiffen_duration_s = 0.3;
  double eps_home_rad = 0.01;
  double home_speed_tol_radps = 0.05;
  static LeaderBehaviorParams from_config(const ControllerConfig& c);
};

struct LeaderStepResult {
  LeaderCommand command;
  bool homed = false;  // set on the tick the leader settles at home
};

/// One control tick of the leader. `normal_torque` is the leader_torque output, used in the Free phase.
LeaderStepResult leader_behavior_step(LeaderAction action, LeaderState& state, const JointVector7& q,
                                      const JointVector7& qdot, const JointVector7& q_home,
                                      const JointVector7& normal_torque, const LeaderBehaviorParams& params,
                                      const JointVector7& tau_max, double dt);

}  // namespace unitele::control
