#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "unitele/core/types.hpp"

// Plain configuration records shared by every module. Field names carry their
// units; the scenario loader maps them 1:1 onto the scenario file keys.

namespace unitele {

struct MapConfig {
  std::string path;  // relative paths resolve against the scenario file directory
  double resolution_m = 0.05;
  double origin_x_m = 0.0;
  double origin_y_m = 0.0;
  bool operator==(const MapConfig&) const = default;
};

/// Object to grasp. approach_yaw_rad is the base heading expected at grasp time.
struct ObjectConfig {
  double x_m = 0.0;
  double y_m = 0.0;
  double approach_yaw_rad = 0.0;
  double height_m = 0.70;  // above the floor
  bool operator==(const ObjectConfig&) const = default;
};

/// Bin pose P_b, expressed in the follower arm base frame.
struct BinConfig {
  double x_m = 0.0;
  double y_m = -0.45;
  double z_m = 0.25;
  double yaw_rad = 0.0;
  bool operator==(const BinConfig&) const = default;
};

/// Follower arm base relative to the mobile base center (arm faces base +x).
struct ArmMountConfig {
  double x_m = 0.25;
  double z_m = 0.45;
  bool operator==(const ArmMountConfig&) const = default;
};

struct ControllerConfig {
  std::array<double, 7> kp_nm_per_rad{400, 400, 400, 400, 250, 150, 60};
  std::array<double, 7> kd_nms_per_rad{40, 40, 40, 40, 31.6227766016838, 24.4948974278318,
                                       15.4919333848297};
  bool paper_literal_damping = false;
  double nullspace_alpha = 10.0;
  std::array<double, 6> k_fmr_diag{20, 20, 20, 5, 5, 10};
  double kv_free = 0.5;
  double kv_obstacle = 0.2;
  double kr = -1.0;
  double vb_i_m = 0.05;
  double vb_e_m = 0.4;
  double v_x_cap_mps = 0.5;
  double v_gamma_max_radps = 1.0;
  // home-holding spring on the non-driving axes: y, z, roll, pitch
  std::array<double, 4> hold_stiffness{300, 300, 30, 30};
  std::array<double, 4> hold_damping{40, 40, 4, 4};
  double stiffen_kp_nm_per_rad = 800.0;
  double stiffen_kd_nms_per_rad = 55.0;
  double home_kp_nm_per_rad = 400.0;
  double home_kd_nms_per_rad = 35.0;
  double stiffen_duration_s = 0.3;
  double eps_home_rad = 0.01;
  double home_speed_tol_radps = 0.05;
  std::array<double, 3> k_fra_n_per_m{40, 40, 40};
  double f_fra_max_n = 12.0;
  double obstacle_near_m = 1.0;
  bool operator==(const ControllerConfig&) const = default;
};

struct DwaConfig {
  double v_min_mps = 0.0;
  double v_max_mps = 0.5;
  double w_max_radps = 1.0;
  double acc_v_mps2 = 2.0;
  double acc_w_radps2 = 16.0;
  int samples_v = 7;
  int samples_w = 15;
  double dt_plan_s = 0.025;
  double horizon_s = 1.5;
  double w_heading = 0.6;
  double w_clearance = 0.3;
  double w_velocity = 0.1;
  double clearance_cap_m = 1.0;
  double footprint_radius_m = 0.45;
  double path_lookahead_m = 0.8;
  int lookahead_index = 40;
  bool operator==(const DwaConfig&) const = default;
};

struct PlannerConfig {
  DwaConfig dwa;
  double inflation_m = 0.8;
  int period_ticks = 100;  // 10 Hz at 1 kHz
  bool operator==(const PlannerConfig&) const = default;
};

enum class MotionModelKind { Ackermann, Unicycle };

struct VehicleConfig {
  MotionModelKind model = MotionModelKind::Ackermann;
  double wheelbase_m = 0.65;
  double max_steer_rad = 0.524;
  double min_turn_speed_mps = 0.02;
  double body_radius_m = 0.35;
  bool operator==(const VehicleConfig&) const = default;
};

struct LidarConfig {
  int beams = 360;
  double range_m = 8.0;
  double span_rad = 2.0 * kPi;
  int period_ticks = 100;
  bool operator==(const LidarConfig&) const = default;
};

struct CameraConfig {
  double half_angle_rad = 0.5;
  double min_range_m = 0.1;
  double max_range_m = 1.5;
  double noise_sigma_m = 0.0;
  bool operator==(const CameraConfig&) const = default;
};

struct GraspableConfig {
  double x_min_m = 0.20;
  double x_max_m = 0.45;
  double half_width_m = 0.20;
  bool operator==(const GraspableConfig&) const = default;
};

struct SimConfig {
  double dt_s = 0.001;
  double joint_damping_nms_per_rad = 5.0;
  VehicleConfig vehicle;
  LidarConfig lidar;
  CameraConfig camera;
  GraspableConfig graspable;
  double grasp_eps_m = 0.02;
  double timeout_s = 300.0;
  bool abort_on_collision = false;
  bool operator==(const SimConfig&) const = default;
};

struct FsmConfig {
  int n_confirm = 5;
  double align_eps_rad = 0.01;
  bool operator==(const FsmConfig&) const = default;
};

struct DropConfig {
  double pre_drop_height_m = 0.12;
  double release_height_m = 0.01;
  std::array<double, 7> qd_max_radps{2.0, 2.0, 2.0, 2.0, 2.5, 2.5, 2.5};
  double min_segment_s = 0.4;
  double settle_s = 0.2;
  bool operator==(const DropConfig&) const = default;
};

/// Parameters of the scripted operators that stand in for a human.
struct OperatorConfig {
  // navigation
  double nav_stiffness_n_per_m = 300.0;
  double nav_damping_ns_per_m = 40.0;
  double yaw_stiffness_nm_per_rad = 20.0;
  double yaw_damping_nms_per_rad = 2.0;
  double cue_compliance = 1.0;
  double noise_sigma_n = 3.0;
  double noise_sigma_nm = 0.6;
  double cruise_speed_mps = 0.35;
  double pursuit_lookahead_m = 1.2;
  double approach_slow_radius_m = 2.0;
  double max_displacement_m = 0.28;
  double max_yaw_offset_rad = 0.6;
  double bias_min_m = 0.10;
  double bias_max_m = 0.30;
  double bias_wavelength_min_m = 3.0;
  double bias_wavelength_max_m = 8.0;
  // manipulation
  double manip_stiffness_n_per_m = 60.0;
  double manip_damping_ns_per_m = 25.0;
  double manip_orientation_nm_per_rad = 15.0;
  double perception_bias_min_m = 0.03;
  double perception_bias_max_m = 0.07;
  double perception_decay_s = 3.0;
  double grasp_belief_tol_m = 0.015;
  double drop_key_delay_s = 0.4;
  // distraction windows
  double distraction_duration_s = 1.5;
  double distraction_gap_min_s = 10.0;
  double distraction_gap_max_s = 30.0;
  bool operator==(const OperatorConfig&) const = default;
};

}  // namespace unitele
