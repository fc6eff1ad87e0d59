#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "unitele/core/types.hpp"

namespace unitele::kinematics {

using Jacobian6x7 = Eigen::Matrix<double, 6, 7>;
using Matrix7x6 = Eigen::Matrix<double, 7, 6>;

/// One revolute joint in modified DH (Craig) form. The link transform is
///   Rx(alpha) * Tx(a) * Rz(q + theta_offset) * Tz(d)
struct JointRow {
  double a_m = 0.0;
  double alpha_rad = 0.0;
  double d_m = 0.0;
  double theta_offset_rad = 0.0;
  double q_min_rad = -kPi;
  double q_max_rad = kPi;
  double tau_max_nm = 87.0;
  double qd_max_radps = 2.0;
};

class JointLimitError : public std::domain_error {
 public:
  JointLimitError(int joint, double value, double lo, double hi);
  int joint() const { return joint_; }

 private:
  int joint_;
};

/// A 7-joint serial arm with a fixed tool transform after the last joint.
class KinematicChain {
 public:
  KinematicChain(std::string name, const std::array<JointRow, 7>& joints,
                 const Matrix4& tool = Matrix4::Identity(), const Matrix4& base = Matrix4::Identity());

  /// 7-DoF Franka Emika Panda geometry, tool frame at the hand TCP.
  static KinematicChain panda();
  static KinematicChain load(const std::filesystem::path& path);
  static KinematicChain from_json_text(const std::string& text);
  std::string to_json_text() const;

  const std::string& name() const { return name_; }
  const std::array<JointRow, 7>& joints() const { return joints_; }
  const Matrix4& tool() const { return tool_; }
  const Matrix4& base() const { return base_; }

  const JointVector7& q_min() const { return q_min_; }
  const JointVector7& q_max() const { return q_max_; }
  const JointVector7& tau_max() const { return tau_max_; }
  const JointVector7& qd_max() const { return qd_max_; }

  bool within_limits(const JointVector7& q) const;
  /// Throws JointLimitError naming the first offending joint.
  void check_limits(const JointVector7& q) const;
  JointVector7 clamp_to_limits(const JointVector7& q) const;

  /// Same chain with `extra` appended after the tool frame.
  KinematicChain with_tool_appended(const Matrix4& extra) const;

 private:
  std::string name_;
  std::array<JointRow, 7> joints_;
  Matrix4 tool_;
  Matrix4 base_;
  JointVector7 q_min_, q_max_, tau_max_, qd_max_;
};

/// End-effector transform and world-frame geometric Jacobian evaluated together.
/// Rows 0..2 map to linear velocity (m/s), rows 3..5 to angular velocity (rad/s).
struct ArmKinematics {
  Matrix4 ee = Matrix4::Identity();
  Jacobian6x7 jacobian = Jacobian6x7::Zero();

  Pose6 pose() const;
  Vector3 position() const { return ee.block<3, 1>(0, 3); }
  Matrix3 rotation() const { return ee.block<3, 3>(0, 0); }
};

/// No limit checks; for the simulation loop where limits are enforced by the integrator.
ArmKinematics evaluate(const KinematicChain& chain, const JointVector7& q);
Matrix4 fk_transform(const KinematicChain& chain, const JointVector7& q);

Pose6 forward_kinematics(const KinematicChain& chain, const JointVector7& q);
Jacobian6x7 jacobian(const KinematicChain& chain, const JointVector7& q);

/// Moore-Penrose pseudo-inverse; singular values below 1e-6 * sigma_max count as zero.
Matrix7x6 pinv(const Jacobian6x7& J);

/// N = I - J^T * pinv(J^T). Torques N*v produce no end-effector wrench.
Matrix7 nullspace_projector(const Jacobian6x7& J);

/// Position-only damped least-squares IK, biased toward `posture` in the null space.
/// Returns std::nullopt when the target is not reached within tolerance.
std::optional<JointVector7> solve_position_ik(const KinematicChain& chain, const Vector3& target,
                                              const JointVector7& seed, const JointVector7& posture,
                                              double tolerance_m = 1e-5, int max_iterations = 2000);

Matrix4 make_transform(const Vector3& xyz, const Vector3& rpy);

}  // namespace unitele::kinematics
