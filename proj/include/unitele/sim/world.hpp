#pragma once

#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "unitele/core/config.hpp"
#include "unitele/core/grid.hpp"
#include "unitele/core/types.hpp"
#include "unitele/kinematics/chain.hpp"
#include "unitele/planning/planner.hpp"

namespace unitele::sim {

struct CollisionEvent {
  double time = 0.0;
  CellIndex cell;
  CellClass cell_class = CellClass::Known;
  Pose2D base;
};

struct WorldState {
  double time = 0.0;
  std::uint64_t tick = 0;
  JointVector7 q_lra = JointVector7::Zero();
  JointVector7 qd_lra = JointVector7::Zero();
  JointVector7 q_fra = JointVector7::Zero();
  JointVector7 qd_fra = JointVector7::Zero();
  Pose2D base;
  BaseVelocity base_velocity;  // realized forward speed and yaw rate
  OccupancyGrid grid;
  Vector3 object_world = Vector3::Zero();
  bool attached = false;
  bool in_collision = false;
  std::vector<CollisionEvent> collisions;
};

/// Thrown when the state stops being finite. what() carries a state dump.
class SimFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct WorldParams {
  kinematics::KinematicChain leader = kinematics::KinematicChain::panda();
  kinematics::KinematicChain follower = kinematics::KinematicChain::panda();
  SimConfig sim;
  ArmMountConfig mount;
  ObjectConfig object;
};

bool graspable(const Vector3& object_in_arm, const GraspableConfig& g);

class World {
 public:
  World(WorldParams params, OccupancyGrid grid, const Pose2D& base_start, const JointVector7& q_lra0,
        const JointVector7& q_fra0, std::uint64_t seed);

  const WorldState& state() const { return s_; }
  const WorldParams& params() const { return p_; }

  /// Advances one fixed step. `operator_wrench` acts on the leader end-effector, leader base frame.
  void step(const JointVector7& tau_lra, const Wrench6& operator_wrench, const BaseVelocity& base_cmd,
            const JointVector7& tau_fra);

  /// Raycasts from the base center; returns cells discovered by this scan.
  std::vector<CellIndex> lidar_scan();
  /// Object position in the follower arm base frame when the eye-in-hand camera sees it.
  std::optional<Vector3> marker_visible();
  /// Attaches the object when the follower end-effector is within grasp_eps of it. Idempotent.
  bool try_grasp();
  void release_object();

  Matrix4 arm_base_in_world() const;
  /// Follower tool frame in the arm base frame, as of the last step.
  const Matrix4& follower_ee_in_arm() const { return ee_arm_; }
  Vector3 follower_ee_world() const;
  Vector3 object_in_arm() const;
  /// Clearance from a world point to the nearest cell of any obstacle class.
  double true_clearance(double x, double y) const;

 private:
  void update_follower_fk();
  void check_collision();
  [[noreturn]] void fault(const char* what) const;

  WorldParams p_;
  WorldState s_;
  Matrix4 ee_arm_ = Matrix4::Identity();
  Matrix4 grip_offset_ = Matrix4::Identity();
  planning::PlannerView truth_;  // every obstacle class, for collisions
  std::mt19937_64 rng_;
};

}  // namespace unitele::sim
