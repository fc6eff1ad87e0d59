#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "unitele/control/shared_controller.hpp"
#include "unitele/core/scenario.hpp"
#include "unitele/harness/metrics.hpp"
#include "unitele/harness/operator.hpp"
#include "unitele/modes/mode_switch.hpp"
#include "unitele/planning/planner.hpp"
#include "unitele/sim/world.hpp"

namespace unitele::harness {

/// 1 = haptic guidance, 2 = no guidance, 3 = guidance with a distracted operator.
int validate_condition(int condition);

enum class Outcome { Running, Completed, Timeout, CollisionAbort, Fault };
const char* outcome_name(Outcome o);

struct TrialEvent {
  std::uint64_t tick = 0;
  double time = 0.0;
  std::string kind;
  std::string detail;
  bool operator==(const TrialEvent&) const = default;
};

/// One closed-loop tick as logged.
struct TickRow {
  std::uint64_t tick = 0;
  double time = 0.0;
  modes::Mode mode = modes::Mode::Navigation;
  int phi = 0;
  control::LeaderPhase leader_phase = control::LeaderPhase::Free;
  control::BoundaryZone zone = control::BoundaryZone::Deadzone;
  Pose6 leader_pose;
  Pose2D base;
  BaseVelocity base_cmd;  // as delivered to the world
  JointVector7 q_lra = JointVector7::Zero();
  JointVector7 q_fra = JointVector7::Zero();
  Wrench6 cue;  // rendered on the leader
  Wrench6 operator_wrench;
  Pose2D lookahead;  // planner reference pose
  bool attached = false;
  bool in_collision = false;
  std::uint32_t event_count = 0;  // events emitted on this tick
};

/// A global plan together with the tick from which it was active.
struct PlanEpoch {
  std::uint64_t from_tick = 0;
  std::vector<Point2> waypoints;
};

/// Everything that drives one trial: world, planner, controller, mode logic.
/// Operator input enters through step(); observe() gives what a scripted operator sees.
class Simulation {
 public:
  Simulation(const ScenarioConfig& cfg, OccupancyGrid grid, kinematics::KinematicChain chain, int condition);
  /// Loads the map and chain the scenario points to.
  static Simulation from_scenario(const ScenarioConfig& cfg, int condition);

  OperatorObservation observe() const;
  const TickRow& step(const OperatorInput& input);

  Outcome outcome() const { return outcome_; }
  bool finished() const { return outcome_ != Outcome::Running; }
  int condition() const { return condition_; }
  const ScenarioConfig& config() const { return cfg_; }
  const sim::World& world() const { return world_; }
  const modes::ModeState& mode() const { return mode_; }
  const control::LeaderState& leader() const { return leader_; }
  const std::vector<TrialEvent>& events() const { return events_; }
  const std::vector<PlanEpoch>& plans() const { return plans_; }
  const planning::GlobalPath& global_path() const { return path_; }
  const planning::LocalTrajectory& local_plan() const { return local_.trajectory; }
  const TickRow& last_row() const { return row_; }
  const Pose6& leader_home_pose() const { return leader_home_pose_; }
  bool obstacle_near() const { return obstacle_near_; }
  const std::vector<CellIndex>& last_discovered() const { return last_discovered_; }
  Pose2D goal() const { return goal_; }
  std::optional<Vector3> marker() const { return marker_; }

  /// Seconds spent in each mode so far.
  double time_in(modes::Mode m) const { return mode_time_[static_cast<int>(m)]; }

 private:
  void log(std::string kind, std::string detail = {});
  void sense(std::vector<modes::SwitchEvent>& events);
  void replan_if_needed(bool force);
  void refresh_leader_kinematics();

  ScenarioConfig cfg_;
  int condition_;
  sim::World world_;
  control::ControllerGains gains_;
  control::HoldGains hold_;
  control::VirtualBoundary vb_;
  control::LeaderBehaviorParams behavior_;
  JointVector7 q_home_leader_;
  JointVector7 q_home_follower_;
  Pose6 leader_home_pose_;
  kinematics::ArmKinematics leader_kin_;

  planning::PlannerView view_;
  planning::GlobalPath path_;
  double path_inflation_ = 0.0;
  planning::DwaResult local_;
  Pose2D goal_;
  Pose2D lookahead_;
  bool obstacle_near_ = false;
  std::vector<PlanEpoch> plans_;
  std::vector<CellIndex> last_discovered_;
  std::optional<Vector3> marker_;

  modes::ModeState mode_;
  control::LeaderState leader_;
  std::vector<modes::SwitchEvent> pending_;
  std::optional<modes::DropPlan> drop_;
  double drop_time_ = 0.0;
  bool released_ = false;
  bool drop_reported_ = false;

  Outcome outcome_ = Outcome::Running;
  std::vector<TrialEvent> events_;
  std::uint32_t tick_events_ = 0;
  TickRow row_;
  double mode_time_[5] = {0, 0, 0, 0, 0};
};

}  // namespace unitele::harness
