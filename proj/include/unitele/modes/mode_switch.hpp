#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "unitele/core/config.hpp"
#include "unitele/core/types.hpp"
#include "unitele/kinematics/chain.hpp"

namespace unitele::modes {

enum class Mode { Navigation, SwitchingToManipulation, Manipulation, PostGraspAuto, SwitchingToNavigation };
const char* mode_name(Mode m);

enum class EventKind {
  GraspableDetected,
  LeaderHomed,
  Aligned,
  GraspConfirmed,
  DropKeyPressed,
  DropCompleted,
  ManualOverride,
};
const char* event_name(EventKind k);

struct SwitchEvent {
  EventKind kind;
  double time = 0.0;
};

struct ModeState {
  Mode mode = Mode::Navigation;
  double mode_time = 0.0;  // seconds since entering the mode
  int confirm_count = 0;   // consecutive planner ticks with the object in band
  bool homed_seen = false;
  int phi() const { return (mode == Mode::Manipulation || mode == Mode::PostGraspAuto) ? 1 : 0; }
  bool operator==(const ModeState&) const = default;
};

struct Observations {
  bool planner_tick = false;  // a GraspableDetected event is expected or absent on this tick
  bool object_attached = false;
};

struct Actions {
  bool begin_switch = false;   // stiffen, then home the leader
  bool release_leader = false;  // back to normal impedance
  bool lock_leader = false;
  bool start_drop = false;
  bool trial_complete = false;
  std::vector<std::string> notifications;
  std::vector<std::string> warnings;
  bool changed = false;
  Mode from = Mode::Navigation;
};

/// One FSM tick. Events are consumed in timestamp order.
Actions fsm_step(ModeState& state, const Observations& obs, std::vector<SwitchEvent> events, const FsmConfig& cfg,
                 double dt);

/// Piecewise cubic joint trajectory through knots, zero velocity at every knot.
class JointTrajectory {
 public:
  JointTrajectory(std::vector<JointVector7> knots, std::vector<double> times);
  double duration() const { return times_.back(); }
  const std::vector<JointVector7>& knots() const { return knots_; }
  const std::vector<double>& times() const { return times_; }
  JointVector7 position(double t) const;
  JointVector7 velocity(double t) const;

 private:
  std::size_t segment(double t) const;
  std::vector<JointVector7> knots_;
  std::vector<double> times_;
};

class DropPlanError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DropPlan {
  JointTrajectory trajectory;
  int release_knot = 2;  // knot index where the object is let go
};

/// current -> above the bin -> release point -> follower home. Throws DropPlanError
/// when the bin is out of reach.
DropPlan plan_drop_trajectory(const JointVector7& q_current, const BinConfig& bin,
                              const kinematics::KinematicChain& chain, const JointVector7& q_home,
                              const DropConfig& cfg);

}  // namespace unitele::modes
