#include "unitele/modes/mode_switch.hpp"

#include <algorithm>
#include <cmath>

namespace unitele::modes {

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::Navigation: return "navigation";
    case Mode::SwitchingToManipulation: return "switching_to_manipulation";
    case Mode::Manipulation: return "manipulation";
    case Mode::PostGraspAuto: return "post_grasp_auto";
    case Mode::SwitchingToNavigation: return "switching_to_navigation";
  }
  return "?";
}

const char* event_name(EventKind k) {
  switch (k) {
    case EventKind::GraspableDetected: return "graspable_detected";
    case EventKind::LeaderHomed: return "leader_homed";
    case EventKind::Aligned: return "aligned";
    case EventKind::GraspConfirmed: return "grasp_confirmed";
    case EventKind::DropKeyPressed: return "drop_key_pressed";
    case EventKind::DropCompleted: return "drop_completed";
    case EventKind::ManualOverride: return "manual_override";
  }
  return "?";
}

namespace {

void enter(ModeState& s, Actions& a, Mode m) {
  if (!a.changed) a.from = s.mode;
  a.changed = true;
  s.mode = m;
  s.mode_time = 0.0;
  s.confirm_count = 0;
  s.homed_seen = false;
}

}  // namespace

Actions fsm_step(ModeState& s, const Observations& obs, std::vector<SwitchEvent> events, const FsmConfig& cfg,
                 double dt) {
  std::stable_sort(events.begin(), events.end(),
                   [](const SwitchEvent& a, const SwitchEvent& b) { return a.time < b.time; });
  Actions a;
  a.from = s.mode;
  s.mode_time += dt;

  bool detected = false;
  for (const auto& e : events) detected = detected || e.kind == EventKind::GraspableDetected;
  if (s.mode == Mode::Navigation && obs.planner_tick) s.confirm_count = detected ? s.confirm_count + 1 : 0;

  for (const auto& e : events) {
    switch (s.mode) {
      case Mode::Navigation:
        if (e.kind == EventKind::ManualOverride) {
          enter(s, a, Mode::SwitchingToManipulation);
          a.begin_switch = true;
          a.notifications.push_back("switching to manipulation (override)");
        }
        break;
      case Mode::SwitchingToManipulation:
        if (e.kind == EventKind::LeaderHomed) s.homed_seen = true;
        if (e.kind == EventKind::Aligned && s.homed_seen) {
          enter(s, a, Mode::Manipulation);
          a.release_leader = true;
          a.notifications.push_back("the switch is complete: manipulation");
        }
        break;
      case Mode::Manipulation:
        if (e.kind == EventKind::DropKeyPressed) {
          if (obs.object_attached) {
            enter(s, a, Mode::PostGraspAuto);
            a.lock_leader = true;
            a.start_drop = true;
            a.notifications.push_back("autonomous drop started");
          } else {
            a.warnings.push_back("drop key ignored: no object attached");
          }
        } else if (e.kind == EventKind::ManualOverride) {
          enter(s, a, Mode::SwitchingToNavigation);
          a.begin_switch = true;
          a.notifications.push_back("switching to navigation (override)");
        }
        break;
      case Mode::PostGraspAuto:
        if (e.kind == EventKind::DropCompleted) {
          enter(s, a, Mode::SwitchingToNavigation);
          a.begin_switch = true;
          a.notifications.push_back("drop complete, switching to navigation");
        }
        break;
      case Mode::SwitchingToNavigation:
        if (e.kind == EventKind::LeaderHomed) {
          enter(s, a, Mode::Navigation);
          a.release_leader = true;
          a.trial_complete = true;
          a.notifications.push_back("the switch is complete: navigation");
        }
        break;
    }
  }

  if (s.mode == Mode::Navigation && !a.changed && s.confirm_count >= cfg.n_confirm) {
    enter(s, a, Mode::SwitchingToManipulation);
    a.begin_switch = true;
    a.notifications.push_back("object in reach, switching to manipulation");
  }
  return a;
}

JointTrajectory::JointTrajectory(std::vector<JointVector7> knots, std::vector<double> times)
    : knots_(std::move(knots)), times_(std::move(times)) {
  if (knots_.size() < 2 || knots_.size() != times_.size()) throw std::invalid_argument("trajectory needs >= 2 knots");
  if (times_.front() != 0.0) throw std::invalid_argument("trajectory must start at t = 0");
  for (std::size_t i = 1; i < times_.size(); ++i)
    if (!(times_[i] > times_[i - 1])) throw std::invalid_argument("knot times must increase");
}

std::size_t JointTrajectory::segment(double t) const {
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t i = static_cast<std::size_t>(it - times_.begin());
  return std::clamp<std::size_t>(i == 0 ? 0 : i - 1, 0, times_.size() - 2);
}

JointVector7 JointTrajectory::position(double t) const {
  if (t <= 0) return knots_.front();
  if (t >= duration()) return knots_.back();
  const std::size_t i = segment(t);
  const double T = times_[i + 1] - times_[i];
  const double s = (t - times_[i]) / T;
  return knots_[i] + (knots_[i + 1] - knots_[i]) * (s * s * (3.0 - 2.0 * s));
}

JointVector7 JointTrajectory::velocity(double t) const {
  if (t <= 0 || t >= duration()) return JointVector7::Zero();
  const std::size_t i = segment(t);
  const double T = times_[i + 1] - times_[i];
  const double s = (t - times_[i]) / T;
  return (knots_[i + 1] - knots_[i]) * (6.0 * s * (1.0 - s) / T);
}

DropPlan plan_drop_trajectory(const JointVector7& q_current, const BinConfig& bin,
                              const kinematics::KinematicChain& chain, const JointVector7& q_home,
                              const DropConfig& cfg) {
  const Vector3 above(bin.x_m, bin.y_m, bin.z_m + cfg.pre_drop_height_m);
  const Vector3 release(bin.x_m, bin.y_m, bin.z_m + cfg.release_height_m);
  const auto q_above = kinematics::solve_position_ik(chain, above, q_current, q_home);
  if (!q_above) throw DropPlanError("bin pre-drop point is out of reach");
  const auto q_release = kinematics::solve_position_ik(chain, release, *q_above, *q_above);
  if (!q_release) throw DropPlanError("bin release point is out of reach");

  std::vector<JointVector7> knots{q_current, *q_above, *q_release, q_home};
  std::vector<double> times{0.0};
  const JointVector7 qd_max = to_joint_vector(cfg.qd_max_radps);
  for (std::size_t i = 1; i < knots.size(); ++i) {
    // peak speed of the cubic blend is 1.5 * dq / T
    const double need = 1.5 * ((knots[i] - knots[i - 1]).cwiseAbs().cwiseQuotient(qd_max)).maxCoeff();
    times.push_back(times.back() + std::max(cfg.min_segment_s, need));
  }
  return DropPlan{JointTrajectory(std::move(knots), std::move(times)), 2};
}

}  // namespace unitele::modes
