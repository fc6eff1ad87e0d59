#include "unitele/harness/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "unitele/core/angles.hpp"

namespace unitele::harness {

using modes::EventKind;
using modes::Mode;

int validate_condition(int c) {
  if (c < 1 || c > 3) throw std::invalid_argument("condition must be 1, 2 or 3");
  return c;
}

const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::Running: return "running";
    case Outcome::Completed: return "completed";
    case Outcome::Timeout: return "timeout";
    case Outcome::CollisionAbort: return "collision_abort";
    case Outcome::Fault: return "fault";
  }
  return "?";
}

namespace {

sim::WorldParams world_params(const ScenarioConfig& cfg, const kinematics::KinematicChain& chain) {
  sim::WorldParams p;
  p.leader = chain;
  p.follower = chain;
  p.sim = cfg.sim;
  p.mount = cfg.arm_mount;
  p.object = cfg.object;
  return p;
}

// Object sits in the middle of the graspable band when the base stops here.
Pose2D approach_goal(const ScenarioConfig& cfg) {
  const double standoff = cfg.arm_mount.x_m + 0.5 * (cfg.sim.graspable.x_min_m + cfg.sim.graspable.x_max_m);
  const double a = cfg.object.approach_yaw_rad;
  return Pose2D{cfg.object.x_m - standoff * std::cos(a), cfg.object.y_m - standoff * std::sin(a), a};
}

std::vector<Point2> to_points(const planning::GlobalPath& p) {
  std::vector<Point2> out;
  out.reserve(p.waypoints.size());
  for (const auto& w : p.waypoints) out.emplace_back(w.x, w.y);
  return out;
}

// Nearest cell the view does not block, searched in growing square rings up to 1 m.
CellIndex nearest_free(const planning::PlannerView& v, CellIndex c) {
  if (!v.blocked(c)) return c;
  const int max_r = static_cast<int>(std::ceil(1.0 / v.resolution()));
  for (int r = 1; r <= max_r; ++r) {
    std::optional<CellIndex> best;
    int best_d2 = 0;
    for (int dr = -r; dr <= r; ++dr)
      for (int dc = -r; dc <= r; ++dc) {
        if (std::max(std::abs(dr), std::abs(dc)) != r) continue;
        const CellIndex n{c.col + dc, c.row + dr};
        if (!v.in_bounds(n) || v.blocked(n)) continue;
        const int d2 = dr * dr + dc * dc;
        if (!best || d2 < best_d2) {
          best = n;
          best_d2 = d2;
        }
      }
    if (best) return *best;
  }
  return c;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << std::fixed << v;
  return os.str();
}

}  // namespace

Simulation::Simulation(const ScenarioConfig& cfg, OccupancyGrid grid, kinematics::KinematicChain chain, int condition)
    : cfg_(cfg),
      condition_(validate_condition(condition)),
      world_(world_params(cfg, chain), std::move(grid), cfg.fmr_start, to_joint_vector(cfg.leader_home_rad),
             to_joint_vector(cfg.follower_home_rad), cfg.seed),
      gains_(control::ControllerGains::from_config(cfg.controller)),
      hold_(control::HoldGains::from_config(cfg.controller)),
      vb_(cfg.controller.vb_i_m, cfg.controller.vb_e_m),
      behavior_(control::LeaderBehaviorParams::from_config(cfg.controller)),
      q_home_leader_(to_joint_vector(cfg.leader_home_rad)),
      q_home_follower_(to_joint_vector(cfg.follower_home_rad)),
      view_(world_.state().grid, cfg.planner.inflation_m),
      goal_(approach_goal(cfg)) {
  leader_home_pose_ = kinematics::forward_kinematics(world_.params().leader, q_home_leader_);
  refresh_leader_kinematics();
  lookahead_ = world_.state().base;
  // initial scan before the first plan, as the robot would on power-up
  last_discovered_ = world_.lidar_scan();
  view_ = planning::PlannerView(world_.state().grid, cfg_.planner.inflation_m);
  replan_if_needed(true);
  if (plans_.empty()) throw planning::PlanError(planning::PlanError::Kind::NoPath, "no initial global plan");
}

Simulation Simulation::from_scenario(const ScenarioConfig& cfg, int condition) {
  const Pose2D origin{cfg.map.origin_x_m, cfg.map.origin_y_m, 0.0};
  auto grid = OccupancyGrid::load(cfg.map.path, cfg.map.resolution_m, origin);
  auto chain = cfg.chain_path.empty() ? kinematics::KinematicChain::panda()
                                      : kinematics::KinematicChain::load(cfg.chain_path);
  return Simulation(cfg, std::move(grid), std::move(chain), condition);
}

void Simulation::log(std::string kind, std::string detail) {
  const auto& s = world_.state();
  events_.push_back(TrialEvent{s.tick, s.time, std::move(kind), std::move(detail)});
  ++tick_events_;
}

void Simulation::refresh_leader_kinematics() {
  leader_kin_ = kinematics::evaluate(world_.params().leader, world_.state().q_lra);
}

void Simulation::replan_if_needed(bool force) {
  auto with_inflation = [&](double m) {
    return m == cfg_.planner.inflation_m ? view_
                                         : planning::PlannerView(view_.width(), view_.height(), view_.resolution(),
                                                                 view_.origin(), view_.occupied_mask(), m);
  };
  if (!force) {
    // against the margin the current path was planned with
    const planning::PlannerView check = with_inflation(path_inflation_);
    bool hit = false;
    for (const auto& c : path_.cells)
      if (check.blocked(c)) {
        hit = true;
        break;
      }
    if (!hit) return;
  }
  // Full inflation first; if the base has drifted into the inflation band or the discovered
  // obstacles close the corridor, retry with less margin, starting from the nearest free cell.
  const Pose2D start = world_.state().base;
  const double inflation = cfg_.planner.inflation_m;
  std::string failure;
  bool planned = false;
  for (double f : {1.0, 0.5, 0.0}) {
    if (f < 1.0 && inflation == 0.0) break;
    const planning::PlannerView v = with_inflation(f * inflation);
    try {
      const auto cell = v.world_to_grid(start.x, start.y);
      const auto goal = v.world_to_grid(goal_.x, goal_.y);
      if (!cell || !goal) throw planning::PlanError(planning::PlanError::Kind::StartBlocked, "outside the map");
      path_ = planning::plan_global(v, nearest_free(v, *cell), *goal);
      path_inflation_ = f * inflation;
      planned = true;
      break;
    } catch (const planning::PlanError& e) {
      if (failure.empty()) failure = e.what();
    }
  }
  if (!planned) {
    log("plan_failed", failure);
    return;
  }
  plans_.push_back(PlanEpoch{world_.state().tick, to_points(path_)});
  log("global_plan", "length " + fmt(path_.length_m) + " m");
}

void Simulation::sense(std::vector<modes::SwitchEvent>& events) {
  const auto& s = world_.state();
  const double t = s.time;
  if (s.tick % static_cast<std::uint64_t>(cfg_.sim.lidar.period_ticks) == 0) {
    last_discovered_ = world_.lidar_scan();
    if (!last_discovered_.empty()) {
      view_ = planning::PlannerView(world_.state().grid, cfg_.planner.inflation_m);
      log("discovered", std::to_string(last_discovered_.size()) + " cells");
      replan_if_needed(false);
    }
  }
  if (s.tick % static_cast<std::uint64_t>(cfg_.planner.period_ticks) != 0) return;

  const auto& base = world_.state().base;
  obstacle_near_ = view_.clearance(base.x, base.y) - cfg_.sim.vehicle.body_radius_m < cfg_.controller.obstacle_near_m;
  local_ = planning::dwa_step(planning::BaseState{base, world_.state().base_velocity}, view_, path_, cfg_.planner.dwa,
                              cfg_.sim.vehicle);
  lookahead_ = planning::lookahead_pose(local_.trajectory, cfg_.planner.dwa.lookahead_index);

  marker_ = world_.marker_visible();
  if (mode_.mode == Mode::Navigation && marker_ && sim::graspable(*marker_, cfg_.sim.graspable))
    events.push_back(modes::SwitchEvent{EventKind::GraspableDetected, t});
}

OperatorObservation Simulation::observe() const {
  OperatorObservation o;
  const auto& s = world_.state();
  o.time = s.time;
  o.mode = mode_.mode;
  o.leader_free = leader_.phase == control::LeaderPhase::Free;
  o.leader_pose = leader_kin_.pose();
  o.leader_home = leader_home_pose_;
  o.leader_twist = leader_kin_.jacobian * s.qd_lra;
  o.cue = row_.cue;
  o.base = s.base;
  o.obstacle_near = obstacle_near_;
  o.path = plans_.empty() ? nullptr : &plans_.back().waypoints;
  o.object_xy = Point2(cfg_.object.x_m, cfg_.object.y_m);
  o.object_arm = world_.object_in_arm();
  o.follower_ee_arm = world_.follower_ee_in_arm().block<3, 1>(0, 3);
  o.attached = s.attached;
  return o;
}

const TickRow& Simulation::step(const OperatorInput& in) {
  if (finished()) return row_;
  tick_events_ = 0;
  const double dt = cfg_.sim.dt_s;
  const auto& s = world_.state();

  std::vector<modes::SwitchEvent> events;
  events.swap(pending_);
  sense(events);

  if (in.grasp_key && mode_.mode == Mode::Manipulation && !s.attached) {
    if (world_.try_grasp()) {
      events.push_back(modes::SwitchEvent{EventKind::GraspConfirmed, s.time});
      log("grasp", "object attached");
    } else {
      log("grasp_missed", "end-effector " + fmt((world_.follower_ee_world() - s.object_world).norm()) + " m away");
    }
  }
  if (in.drop_key) events.push_back(modes::SwitchEvent{EventKind::DropKeyPressed, s.time});
  if (in.override_key) events.push_back(modes::SwitchEvent{EventKind::ManualOverride, s.time});
  if (mode_.mode == Mode::SwitchingToManipulation &&
      (s.q_lra - s.q_fra).cwiseAbs().maxCoeff() < cfg_.fsm.align_eps_rad)
    events.push_back(modes::SwitchEvent{EventKind::Aligned, s.time});

  const Mode before = mode_.mode;
  const auto act = modes::fsm_step(mode_, modes::Observations{s.tick % cfg_.planner.period_ticks == 0, s.attached},
                                   events, cfg_.fsm, dt);
  if (act.changed) log("mode", std::string(modes::mode_name(before)) + " -> " + modes::mode_name(mode_.mode));
  for (const auto& n : act.notifications) log("notify", n);
  for (const auto& w : act.warnings) log("warning", w);
  if (act.start_drop) {
    try {
      drop_ = modes::plan_drop_trajectory(s.q_fra, cfg_.bin, world_.params().follower, q_home_follower_, cfg_.drop);
      drop_time_ = 0.0;
      released_ = false;
      drop_reported_ = false;
      log("drop_plan", "duration " + fmt(drop_->trajectory.duration()) + " s");
    } catch (const modes::DropPlanError& e) {
      log("fault", e.what());
      outcome_ = Outcome::Fault;
      return row_;
    }
  }
  const int phi = mode_.phi();
  const Mode mode = mode_.mode;

  // leader
  const Pose6 p_lra = leader_kin_.pose();
  const auto& J = leader_kin_.jacobian;
  const auto& leader_chain = world_.params().leader;
  const bool guided = condition_ != 2;
  const auto& k_fra = cfg_.controller.k_fra_n_per_m;
  Wrench6 f_fmr, f_fra;
  if (guided && mode == Mode::Navigation && leader_.phase == control::LeaderPhase::Free)
    f_fmr = control::render_cue_for_leader(control::navigation_cue(s.base, lookahead_, gains_.k_fmr), gains_);
  if (guided && mode == Mode::Manipulation && !s.attached)
    f_fra = control::manipulation_cue(world_.follower_ee_in_arm().block<3, 1>(0, 3), world_.object_in_arm(),
                                      Vector3(k_fra[0], k_fra[1], k_fra[2]), cfg_.controller.f_fra_max_n);

  const JointVector7 tau_ns = control::nullspace_torque(J, s.q_lra, s.qd_lra, s.q_lra, gains_);
  JointVector7 tau_t = JointVector7::Zero();
  if (phi == 0) tau_t = control::hold_torque(p_lra, leader_home_pose_, J, s.qd_lra, hold_);
  const JointVector7 tau_normal = control::leader_torque(phi, tau_ns, J, f_fra, f_fmr, tau_t, leader_chain.tau_max());

  BaseVelocity base_cmd;
  control::BoundaryZone zone = control::BoundaryZone::Deadzone;
  control::LeaderAction action = control::LeaderAction::None;
  if (act.begin_switch) action = control::LeaderAction::BeginSwitch;
  else if (act.lock_leader) action = control::LeaderAction::Lock;
  else if (act.release_leader) action = control::LeaderAction::Release;
  if (mode == Mode::Navigation && leader_.phase == control::LeaderPhase::Free && action == control::LeaderAction::None) {
    const auto v = control::base_velocity_from_leader(p_lra, leader_home_pose_, vb_, gains_, obstacle_near_,
                                                      cfg_.controller.v_x_cap_mps);
    zone = v.zone;
    base_cmd = v.command;
    base_cmd.v_gamma =
        std::clamp(base_cmd.v_gamma, -cfg_.controller.v_gamma_max_radps, cfg_.controller.v_gamma_max_radps);
    if (v.home_return) {
      action = control::LeaderAction::ReturnHome;
      log("home_return", "leader beyond the outer boundary");
    }
  }
  const auto lr = control::leader_behavior_step(action, leader_, s.q_lra, s.qd_lra, q_home_leader_, tau_normal,
                                                behavior_, leader_chain.tau_max(), dt);
  if (lr.homed) {
    pending_.push_back(modes::SwitchEvent{EventKind::LeaderHomed, s.time + dt});
    log("leader_homed");
  }

  // follower
  const auto& fchain = world_.params().follower;
  JointVector7 tau_fra;
  if (mode == Mode::Manipulation || mode == Mode::SwitchingToManipulation) {
    tau_fra = control::follower_mirror_torque(s.q_lra, s.q_fra, s.qd_fra, gains_, fchain.tau_max());
  } else if (mode == Mode::PostGraspAuto && drop_) {
    const JointVector7 q_ref = drop_->trajectory.position(drop_time_);
    const JointVector7 qd_ref = drop_->trajectory.velocity(drop_time_);
    tau_fra = control::saturate(gains_.kp.cwiseProduct(q_ref - s.q_fra) + gains_.kd.cwiseProduct(qd_ref - s.qd_fra),
                                fchain.tau_max());
  } else {
    tau_fra = control::follower_mirror_torque(q_home_follower_, s.q_fra, s.qd_fra, gains_, fchain.tau_max());
  }

  const std::size_t collisions_before = s.collisions.size();
  mode_time_[static_cast<int>(mode)] += dt;
  world_.step(lr.command.torque, in.wrench, base_cmd, tau_fra);
  refresh_leader_kinematics();

  if (mode == Mode::PostGraspAuto && drop_) {
    drop_time_ += dt;
    const double t_release = drop_->trajectory.times()[static_cast<std::size_t>(drop_->release_knot)];
    if (!released_ && drop_time_ >= t_release) {
      world_.release_object();
      released_ = true;
      log("release", "object released over the bin");
    }
    if (!drop_reported_ && drop_time_ >= drop_->trajectory.duration() + cfg_.drop.settle_s) {
      pending_.push_back(modes::SwitchEvent{EventKind::DropCompleted, world_.state().time});
      drop_reported_ = true;
      log("drop_completed");
    }
  }

  const auto& ns = world_.state();
  if (ns.collisions.size() > collisions_before) {
    const auto& c = ns.collisions.back();
    log("collision", std::string("cell (") + std::to_string(c.cell.col) + ", " + std::to_string(c.cell.row) +
                         ") class " + cell_class_char(c.cell_class));
    if (cfg_.sim.abort_on_collision) outcome_ = Outcome::CollisionAbort;
  }
  if (act.trial_complete) outcome_ = Outcome::Completed;
  else if (outcome_ == Outcome::Running && ns.time >= cfg_.sim.timeout_s) outcome_ = Outcome::Timeout;
  if (outcome_ != Outcome::Running) log("end", outcome_name(outcome_));

  row_.tick = ns.tick;
  row_.time = ns.time;
  row_.mode = mode_.mode;
  row_.phi = mode_.phi();
  row_.leader_phase = leader_.phase;
  row_.zone = zone;
  row_.leader_pose = leader_kin_.pose();
  row_.base = ns.base;
  row_.base_cmd = base_cmd;
  row_.q_lra = ns.q_lra;
  row_.q_fra = ns.q_fra;
  row_.cue = phi ? f_fra : f_fmr;
  row_.operator_wrench = in.wrench;
  row_.lookahead = lookahead_;
  row_.attached = ns.attached;
  row_.in_collision = ns.in_collision;
  row_.event_count = tick_events_;
  return row_;
}

}  // namespace unitele::harness
