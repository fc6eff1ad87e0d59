#include "unitele/harness/operator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "unitele/core/angles.hpp"

namespace unitele::harness {

const char* operator_kind_name(OperatorKind k) {
  switch (k) {
    case OperatorKind::Compliant: return "compliant";
    case OperatorKind::Ignoring: return "ignoring";
    case OperatorKind::Distracted: return "distracted";
  }
  return "?";
}

OperatorKind parse_operator_kind(const std::string& name) {
  if (name == "compliant") return OperatorKind::Compliant;
  if (name == "ignoring") return OperatorKind::Ignoring;
  if (name == "distracted") return OperatorKind::Distracted;
  throw std::invalid_argument("unknown operator kind '" + name + "'");
}

namespace {

// Independent streams per concern, so schedule and bias do not depend on tick count.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(salt)};
  return std::mt19937_64(seq);
}

constexpr double kNoiseTau = 0.3;       // s, correlation time of the hand tremor
constexpr int kIntentPeriod = 10;       // ticks between intent updates
constexpr double kYawGain = 1.5;        // desired yaw rate per rad of bearing error
constexpr double kStopGain = 0.8;       // 1/s, speed per meter left to the stop point
constexpr double kMinApproach = 0.1;    // m/s
constexpr double kStopTol = 0.02;       // m
constexpr double kKeyRepeat = 0.2;      // s
constexpr double kSettledSpeed = 0.02;  // m/s
constexpr double kStuckAfter = 2.0;     // s
constexpr double kBackoffSpeed = 0.15;  // m/s
constexpr double kBackoffDuration = 3.0;  // s

}  // namespace

OperatorModel::OperatorModel(OperatorKind kind, const OperatorConfig& cfg, const OperatorContext& ctx,
                             std::uint64_t seed, double horizon_s)
    : kind_(kind), cfg_(cfg), ctx_(ctx), noise_rng_(stream(seed, 1)) {
  auto sched = stream(seed, 2);
  std::uniform_real_distribution<double> gap(cfg.distraction_gap_min_s, cfg.distraction_gap_max_s);
  for (double t = gap(sched); t < horizon_s; t += cfg.distraction_duration_s + gap(sched))
    distraction_starts_.push_back(t);

  auto intent = stream(seed, 3);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  bias_amp_ = cfg.bias_min_m + (cfg.bias_max_m - cfg.bias_min_m) * u01(intent);
  if (u01(intent) < 0.5) bias_amp_ = -bias_amp_;
  bias_wavelength_ = cfg.bias_wavelength_min_m + (cfg.bias_wavelength_max_m - cfg.bias_wavelength_min_m) * u01(intent);
  bias_phase_ = 2.0 * kPi * u01(intent);
  const double mag = cfg.perception_bias_min_m + (cfg.perception_bias_max_m - cfg.perception_bias_min_m) * u01(intent);
  const double dir = 2.0 * kPi * u01(intent);
  perception_bias_ = Vector3(mag * std::cos(dir), mag * std::sin(dir), 0.0);
}

bool OperatorModel::distracted_at(double t) const {
  if (kind_ != OperatorKind::Distracted) return false;
  auto it = std::upper_bound(distraction_starts_.begin(), distraction_starts_.end(), t);
  if (it == distraction_starts_.begin()) return false;
  return t < *(it - 1) + cfg_.distraction_duration_s;
}

Wrench6 compose_operator_wrench(const Wrench6& pull, const Wrench6& cue, double compliance, const Vector6& noise,
                                bool distracted) {
  if (distracted) return Wrench6{};
  return pull + cue * compliance + Wrench6::from_vector(noise);
}

double project_onto_path(const std::vector<Point2>& path, const Point2& p) {
  double best = std::numeric_limits<double>::infinity(), best_s = 0.0, s = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) {
    const Point2 a = path[i - 1], ab = path[i] - path[i - 1];
    const double len2 = ab.squaredNorm();
    const double u = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    const double d = (a + u * ab - p).squaredNorm();
    const double len = std::sqrt(len2);
    if (d < best) {
      best = d;
      best_s = s + u * len;
    }
    s += len;
  }
  return best_s;
}

std::pair<Point2, Point2> point_at_arc_length(const std::vector<Point2>& path, double s) {
  Point2 tangent(1.0, 0.0);
  double acc = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) {
    const Point2 ab = path[i] - path[i - 1];
    const double len = ab.norm();
    if (len == 0.0) continue;
    tangent = ab / len;
    if (acc + len >= s) return {path[i - 1] + tangent * std::max(0.0, s - acc), tangent};
    acc += len;
  }
  return {path.empty() ? Point2::Zero() : path.back(), tangent};
}

Vector6 OperatorModel::advance_noise(double dt) {
  std::normal_distribution<double> n(0.0, 1.0);
  const double a = std::exp(-dt / kNoiseTau);
  const double b = std::sqrt(1.0 - a * a);
  Vector6 sigma;
  sigma << cfg_.noise_sigma_n, cfg_.noise_sigma_n, cfg_.noise_sigma_n, cfg_.noise_sigma_nm, cfg_.noise_sigma_nm,
      cfg_.noise_sigma_nm;
  for (int i = 0; i < 6; ++i) noise_[i] = a * noise_[i] + b * sigma[i] * n(noise_rng_);
  return noise_;
}

Wrench6 OperatorModel::navigation_pull(const OperatorObservation& o) {
  if (intent_counter_++ % kIntentPeriod == 0) {
    d_des_ = 0.0;
    yaw_des_ = 0.0;
    if (o.path && o.path->size() >= 2) {
      const Point2 pos(o.base.x, o.base.y);
      const Point2 to_obj = o.object_xy - pos;
      const double obj_bearing = angle_diff(std::atan2(to_obj.y(), to_obj.x()), o.base.gamma);
      double v = 0.0, bearing = 0.0;
      if (o.time < backoff_until_) {
        v = -kBackoffSpeed;
        bearing = obj_bearing;
      } else if (direct_approach_) {
        const double remaining = to_obj.norm() - ctx_.standoff_m;
        if (remaining > kStopTol) v = std::clamp(kStopGain * remaining, kMinApproach, cfg_.cruise_speed_mps);
        bearing = obj_bearing;
      } else {
        std::vector<Point2> ext = *o.path;
        ext.push_back(o.object_xy);
        const double total = polyline_length(ext);
        const double s_near = project_onto_path(ext, pos);
        const double remaining = total - s_near - ctx_.standoff_m;

        const double s_t = std::min(s_near + cfg_.pursuit_lookahead_m, total);
        auto [target, tangent] = point_at_arc_length(ext, s_t);
        const double taper = std::clamp((total - ctx_.standoff_m - s_t) / cfg_.approach_slow_radius_m, 0.0, 1.0) *
                             std::clamp(s_t / cfg_.approach_slow_radius_m, 0.0, 1.0);
        const double lateral = bias_amp_ * taper * std::sin(2.0 * kPi * s_t / bias_wavelength_ + bias_phase_);
        target += lateral * Point2(-tangent.y(), tangent.x());
        bearing = angle_diff(std::atan2(target.y() - pos.y(), target.x() - pos.x()), o.base.gamma);
        if (remaining > kStopTol) v = std::clamp(kStopGain * remaining, kMinApproach, cfg_.cruise_speed_mps);
      }
      if (v > 0) v *= std::max(0.3, std::cos(bearing));

      // stopped without the switch happening: back off, then drive straight at the object
      if (v == 0.0) {
        if (stopped_since_ < 0) stopped_since_ = o.time;
        if (o.time - stopped_since_ > kStuckAfter) {
          backoff_until_ = o.time + kBackoffDuration;
          direct_approach_ = true;
          stopped_since_ = -1.0;
        }
      } else {
        stopped_since_ = -1.0;
      }

      const double kv = o.obstacle_near ? ctx_.kv_obstacle : ctx_.kv_free;
      const double lo = ctx_.vb_i_m + 0.01;
      const double mag = std::clamp(std::abs(v) * (ctx_.vb_e_m - ctx_.vb_i_m) / kv, lo, cfg_.max_displacement_m);
      if (v != 0.0) d_des_ = v > 0 ? mag : -mag;
      const double w = kYawGain * bearing;
      yaw_des_ = v == 0.0 ? 0.0 : std::clamp(w / ctx_.kr, -cfg_.max_yaw_offset_rad, cfg_.max_yaw_offset_rad);
    }
  }
  const double d = o.leader_pose.x() - o.leader_home.x();
  const double dyaw = angle_diff(o.leader_pose.yaw(), o.leader_home.yaw());
  Wrench6 w;
  w.force.x() = cfg_.nav_stiffness_n_per_m * (d_des_ - d) - cfg_.nav_damping_ns_per_m * o.leader_twist[0];
  w.torque.z() = cfg_.yaw_stiffness_nm_per_rad * (yaw_des_ - dyaw) - cfg_.yaw_damping_nms_per_rad * o.leader_twist[5];
  return w;
}

Wrench6 OperatorModel::manipulation_pull(const OperatorObservation& o, bool& grasp_key, bool& drop_key) {
  if (manip_start_ < 0) manip_start_ = o.time;
  Wrench6 w;
  const Matrix3 r = rpy_to_matrix(o.leader_pose.rpy);
  const Matrix3 r_home = rpy_to_matrix(o.leader_home.rpy);
  w.torque = cfg_.manip_orientation_nm_per_rad * rotation_log(r_home * r.transpose()) -
             0.1 * cfg_.manip_orientation_nm_per_rad * o.leader_twist.tail<3>();

  const bool key_ready = last_key_ < 0 || o.time - last_key_ >= kKeyRepeat;
  if (o.attached) {
    if (attached_since_ < 0) attached_since_ = o.time;
    // hold still until the drop is handed over
    w.force = -cfg_.manip_damping_ns_per_m * o.leader_twist.head<3>();
    if (o.time - attached_since_ >= cfg_.drop_key_delay_s && key_ready) {
      drop_key = true;
      last_key_ = o.time;
    }
    return w;
  }
  const double fade = std::exp(-(o.time - manip_start_) / cfg_.perception_decay_s);
  const Vector3 perceived = o.object_arm + perception_bias_ * fade;
  const Vector3 err = perceived - o.follower_ee_arm;
  w.force = cfg_.manip_stiffness_n_per_m * err - cfg_.manip_damping_ns_per_m * o.leader_twist.head<3>();
  if (err.norm() < cfg_.grasp_belief_tol_m && o.leader_twist.head<3>().norm() < kSettledSpeed && key_ready) {
    grasp_key = true;
    last_key_ = o.time;
  }
  return w;
}

OperatorInput OperatorModel::step(const OperatorObservation& o, double dt) {
  Vector6 noise = advance_noise(dt);
  OperatorInput in;
  Wrench6 pull;
  bool active = o.leader_free;
  switch (o.mode) {
    case modes::Mode::Navigation:
      if (active) pull = navigation_pull(o);
      break;
    case modes::Mode::Manipulation:
      pull = manipulation_pull(o, in.grasp_key, in.drop_key);
      // a softer hand shakes less in absolute terms
      noise *= cfg_.manip_stiffness_n_per_m / cfg_.nav_stiffness_n_per_m;
      break;
    default:
      active = false;
  }
  if (!active) return in;
  const bool distracted = distracted_at(o.time);
  if (distracted) in.grasp_key = in.drop_key = false;
  in.wrench = compose_operator_wrench(pull, o.cue, compliance(), noise, distracted);
  return in;
}

}  // namespace unitele::harness
