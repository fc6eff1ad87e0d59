#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "unitele/core/config.hpp"
#include "unitele/core/types.hpp"
#include "unitele/harness/metrics.hpp"
#include "unitele/modes/mode_switch.hpp"

namespace unitele::harness {

enum class OperatorKind { Compliant, Ignoring, Distracted };
const char* operator_kind_name(OperatorKind k);
/// Throws std::invalid_argument for unknown names.
OperatorKind parse_operator_kind(const std::string& name);

/// Operator keystrokes and hand wrench for one tick.
struct OperatorInput {
  Wrench6 wrench;  // on the leader end-effector, leader base frame
  bool grasp_key = false;
  bool drop_key = false;
  bool override_key = false;
  bool operator==(const OperatorInput&) const = default;
};

/// What the scripted operator sees on a tick.
struct OperatorObservation {
  double time = 0.0;
  modes::Mode mode = modes::Mode::Navigation;
  bool leader_free = true;  // false while the leader is stiffened, homing or locked
  Pose6 leader_pose;
  Pose6 leader_home;
  Vector6 leader_twist = Vector6::Zero();
  Wrench6 cue;  // as rendered on the leader; zero without guidance
  Pose2D base;
  bool obstacle_near = false;
  const std::vector<Point2>* path = nullptr;  // current global plan, world frame
  Point2 object_xy = Point2::Zero();
  Vector3 object_arm = Vector3::Zero();  // object in the follower arm frame
  Vector3 follower_ee_arm = Vector3::Zero();
  bool attached = false;
};

/// Gains and geometry the operator needs from the rest of the scenario.
struct OperatorContext {
  double kv_free = 0.5;
  double kv_obstacle = 0.2;
  double kr = -1.0;
  double vb_i_m = 0.05;
  double vb_e_m = 0.4;
  double standoff_m = 0.575;  // base center to object when the object sits mid-band
};

/// A spring-like stand-in for the human at the leader arm.
class OperatorModel {
 public:
  OperatorModel(OperatorKind kind, const OperatorConfig& cfg, const OperatorContext& ctx, std::uint64_t seed,
                double horizon_s = 300.0);

  OperatorKind kind() const { return kind_; }
  double compliance() const { return kind_ == OperatorKind::Ignoring ? 0.0 : cfg_.cue_compliance; }
  bool distracted_at(double t) const;
  const std::vector<double>& distraction_starts() const { return distraction_starts_; }
  double bias_amplitude() const { return bias_amp_; }
  Vector3 perception_bias() const { return perception_bias_; }

  OperatorInput step(const OperatorObservation& obs, double dt);

 private:
  Wrench6 navigation_pull(const OperatorObservation& obs);
  Wrench6 manipulation_pull(const OperatorObservation& obs, bool& grasp_key, bool& drop_key);
  Vector6 advance_noise(double dt);

  OperatorKind kind_;
  OperatorConfig cfg_;
  OperatorContext ctx_;
  std::mt19937_64 noise_rng_;
  std::vector<double> distraction_starts_;
  double bias_amp_ = 0.0;
  double bias_wavelength_ = 1.0;
  double bias_phase_ = 0.0;
  Vector3 perception_bias_ = Vector3::Zero();
  Vector6 noise_ = Vector6::Zero();

  // navigation intent, refreshed at 100 Hz
  int intent_counter_ = 0;
  double d_des_ = 0.0;
  double yaw_des_ = 0.0;
  // recovery when stopped short of the switch
  double stopped_since_ = -1.0;
  double backoff_until_ = -1.0;
  bool direct_approach_ = false;
  // manipulation bookkeeping
  double manip_start_ = -1.0;
  double attached_since_ = -1.0;
  double last_key_ = -1.0;
};

/// wrench = pull + compliance * cue + noise, or zero while distracted.
Wrench6 compose_operator_wrench(const Wrench6& pull, const Wrench6& cue, double compliance, const Vector6& noise,
                                bool distracted);

/// Arc-length position of the point on `path` nearest to `p`.
double project_onto_path(const std::vector<Point2>& path, const Point2& p);
/// Point at arc length `s` (clamped to the ends) and the unit tangent there.
std::pair<Point2, Point2> point_at_arc_length(const std::vector<Point2>& path, double s);

}  // namespace unitele::harness
