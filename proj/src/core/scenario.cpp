#include "unitele/core/scenario.hpp"

#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <json.hpp>

namespace unitele {

using nlohmann::json;

ScenarioError::ScenarioError(Kind kind, std::string field, const std::string& message)
    : std::runtime_error(field.empty() ? message : field + ": " + message),
      kind_(kind),
      field_(std::move(field)) {}

namespace {

struct Check {
  std::function<bool(double)> ok;
  const char* what;
};

const Check kAny{[](double) { return true; }, ""};
const Check kPositive{[](double v) { return v > 0.0; }, "must be > 0"};
const Check kNonNeg{[](double v) { return v >= 0.0; }, "must be >= 0"};
Check in_range(double lo, double hi, const char* what) {
  return {[lo, hi](double v) { return v >= lo && v <= hi; }, what};
}

enum class Need { Required, Optional };

// One visitor reads, the other writes; both walk the same field list below so the
// file schema cannot drift between load and serialize.
class Reader {
 public:
  Reader(const json& j, std::string path, std::filesystem::path base_dir)
      : j_(j), path_(std::move(path)), base_dir_(std::move(base_dir)) {
    if (!j_.is_object()) throw ScenarioError(ScenarioError::Kind::Schema, path_, "expected an object");
  }

  template <class T>
  void field(const char* key, T& out, Need need = Need::Optional, const Check& check = kAny) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) {
      if (need == Need::Required) throw ScenarioError(ScenarioError::Kind::Schema, at(key), "missing required field");
      return;
    }
    read(*it, out, at(key), check);
  }

  void path_field(const char* key, std::string& out, Need need) {
    field(key, out, need);
    if (!out.empty()) {
      std::filesystem::path p(out);
      if (p.is_relative() && !base_dir_.empty()) p = base_dir_ / p;
      out = p.lexically_normal().string();
    }
  }

  template <class S>
  void section(const char* key, S& out, Need need = Need::Optional) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) {
      if (need == Need::Required) throw ScenarioError(ScenarioError::Kind::Schema, at(key), "missing required section");
      return;
    }
    Reader sub(*it, at(key), base_dir_);
    visit(sub, out);
    sub.finish();
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) {
        throw ScenarioError(ScenarioError::Kind::Schema, at(it.key().c_str()), "unknown key");
      }
    }
  }

 private:
  std::string at(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  static void range(double v, const std::string& p, const Check& c) {
    if (!std::isfinite(v)) throw ScenarioError(ScenarioError::Kind::Range, p, "must be finite");
    if (!c.ok(v)) throw ScenarioError(ScenarioError::Kind::Range, p, c.what);
  }
  static void read(const json& v, double& out, const std::string& p, const Check& c) {
    if (!v.is_number()) throw ScenarioError(ScenarioError::Kind::Schema, p, "expected a number");
    out = v.get<double>();
    range(out, p, c);
  }
  static void read(const json& v, int& out, const std::string& p, const Check& c) {
    if (!v.is_number_integer()) throw ScenarioError(ScenarioError::Kind::Schema, p, "expected an integer");
    out = v.get<int>();
    range(out, p, c);
  }
  static void read(const json& v, std::uint64_t& out, const std::string& p, const Check&) {
    if (!v.is_number_unsigned()) throw ScenarioError(ScenarioError::Kind::Schema, p, "expected a non-negative integer");
    out = v.get<std::uint64_t>();
  }
  static void read(const json& v, bool& out, const std::string& p, const Check&) {
    if (!v.is_boolean()) throw ScenarioError(ScenarioError::Kind::Schema, p, "expected a boolean");
    out = v.get<bool>();
  }
  static void read(const json& v, std::string& out, const std::string& p, const Check&) {
    if (!v.is_string()) throw ScenarioError(ScenarioError::Kind::Schema, p, "expected a string");
    out = v.get<std::string>();
  }
  static void read(const json& v, MotionModelKind& out, const std::string& p, const Check&) {
    if (v == "ackermann") out = MotionModelKind::Ackermann;
    else if (v == "unicycle") out = MotionModelKind::Unicycle;
    else throw ScenarioError(ScenarioError::Kind::Schema, p, "expected \"ackermann\" or \"unicycle\"");
  }
  template <std::size_t N>
  static void read(const json& v, std::array<double, N>& out, const std::string& p, const Check& c) {
    if (!v.is_array() || v.size() != N) {
      throw ScenarioError(ScenarioError::Kind::Schema, p, "expected an array of " + std::to_string(N) + " numbers");
    }
    for (std::size_t i = 0; i < N; ++i) read(v[i], out[i], p + "[" + std::to_string(i) + "]", c);
  }

  const json& j_;
  std::string path_;
  std::filesystem::path base_dir_;
  std::set<std::string> seen_;
};

class Writer {
 public:
  template <class T>
  void field(const char* key, const T& v, Need = Need::Optional, const Check& = kAny) {
    j_[key] = encode(v);
  }
  void path_field(const char* key, const std::string& v, Need) { j_[key] = v; }
  template <class S>
  void section(const char* key, const S& s, Need = Need::Optional) {
    Writer w;
    visit(w, const_cast<S&>(s));
    j_[key] = std::move(w.j_);
  }
  json take() { return std::move(j_); }

 private:
  template <class T>
  static json encode(const T& v) { return v; }
  static json encode(const MotionModelKind& k) {
    return k == MotionModelKind::Ackermann ? "ackermann" : "unicycle";
  }
  json j_ = json::object();
};

template <class V> void visit(V& v, MapConfig& c) {
  v.path_field("path", c.path, Need::Required);
  v.field("resolution_m", c.resolution_m, Need::Optional, kPositive);
  v.field("origin_x_m", c.origin_x_m);
  v.field("origin_y_m", c.origin_y_m);
}

template <class V> void visit(V& v, ObjectConfig& c) {
  v.field("x_m", c.x_m, Need::Required);
  v.field("y_m", c.y_m, Need::Required);
  v.field("approach_yaw_rad", c.approach_yaw_rad, Need::Optional, in_range(-kPi, kPi, "must lie in [-pi, pi]"));
  v.field("height_m", c.height_m, Need::Optional, kPositive);
}

template <class V> void visit(V& v, Pose2D& c) {
  v.field("x_m", c.x, Need::Required);
  v.field("y_m", c.y, Need::Required);
  v.field("gamma_rad", c.gamma, Need::Optional, in_range(-kPi, kPi, "must lie in [-pi, pi]"));
}

template <class V> void visit(V& v, BinConfig& c) {
  v.field("x_m", c.x_m);
  v.field("y_m", c.y_m);
  v.field("z_m", c.z_m);
  v.field("yaw_rad", c.yaw_rad, Need::Optional, in_range(-kPi, kPi, "must lie in [-pi, pi]"));
}

template <class V> void visit(V& v, ArmMountConfig& c) {
  v.field("x_m", c.x_m);
  v.field("z_m", c.z_m, Need::Optional, kNonNeg);
}

template <class V> void visit(V& v, ControllerConfig& c) {
  v.field("kp_nm_per_rad", c.kp_nm_per_rad, Need::Optional, kNonNeg);
  v.field("kd_nms_per_rad", c.kd_nms_per_rad, Need::Optional, kNonNeg);
  v.field("paper_literal_damping", c.paper_literal_damping);
  v.field("nullspace_alpha", c.nullspace_alpha, Need::Optional, kNonNeg);
  v.field("k_fmr_diag", c.k_fmr_diag, Need::Optional, kNonNeg);
  v.field("kv_free", c.kv_free, Need::Optional, kPositive);
  v.field("kv_obstacle", c.kv_obstacle, Need::Optional, kPositive);
  v.field("kr", c.kr);
  v.field("vb_i_m", c.vb_i_m, Need::Optional, kPositive);
  v.field("vb_e_m", c.vb_e_m, Need::Optional, kPositive);
  v.field("v_x_cap_mps", c.v_x_cap_mps, Need::Optional, in_range(0.0, 0.5, "must lie in (0, 0.5]"));
  v.field("v_gamma_max_radps", c.v_gamma_max_radps, Need::Optional, kPositive);
  v.field("hold_stiffness", c.hold_stiffness, Need::Optional, kNonNeg);
  v.field("hold_damping", c.hold_damping, Need::Optional, kNonNeg);
  v.field("stiffen_kp_nm_per_rad", c.stiffen_kp_nm_per_rad, Need::Optional, kPositive);
  v.field("stiffen_kd_nms_per_rad", c.stiffen_kd_nms_per_rad, Need::Optional, kNonNeg);
  v.field("home_kp_nm_per_rad", c.home_kp_nm_per_rad, Need::Optional, kPositive);
  v.field("home_kd_nms_per_rad", c.home_kd_nms_per_rad, Need::Optional, kNonNeg);
  v.field("stiffen_duration_s", c.stiffen_duration_s, Need::Optional, kNonNeg);
  v.field("eps_home_rad", c.eps_home_rad, Need::Optional, kPositive);
  v.field("home_speed_tol_radps", c.home_speed_tol_radps, Need::Optional, kPositive);
  v.field("k_fra_n_per_m", c.k_fra_n_per_m, Need::Optional, kNonNeg);
  v.field("f_fra_max_n", c.f_fra_max_n, Need::Optional, kNonNeg);
  v.field("obstacle_near_m", c.obstacle_near_m, Need::Optional, kNonNeg);
}

template <class V> void visit(V& v, DwaConfig& c) {
  v.field("v_min_mps", c.v_min_mps, Need::Optional, in_range(-0.5, 0.5, "must lie in [-0.5, 0.5]"));
  v.field("v_max_mps", c.v_max_mps, Need::Optional, in_range(0.0, 0.5, "must lie in [0, 0.5]"));
  v.field("w_max_radps", c.w_max_radps, Need::Optional, kPositive);
  v.field("acc_v_mps2", c.acc_v_mps2, Need::Optional, kPositive);
  v.field("acc_w_radps2", c.acc_w_radps2, Need::Optional, kPositive);
  v.field("samples_v", c.samples_v, Need::Optional, in_range(3, 101, "must lie in [3, 101]"));
  v.field("samples_w", c.samples_w, Need::Optional, in_range(3, 101, "must lie in [3, 101]"));
  v.field("dt_plan_s", c.dt_plan_s, Need::Optional, kPositive);
  v.field("horizon_s", c.horizon_s, Need::Optional, kPositive);
  v.field("w_heading", c.w_heading, Need::Optional, kNonNeg);
  v.field("w_clearance", c.w_clearance, Need::Optional, kNonNeg);
  v.field("w_velocity", c.w_velocity, Need::Optional, kNonNeg);
  v.field("clearance_cap_m", c.clearance_cap_m, Need::Optional, kPositive);
  v.field("footprint_radius_m", c.footprint_radius_m, Need::Optional, kPositive);
  v.field("path_lookahead_m", c.path_lookahead_m, Need::Optional, kPositive);
  v.field("lookahead_index", c.lookahead_index, Need::Optional, kNonNeg);
}

template <class V> void visit(V& v, PlannerConfig& c) {
  v.section("dwa", c.dwa);
  v.field("inflation_m", c.inflation_m, Need::Optional, kNonNeg);
  v.field("period_ticks", c.period_ticks, Need::Optional, in_range(1, 100000, "must be >= 1"));
}

template <class V> void visit(V& v, VehicleConfig& c) {
  v.field("model", c.model);
  v.field("wheelbase_m", c.wheelbase_m, Need::Optional, kPositive);
  v.field("max_steer_rad", c.max_steer_rad, Need::Optional, in_range(1e-3, kPi / 2 - 1e-3, "must lie in (0, pi/2)"));
  v.field("min_turn_speed_mps", c.min_turn_speed_mps, Need::Optional, kNonNeg);
  v.field("body_radius_m", c.body_radius_m, Need::Optional, kPositive);
}

template <class V> void visit(V& v, LidarConfig& c) {
  v.field("beams", c.beams, Need::Optional, in_range(1, 100000, "must be > 0"));
  v.field("range_m", c.range_m, Need::Optional, kPositive);
  v.field("span_rad", c.span_rad, Need::Optional, in_range(1e-6, 2 * kPi, "must lie in (0, 2pi]"));
  v.field("period_ticks", c.period_ticks, Need::Optional, in_range(1, 100000, "must be >= 1"));
}

template <class V> void visit(V& v, CameraConfig& c) {
  v.field("half_angle_rad", c.half_angle_rad, Need::Optional, in_range(1e-6, kPi / 2 - 1e-6, "must lie in (0, pi/2)"));
  v.field("min_range_m", c.min_range_m, Need::Optional, kNonNeg);
  v.field("max_range_m", c.max_range_m, Need::Optional, kPositive);
  v.field("noise_sigma_m", c.noise_sigma_m, Need::Optional, kNonNeg);
}

template <class V> void visit(V& v, GraspableConfig& c) {
  v.field("x_min_m", c.x_min_m, Need::Optional, kNonNeg);
  v.field("x_max_m", c.x_max_m, Need::Optional, kPositive);
  v.field("half_width_m", c.half_width_m, Need::Optional, kPositive);
}

template <class V> void visit(V& v, SimConfig& c) {
  v.field("dt_s", c.dt_s, Need::Optional, kPositive);
  v.field("joint_damping_nms_per_rad", c.joint_damping_nms_per_rad, Need::Optional, kNonNeg);
  v.section("vehicle", c.vehicle);
  v.section("lidar", c.lidar);
  v.section("camera", c.camera);
  v.section("graspable", c.graspable);
  v.field("grasp_eps_m", c.grasp_eps_m, Need::Optional, kPositive);
  v.field("timeout_s", c.timeout_s, Need::Optional, kPositive);
  v.field("abort_on_collision", c.abort_on_collision);
}

template <class V> void visit(V& v, FsmConfig& c) {
  v.field("n_confirm", c.n_confirm, Need::Optional, in_range(1, 1000, "must lie in [1, 1000]"));
  v.field("align_eps_rad", c.align_eps_rad, Need::Optional, kPositive);
}

template <class V> void visit(V& v, DropConfig& c) {
  v.field("pre_drop_height_m", c.pre_drop_height_m, Need::Optional, kNonNeg);
  v.field("release_height_m", c.release_height_m, Need::Optional, in_range(0.0, 0.02, "must lie in [0, 0.02]"));
  v.field("qd_max_radps", c.qd_max_radps, Need::Optional, kPositive);
  v.field("min_segment_s", c.min_segment_s, Need::Optional, kPositive);
  v.field("settle_s", c.settle_s, Need::Optional, kNonNeg);
}

template <class V> void visit(V& v, OperatorConfig& c) {
  v.field("nav_stiffness_n_per_m", c.nav_stiffness_n_per_m, Need::Optional, kNonNeg);
  v.field("nav_damping_ns_per_m", c.nav_damping_ns_per_m, Need::Optional, kNonNeg);
  v.field("yaw_stiffness_nm_per_rad", c.yaw_stiffness_nm_per_rad, Need::Optional, kNonNeg);
  v.field("yaw_damping_nms_per_rad", c.yaw_damping_nms_per_rad, Need::Optional, kNonNeg);
  v.field("cue_compliance", c.cue_compliance, Need::Optional, kNonNeg);
  v.field("noise_sigma_n", c.noise_sigma_n, Need::Optional, kNonNeg);
  v.field("noise_sigma_nm", c.noise_sigma_nm, Need::Optional, kNonNeg);
  v.field("cruise_speed_mps", c.cruise_speed_mps, Need::Optional, in_range(0.0, 0.5, "must lie in [0, 0.5]"));
  v.field("pursuit_lookahead_m", c.pursuit_lookahead_m, Need::Optional, kPositive);
  v.field("approach_slow_radius_m", c.approach_slow_radius_m, Need::Optional, kPositive);
  v.field("max_displacement_m", c.max_displacement_m, Need::Optional, kPositive);
  v.field("max_yaw_offset_rad", c.max_yaw_offset_rad, Need::Optional, kPositive);
  v.field("bias_min_m", c.bias_min_m, Need::Optional, kNonNeg);
  v.field("bias_max_m", c.bias_max_m, Need::Optional, kNonNeg);
  v.field("bias_wavelength_min_m", c.bias_wavelength_min_m, Need::Optional, kPositive);
  v.field("bias_wavelength_max_m", c.bias_wavelength_max_m, Need::Optional, kPositive);
  v.field("manip_stiffness_n_per_m", c.manip_stiffness_n_per_m, Need::Optional, kNonNeg);
  v.field("manip_damping_ns_per_m", c.manip_damping_ns_per_m, Need::Optional, kNonNeg);
  v.field("manip_orientation_nm_per_rad", c.manip_orientation_nm_per_rad, Need::Optional, kNonNeg);
  v.field("perception_bias_min_m", c.perception_bias_min_m, Need::Optional, kNonNeg);
  v.field("perception_bias_max_m", c.perception_bias_max_m, Need::Optional, kNonNeg);
  v.field("perception_decay_s", c.perception_decay_s, Need::Optional, kPositive);
  v.field("grasp_belief_tol_m", c.grasp_belief_tol_m, Need::Optional, kPositive);
  v.field("drop_key_delay_s", c.drop_key_delay_s, Need::Optional, kNonNeg);
  v.field("distraction_duration_s", c.distraction_duration_s, Need::Optional, kNonNeg);
  v.field("distraction_gap_min_s", c.distraction_gap_min_s, Need::Optional, kPositive);
  v.field("distraction_gap_max_s", c.distraction_gap_max_s, Need::Optional, kPositive);
}

template <class V> void visit(V& v, ScenarioConfig& c) {
  v.field("schema_version", c.schema_version, Need::Required);
  v.section("map", c.map, Need::Required);
  v.path_field("chain_path", c.chain_path, Need::Optional);
  v.section("object", c.object, Need::Required);
  v.section("fmr_start", c.fmr_start, Need::Required);
  v.section("bin", c.bin);
  v.section("arm_mount", c.arm_mount);
  v.field("leader_home_rad", c.leader_home_rad);
  v.field("follower_home_rad", c.follower_home_rad);
  v.section("controller", c.controller);
  v.section("planner", c.planner);
  v.section("sim", c.sim);
  v.section("fsm", c.fsm);
  v.section("drop", c.drop);
  v.section("operator", c.operator_model);
  v.field("seed", c.seed);
}

void range_error(const char* field, const std::string& msg) {
  throw ScenarioError(ScenarioError::Kind::Range, field, msg);
}

void cross_validate(const ScenarioConfig& c) {
  if (c.schema_version != kScenarioSchemaVersion) {
    throw ScenarioError(ScenarioError::Kind::Schema, "schema_version",
                        "unsupported version " + std::to_string(c.schema_version));
  }
  const auto& k = c.controller;
  if (!(k.vb_i_m < k.vb_e_m)) range_error("controller.vb_e_m", "must be greater than controller.vb_i_m");
  const auto& d = c.planner.dwa;
  if (d.v_min_mps > d.v_max_mps) range_error("planner.dwa.v_min_mps", "must not exceed v_max_mps");
  if (d.horizon_s + 1e-12 < (d.lookahead_index + 1) * d.dt_plan_s) {
    range_error("planner.dwa.horizon_s", "must cover lookahead_index + 1 planning steps");
  }
  if (!(c.sim.graspable.x_min_m < c.sim.graspable.x_max_m)) {
    range_error("sim.graspable.x_max_m", "must be greater than x_min_m");
  }
  if (!(c.sim.camera.min_range_m < c.sim.camera.max_range_m)) {
    range_error("sim.camera.max_range_m", "must be greater than min_range_m");
  }
  const auto& o = c.operator_model;
  if (o.bias_min_m > o.bias_max_m) range_error("operator.bias_max_m", "must be >= bias_min_m");
  if (o.bias_wavelength_min_m > o.bias_wavelength_max_m) {
    range_error("operator.bias_wavelength_max_m", "must be >= bias_wavelength_min_m");
  }
  if (o.perception_bias_min_m > o.perception_bias_max_m) {
    range_error("operator.perception_bias_max_m", "must be >= perception_bias_min_m");
  }
  if (o.distraction_gap_min_s > o.distraction_gap_max_s) {
    range_error("operator.distraction_gap_max_s", "must be >= distraction_gap_min_s");
  }
  if (o.max_displacement_m >= k.vb_e_m) range_error("operator.max_displacement_m", "must be < controller.vb_e_m");
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioError(ScenarioError::Kind::Parse, "", std::string("parse error at byte ") +
                                                            std::to_string(e.byte) + ": " + e.what());
  }
  ScenarioConfig c;
  Reader r(j, "", base_dir);
  visit(r, c);
  r.finish();
  cross_validate(c);
  return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ScenarioError(ScenarioError::Kind::Io, "", "cannot open scenario file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_scenario(ss.str(), path.parent_path());
}

std::string serialize_scenario(const ScenarioConfig& config) {
  Writer w;
  visit(w, const_cast<ScenarioConfig&>(config));
  return w.take().dump(2) + "\n";
}

}  // namespace unitele
