#include "unitele/kinematics/chain.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "unitele/core/angles.hpp"

namespace unitele::kinematics {

using nlohmann::json;

JointLimitError::JointLimitError(int joint, double value, double lo, double hi)
    : std::domain_error("joint " + std::to_string(joint + 1) + " at " + std::to_string(value) +
                        " rad outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]"),
      joint_(joint) {}

KinematicChain::KinematicChain(std::string name, const std::array<JointRow, 7>& joints,
                               const Matrix4& tool, const Matrix4& base)
    : name_(std::move(name)), joints_(joints), tool_(tool), base_(base) {
  for (int i = 0; i < 7; ++i) {
    const auto& j = joints_[i];
    if (!(j.q_min_rad < j.q_max_rad)) {
      throw std::invalid_argument("joint " + std::to_string(i + 1) + ": q_min must be < q_max");
    }
    if (!(j.tau_max_nm > 0.0) || !(j.qd_max_radps > 0.0)) {
      throw std::invalid_argument("joint " + std::to_string(i + 1) + ": torque and speed limits must be > 0");
    }
    q_min_[i] = j.q_min_rad;
    q_max_[i] = j.q_max_rad;
    tau_max_[i] = j.tau_max_nm;
    qd_max_[i] = j.qd_max_radps;
  }
  if (!tool_.allFinite() || !base_.allFinite()) throw std::invalid_argument("non-finite chain transform");
}

KinematicChain KinematicChain::panda() {
  constexpr double h = kPi / 2;
  // clang-format off
  const std::array<JointRow, 7> rows{{
      {0.0,     0.0, 0.333, 0.0, -2.8973,  2.8973, 87.0, 2.1750},
      {0.0,      -h, 0.0,   0.0, -1.7628,  1.7628, 87.0, 2.1750},
      {0.0,       h, 0.316, 0.0, -2.8973,  2.8973, 87.0, 2.1750},
      {0.0825,    h, 0.0,   0.0, -3.0718, -0.0698, 87.0, 2.1750},
      {-0.0825,  -h, 0.384, 0.0, -2.8973,  2.8973, 12.0, 2.6100},
      {0.0,       h, 0.0,   0.0, -0.0175,  3.7525, 12.0, 2.6100},
      {0.088,     h, 0.0,   0.0, -2.8973,  2.8973, 12.0, 2.6100},
  }};
  // clang-format on
  // flange (0.107 m) plus hand TCP (0.1034 m), hand rotated -pi/4 about the flange z axis
  const Matrix4 tool = make_transform(Vector3(0.0, 0.0, 0.2104), Vector3(0.0, 0.0, -kPi / 4));
  return KinematicChain("panda", rows, tool);
}

KinematicChain KinematicChain::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("chain file parse error at byte ") + std::to_string(e.byte));
  }
  auto fail = [](const std::string& m) { throw std::invalid_argument("chain file: " + m); };
  for (auto it = j.begin(); it != j.end(); ++it) {
    static const std::array<std::string, 5> keys{"schema_version", "name", "convention", "joints", "tool"};
    if (std::find(keys.begin(), keys.end(), it.key()) == keys.end()) fail("unknown key " + it.key());
  }
  if (j.value("schema_version", 0) != 1) fail("schema_version must be 1");
  if (j.value("convention", std::string()) != "modified_dh") fail("convention must be \"modified_dh\"");
  const auto& js = j.at("joints");
  if (!js.is_array() || js.size() != 7) fail("exactly 7 joints required");
  std::array<JointRow, 7> rows{};
  for (std::size_t i = 0; i < 7; ++i) {
    const auto& r = js[i];
    for (auto it = r.begin(); it != r.end(); ++it) {
      static const std::array<std::string, 8> keys{"a_m",       "alpha_rad", "d_m",        "theta_offset_rad",
                                                   "q_min_rad", "q_max_rad", "tau_max_nm", "qd_max_radps"};
      if (std::find(keys.begin(), keys.end(), it.key()) == keys.end()) {
        fail("joints[" + std::to_string(i) + "]: unknown key " + it.key());
      }
    }
    rows[i] = JointRow{r.at("a_m").get<double>(),       r.at("alpha_rad").get<double>(),
                       r.at("d_m").get<double>(),       r.value("theta_offset_rad", 0.0),
                       r.at("q_min_rad").get<double>(), r.at("q_max_rad").get<double>(),
                       r.at("tau_max_nm").get<double>(), r.at("qd_max_radps").get<double>()};
  }
  Matrix4 tool = Matrix4::Identity();
  if (j.contains("tool")) {
    const auto xyz = j["tool"].at("xyz_m").get<std::array<double, 3>>();
    const auto rpy = j["tool"].at("rpy_rad").get<std::array<double, 3>>();
    tool = make_transform(Vector3(xyz[0], xyz[1], xyz[2]), Vector3(rpy[0], rpy[1], rpy[2]));
  }
  return KinematicChain(j.value("name", std::string("chain")), rows, tool);
}

KinematicChain KinematicChain::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open chain file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return from_json_text(ss.str());
}

std::string KinematicChain::to_json_text() const {
  json j;
  j["schema_version"] = 1;
  j["name"] = name_;
  j["convention"] = "modified_dh";
  j["joints"] = json::array();
  for (const auto& r : joints_) {
    j["joints"].push_back({{"a_m", r.a_m},
                           {"alpha_rad", r.alpha_rad},
                           {"d_m", r.d_m},
                           {"theta_offset_rad", r.theta_offset_rad},
                           {"q_min_rad", r.q_min_rad},
                           {"q_max_rad", r.q_max_rad},
                           {"tau_max_nm", r.tau_max_nm},
                           {"qd_max_radps", r.qd_max_radps}});
  }
  const Vector3 t = tool_.block<3, 1>(0, 3);
  const Vector3 rpy = matrix_to_rpy(tool_.block<3, 3>(0, 0));
  j["tool"] = {{"xyz_m", {t.x(), t.y(), t.z()}}, {"rpy_rad", {rpy.x(), rpy.y(), rpy.z()}}};
  return j.dump(2) + "\n";
}

bool KinematicChain::within_limits(const JointVector7& q) const {
  return (q.array() >= q_min_.array()).all() && (q.array() <= q_max_.array()).all();
}

void KinematicChain::check_limits(const JointVector7& q) const {
  for (int i = 0; i < 7; ++i) {
    if (!std::isfinite(q[i]) || q[i] < q_min_[i] || q[i] > q_max_[i]) {
      throw JointLimitError(i, q[i], q_min_[i], q_max_[i]);
    }
  }
}

JointVector7 KinematicChain::clamp_to_limits(const JointVector7& q) const {
  return q.cwiseMax(q_min_).cwiseMin(q_max_);
}

KinematicChain KinematicChain::with_tool_appended(const Matrix4& extra) const {
  return KinematicChain(name_, joints_, tool_ * extra, base_);
}

Matrix4 make_transform(const Vector3& xyz, const Vector3& rpy) {
  Matrix4 T = Matrix4::Identity();
  T.block<3, 3>(0, 0) = rpy_to_matrix(rpy);
  T.block<3, 1>(0, 3) = xyz;
  return T;
}

Pose6 ArmKinematics::pose() const {
  return Pose6{position(), matrix_to_rpy(rotation())};
}

namespace {

// Rx(alpha) * Tx(a) * Rz(theta) * Tz(d), written out.
Matrix4 link_transform(const JointRow& r, double q) {
  const double ct = std::cos(q + r.theta_offset_rad), st = std::sin(q + r.theta_offset_rad);
  const double ca = std::cos(r.alpha_rad), sa = std::sin(r.alpha_rad);
  Matrix4 T;
  T << ct, -st, 0.0, r.a_m,
       st * ca, ct * ca, -sa, -sa * r.d_m,
       st * sa, ct * sa, ca, ca * r.d_m,
       0.0, 0.0, 0.0, 1.0;
  return T;
}

}  // namespace

ArmKinematics evaluate(const KinematicChain& chain, const JointVector7& q) {
  ArmKinematics out;
  std::array<Vector3, 7> axes;
  std::array<Vector3, 7> origins;
  Matrix4 T = chain.base();
  for (int i = 0; i < 7; ++i) {
    T = T * link_transform(chain.joints()[i], q[i]);
    // Tz(d) slides along the joint axis, so the frame origin lies on the axis line.
    axes[i] = T.block<3, 1>(0, 2);
    origins[i] = T.block<3, 1>(0, 3);
  }
  out.ee = T * chain.tool();
  const Vector3 p = out.ee.block<3, 1>(0, 3);
  for (int i = 0; i < 7; ++i) {
    out.jacobian.block<3, 1>(0, i) = axes[i].cross(p - origins[i]);
    out.jacobian.block<3, 1>(3, i) = axes[i];
  }
  return out;
}

Matrix4 fk_transform(const KinematicChain& chain, const JointVector7& q) {
  Matrix4 T = chain.base();
  for (int i = 0; i < 7; ++i) T = T * link_transform(chain.joints()[i], q[i]);
  return T * chain.tool();
}

Pose6 forward_kinematics(const KinematicChain& chain, const JointVector7& q) {
  chain.check_limits(q);
  const Matrix4 T = fk_transform(chain, q);
  return Pose6{T.block<3, 1>(0, 3), matrix_to_rpy(T.block<3, 3>(0, 0))};
}

Jacobian6x7 jacobian(const KinematicChain& chain, const JointVector7& q) {
  chain.check_limits(q);
  return evaluate(chain, q).jacobian;
}

Matrix7x6 pinv(const Jacobian6x7& J) {
  const Eigen::JacobiSVD<Jacobian6x7> svd(J, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double cutoff = 1e-6 * (s.size() > 0 ? s[0] : 0.0);
  Eigen::Matrix<double, 6, 1> inv = Eigen::Matrix<double, 6, 1>::Zero();
  for (int i = 0; i < s.size(); ++i) {
    if (s[i] > cutoff && s[i] > 0.0) inv[i] = 1.0 / s[i];
  }
  // J = U S V^T  =>  J^+ = V S^+ U^T, V is 7x7 and only its first 6 columns meet S^+.
  return svd.matrixV().leftCols<6>() * inv.asDiagonal() * svd.matrixU().transpose();
}

Matrix7 nullspace_projector(const Jacobian6x7& J) {
  // pinv(J^T) = pinv(J)^T
  return Matrix7::Identity() - J.transpose() * pinv(J).transpose();
}

std::optional<JointVector7> solve_position_ik(const KinematicChain& chain, const Vector3& target,
                                              const JointVector7& seed, const JointVector7& posture,
                                              double tolerance_m, int max_iterations) {
  JointVector7 q = chain.clamp_to_limits(seed);
  constexpr double kDamping = 0.05;
  constexpr double kPostureGain = 0.2;
  constexpr double kMaxStep = 0.2;
  for (int it = 0; it < max_iterations; ++it) {
    const ArmKinematics k = evaluate(chain, q);
    const Vector3 err = target - k.position();
    if (err.norm() < tolerance_m) return q;
    const Eigen::Matrix<double, 3, 7> Jp = k.jacobian.topRows<3>();
    const Matrix3 A = Jp * Jp.transpose() + kDamping * kDamping * Matrix3::Identity();
    const Eigen::Matrix<double, 7, 3> Jinv = Jp.transpose() * A.ldlt().solve(Matrix3::Identity());
    const Eigen::Matrix<double, 7, 3> Jpinv = Jp.completeOrthogonalDecomposition().pseudoInverse();
    JointVector7 dq = Jinv * err + (Matrix7::Identity() - Jpinv * Jp) * (kPostureGain * (posture - q));
    const double m = dq.cwiseAbs().maxCoeff();
    if (m > kMaxStep) dq *= kMaxStep / m;
    q = chain.clamp_to_limits(q + dq);
  }
  return std::nullopt;
}

}  // namespace unitele::kinematics
