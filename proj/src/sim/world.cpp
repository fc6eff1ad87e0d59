#include "unitele/sim/world.hpp"

#include <cmath>
#include <sstream>

#include "unitele/core/angles.hpp"
#include "unitele/core/motion.hpp"

namespace unitele::sim {

namespace {

std::vector<std::uint8_t> any_obstacle_mask(const OccupancyGrid& g) {
  std::vector<std::uint8_t> m(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) m[i] = g.cell_class(i) != CellClass::Free;
  return m;
}

void integrate_joints(JointVector7& q, JointVector7& qd, const JointVector7& accel, double dt,
                      const kinematics::KinematicChain& chain) {
  qd += accel * dt;
  q += qd * dt;
  for (int i = 0; i < 7; ++i) {
    if (q[i] < chain.q_min()[i]) {
      q[i] = chain.q_min()[i];
      qd[i] = std::max(qd[i], 0.0);
    } else if (q[i] > chain.q_max()[i]) {
      q[i] = chain.q_max()[i];
      qd[i] = std::min(qd[i], 0.0);
    }
  }
}

}  // namespace

bool graspable(const Vector3& o, const GraspableConfig& g) {
  return o.x() >= g.x_min_m && o.x() <= g.x_max_m && std::abs(o.y()) <= g.half_width_m;
}

World::World(WorldParams params, OccupancyGrid grid, const Pose2D& base_start, const JointVector7& q_lra0,
             const JointVector7& q_fra0, std::uint64_t seed)
    : p_(std::move(params)),
      s_{0.0, 0, q_lra0, JointVector7::Zero(), q_fra0, JointVector7::Zero(), base_start, {}, std::move(grid), Vector3::Zero(), false, false, {}},
      truth_(s_.grid.width(), s_.grid.height(), s_.grid.resolution(), s_.grid.origin(), any_obstacle_mask(s_.grid),
             0.0),
      rng_(seed) {
  p_.leader.check_limits(q_lra0);
  p_.follower.check_limits(q_fra0);
  s_.object_world = Vector3(p_.object.x_m, p_.object.y_m, p_.object.height_m);
  update_follower_fk();
  check_collision();
}

Matrix4 World::arm_base_in_world() const {
  Matrix4 t = Matrix4::Identity();
  const double c = std::cos(s_.base.gamma), sn = std::sin(s_.base.gamma);
  t(0, 0) = c;
  t(0, 1) = -sn;
  t(1, 0) = sn;
  t(1, 1) = c;
  t(0, 3) = s_.base.x + c * p_.mount.x_m;
  t(1, 3) = s_.base.y + sn * p_.mount.x_m;
  t(2, 3) = p_.mount.z_m;
  return t;
}

Vector3 World::follower_ee_world() const {
  return (arm_base_in_world() * ee_arm_).block<3, 1>(0, 3);
}

Vector3 World::object_in_arm() const {
  const Matrix4 t = arm_base_in_world();
  return t.block<3, 3>(0, 0).transpose() * (s_.object_world - t.block<3, 1>(0, 3));
}

double World::true_clearance(double x, double y) const { return truth_.clearance(x, y); }

void World::update_follower_fk() { ee_arm_ = kinematics::fk_transform(p_.follower, s_.q_fra); }

void World::step(const JointVector7& tau_lra, const Wrench6& operator_wrench, const BaseVelocity& base_cmd,
                 const JointVector7& tau_fra) {
  const double dt = p_.sim.dt_s;
  const double D = p_.sim.joint_damping_nms_per_rad;
  if (!tau_lra.allFinite() || !tau_fra.allFinite() || !operator_wrench.all_finite() ||
      !std::isfinite(base_cmd.v_x) || !std::isfinite(base_cmd.v_gamma))
    fault("non-finite command");

  JointVector7 acc_l = tau_lra - D * s_.qd_lra;
  if (!operator_wrench.is_zero()) {
    acc_l += kinematics::evaluate(p_.leader, s_.q_lra).jacobian.transpose() * operator_wrench.as_vector();
  }
  integrate_joints(s_.q_lra, s_.qd_lra, acc_l, dt, p_.leader);
  integrate_joints(s_.q_fra, s_.qd_fra, tau_fra - D * s_.qd_fra, dt, p_.follower);

  s_.base = integrate_motion(s_.base, base_cmd, dt, p_.sim.vehicle);
  s_.base_velocity = BaseVelocity{base_cmd.v_x, realized_yaw_rate(base_cmd, p_.sim.vehicle)};

  update_follower_fk();
  if (s_.attached) s_.object_world = (arm_base_in_world() * ee_arm_ * grip_offset_).block<3, 1>(0, 3);

  ++s_.tick;
  s_.time = static_cast<double>(s_.tick) * dt;
  if (!s_.q_lra.allFinite() || !s_.q_fra.allFinite() || !std::isfinite(s_.base.x) || !std::isfinite(s_.base.y))
    fault("non-finite state");
  check_collision();
}

void World::check_collision() {
  const double r = p_.sim.vehicle.body_radius_m;
  const bool hit = truth_.clearance(s_.base.x, s_.base.y) < r;
  if (hit && !s_.in_collision) {
    CollisionEvent e;
    e.time = s_.time;
    e.base = s_.base;
    const auto& g = s_.grid;
    const double res = g.resolution();
    const int reach = static_cast<int>(std::ceil(r / res)) + 2;
    const auto center = truth_.world_to_grid(s_.base.x, s_.base.y);
    double best = std::numeric_limits<double>::infinity();
    if (center) {
      for (int dr = -reach; dr <= reach; ++dr)
        for (int dc = -reach; dc <= reach; ++dc) {
          const CellIndex c{center->col + dc, center->row + dr};
          if (!g.in_bounds(c) || !g.occupied(c)) continue;
          const double d = double(dc) * dc + double(dr) * dr;
          if (d < best) {
            best = d;
            e.cell = c;
            e.cell_class = g.cell_class(c);
          }
        }
    }
    s_.collisions.push_back(e);
  }
  s_.in_collision = hit;
}

std::vector<CellIndex> World::lidar_scan() {
  const auto& lc = p_.sim.lidar;
  auto& g = s_.grid;
  const double res = g.resolution();
  const double gx = (s_.base.x - g.origin().x) / res;
  const double gy = (s_.base.y - g.origin().y) / res;
  const double max_t = lc.range_m / res;
  std::vector<CellIndex> found;
  for (int b = 0; b < lc.beams; ++b) {
    const double ang = s_.base.gamma - 0.5 * lc.span_rad + lc.span_rad * b / lc.beams;
    const double dx = std::cos(ang), dy = std::sin(ang);
    int cx = static_cast<int>(std::floor(gx)), cy = static_cast<int>(std::floor(gy));
    const int sx = dx > 0 ? 1 : -1, sy = dy > 0 ? 1 : -1;
    const double inf = std::numeric_limits<double>::infinity();
    const double tdx = dx != 0 ? std::abs(1.0 / dx) : inf;
    const double tdy = dy != 0 ? std::abs(1.0 / dy) : inf;
    double tx = dx != 0 ? ((dx > 0 ? cx + 1 - gx : gx - cx) * tdx) : inf;
    double ty = dy != 0 ? ((dy > 0 ? cy + 1 - gy : gy - cy) * tdy) : inf;
    double t = 0.0;
    while (t <= max_t) {
      const CellIndex c{cx, cy};
      if (!g.in_bounds(c)) break;
      const CellClass k = g.cell_class(c);
      if (k == CellClass::Known || k == CellClass::SemiKnown) {
        if (g.mark_discovered(c)) found.push_back(c);
        break;
      }
      if (tx < ty) {
        t = tx;
        tx += tdx;
        cx += sx;
      } else {
        t = ty;
        ty += tdy;
        cy += sy;
      }
    }
  }
  return found;
}

std::optional<Vector3> World::marker_visible() {
  const auto& cam = p_.sim.camera;
  const Vector3 obj = object_in_arm();
  const Vector3 origin = ee_arm_.block<3, 1>(0, 3);
  const Vector3 axis = ee_arm_.block<3, 1>(0, 2);
  const Vector3 rel = obj - origin;
  const double dist = rel.norm();
  if (dist < cam.min_range_m || dist > cam.max_range_m) return std::nullopt;
  const double cosang = std::clamp(rel.dot(axis) / dist, -1.0, 1.0);
  if (std::acos(cosang) > cam.half_angle_rad) return std::nullopt;
  if (cam.noise_sigma_m <= 0) return obj;
  std::normal_distribution<double> n(0.0, cam.noise_sigma_m);
  return Vector3(obj.x() + n(rng_), obj.y() + n(rng_), obj.z() + n(rng_));
}

bool World::try_grasp() {
  if (s_.attached) return true;
  if ((follower_ee_world() - s_.object_world).norm() >= p_.sim.grasp_eps_m) return false;
  const Matrix4 ee_world = arm_base_in_world() * ee_arm_;
  Matrix4 obj = Matrix4::Identity();
  obj.block<3, 1>(0, 3) = s_.object_world;
  grip_offset_ = ee_world.inverse() * obj;
  s_.attached = true;
  return true;
}

void World::release_object() { s_.attached = false; }

void World::fault(const char* what) const {
  std::ostringstream os;
  os.precision(17);
  os << "simulation fault: " << what << " at t=" << s_.time << " tick=" << s_.tick << "\n  q_lra=" << s_.q_lra.transpose()
     << "\n  qd_lra=" << s_.qd_lra.transpose() << "\n  q_fra=" << s_.q_fra.transpose()
     << "\n  qd_fra=" << s_.qd_fra.transpose() << "\n  base=(" << s_.base.x << ", " << s_.base.y << ", "
     << s_.base.gamma << ")";
  throw SimFault(os.str());
}

}  // namespace unitele::sim
