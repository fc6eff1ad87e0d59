#include "unitele/planning/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <tuple>

#include "unitele/core/angles.hpp"
#include "unitele/core/motion.hpp"

namespace unitele::planning {

namespace {

constexpr std::int64_t kFar = std::numeric_limits<std::int32_t>::max();

// Felzenszwalb-Huttenlocher 1-D squared distance transform over f (n samples, stride).
void edt_1d(double* f, int n, int stride, std::vector<double>& d, std::vector<int>& v, std::vector<double>& z) {
  d.resize(n);
  v.resize(n);
  z.resize(n + 1);
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  auto F = [&](int i) { return f[static_cast<std::ptrdiff_t>(i) * stride]; };
  for (int q = 1; q < n; ++q) {
    double s = ((F(q) + double(q) * q) - (F(v[k]) + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
    while (s <= z[k]) {
      --k;
      s = ((F(q) + double(q) * q) - (F(v[k]) + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    d[q] = double(q - v[k]) * (q - v[k]) + F(v[k]);
  }
  for (int q = 0; q < n; ++q) f[static_cast<std::ptrdiff_t>(q) * stride] = d[q];
}

}  // namespace

double clearance_from_dist2(std::int64_t d2, double resolution) {
  return resolution * std::sqrt(static_cast<double>(d2)) - 0.5 * resolution;
}

PlannerView::PlannerView(const OccupancyGrid& grid, double inflation_m)
    : width_(grid.width()),
      height_(grid.height()),
      resolution_(grid.resolution()),
      origin_(grid.origin()),
      inflation_(inflation_m),
      occupied_(grid.size(), 0) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const CellClass c = grid.cell_class(i);
    occupied_[i] = (c == CellClass::Known || (c == CellClass::SemiKnown && grid.discovered(i))) ? 1 : 0;
  }
  build();
}

PlannerView::PlannerView(int width, int height, double resolution, Pose2D origin, std::vector<std::uint8_t> occ,
                         double inflation_m)
    : width_(width),
      height_(height),
      resolution_(resolution),
      origin_(origin),
      inflation_(inflation_m),
      occupied_(std::move(occ)) {
  if (width <= 0 || height <= 0 || occupied_.size() != static_cast<std::size_t>(width) * height)
    throw std::invalid_argument("planner view: mask size does not match dimensions");
  build();
}

void PlannerView::build() {
  const std::size_t n = occupied_.size();
  constexpr double kInf = 1e18;
  std::vector<double> f(n);
  for (std::size_t i = 0; i < n; ++i) f[i] = occupied_[i] ? 0.0 : kInf;
  std::vector<double> d, z;
  std::vector<int> v;
  for (int c = 0; c < width_; ++c) edt_1d(f.data() + c, height_, width_, d, v, z);
  for (int r = 0; r < height_; ++r) edt_1d(f.data() + static_cast<std::size_t>(r) * width_, width_, 1, d, v, z);
  dist2_.resize(n);
  blocked_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    dist2_[i] = f[i] >= kInf * 0.5 ? kFar : static_cast<std::int64_t>(f[i]);
    blocked_[i] = (occupied_[i] || clearance_from_dist2(dist2_[i], resolution_) < inflation_) ? 1 : 0;
  }
}

std::optional<CellIndex> PlannerView::world_to_grid(double x, double y) const {
  const double fx = (x - origin_.x) / resolution_;
  const double fy = (y - origin_.y) / resolution_;
  if (!(fx >= 0 && fy >= 0 && fx < width_ && fy < height_)) return std::nullopt;
  return CellIndex{static_cast<int>(fx), static_cast<int>(fy)};
}

Eigen::Vector2d PlannerView::grid_to_world(CellIndex c) const {
  return {origin_.x + (c.col + 0.5) * resolution_, origin_.y + (c.row + 0.5) * resolution_};
}

double PlannerView::clearance(double x, double y) const {
  const auto c = world_to_grid(x, y);
  if (!c) return -1.0;
  return clearance_from_dist2(dist2_[flat(*c)], resolution_);
}

double GlobalPath::cost() const { return axial_steps + diagonal_steps * std::sqrt(2.0); }

GlobalPath plan_global(const PlannerView& view, const Pose2D& start, const Pose2D& goal) {
  const auto s = view.world_to_grid(start.x, start.y);
  if (!s) throw PlanError(PlanError::Kind::StartBlocked, "start outside the grid");
  const auto g = view.world_to_grid(goal.x, goal.y);
  if (!g) throw PlanError(PlanError::Kind::GoalBlocked, "goal outside the grid");
  return plan_global(view, *s, *g);
}

GlobalPath plan_global(const PlannerView& view, CellIndex start, CellIndex goal) {
  if (!view.in_bounds(start) || view.blocked(start))
    throw PlanError(PlanError::Kind::StartBlocked, "start cell is not free");
  if (!view.in_bounds(goal) || view.blocked(goal)) throw PlanError(PlanError::Kind::GoalBlocked, "goal cell is not free");

  const double kSqrt2 = std::sqrt(2.0);
  const std::size_t n = static_cast<std::size_t>(view.width()) * view.height();
  struct Node {
    int axial = -1, diag = -1;
    std::int64_t parent = -1;
    bool done = false;
    double key() const { return axial + diag * std::sqrt(2.0); }
  };
  std::vector<Node> nodes(n);
  using Entry = std::tuple<double, int, int>;  // cost, row, col
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> open;
  nodes[view.flat(start)].axial = 0;
  nodes[view.flat(start)].diag = 0;
  open.emplace(0.0, start.row, start.col);

  static constexpr int kDc[8] = {1, -1, 0, 0, 1, 1, -1, -1};
  static constexpr int kDr[8] = {0, 0, 1, -1, 1, -1, 1, -1};
  bool found = false;
  while (!open.empty()) {
    const auto [cost, row, col] = open.top();
    open.pop();
    const CellIndex cur{col, row};
    Node& cn = nodes[view.flat(cur)];
    if (cn.done) continue;
    cn.done = true;
    if (cur == goal) {
      found = true;
      break;
    }
    for (int k = 0; k < 8; ++k) {
      const CellIndex nb{col + kDc[k], row + kDr[k]};
      if (!view.in_bounds(nb) || view.blocked(nb)) continue;
      Node& nn = nodes[view.flat(nb)];
      if (nn.done) continue;
      const int a = cn.axial + (k < 4 ? 1 : 0);
      const int b = cn.diag + (k < 4 ? 0 : 1);
      const double key = a + b * kSqrt2;
      if (nn.axial < 0 || key < nn.key()) {
        nn.axial = a;
        nn.diag = b;
        nn.parent = static_cast<std::int64_t>(view.flat(cur));
        open.emplace(key, nb.row, nb.col);
      }
    }
  }
  if (!found) throw PlanError(PlanError::Kind::NoPath, "no path between start and goal");

  GlobalPath path;
  for (std::int64_t i = static_cast<std::int64_t>(view.flat(goal)); i >= 0; i = nodes[i].parent) {
    path.cells.push_back({static_cast<int>(i % view.width()), static_cast<int>(i / view.width())});
  }
  std::reverse(path.cells.begin(), path.cells.end());
  const Node& gn = nodes[view.flat(goal)];
  path.axial_steps = gn.axial;
  path.diagonal_steps = gn.diag;
  path.length_m = path.cost() * view.resolution();
  path.waypoints.reserve(path.cells.size());
  for (std::size_t i = 0; i < path.cells.size(); ++i) {
    const auto w = view.grid_to_world(path.cells[i]);
    double heading = 0.0;
    if (i + 1 < path.cells.size()) {
      heading = std::atan2(path.cells[i + 1].row - path.cells[i].row, path.cells[i + 1].col - path.cells[i].col);
    } else if (i > 0) {
      heading = path.waypoints.back().gamma;
    }
    path.waypoints.push_back(Pose2D{w.x(), w.y(), normalize_angle(heading)});
  }
  return path;
}

std::vector<BaseVelocity> dynamic_window(const BaseVelocity& cur, const DwaConfig& p) {
  auto axis = [](double now, double reach, double lo_bound, double hi_bound, int n) {
    double lo = std::max(lo_bound, now - reach);
    double hi = std::min(hi_bound, now + reach);
    if (lo > hi) lo = hi = std::clamp(now, lo_bound, hi_bound);
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) out[i] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
    return out;
  };
  const auto vs = axis(cur.v_x, p.acc_v_mps2 * p.dt_plan_s, p.v_min_mps, std::min(p.v_max_mps, 0.5), p.samples_v);
  const auto ws = axis(cur.v_gamma, p.acc_w_radps2 * p.dt_plan_s, -p.w_max_radps, p.w_max_radps, p.samples_w);
  std::vector<BaseVelocity> out;
  out.reserve(vs.size() * ws.size());
  for (double v : vs)
    for (double w : ws) out.push_back({v, w});
  return out;
}

LocalTrajectory rollout(const Pose2D& start, const BaseVelocity& cmd, const DwaConfig& p, const VehicleConfig& v) {
  LocalTrajectory t;
  t.command = cmd;
  const int steps = static_cast<int>(std::lround(p.horizon_s / p.dt_plan_s));
  t.poses.reserve(steps + 1);
  t.poses.push_back(start);
  for (int i = 0; i < steps; ++i) t.poses.push_back(integrate_motion(t.poses.back(), cmd, p.dt_plan_s, v));
  return t;
}

Eigen::Vector2d path_target(const GlobalPath& path, const Pose2D& p, double ahead_m) {
  const auto& w = path.waypoints;
  if (w.empty()) throw std::invalid_argument("path_target: empty path");
  if (w.size() == 1) return {w[0].x, w[0].y};
  const Eigen::Vector2d q(p.x, p.y);
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_seg = 0;
  double best_s = 0.0, s_acc = 0.0;
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    const Eigen::Vector2d a(w[i].x, w[i].y), b(w[i + 1].x, w[i + 1].y);
    const Eigen::Vector2d ab = b - a;
    const double len = ab.norm();
    const double u = len > 0 ? std::clamp((q - a).dot(ab) / (len * len), 0.0, 1.0) : 0.0;
    const double d = (a + u * ab - q).squaredNorm();
    if (d < best) {
      best = d;
      best_seg = i;
      best_s = s_acc + u * len;
    }
    s_acc += len;
  }
  double want = best_s + ahead_m;
  s_acc = 0.0;
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    const Eigen::Vector2d a(w[i].x, w[i].y), b(w[i + 1].x, w[i + 1].y);
    const double len = (b - a).norm();
    if (i >= best_seg && s_acc + len >= want && len > 0) return a + (b - a) * ((want - s_acc) / len);
    s_acc += len;
  }
  return {w.back().x, w.back().y};
}

void score_trajectory(LocalTrajectory& t, const PlannerView& view, const Eigen::Vector2d& target, const DwaConfig& p) {
  double min_c = std::numeric_limits<double>::infinity();
  for (const auto& pose : t.poses) min_c = std::min(min_c, view.clearance(pose.x, pose.y));
  t.min_clearance_m = min_c;
  t.admissible = min_c > p.footprint_radius_m;
  const Pose2D& end = t.poses.back();
  const double bearing = std::atan2(target.y() - end.y, target.x() - end.x);
  t.score.heading = 1.0 - std::abs(angle_diff(bearing, end.gamma)) / kPi;
  t.score.clearance = std::min(min_c - p.footprint_radius_m, p.clearance_cap_m) / p.clearance_cap_m;
  t.score.velocity = std::abs(t.command.v_x) / 0.5;
  t.score.total = p.w_heading * t.score.heading + p.w_clearance * t.score.clearance + p.w_velocity * t.score.velocity;
}

bool better_candidate(const LocalTrajectory& a, const LocalTrajectory& b) {
  if (a.score.total != b.score.total) return a.score.total > b.score.total;
  if (std::abs(a.command.v_gamma) != std::abs(b.command.v_gamma))
    return std::abs(a.command.v_gamma) < std::abs(b.command.v_gamma);
  if (a.command.v_x != b.command.v_x) return a.command.v_x < b.command.v_x;
  return a.command.v_gamma < b.command.v_gamma;
}

DwaResult dwa_step(const BaseState& state, const PlannerView& view, const GlobalPath& path, const DwaConfig& p,
                   const VehicleConfig& v) {
  if (path.waypoints.empty()) throw std::invalid_argument("dwa_step: empty global path");
  const Eigen::Vector2d target = path_target(path, state.pose, p.path_lookahead_m);
  DwaResult r;
  bool have = false;
  for (const auto& cmd : dynamic_window(state.velocity, p)) {
    LocalTrajectory t = rollout(state.pose, cmd, p, v);
    score_trajectory(t, view, target, p);
    if (!t.admissible) continue;
    ++r.admissible_count;
    if (!have || better_candidate(t, r.trajectory)) {
      r.trajectory = std::move(t);
      have = true;
    }
  }
  if (!have) {
    r.blocked = true;
    r.trajectory = rollout(state.pose, BaseVelocity{}, p, v);
    r.command = BaseVelocity{};
    return r;
  }
  r.command = r.trajectory.command;
  return r;
}

Pose2D lookahead_pose(const LocalTrajectory& traj, int k) {
  if (k < 0 || static_cast<std::size_t>(k) >= traj.poses.size())
    throw std::out_of_range("lookahead_pose: trajectory has too few samples");
  return traj.poses[static_cast<std::size_t>(k)];
}

}  // namespace unitele::planning
