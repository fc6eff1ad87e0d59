#include <doctest.h>

#include <limits>
#include <random>

#include "unitele/core/angles.hpp"
#include "unitele/core/motion.hpp"
#include "unitele/planning/planner.hpp"
#include "planning_oracles.hpp"

using namespace unitele;
using namespace unitele::planning;
using namespace unitele::planning::oracle;

namespace {

PlannerView view_from_rows(const std::vector<std::string>& rows_top_first, double res = 1.0, double inflation = 0.0) {
  const int h = static_cast<int>(rows_top_first.size());
  const int w = static_cast<int>(rows_top_first[0].size());
  std::vector<std::uint8_t> occ(static_cast<std::size_t>(w) * h);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) occ[static_cast<std::size_t>(r) * w + c] = rows_top_first[h - 1 - r][c] == '#';
  return PlannerView(w, h, res, Pose2D{}, occ, inflation);
}

GlobalPath straight_path(double x0, double x1, double y) {
  GlobalPath p;
  for (double x = x0; x <= x1 + 1e-9; x += 0.05) p.waypoints.push_back({x, y, 0.0});
  return p;
}

}  // namespace

TEST_CASE("dijkstra examples on 3x3 grids") {
  const auto empty = view_from_rows({"...", "...", "..."});
  const auto p = plan_global(empty, CellIndex{0, 0}, CellIndex{2, 2});
  CHECK(p.cost() == 2 * std::sqrt(2.0));
  CHECK(p.cells.size() == 3);

  const auto center = view_from_rows({"...", ".#.", "..."});
  const auto q = plan_global(center, CellIndex{0, 0}, CellIndex{2, 2});
  CHECK(q.axial_steps == 2);
  CHECK(q.diagonal_steps == 1);
  CHECK(q.cost() == 2 + std::sqrt(2.0));

  const auto goal_in_wall = view_from_rows({"..#", "...", "..."});
  try {
    plan_global(goal_in_wall, CellIndex{0, 0}, CellIndex{2, 2});
    FAIL("expected a plan error");
  } catch (const PlanError& e) {
    CHECK(e.kind() == PlanError::Kind::GoalBlocked);
  }
  const auto walled = view_from_rows({"..#", "###", "..."});
  try {
    plan_global(walled, CellIndex{0, 0}, CellIndex{0, 2});
    FAIL("expected a plan error");
  } catch (const PlanError& e) {
    CHECK(e.kind() == PlanError::Kind::NoPath);
  }
}

TEST_CASE("dijkstra matches the exhaustive oracle on random 8x8 grids") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> u(0, 7);
  int with_path = 0, without = 0;
  for (int k = 0; k < 100; ++k) {
    const auto v = random_view(rng, 8, 8, 0.2, 1.0, 0.0);
    CellIndex s{u(rng), u(rng)}, g{u(rng), u(rng)};
    while (v.blocked(s)) s = {u(rng), u(rng)};
    while (v.blocked(g)) g = {u(rng), u(rng)};
    const auto want = oracle_cost(v, s, g);
    if (!want) {
      ++without;
      CHECK_THROWS_AS(plan_global(v, s, g), PlanError);
      continue;
    }
    ++with_path;
    const auto p = plan_global(v, s, g);
    REQUIRE(p.axial_steps == want->first);
    REQUIRE(p.diagonal_steps == want->second);
    REQUIRE(p.cells.front() == s);
    REQUIRE(p.cells.back() == g);
    for (std::size_t i = 0; i + 1 < p.cells.size(); ++i) {
      REQUIRE(std::max(std::abs(p.cells[i + 1].col - p.cells[i].col), std::abs(p.cells[i + 1].row - p.cells[i].row)) == 1);
      REQUIRE_FALSE(v.blocked(p.cells[i]));
    }
  }
  CHECK(with_path > 50);
  MESSAGE("random grids with a path: " << with_path << ", without: " << without);
}

TEST_CASE("dijkstra is deterministic") {
  std::mt19937_64 rng(1);
  const auto v = random_view(rng, 40, 30, 0.15, 0.1, 0.0);
  CellIndex s{0, 0}, g{39, 29};
  if (v.blocked(s) || v.blocked(g)) return;
  try {
    const auto a = plan_global(v, s, g);
    const auto b = plan_global(v, s, g);
    CHECK(a.cells == b.cells);
  } catch (const PlanError&) {
  }
}

TEST_CASE("distance field equals brute force") {
  std::mt19937_64 rng(77);
  for (int k = 0; k < 20; ++k) {
    const auto v = random_view(rng, 23, 17, 0.05 + 0.01 * k, 0.05, 0.12);
    for (int r = 0; r < v.height(); ++r)
      for (int c = 0; c < v.width(); ++c) {
        const std::int64_t bf = brute_dist2(v, {c, r});
        REQUIRE(v.dist2_cells({c, r}) == bf);
        const bool want_blocked = v.occupied({c, r}) || clearance_from_dist2(bf, 0.05) < 0.12;
        REQUIRE(v.blocked({c, r}) == want_blocked);
      }
  }
  const auto none = view_from_rows({"...", "..."});
  CHECK(none.dist2_cells({0, 0}) == std::numeric_limits<std::int32_t>::max());
}

TEST_CASE("planner view sees known and discovered semi-known cells only") {
  OccupancyGrid g = OccupancyGrid::from_text("#su.\n....\n", 1.0, Pose2D{});
  const PlannerView before(g, 0.0);
  CHECK(before.occupied({0, 1}));
  CHECK_FALSE(before.occupied({1, 1}));
  CHECK_FALSE(before.occupied({2, 1}));
  g.mark_discovered({1, 1});
  g.mark_discovered({2, 1});
  const PlannerView after(g, 0.0);
  CHECK(after.occupied({1, 1}));
  CHECK_FALSE(after.occupied({2, 1}));
}

TEST_CASE("lookahead pose examples") {
  DwaConfig p;
  VehicleConfig veh;
  const Pose2D start{1.0, 2.0, 0.0};
  const auto straight = rollout(start, BaseVelocity{0.5, 0.0}, p, veh);
  CHECK(straight.poses.size() >= 41);
  CHECK(lookahead_pose(straight, 0) == start);
  const Pose2D ahead = lookahead_pose(straight, 40);
  CHECK(std::abs(ahead.x - 1.5) < 1e-12);
  CHECK(std::abs(ahead.y - 2.0) < 1e-12);

  veh.model = MotionModelKind::Unicycle;
  const auto spin = rollout(start, BaseVelocity{0.0, 0.3}, p, veh);
  const Pose2D turned = lookahead_pose(spin, 40);
  CHECK(turned.x == start.x);
  CHECK(turned.y == start.y);
  CHECK(std::abs(turned.gamma - 0.3 * 40 * 0.025) < 1e-12);

  LocalTrajectory short_traj;
  short_traj.poses.assign(10, start);
  CHECK_THROWS_AS(lookahead_pose(short_traj, 40), std::out_of_range);
}

TEST_CASE("ackermann rollouts cannot turn in place") {
  DwaConfig p;
  const VehicleConfig veh;
  const auto t = rollout(Pose2D{0, 0, 0.2}, BaseVelocity{0.0, 0.5}, p, veh);
  for (const auto& q : t.poses) CHECK(q == Pose2D{0, 0, 0.2});
  // Steering saturates: yaw rate at most v tan(max_steer) / L.
  const double w = realized_yaw_rate(BaseVelocity{0.3, 5.0}, veh);
  CHECK(std::abs(w - 0.3 * std::tan(veh.max_steer_rad) / veh.wheelbase_m) < 1e-12);
  CHECK(std::abs(realized_yaw_rate(BaseVelocity{0.3, 0.1}, veh) - 0.1) < 1e-12);
}

TEST_CASE("dwa in an open corridor drives straight") {
  const std::vector<std::string> rows = [] {
    std::vector<std::string> r(41, std::string(200, '.'));
    r.front() = std::string(200, '#');
    r.back() = std::string(200, '#');
    return r;
  }();
  const auto view = view_from_rows(rows, 0.05, 0.0);
  DwaConfig p;
  const VehicleConfig veh;
  const BaseState s{Pose2D{1.0, 1.025, 0.0}, BaseVelocity{0.3, 0.0}};
  const auto r = dwa_step(s, view, straight_path(0.5, 9.5, 1.025), p, veh);
  CHECK_FALSE(r.blocked);
  const double step = 2 * p.acc_w_radps2 * p.dt_plan_s / (p.samples_w - 1);
  CHECK(std::abs(r.command.v_gamma) <= step);
  CHECK(r.command.v_x > 0.3);
}

TEST_CASE("dwa reports blocked behind a wall") {
  std::vector<std::string> rows(41, std::string(60, '.'));
  for (auto& row : rows) row[30] = '#';
  const auto view = view_from_rows(rows, 0.05, 0.0);
  DwaConfig p;
  const VehicleConfig veh;
  const BaseState s{Pose2D{1.2, 1.0, 0.0}, BaseVelocity{0.3, 0.0}};
  const auto r = dwa_step(s, view, straight_path(0.5, 2.9, 1.0), p, veh);
  CHECK(r.blocked);
  CHECK(r.command.is_zero());
  CHECK(r.admissible_count == 0);
}

TEST_CASE("dwa argmax equals an independent re-scoring") {
  std::mt19937_64 rng(555);
  DwaConfig p;
  VehicleConfig veh;
  std::uniform_real_distribution<double> ux(0.3, 5.7), uv(0.0, 0.5), uw(-0.6, 0.6), ug(-kPi, kPi);
  int checked = 0, blocked = 0;
  while (checked < 100) {
    std::vector<std::uint8_t> occ(120 * 80, 0);
    std::uniform_int_distribution<int> uc(0, 119), ur(0, 79), usz(1, 8);
    for (int b = 0; b < 10; ++b) {
      const int c0 = uc(rng), r0 = ur(rng), sw = usz(rng), sh = usz(rng);
      for (int r = r0; r < std::min(80, r0 + sh); ++r)
        for (int c = c0; c < std::min(120, c0 + sw); ++c) occ[r * 120 + c] = 1;
    }
    const PlannerView view(120, 80, 0.05, Pose2D{}, occ, 0.5);
    const Pose2D start{ux(rng), 0.3 + (ux(rng) - 0.3) * 3.4 / 5.4, ug(rng)};
    const Pose2D goal{ux(rng), 0.3 + (ux(rng) - 0.3) * 3.4 / 5.4, 0.0};
    GlobalPath path;
    try {
      path = plan_global(view, start, goal);
    } catch (const PlanError&) {
      continue;
    }
    veh.model = (checked % 4 == 3) ? MotionModelKind::Unicycle : MotionModelKind::Ackermann;
    const BaseState s{start, BaseVelocity{uv(rng), uw(rng)}};
    const auto r = dwa_step(s, view, path, p, veh);
    const auto want = oracle_dwa(s, view, path, p, veh);
    if (!want) {
      REQUIRE(r.blocked);
      ++blocked;
    } else {
      REQUIRE_FALSE(r.blocked);
      REQUIRE(r.command == *want);
      for (const auto& q : r.trajectory.poses) REQUIRE(brute_clearance(view, q.x, q.y) > p.footprint_radius_m);
      REQUIRE(lookahead_pose(r.trajectory, 0) == start);
    }
    const auto again = dwa_step(s, view, path, p, veh);
    REQUIRE(again.command == r.command);
    ++checked;
  }
  MESSAGE("blocked states: " << blocked);
}

TEST_CASE("new obstacles never raise a candidate's clearance score") {
  std::mt19937_64 rng(8);
  DwaConfig p;
  const VehicleConfig veh;
  std::bernoulli_distribution add(0.02);
  for (int k = 0; k < 20; ++k) {
    std::vector<std::uint8_t> occ(100 * 100, 0);
    for (auto& o : occ) o = add(rng);
    const PlannerView before(100, 100, 0.05, Pose2D{}, occ, 0.0);
    for (auto& o : occ) o = o || add(rng);
    const PlannerView after(100, 100, 0.05, Pose2D{}, occ, 0.0);
    for (const auto& cmd : dynamic_window(BaseVelocity{0.25, 0.0}, p)) {
      auto a = rollout(Pose2D{1.0, 2.5, 0.1}, cmd, p, veh);
      auto b = a;
      score_trajectory(a, before, Eigen::Vector2d(4, 2.5), p);
      score_trajectory(b, after, Eigen::Vector2d(4, 2.5), p);
      REQUIRE(b.score.clearance <= a.score.clearance);
    }
  }
}
