#include <doctest.h>

#include <random>

#include "unitele/core/angles.hpp"
#include "unitele/planning/planner.hpp"
#include "unitele/sim/world.hpp"

using namespace unitele;
using namespace unitele::sim;

namespace {

JointVector7 home_q() {
  JointVector7 q;
  q << 0, -kPi / 4, 0, -3 * kPi / 4, 0, kPi / 2, kPi / 4;
  return q;
}

// 5 m x 5 m free square centered on the origin; `edit` places obstacles by world coordinate.
OccupancyGrid square(const std::vector<std::pair<Eigen::Vector2d, CellClass>>& cells = {}) {
  std::vector<CellClass> c(100 * 100, CellClass::Free);
  OccupancyGrid probe(0.05, 100, 100, Pose2D{-2.5, -2.5, 0}, c);
  for (const auto& [p, k] : cells) c[probe.flat(*probe.world_to_grid(p.x(), p.y()))] = k;
  return OccupancyGrid(0.05, 100, 100, Pose2D{-2.5, -2.5, 0}, c);
}

World make_world(OccupancyGrid g, Pose2D base = {}, ObjectConfig obj = {2.0, 2.0, 0.0, 0.7}, SimConfig sim = {}) {
  WorldParams p;
  p.sim = sim;
  p.object = obj;
  return World(p, std::move(g), base, home_q(), home_q(), 7);
}

const JointVector7 kZero = JointVector7::Zero();

}  // namespace

TEST_CASE("zero commands leave the state unchanged except time") {
  World w = make_world(square());
  const WorldState before = w.state();
  for (int i = 0; i < 100; ++i) w.step(kZero, Wrench6{}, BaseVelocity{}, kZero);
  const WorldState& after = w.state();
  CHECK(after.q_lra == before.q_lra);
  CHECK(after.q_fra == before.q_fra);
  CHECK(after.base == before.base);
  CHECK(after.object_world == before.object_world);
  CHECK(after.tick == 100);
  CHECK(after.time == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("straight drive advances 0.5 m in 1 s") {
  World w = make_world(square(), Pose2D{-1.0, 0.0, 0.0});
  for (int i = 0; i < 1000; ++i) w.step(kZero, Wrench6{}, BaseVelocity{0.5, 0.0}, kZero);
  CHECK(std::abs(w.state().base.x - (-0.5)) < 1e-9);
  CHECK(w.state().base.y == 0.0);
}

TEST_CASE("ackermann base cannot turn in place") {
  World w = make_world(square());
  for (int i = 0; i < 500; ++i) w.step(kZero, Wrench6{}, BaseVelocity{0.01, 1.0}, kZero);
  CHECK(w.state().base.gamma == 0.0);
}

TEST_CASE("driving into an unknown-class cell records a collision") {
  World w = make_world(square({{{1.0, 0.0}, CellClass::Unknown}}), Pose2D{-0.5, 0.0, 0.0});
  const planning::PlannerView planner_sees(w.state().grid, 0.0);
  CHECK_FALSE(planner_sees.occupied(*planner_sees.world_to_grid(1.0, 0.0)));
  for (int i = 0; i < 3000 && w.state().collisions.empty(); ++i) w.step(kZero, Wrench6{}, BaseVelocity{0.5, 0.0}, kZero);
  REQUIRE(w.state().collisions.size() == 1);
  CHECK(w.state().collisions[0].cell_class == CellClass::Unknown);
  // One event per contact, not per tick.
  for (int i = 0; i < 200; ++i) w.step(kZero, Wrench6{}, BaseVelocity{0.5, 0.0}, kZero);
  CHECK(w.state().collisions.size() == 1);
}

TEST_CASE("lidar discovery semantics") {
  SUBCASE("semi-known cell in line of sight") {
    World w = make_world(square({{{2.0, 0.0}, CellClass::SemiKnown}}));
    const auto found = w.lidar_scan();
    const auto c = *w.state().grid.world_to_grid(2.0, 0.0);
    CHECK(w.state().grid.discovered(c));
    CHECK(std::find(found.begin(), found.end(), c) != found.end());
    CHECK(w.lidar_scan().empty());
  }
  SUBCASE("unknown cell is never discovered") {
    World w = make_world(square({{{1.0, 0.0}, CellClass::Unknown}}));
    for (int i = 0; i < 3; ++i) w.lidar_scan();
    CHECK_FALSE(w.state().grid.discovered(*w.state().grid.world_to_grid(1.0, 0.0)));
  }
  SUBCASE("semi-known cell behind a known wall is occluded") {
    std::vector<std::pair<Eigen::Vector2d, CellClass>> cells;
    for (double y = -2.4; y <= 2.4; y += 0.05) cells.push_back({{1.0, y}, CellClass::Known});
    cells.push_back({{2.0, 0.0}, CellClass::SemiKnown});
    World w = make_world(square(cells));
    w.lidar_scan();
    CHECK_FALSE(w.state().grid.discovered(*w.state().grid.world_to_grid(2.0, 0.0)));
    CHECK(w.state().grid.discovered(*w.state().grid.world_to_grid(1.0, 0.0)));
  }
  SUBCASE("out of range is not discovered") {
    SimConfig sim;
    sim.lidar.range_m = 1.5;
    World w = make_world(square({{{2.0, 0.0}, CellClass::SemiKnown}}), {}, {2.0, 2.0, 0.0, 0.7}, sim);
    w.lidar_scan();
    CHECK(w.state().grid.discovered_count() == 0);
  }
}

TEST_CASE("discovery only grows") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.3, 2.3);
  std::vector<std::pair<Eigen::Vector2d, CellClass>> cells;
  for (int i = 0; i < 200; ++i) cells.push_back({{u(rng), u(rng)}, (i % 2) ? CellClass::SemiKnown : CellClass::Known});
  World w = make_world(square(cells), Pose2D{-2.0, -2.0, 0.7});
  std::size_t prev = 0;
  std::vector<std::uint8_t> seen(w.state().grid.size(), 0);
  for (int k = 0; k < 40; ++k) {
    for (int i = 0; i < 100; ++i) w.step(kZero, Wrench6{}, BaseVelocity{0.4, 0.2}, kZero);
    w.lidar_scan();
    const auto& g = w.state().grid;
    REQUIRE(g.discovered_count() >= prev);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (seen[i]) REQUIRE(g.discovered(i));
      seen[i] = g.discovered(i);
    }
    prev = g.discovered_count();
  }
  CHECK(prev > 0);
}

TEST_CASE("marker camera frustum") {
  // Place the object 0.3 m along the camera axis from the home end-effector.
  World probe = make_world(square());
  const Matrix4 ee = probe.arm_base_in_world() * probe.follower_ee_in_arm();
  const Vector3 front = ee.block<3, 1>(0, 3) + 0.3 * ee.block<3, 1>(0, 2);
  const Vector3 behind = ee.block<3, 1>(0, 3) - 0.3 * ee.block<3, 1>(0, 2);

  World w = make_world(square(), {}, ObjectConfig{front.x(), front.y(), 0.0, front.z()});
  const auto seen = w.marker_visible();
  REQUIRE(seen.has_value());
  CHECK((*seen - w.object_in_arm()).norm() == 0.0);

  World b = make_world(square(), {}, ObjectConfig{behind.x(), behind.y(), 0.0, behind.z()});
  CHECK_FALSE(b.marker_visible().has_value());

  const Vector3 far = ee.block<3, 1>(0, 3) + 2.0 * ee.block<3, 1>(0, 2);
  World f = make_world(square(), {}, ObjectConfig{far.x(), far.y(), 0.0, far.z()});
  CHECK_FALSE(f.marker_visible().has_value());
}

TEST_CASE("marker noise follows the configured model") {
  World probe = make_world(square());
  const Matrix4 ee = probe.arm_base_in_world() * probe.follower_ee_in_arm();
  const Vector3 front = ee.block<3, 1>(0, 3) + 0.3 * ee.block<3, 1>(0, 2);
  SimConfig sim;
  sim.camera.noise_sigma_m = 0.005;
  World w = make_world(square(), {}, ObjectConfig{front.x(), front.y(), 0.0, front.z()}, sim);
  const Vector3 truth = w.object_in_arm();
  Vector3 sum = Vector3::Zero();
  for (int i = 0; i < 1000; ++i) {
    const auto m = w.marker_visible();
    REQUIRE(m.has_value());
    REQUIRE(((*m - truth).cwiseAbs().array() <= 4 * 0.005).all());
    sum += *m - truth;
  }
  const Vector3 mean = sum / 1000.0;
  CHECK((mean.cwiseAbs().array() <= 3 * 0.005 / std::sqrt(1000.0)).all());
}

TEST_CASE("graspable band") {
  const GraspableConfig g;
  CHECK(graspable(Vector3(0.30, 0.0, 0.25), g));
  CHECK_FALSE(graspable(Vector3(0.50, 0.0, 0.25), g));
  CHECK_FALSE(graspable(Vector3(0.30, 0.5, 0.25), g));
  CHECK(graspable(Vector3(0.20, 0.2, 0.0), g));
  CHECK(graspable(Vector3(0.45, -0.2, 0.0), g));
  CHECK_FALSE(graspable(Vector3(0.19, 0.0, 0.0), g));
}

TEST_CASE("grasp attaches within epsilon and is idempotent") {
  World probe = make_world(square());
  const Vector3 ee = probe.follower_ee_world();
  World near = make_world(square(), {}, ObjectConfig{ee.x() + 0.01, ee.y(), 0.0, ee.z()});
  CHECK(near.try_grasp());
  CHECK(near.state().attached);
  CHECK(near.try_grasp());
  CHECK(near.state().attached);

  World far = make_world(square(), {}, ObjectConfig{ee.x() + 0.05, ee.y(), 0.0, ee.z()});
  CHECK_FALSE(far.try_grasp());
  CHECK_FALSE(far.state().attached);

  // Attached object rides with the end-effector and the base.
  const Vector3 offset = near.state().object_world - near.follower_ee_world();
  JointVector7 tau = kZero;
  tau[0] = 2.0;
  for (int i = 0; i < 300; ++i) near.step(kZero, Wrench6{}, BaseVelocity{0.3, 0.1}, tau);
  CHECK(std::abs((near.state().object_world - near.follower_ee_world()).norm() - offset.norm()) < 1e-9);
  near.release_object();
  const Vector3 dropped = near.state().object_world;
  for (int i = 0; i < 100; ++i) near.step(kZero, Wrench6{}, BaseVelocity{0.3, 0.0}, tau);
  CHECK(near.state().object_world == dropped);
}

TEST_CASE("identical command streams give identical states") {
  auto run = [] {
    World w = make_world(square({{{1.0, 0.5}, CellClass::SemiKnown}, {{0.0, 1.0}, CellClass::Unknown}}));
    std::mt19937_64 rng(42);
    std::normal_distribution<double> n;
    for (int i = 0; i < 3000; ++i) {
      JointVector7 t1, t2;
      for (int j = 0; j < 7; ++j) {
        t1[j] = n(rng);
        t2[j] = n(rng);
      }
      const Wrench6 op{Vector3(n(rng), n(rng), n(rng)), Vector3(n(rng), n(rng), n(rng)) * 0.1};
      w.step(t1, op, BaseVelocity{0.3 + 0.1 * n(rng), 0.3 * n(rng)}, t2);
      if (i % 100 == 0) w.lidar_scan();
    }
    return w.state();
  };
  const WorldState a = run(), b = run();
  CHECK(a.q_lra == b.q_lra);
  CHECK(a.qd_lra == b.qd_lra);
  CHECK(a.q_fra == b.q_fra);
  CHECK(a.base == b.base);
  CHECK(a.grid.discovered_count() == b.grid.discovered_count());
  CHECK(a.collisions.size() == b.collisions.size());
}

TEST_CASE("unforced joints lose kinetic energy") {
  World w = make_world(square());
  // Spin the joints up, then coast.
  JointVector7 tau;
  tau << 3, -2, 4, 1, -3, 2, 5;
  for (int i = 0; i < 50; ++i) w.step(tau, Wrench6{}, BaseVelocity{}, -tau);
  double prev = w.state().qd_lra.squaredNorm() + w.state().qd_fra.squaredNorm();
  for (int i = 0; i < 2000; ++i) {
    w.step(kZero, Wrench6{}, BaseVelocity{}, kZero);
    const double e = w.state().qd_lra.squaredNorm() + w.state().qd_fra.squaredNorm();
    REQUIRE(e <= prev);
    prev = e;
  }
}

TEST_CASE("base has no sideslip") {
  World w = make_world(square());
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> uv(-0.5, 0.5), uw(-1.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const BaseVelocity cmd{uv(rng), uw(rng)};
    for (int i = 0; i < 10; ++i) {
      const Pose2D a = w.state().base;
      w.step(kZero, Wrench6{}, cmd, kZero);
      const Pose2D b = w.state().base;
      // The chord of a constant-curvature arc points along the mid-step heading.
      const double mid = a.gamma + 0.5 * angle_diff(b.gamma, a.gamma);
      const double lateral = -(b.x - a.x) * std::sin(mid) + (b.y - a.y) * std::cos(mid);
      REQUIRE(std::abs(lateral) < 1e-12);
    }
    if (std::abs(w.state().base.x) > 1.5 || std::abs(w.state().base.y) > 1.5) {
      w = make_world(square());
    }
  }
}

TEST_CASE("every pass through an occupied cell yields a collision") {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-1.8, 1.8), ug(-kPi, kPi);
  std::uniform_int_distribution<int> cls(1, 3);
  int with_contact = 0;
  for (int k = 0; k < 30; ++k) {
    std::vector<std::pair<Eigen::Vector2d, CellClass>> cells;
    for (int i = 0; i < 15; ++i) cells.push_back({{u(rng), u(rng)}, static_cast<CellClass>(cls(rng))});
    Pose2D start{u(rng), u(rng), 0.0};
    if (k % 3 != 0) start.gamma = std::atan2(cells[0].first.y() - start.y, cells[0].first.x() - start.x);
    else start.gamma = ug(rng);
    World w = make_world(square(cells), start);
    if (w.state().in_collision) continue;
    bool passed_through = false;
    for (int i = 0; i < 4000; ++i) {
      w.step(kZero, Wrench6{}, BaseVelocity{0.5, 0.0}, kZero);
      const auto c = w.state().grid.world_to_grid(w.state().base);
      if (!c) break;
      if (w.state().grid.occupied(*c)) passed_through = true;
    }
    if (passed_through) {
      ++with_contact;
      REQUIRE_FALSE(w.state().collisions.empty());
    }
  }
  CHECK(with_contact >= 5);
}
