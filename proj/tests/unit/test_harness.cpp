#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <random>

#include "unitele/core/angles.hpp"
#include "unitele/harness/batch.hpp"
#include "unitele/harness/trial.hpp"

using namespace unitele;
using namespace unitele::harness;

namespace {

ScenarioConfig default_scenario() { return load_scenario(std::string(UNITELE_DATA_DIR) + "/scenarios/default.json"); }

// One full trial per (condition, seed), shared across test cases.
const TrialRecord& cached_trial(int condition, std::uint64_t seed) {
  static std::map<std::pair<int, std::uint64_t>, TrialRecord> cache;
  auto key = std::make_pair(condition, seed);
  auto it = cache.find(key);
  if (it == cache.end()) {
    TrialOptions o;
    o.keep_rows = true;
    o.keep_inputs = true;
    it = cache.emplace(key, run_trial(default_scenario(), condition, seed, o)).first;
  }
  return it->second;
}

std::vector<Point2> straight(double len, double step) {
  std::vector<Point2> p;
  for (double x = 0; x <= len + 1e-12; x += step) p.emplace_back(x, 0.0);
  return p;
}

OperatorObservation nav_observation(const std::vector<Point2>* path) {
  OperatorObservation o;
  o.time = 1.0;
  o.leader_pose.position = Vector3(0.4, 0.0, 0.4);
  o.leader_home.position = Vector3(0.4, 0.0, 0.4);
  o.path = path;
  o.object_xy = Point2(8.0, 0.0);
  return o;
}

}  // namespace

TEST_CASE("deviation of a trajectory from itself is zero") {
  const auto ref = straight(3.0, 0.1);
  const auto m = deviation_mae(ref, ref);
  CHECK(m.mae_x < 1e-12);
  CHECK(m.mae_y < 1e-12);
}

TEST_CASE("constant lateral shift of a straight reference") {
  const auto ref = straight(3.0, 0.5);
  std::vector<Point2> act;
  for (double x = 0.2; x < 2.8; x += 0.07) act.emplace_back(x, 0.1);
  const auto m = deviation_mae(act, ref);
  CHECK(m.mae_y == doctest::Approx(0.1).epsilon(1e-9));
  CHECK(m.mae_x == doctest::Approx(0.0).scale(1e-9));
  CHECK(m.samples == act.size());
}

TEST_CASE("radial shift of a circular arc is recovered as normal deviation") {
  const double r = 2.0, shift = 0.1;
  std::vector<Point2> ref, act;
  for (int i = 0; i <= 60; ++i) {
    const double a = kPi * i / 60.0;
    ref.emplace_back(r * std::cos(a), r * std::sin(a));
  }
  for (int i = 5; i <= 55; ++i) {
    const double a = kPi * (i + 0.3) / 60.0;
    act.emplace_back((r + shift) * std::cos(a), (r + shift) * std::sin(a));
  }
  const auto m = deviation_mae(act, ref);
  CHECK(std::abs(m.mae_y - shift) <= 0.02 * shift);
}

TEST_CASE("deviation is invariant under a joint rigid transform") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Point2> ref{{0, 0}}, act;
    for (int i = 0; i < 8; ++i) ref.push_back(ref.back() + Point2(1.0 + 0.5 * u(rng), 0.8 * u(rng)));
    for (const auto& p : resample_by_arc_length(ref, 0.13)) act.push_back(p + 0.2 * Point2(u(rng), u(rng)));
    const double th = kPi * u(rng);
    const Eigen::Rotation2Dd rot(th);
    const Point2 t(5 * u(rng), 5 * u(rng));
    std::vector<Point2> ref2, act2;
    for (const auto& p : ref) ref2.push_back(rot * p + t);
    for (const auto& p : act) act2.push_back(rot * p + t);
    const auto a = deviation_mae(act, ref), b = deviation_mae(act2, ref2);
    CHECK(a.mae_x == doctest::Approx(b.mae_x).epsilon(1e-9));
    CHECK(a.mae_y == doctest::Approx(b.mae_y).epsilon(1e-9));
  }
}

TEST_CASE("deviation input errors") {
  CHECK_THROWS_AS(deviation_mae({{0, 0}}, {{0, 0}}), std::invalid_argument);
  CHECK_THROWS_AS(deviation_mae({}, straight(1.0, 0.5)), std::invalid_argument);
}

TEST_CASE("resampling keeps length and spacing") {
  const std::vector<Point2> poly{{0, 0}, {1, 0}, {1, 1.5}};
  const auto r = resample_by_arc_length(poly, 0.01);
  CHECK(polyline_length(r) == doctest::Approx(2.5).epsilon(1e-9));
  for (std::size_t i = 1; i + 1 < r.size(); ++i) CHECK((r[i] - r[i - 1]).norm() <= 0.01 + 1e-12);
}

TEST_CASE("operator wrench composition") {
  Wrench6 cue;
  cue.force = Vector3(2.0, -1.0, 0.5);
  cue.torque = Vector3(0.0, 0.1, 0.7);
  const auto w = compose_operator_wrench(Wrench6{}, cue, 0.75, Vector6::Zero(), false);
  CHECK(w.as_vector() == (cue * 0.75).as_vector());
  const auto d = compose_operator_wrench(cue, cue, 1.0, Vector6::Ones(), true);
  CHECK(d.is_zero());
}

TEST_CASE("ignoring operator output does not depend on the cue") {
  const OperatorConfig cfg;
  const auto path = straight(8.0, 0.05);
  OperatorModel a(OperatorKind::Ignoring, cfg, {}, 11), b(OperatorKind::Ignoring, cfg, {}, 11);
  auto oa = nav_observation(&path), ob = nav_observation(&path);
  ob.cue.force = Vector3(9.0, 0, 0);
  ob.cue.torque = Vector3(0, 0, -3.0);
  for (int i = 0; i < 200; ++i) {
    oa.time = ob.time = 1.0 + i * 0.001;
    CHECK(a.step(oa, 0.001) == b.step(ob, 0.001));
  }
}

TEST_CASE("compliant operator adds the cue scaled by its compliance") {
  OperatorConfig cfg;
  cfg.cue_compliance = 0.6;
  const auto path = straight(8.0, 0.05);
  OperatorModel a(OperatorKind::Compliant, cfg, {}, 5), b(OperatorKind::Compliant, cfg, {}, 5);
  auto oa = nav_observation(&path), ob = nav_observation(&path);
  ob.cue.force = Vector3(4.0, 0, 0);
  const auto wa = a.step(oa, 0.001).wrench, wb = b.step(ob, 0.001).wrench;
  CHECK((wb.as_vector() - wa.as_vector() - (ob.cue * 0.6).as_vector()).norm() < 1e-12);
}

TEST_CASE("distracted operator is silent inside its windows") {
  const OperatorConfig cfg;
  const auto path = straight(8.0, 0.05);
  OperatorModel m(OperatorKind::Distracted, cfg, {}, 3);
  REQUIRE(!m.distraction_starts().empty());
  const double t0 = m.distraction_starts().front();
  CHECK(t0 >= cfg.distraction_gap_min_s);
  CHECK(t0 <= cfg.distraction_gap_max_s);
  auto o = nav_observation(&path);
  o.cue.force = Vector3(5, 0, 0);
  o.time = t0 + 0.7;
  CHECK(m.distracted_at(o.time));
  const auto in = m.step(o, 0.001);
  CHECK(in.wrench.is_zero());
  CHECK(!m.distracted_at(t0 + cfg.distraction_duration_s + 1e-9));

  const auto& s = m.distraction_starts();
  for (std::size_t i = 1; i < s.size(); ++i) {
    const double gap = s[i] - s[i - 1] - cfg.distraction_duration_s;
    CHECK(gap >= cfg.distraction_gap_min_s);
    CHECK(gap <= cfg.distraction_gap_max_s);
  }
  OperatorModel again(OperatorKind::Distracted, cfg, {}, 3), other(OperatorKind::Distracted, cfg, {}, 4);
  CHECK(again.distraction_starts() == s);
  CHECK(other.distraction_starts() != s);
  OperatorModel compliant(OperatorKind::Compliant, cfg, {}, 3);
  CHECK(!compliant.distracted_at(t0 + 0.7));
}

TEST_CASE("operator kind names round-trip") {
  for (auto k : {OperatorKind::Compliant, OperatorKind::Ignoring, OperatorKind::Distracted})
    CHECK(parse_operator_kind(operator_kind_name(k)) == k);
  CHECK_THROWS_AS(parse_operator_kind("sleepy"), std::invalid_argument);
  CHECK(default_operator(3) == OperatorKind::Distracted);
  CHECK(default_operator(1) == OperatorKind::Compliant);
}

TEST_CASE("condition validation") {
  CHECK_THROWS_AS(validate_condition(0), std::invalid_argument);
  CHECK_THROWS_AS(validate_condition(4), std::invalid_argument);
  CHECK(validate_condition(2) == 2);
}

TEST_CASE("guided compliant trial completes before the timeout") {
  const auto& r = cached_trial(1, 1);
  CHECK(r.summary.outcome == Outcome::Completed);
  CHECK(r.summary.total_time_s < default_scenario().sim.timeout_s);
  CHECK(r.summary.handshake_ok);
  CHECK(r.summary.unsafe_base_ticks == 0);
  CHECK(r.summary.cue_ticks > 0);
  CHECK(r.summary.deviation.samples > 0);
  CHECK(r.summary.nav_time_s + r.summary.manip_time_s + r.summary.switch_time_s ==
        doctest::Approx(r.summary.total_time_s).epsilon(1e-6));
  for (std::size_t i = 1; i < r.rows.size(); ++i) REQUIRE(r.rows[i].time > r.rows[i - 1].time);
}

TEST_CASE("trials are deterministic") {
  const auto& a = cached_trial(1, 1);
  const auto b = run_trial(default_scenario(), 1, 1);
  CHECK(a.summary.record_hash == b.summary.record_hash);
  const auto c = run_trial(default_scenario(), 1, 2);
  CHECK(a.summary.record_hash != c.summary.record_hash);
}

TEST_CASE("unguided trial renders no cue yet logs a reference") {
  const auto& r = cached_trial(2, 1);
  CHECK(r.summary.cue_ticks == 0);
  bool reference_moves = false;
  for (const auto& row : r.rows) {
    REQUIRE(row.cue.is_zero());
    if (row.mode == modes::Mode::Navigation &&
        std::hypot(row.lookahead.x - row.base.x, row.lookahead.y - row.base.y) > 0.05)
      reference_moves = true;
  }
  CHECK(reference_moves);
}

TEST_CASE("replaying the input stream reproduces every row") {
  const auto& r = cached_trial(1, 1);
  const auto re = replay_trial(default_scenario(), 1, 1, r.summary.operator_kind, r.inputs, true);
  CHECK(re.summary.record_hash == r.summary.record_hash);
  REQUIRE(re.rows.size() == r.rows.size());
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    REQUIRE(re.rows[i].base.x == r.rows[i].base.x);
    REQUIRE(re.rows[i].q_fra == r.rows[i].q_fra);
    REQUIRE(re.rows[i].leader_pose.position == r.rows[i].leader_pose.position);
  }
}

TEST_CASE("record files round-trip through replay") {
  const auto& r = cached_trial(1, 1);
  const auto dir = std::filesystem::temp_directory_path() / "unitele_record_test";
  std::filesystem::remove_all(dir);
  write_record(dir, r);
  for (const char* f : {"summary.json", "ticks.csv", "inputs.csv", "events.csv"})
    CHECK(std::filesystem::exists(dir / f));
  const auto loaded = load_record(dir);
  CHECK(loaded.summary.record_hash == r.summary.record_hash);
  CHECK(loaded.summary.scenario_hash == r.summary.scenario_hash);
  CHECK(loaded.inputs == r.inputs);
  const auto re = replay_trial(loaded.scenario, loaded.summary.condition, loaded.summary.seed,
                               loaded.summary.operator_kind, loaded.inputs);
  CHECK(re.summary.record_hash == r.summary.record_hash);
  std::filesystem::remove_all(dir);
}

TEST_CASE("planner reference does not depend on the condition") {
  // Both conditions see the same world until the operator first moves the leader.
  auto cfg = default_scenario();
  auto a = Simulation::from_scenario(cfg, 1);
  auto b = Simulation::from_scenario(cfg, 2);
  CHECK(a.global_path().waypoints == b.global_path().waypoints);
  const OperatorInput hold;
  a.step(hold);
  b.step(hold);
  CHECK(a.local_plan().command == b.local_plan().command);
  CHECK(a.last_row().lookahead == b.last_row().lookahead);
}

TEST_CASE("mean and standard error") {
  const auto one = mean_sem({0.3});
  CHECK(one.mean == 0.3);
  CHECK(one.sem == 0.0);
  const auto m = mean_sem({1, 2, 3, 4});
  CHECK(m.mean == doctest::Approx(2.5));
  CHECK(m.sem == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
}

TEST_CASE("sign test p-values") {
  auto run = [](int wins, int losses, int ties) {
    std::vector<double> a, b;
    for (int i = 0; i < wins; ++i) a.push_back(0), b.push_back(1);
    for (int i = 0; i < losses; ++i) a.push_back(1), b.push_back(0);
    for (int i = 0; i < ties; ++i) a.push_back(1), b.push_back(1);
    return sign_test(a, b);
  };
  CHECK(run(15, 5, 0).p_value < 0.05);
  CHECK(run(14, 6, 0).p_value > 0.05);
  CHECK(run(20, 0, 0).p_value == doctest::Approx(2.0 / 1048576.0));
  const auto t = run(3, 3, 4);
  CHECK(t.ties == 4);
  CHECK(t.p_value == doctest::Approx(1.0));
  CHECK_THROWS_AS(sign_test({1}, {1, 2}), std::invalid_argument);
}

TEST_CASE("batch statistics aggregate the trial summaries") {
  BatchResult r;
  for (std::uint64_t s = 1; s <= 3; ++s) {
    r.trials.push_back(cached_trial(1, 1).summary);
    r.trials.back().seed = s;
    r.trials.back().deviation.mae_y = 0.1 * static_cast<double>(s);
  }
  summarize(r);
  REQUIRE(r.stats.size() == 1);
  CHECK(r.stats[0].mae_y.mean == doctest::Approx(0.2));
  CHECK(r.stats[0].manip_time.mean == doctest::Approx(cached_trial(1, 1).summary.manip_time_s));
  CHECK(r.warnings.empty());
}

TEST_CASE("single-seed batch warns and reports zero SEM") {
  BatchOptions o;
  o.conditions = {2};
  o.n_seeds = 1;
  o.workers = 1;
  const auto r = run_batch(default_scenario(), o);
  REQUIRE(r.stats.size() == 1);
  CHECK(r.stats[0].mae_y.sem == 0.0);
  CHECK(r.stats[0].mae_y.mean == r.trials[0].deviation.mae_y);
  CHECK(r.warnings.size() == 1);
  CHECK(batch_table(r).find("warning") != std::string::npos);
  CHECK_THROWS_AS(run_batch(default_scenario(), BatchOptions{{1}, 0}), std::invalid_argument);
}
