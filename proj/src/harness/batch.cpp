#include "unitele/harness/batch.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace unitele::harness {

using nlohmann::json;

MeanSem mean_sem(const std::vector<double>& xs) {
  MeanSem m;
  if (xs.empty()) return m;
  double sum = 0.0;
  for (double x : xs) sum += x;
  m.mean = sum / static_cast<double>(xs.size());
  if (xs.size() < 2) return m;
  double ss = 0.0;
  for (double x : xs) ss += (x - m.mean) * (x - m.mean);
  const double n = static_cast<double>(xs.size());
  m.sem = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  return m;
}

SignTest sign_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("sign_test: unpaired samples");
  SignTest t;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) ++t.wins;
    else if (a[i] > b[i]) ++t.losses;
    else ++t.ties;
  }
  const int n = t.wins + t.losses;
  if (n == 0) return t;
  const int k = std::min(t.wins, t.losses);
  // P(X <= k) for X ~ Binomial(n, 1/2), accumulated in log space
  double tail = 0.0;
  for (int i = 0; i <= k; ++i)
    tail += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) - n * std::log(2.0));
  t.p_value = std::min(1.0, 2.0 * tail);
  return t;
}

std::string record_dir_name(int condition, std::uint64_t seed) {
  return "cond" + std::to_string(condition) + "_seed" + std::to_string(seed);
}

double metric_of(const TrialSummary& s, const std::string& name) {
  if (name == "mae_x") return s.deviation.mae_x;
  if (name == "mae_y") return s.deviation.mae_y;
  if (name == "nav_time") return s.nav_time_s;
  if (name == "manip_time") return s.manip_time_s;
  if (name == "switch_time") return s.switch_time_s;
  if (name == "total_time") return s.total_time_s;
  if (name == "path_length") return s.path_length_m;
  if (name == "collisions") return static_cast<double>(s.collisions);
  throw std::invalid_argument("unknown metric '" + name + "'");
}

namespace {

std::vector<double> column(const std::vector<TrialSummary>& trials, int condition, const std::string& metric) {
  std::vector<double> out;
  for (const auto& t : trials)
    if (t.condition == condition) out.push_back(metric_of(t, metric));
  return out;
}

json ms_json(const MeanSem& m) { return json{{"mean", m.mean}, {"sem", m.sem}}; }

}  // namespace

void summarize(BatchResult& r) {
  r.stats.clear();
  r.comparisons.clear();
  std::vector<int> conds;
  for (const auto& t : r.trials)
    if (std::find(conds.begin(), conds.end(), t.condition) == conds.end()) conds.push_back(t.condition);
  std::sort(conds.begin(), conds.end());

  for (int c : conds) {
    ConditionStats s;
    s.condition = c;
    for (const auto& t : r.trials)
      if (t.condition == c) {
        ++s.trials;
        if (t.outcome == Outcome::Completed) ++s.completed;
      }
    s.mae_x = mean_sem(column(r.trials, c, "mae_x"));
    s.mae_y = mean_sem(column(r.trials, c, "mae_y"));
    s.nav_time = mean_sem(column(r.trials, c, "nav_time"));
    s.manip_time = mean_sem(column(r.trials, c, "manip_time"));
    s.switch_time = mean_sem(column(r.trials, c, "switch_time"));
    s.total_time = mean_sem(column(r.trials, c, "total_time"));
    s.path_length = mean_sem(column(r.trials, c, "path_length"));
    s.collisions = mean_sem(column(r.trials, c, "collisions"));
    if (s.trials == 1)
      r.warnings.push_back("condition " + std::to_string(c) + ": single trial, SEM reported as 0");
    r.stats.push_back(s);
  }

  auto has = [&](int c) { return std::find(conds.begin(), conds.end(), c) != conds.end(); };
  for (auto [a, b] : {std::pair{1, 2}, std::pair{3, 2}}) {
    if (!has(a) || !has(b)) continue;
    for (const char* m : {"mae_y", "manip_time", "nav_time"}) {
      const auto xa = column(r.trials, a, m), xb = column(r.trials, b, m);
      if (xa.size() != xb.size()) continue;
      Comparison cmp;
      cmp.metric = m;
      cmp.a = a;
      cmp.b = b;
      cmp.mean_a = mean_sem(xa).mean;
      cmp.mean_b = mean_sem(xb).mean;
      cmp.test = sign_test(xa, xb);
      r.comparisons.push_back(cmp);
    }
  }
}

BatchResult run_batch(const ScenarioConfig& cfg, const BatchOptions& opt) {
  if (opt.n_seeds < 1) throw std::invalid_argument("n_seeds must be at least 1");
  for (int c : opt.conditions) validate_condition(c);
  const auto t0 = std::chrono::steady_clock::now();

  struct Job {
    int condition;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (int c : opt.conditions)
    for (int i = 0; i < opt.n_seeds; ++i) jobs.push_back({c, opt.first_seed + static_cast<std::uint64_t>(i)});

  BatchResult r;
  r.trials.resize(jobs.size());
  std::vector<std::string> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        TrialOptions o;
        o.operator_kind = opt.operator_kind;
        o.keep_inputs = opt.record_dir.has_value();
        TrialRecord rec = run_trial(cfg, jobs[i].condition, jobs[i].seed, o);
        if (opt.record_dir) write_record(*opt.record_dir / record_dir_name(jobs[i].condition, jobs[i].seed), rec);
        r.trials[i] = std::move(rec.summary);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  unsigned n = opt.workers > 0 ? static_cast<unsigned>(opt.workers) : std::max(1u, std::thread::hardware_concurrency());
  n = std::min<unsigned>(n, static_cast<unsigned>(jobs.size()));
  std::vector<std::thread> pool;
  for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (std::size_t i = 0; i < jobs.size(); ++i)
    if (!errors[i].empty())
      throw std::runtime_error("condition " + std::to_string(jobs[i].condition) + " seed " +
                               std::to_string(jobs[i].seed) + ": " + errors[i]);

  summarize(r);
  r.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::string batch_json(const BatchResult& r) {
  json trials = json::array();
  for (const auto& t : r.trials)
    trials.push_back({{"condition", t.condition},
                      {"seed", t.seed},
                      {"operator", operator_kind_name(t.operator_kind)},
                      {"outcome", outcome_name(t.outcome)},
                      {"record_hash", t.record_hash},
                      {"mae_x_m", t.deviation.mae_x},
                      {"mae_y_m", t.deviation.mae_y},
                      {"nav_time_s", t.nav_time_s},
                      {"manip_time_s", t.manip_time_s},
                      {"switch_time_s", t.switch_time_s},
                      {"total_time_s", t.total_time_s},
                      {"path_length_m", t.path_length_m},
                      {"collisions", t.collisions}});
  json stats = json::array();
  for (const auto& s : r.stats)
    stats.push_back({{"condition", s.condition},
                     {"trials", s.trials},
                     {"completed", s.completed},
                     {"mae_x_m", ms_json(s.mae_x)},
                     {"mae_y_m", ms_json(s.mae_y)},
                     {"nav_time_s", ms_json(s.nav_time)},
                     {"manip_time_s", ms_json(s.manip_time)},
                     {"switch_time_s", ms_json(s.switch_time)},
                     {"total_time_s", ms_json(s.total_time)},
                     {"path_length_m", ms_json(s.path_length)},
                     {"collisions", ms_json(s.collisions)}});
  json cmps = json::array();
  for (const auto& c : r.comparisons)
    cmps.push_back({{"metric", c.metric},
                    {"a", c.a},
                    {"b", c.b},
                    {"mean_a", c.mean_a},
                    {"mean_b", c.mean_b},
                    {"wins", c.test.wins},
                    {"losses", c.test.losses},
                    {"ties", c.test.ties},
                    {"p_value", c.test.p_value}});
  json j{{"trials", trials}, {"conditions", stats}, {"comparisons", cmps}, {"warnings", r.warnings}};
  return j.dump(2) + "\n";
}

std::string batch_table(const BatchResult& r) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-4s %5s %5s  %-17s %-17s %-15s %-15s %-15s %-11s\n", "cond", "n", "done",
                "mae_x [m]", "mae_y [m]", "nav [s]", "manip [s]", "total [s]", "collisions");
  os << buf;
  for (const auto& s : r.stats) {
    std::snprintf(buf, sizeof buf,
                  "%-4d %5d %5d  %.4f +- %.4f   %.4f +- %.4f   %6.2f +- %4.2f  %6.2f +- %4.2f  %6.2f +- %4.2f  %4.2f\n",
                  s.condition, s.trials, s.completed, s.mae_x.mean, s.mae_x.sem, s.mae_y.mean, s.mae_y.sem,
                  s.nav_time.mean, s.nav_time.sem, s.manip_time.mean, s.manip_time.sem, s.total_time.mean,
                  s.total_time.sem, s.collisions.mean);
    os << buf;
  }
  if (!r.comparisons.empty()) os << "\npaired sign tests (lower is better for the first condition)\n";
  for (const auto& c : r.comparisons) {
    std::snprintf(buf, sizeof buf, "  %-10s %d vs %d: %.4f vs %.4f  wins %d losses %d ties %d  p = %.4g\n",
                  c.metric.c_str(), c.a, c.b, c.mean_a, c.mean_b, c.test.wins, c.test.losses, c.test.ties,
                  c.test.p_value);
    os << buf;
  }
  for (const auto& w : r.warnings) os << "warning: " << w << "\n";
  return os.str();
}

}  // namespace unitele::harness
