#pragma once

#include <string>
#include <vector>

#include "unitele/harness/trial.hpp"

namespace unitele::harness {

struct MeanSem {
  double mean = 0.0;
  double sem = 0.0;
};

/// Mean and standard error of the mean; SEM is 0 for fewer than two samples.
MeanSem mean_sem(const std::vector<double>& xs);

/// Two-sided exact sign test: wins of a over b, losses, ties and the p-value. Ties are excluded.
struct SignTest {
  int wins = 0;
  int losses = 0;
  int ties = 0;
  double p_value = 1.0;
};
SignTest sign_test(const std::vector<double>& a, const std::vector<double>& b);

struct ConditionStats {
  int condition = 1;
  int trials = 0;
  int completed = 0;
  MeanSem mae_x, mae_y, nav_time, manip_time, switch_time, total_time, path_length, collisions;
};

/// Paired comparison of one metric, lower is better for `a`.
struct Comparison {
  std::string metric;
  int a = 1;
  int b = 2;
  double mean_a = 0.0;
  double mean_b = 0.0;
  SignTest test;
};

struct BatchOptions {
  std::vector<int> conditions{1, 2, 3};
  int n_seeds = 20;
  std::uint64_t first_seed = 1;
  int workers = 0;  // 0: hardware concurrency
  std::optional<OperatorKind> operator_kind;
  /// When set, each trial is written to <record_dir>/cond<c>_seed<s>.
  std::optional<std::filesystem::path> record_dir;
};

struct BatchResult {
  std::vector<TrialSummary> trials;  // by condition, then seed
  std::vector<ConditionStats> stats;
  std::vector<Comparison> comparisons;
  std::vector<std::string> warnings;
  double wall_s = 0.0;
};

std::string record_dir_name(int condition, std::uint64_t seed);

BatchResult run_batch(const ScenarioConfig& cfg, const BatchOptions& opt);

/// Per-condition statistics and paired comparisons from already-run trials.
void summarize(BatchResult& r);

std::string batch_json(const BatchResult& r);
std::string batch_table(const BatchResult& r);

/// Metric of a summary by name: mae_x, mae_y, nav_time, manip_time, switch_time, total_time,
/// path_length, collisions.
double metric_of(const TrialSummary& s, const std::string& name);

}  // namespace unitele::harness
