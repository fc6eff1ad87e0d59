#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "unitele/core/hash.hpp"
#include "unitele/harness/metrics.hpp"
#include "unitele/harness/operator.hpp"
#include "unitele/harness/simulation.hpp"

namespace unitele::harness {

struct TrialSummary {
  std::string scenario_hash;
  std::string record_hash;
  int condition = 1;
  std::uint64_t seed = 0;
  OperatorKind operator_kind = OperatorKind::Compliant;
  Outcome outcome = Outcome::Running;
  std::uint64_t ticks = 0;
  DeviationMetrics deviation;  // navigation phase, against the active global plan
  double nav_time_s = 0.0;
  double manip_time_s = 0.0;  // Manipulation and the autonomous drop
  double switch_time_s = 0.0;
  double total_time_s = 0.0;
  double path_length_m = 0.0;
  std::size_t collisions = 0;
  std::size_t replans = 0;
  // invariants checked while the trial ran
  std::uint64_t unsafe_base_ticks = 0;  // non-navigation ticks with a nonzero base command
  bool handshake_ok = true;
  std::uint64_t cue_ticks = 0;  // ticks with a nonzero cue on the leader
};

struct TrialRecord {
  TrialSummary summary;
  std::string scenario_text;  // canonical scenario, seed applied
  std::vector<TrialEvent> events;
  std::vector<PlanEpoch> plans;
  std::vector<Point2> base_trace;  // every 10th tick
  std::vector<TickRow> rows;       // only with TrialOptions::keep_rows
  std::vector<OperatorInput> inputs;
};

struct TrialOptions {
  /// Defaults to Distracted for condition 3 and Compliant otherwise.
  std::optional<OperatorKind> operator_kind;
  bool keep_rows = false;
  bool keep_inputs = false;
};

OperatorKind default_operator(int condition);

OperatorContext operator_context(const ScenarioConfig& c);

/// Copy of `cfg` with `seed` applied and the map and chain paths made absolute.
ScenarioConfig prepare_scenario(const ScenarioConfig& cfg, std::uint64_t seed);

/// Folds the row stream of a running Simulation into a TrialRecord: hash, metrics and
/// invariant checks. Used by run_trial, replay_trial and the bridge.
class TrialRecorder {
 public:
  TrialRecorder(const Simulation& sim, OperatorKind kind, bool keep_rows);
  void add(const TickRow& row, const OperatorInput& input);
  TrialRecord finish();

 private:
  const Simulation& sim_;
  TrialRecord rec_;
  bool keep_rows_;
  Fnv1a h_;
  TickRow prev_;
  bool have_prev_ = false;
  bool homed_ = false;
  bool left_navigation_ = false;
  std::vector<std::vector<Point2>> samples_;
};

/// One closed-loop trial. `seed` replaces the scenario seed.
TrialRecord run_trial(const ScenarioConfig& cfg, int condition, std::uint64_t seed, const TrialOptions& opt = {});

/// Re-simulates a recorded input stream. The scripted operator is not consulted.
TrialRecord replay_trial(const ScenarioConfig& cfg, int condition, std::uint64_t seed, OperatorKind kind,
                         const std::vector<OperatorInput>& inputs, bool keep_rows = false);

/// Hash of the scenario, its map and its chain.
std::string scenario_fingerprint(const ScenarioConfig& cfg);

/// summary.json, ticks.csv (every `row_stride` ticks), inputs.csv, trace.csv and events.csv.
void write_record(const std::filesystem::path& dir, const TrialRecord& rec, int row_stride = 10);

struct LoadedRecord {
  ScenarioConfig scenario;
  TrialSummary summary;
  std::vector<OperatorInput> inputs;
};
LoadedRecord load_record(const std::filesystem::path& dir);

std::string summary_json(const TrialRecord& rec);

}  // namespace unitele::harness
