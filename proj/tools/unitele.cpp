// unitele: run, batch, replay, plot and serve shared-control trials.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "plot.hpp"
#include "unitele/bridge/server.hpp"
#include "unitele/harness/batch.hpp"
#include "unitele/harness/trial.hpp"
#include "unitele/sim/world.hpp"

namespace fs = std::filesystem;
using namespace unitele;
using namespace unitele::harness;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitFault = 3;

// Bad arguments or inputs.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path default_scenario() {
#ifdef UNITELE_DATA_DIR
  return fs::path(UNITELE_DATA_DIR) / "scenarios" / "default.json";
#else
  return "data/scenarios/default.json";
#endif
}

fs::path output_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("UNITELE_OUT_DIR"); env && *env) return env;
  return "out";
}

ScenarioConfig load(const fs::path& path) {
  try {
    return load_scenario(path);
  } catch (const ScenarioError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void check_condition(int c) {
  try {
    validate_condition(c);
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
}

std::optional<OperatorKind> operator_flag(const std::string& name) {
  if (name.empty()) return std::nullopt;
  try {
    return parse_operator_kind(name);
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
}

void print_summary(const TrialSummary& s) {
  std::printf("condition %d seed %llu operator %s: %s after %.2f s\n", s.condition,
              static_cast<unsigned long long>(s.seed), operator_kind_name(s.operator_kind), outcome_name(s.outcome),
              s.total_time_s);
  std::printf("  mae_x %.4f m  mae_y %.4f m  nav %.2f s  manip %.2f s  switch %.2f s\n", s.deviation.mae_x,
              s.deviation.mae_y, s.nav_time_s, s.manip_time_s, s.switch_time_s);
  std::printf("  path %.2f m  collisions %zu  replans %zu  unsafe base ticks %llu  handshake %s\n", s.path_length_m,
              s.collisions, s.replans, static_cast<unsigned long long>(s.unsafe_base_ticks),
              s.handshake_ok ? "ok" : "FAILED");
  std::printf("  record %s\n", s.record_hash.c_str());
}

int trial_exit(const TrialSummary& s) { return s.outcome == Outcome::Fault ? kExitFault : kExitOk; }

std::vector<int> parse_conditions(const std::string& list) {
  std::vector<int> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      const int c = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      check_condition(c);
      out.push_back(c);
    } catch (const std::logic_error&) {
      throw ValidationError("bad condition '" + item + "' in --conditions");
    }
  }
  if (out.empty()) throw ValidationError("--conditions is empty");
  return out;
}

std::atomic<bool> interrupted{false};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Haptic shared-control tele-mobile-manipulation simulator"};
  app.require_subcommand(1);

  std::string scenario_path = default_scenario().string();
  std::string out_flag;
  int condition = 1;
  std::uint64_t seed = 1;
  std::string operator_name;

  auto* run = app.add_subcommand("run", "Run one trial and write its record");
  run->add_option("--scenario", scenario_path, "Scenario file")->capture_default_str();
  run->add_option("--condition", condition, "1 guidance, 2 no guidance, 3 guidance with distraction")
      ->capture_default_str();
  run->add_option("--seed", seed, "Trial seed")->capture_default_str();
  run->add_option("--operator", operator_name, "compliant, ignoring or distracted (default by condition)");
  run->add_option("--out", out_flag, "Output directory (default $UNITELE_OUT_DIR or ./out)");

  int n_seeds = 20;
  std::string conditions = "1,2,3";
  std::uint64_t first_seed = 1;
  int workers = 0;
  auto* batch = app.add_subcommand("batch", "Run seeds x conditions and compare conditions");
  batch->add_option("--scenario", scenario_path, "Scenario file")->capture_default_str();
  batch->add_option("--seeds", n_seeds, "Seeds per condition")->capture_default_str();
  batch->add_option("--first-seed", first_seed, "First seed")->capture_default_str();
  batch->add_option("--conditions", conditions, "Comma-separated conditions")->capture_default_str();
  batch->add_option("--operator", operator_name, "Operator model for every trial (default by condition)");
  batch->add_option("--workers", workers, "Worker threads, 0 for one per core")->capture_default_str();
  batch->add_option("--out", out_flag, "Output directory (default $UNITELE_OUT_DIR or ./out)");

  std::string record_path;
  auto* replay = app.add_subcommand("replay", "Re-simulate a recorded input stream and check its hash");
  replay->add_option("--record", record_path, "Record directory or its summary.json")->required();

  std::string records_dir;
  auto* plot = app.add_subcommand("plot", "Write deviation, time and trajectory figures as SVG");
  plot->add_option("--records", records_dir, "Directory of trial records")->required();
  plot->add_option("--out", out_flag, "Figure directory (default: the records directory)");

  bridge::BridgeOptions bopt;
  bool lockstep = false;
  bool autopilot = false;
  double pause_after = 5.0;
  auto* serve = app.add_subcommand("serve", "Serve a live trial over WebSocket");
  serve->add_option("--port", bopt.port, "TCP port")->capture_default_str();
  serve->add_option("--address", bopt.address, "Bind address")->capture_default_str();
  serve->add_option("--scenario", scenario_path, "Scenario file")->capture_default_str();
  serve->add_option("--condition", condition, "Trial condition")->capture_default_str();
  serve->add_option("--seed", seed, "Trial seed")->capture_default_str();
  serve->add_option("--operator", operator_name, "Operator model used by --autopilot");
  serve->add_option("--rate", bopt.realtime_factor, "Real-time factor, 0 for as fast as possible")
      ->capture_default_str();
  serve->add_option("--pause-after", pause_after, "Pause this many seconds after the operator leaves, 0 never")
      ->capture_default_str();
  serve->add_flag("--autopilot", autopilot, "Scripted operator drives while no client holds the operator seat");
  serve->add_flag("--lockstep", lockstep, "One input per tick; the trial ends when the operator disconnects");
  serve->add_option("--out", out_flag, "Where to write the record when the trial ends");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*run) {
      check_condition(condition);
      const ScenarioConfig cfg = load(scenario_path);
      TrialOptions o;
      o.operator_kind = operator_flag(operator_name);
      o.keep_rows = true;
      o.keep_inputs = true;
      TrialRecord rec;
      try {
        rec = run_trial(cfg, condition, seed, o);
      } catch (const sim::SimFault& e) {
        std::fprintf(stderr, "trial fault: %s\n", e.what());
        return kExitFault;
      }
      const fs::path dir = output_dir(out_flag) / record_dir_name(condition, seed);
      write_record(dir, rec);
      print_summary(rec.summary);
      std::printf("  written to %s\n", dir.string().c_str());
      return trial_exit(rec.summary);
    }

    if (*batch) {
      if (n_seeds < 1) throw ValidationError("--seeds must be at least 1");
      BatchOptions o;
      o.conditions = parse_conditions(conditions);
      o.n_seeds = n_seeds;
      o.first_seed = first_seed;
      o.workers = workers;
      o.operator_kind = operator_flag(operator_name);
      const fs::path out = output_dir(out_flag);
      o.record_dir = out;
      const ScenarioConfig cfg = load(scenario_path);
      BatchResult r;
      try {
        r = run_batch(cfg, o);
      } catch (const std::runtime_error& e) {
        std::fprintf(stderr, "trial fault: %s\n", e.what());
        return kExitFault;
      }
      fs::create_directories(out);
      std::ofstream(out / "batch.json") << batch_json(r);
      const std::string table = batch_table(r);
      std::ofstream(out / "batch.txt") << table;
      std::fputs(table.c_str(), stdout);
      std::printf("\n%zu trials in %.1f s, written to %s\n", r.trials.size(), r.wall_s, out.string().c_str());
      for (const auto& t : r.trials)
        if (t.outcome == Outcome::Fault) return kExitFault;
      return kExitOk;
    }

    if (*replay) {
      fs::path dir = record_path;
      if (dir.filename() == "summary.json") dir = dir.parent_path();
      if (!fs::exists(dir / "summary.json")) throw ValidationError("no summary.json in " + dir.string());
      LoadedRecord loaded;
      try {
        loaded = load_record(dir);
      } catch (const std::exception& e) {
        throw ValidationError(dir.string() + ": " + e.what());
      }
      const TrialSummary& s = loaded.summary;
      const TrialRecord rec = replay_trial(loaded.scenario, s.condition, s.seed, s.operator_kind, loaded.inputs);
      print_summary(rec.summary);
      const bool match = rec.summary.record_hash == s.record_hash;
      std::printf("replay %s: recorded %s, replayed %s\n", match ? "matches" : "DIVERGED", s.record_hash.c_str(),
                  rec.summary.record_hash.c_str());
      return match ? trial_exit(rec.summary) : kExitFault;
    }

    if (*plot) {
      if (!fs::is_directory(records_dir)) throw ValidationError(records_dir + " is not a directory");
      const fs::path out = out_flag.empty() ? fs::path(records_dir) : fs::path(out_flag);
      for (const auto& f : tools::plot_records(records_dir, out)) std::printf("%s\n", f.string().c_str());
      return kExitOk;
    }

    if (*serve) {
      check_condition(condition);
      if (pause_after < 0.0) throw ValidationError("--pause-after must be non-negative");
      if (bopt.realtime_factor < 0.0) throw ValidationError("--rate must be non-negative");
      const ScenarioConfig cfg = load(scenario_path);
      const OperatorKind kind = operator_flag(operator_name).value_or(default_operator(condition));
      bopt.lockstep = lockstep;
      bopt.autopilot = autopilot;
      if (pause_after > 0.0) bopt.pause_after_disconnect_s = pause_after;
      bridge::BridgeServer server(cfg, condition, seed, kind, bopt);
      server.start();
      std::printf("serving condition %d seed %llu on ws://%s:%u/\n", condition, static_cast<unsigned long long>(seed),
                  bopt.address.c_str(), server.port());
      std::fflush(stdout);
      std::signal(SIGINT, [](int) { interrupted = true; });
      std::signal(SIGTERM, [](int) { interrupted = true; });
      while (!interrupted && !server.stats().finished) std::this_thread::sleep_for(std::chrono::milliseconds(50));
      server.stop();
      const auto st = server.stats();
      std::printf("ticks %llu, inputs %llu, stale %llu, frames sent %llu, dropped %llu\n",
                  static_cast<unsigned long long>(st.ticks), static_cast<unsigned long long>(st.inputs_applied),
                  static_cast<unsigned long long>(st.stale_inputs), static_cast<unsigned long long>(st.frames_sent),
                  static_cast<unsigned long long>(st.frames_dropped));
      auto rec = server.record();
      if (!rec) return kExitFault;
      const fs::path dir = output_dir(out_flag) / ("serve_" + record_dir_name(condition, seed));
      write_record(dir, *rec);
      print_summary(rec->summary);
      std::printf("  written to %s\n", dir.string().c_str());
      try {
        server.wait();
      } catch (const std::exception& e) {
        std::fprintf(stderr, "trial fault: %s\n", e.what());
        return kExitFault;
      }
      return trial_exit(rec->summary);
    }
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fault: %s\n", e.what());
    return kExitFault;
  }
  return kExitOk;
}
