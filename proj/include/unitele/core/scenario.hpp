#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "unitele/core/config.hpp"

namespace unitele {

inline constexpr int kScenarioSchemaVersion = 1;

/// Everything a trial needs besides the map and chain files it points to.
struct ScenarioConfig {
  int schema_version = kScenarioSchemaVersion;
  MapConfig map;
  std::string chain_path;  // empty: built-in default chain
  ObjectConfig object;
  Pose2D fmr_start;
  BinConfig bin;
  ArmMountConfig arm_mount;
  std::array<double, 7> leader_home_rad{0.0, -kPi / 4, 0.0, -3 * kPi / 4, 0.0, kPi / 2, kPi / 4};
  std::array<double, 7> follower_home_rad{0.0, -kPi / 4, 0.0, -3 * kPi / 4, 0.0, kPi / 2, kPi / 4};
  ControllerConfig controller;
  PlannerConfig planner;
  SimConfig sim;
  FsmConfig fsm;
  DropConfig drop;
  OperatorConfig operator_model;
  std::uint64_t seed = 1;

  bool operator==(const ScenarioConfig&) const = default;
};

class ScenarioError : public std::runtime_error {
 public:
  enum class Kind { Io, Parse, Schema, Range };
  ScenarioError(Kind kind, std::string field, const std::string& message);
  Kind kind() const { return kind_; }
  const std::string& field() const { return field_; }

 private:
  Kind kind_;
  std::string field_;
};

/// Parses and validates a scenario document. Relative paths inside are resolved
/// against base_dir. Unknown keys are rejected.
ScenarioConfig parse_scenario(const std::string& text, const std::filesystem::path& base_dir = {});
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Canonical serialized form (all fields, sorted keys, shortest round-trip doubles).
std::string serialize_scenario(const ScenarioConfig& config);

}  // namespace unitele
