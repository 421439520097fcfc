#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "olt/experiments.hpp"

namespace olt {

struct StepParams {
  double rotation_deg = 30.0;
  Eigen::Vector3d axis = Eigen::Vector3d::UnitY();
  std::vector<double> w_v = {10.0, 20.0, 40.0};
};

struct SweepParams {
  std::vector<double> frequencies = {10.0, 30.0, 60.0, 90.0, 120.0};
  std::vector<RecallMethod> methods = {RecallMethod::Localizer, RecallMethod::TrackerInitLocalizer,
                                       RecallMethod::Olt, RecallMethod::OltNoTracker};
};

struct BenchParams {
  double demo_seconds = 2.0;
};

/// Everything a run needs: the scenario plus per-experiment parameters.
struct RunConfig {
  ScenarioConfig scenario;
  StepParams step;
  SweepParams sweep;
  BenchParams bench;

  void validate() const;
};

/// YAML text with one section per type. Mandatory: scenario.duration,
/// robot.q0, reference.pose, object.kind, pipeline.stream_period,
/// pipeline.localizer.delay, pipeline.tracker.delay.
/// Throws ParseError for malformed or unknown entries, ValidationError otherwise.
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config(const std::filesystem::path& path);

/// Canonical form: every field, fixed order, shortest round-trip numbers.
std::string serialize_config(const RunConfig& config);

/// Built-in setups: "fig4", "step", "closed-loop".
RunConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

/// 64-bit FNV-1a, as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace olt
