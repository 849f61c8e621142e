#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "accelshape/control.hpp"
#include "accelshape/datapath.hpp"
#include "accelshape/report.hpp"
#include "accelshape/serialize.hpp"

namespace accelshape {

enum class ScenarioMode {
  Arcus,
  BaselineRoundRobin,
  BaselineWeightedRoundRobin,
  BaselinePriority,
  BaselineWfq,
  BaselineSoftShaper,
};
std::string_view to_string(ScenarioMode mode);
ScenarioMode scenario_mode_from_string(std::string_view text);

struct TimelineFlow {
  FlowSpec spec;
  double start_us = 0.0;
  double stop_us = 0.0;  // 0: runs to the end
  bool operator==(const TimelineFlow&) const = default;
};

struct ScenarioSpec {
  std::string name = "scenario";
  std::string description;
  std::uint64_t seed = 1;
  double duration_us = 1000.0;
  ScenarioMode mode = ScenarioMode::BaselineRoundRobin;
  std::uint32_t cycle_ns = 4;
  double reference_gbps = 100.0;
  ChannelConfig channel;
  std::vector<AcceleratorModel> accelerators;
  AccTable paths;  // accelerators without explicit paths get one local function-call path
  std::vector<TimelineFlow> flows;
  ControlConfig control;
  SoftShaperConfig soft;
  std::size_t host_queue_depth = 1024;
  double reconfig_latency_us = 10.0;
  std::uint32_t wfq_quantum_bytes = 1500;
  std::uint32_t sample_window = 500;   // requests per throughput sample
  double warmup_fraction = 0.1;        // of each flow's active span
  std::optional<std::filesystem::path> profile;  // resolved against the scenario file

  void validate() const;
};

void to_json(Json& j, const ScenarioSpec& v);
void from_json(const Json& j, ScenarioSpec& v);

/// Parses and validates a scenario file; a relative `profile` path is made
/// relative to the file's directory.
ScenarioSpec load_scenario(const std::filesystem::path& path);

struct RunOptions {
  const ProfileTable* profile = nullptr;  // required in arcus mode
  std::ostream* trace = nullptr;          // per-event trace lines
};

/// Profile keys the scenario's registration sequence would look up and not
/// find in `profile`.
std::vector<ProfileKey> missing_profile_keys(const ScenarioSpec& spec, const ProfileTable& profile);

/// Builds the datapath (and control runtime in arcus mode), runs it for the
/// scenario duration and summarizes the outcome.
MetricsReport run_scenario(const ScenarioSpec& spec, const RunOptions& options = {});

}  // namespace accelshape
