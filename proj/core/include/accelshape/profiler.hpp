#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "accelshape/control.hpp"
#include "accelshape/datapath.hpp"
#include "accelshape/serialize.hpp"

namespace accelshape {

struct SweepPlan {
  enum class Mode {
    Homogeneous,  // every flow of a point plays the same role
    Mixed,        // every multiset of roles per flow count
  };

  std::vector<AcceleratorModel> accelerators;
  std::vector<std::string> accs;  // ids to sweep
  std::vector<ChannelConfig> settings{ChannelConfig{}};
  std::vector<std::uint32_t> sizes;
  std::vector<double> loads;
  std::vector<std::uint32_t> flow_counts{1};
  std::vector<PathMode> paths{PathMode::FunctionCall};
  double run_us = 2000.0;
  std::uint64_t seed = 1;
  double reference_gbps = 32.0;
  ArrivalProcess arrival = ArrivalProcess::FixedGap;
  std::uint32_t friendly_size_bound = 4096;
  std::size_t host_queue_depth = 1024;
  std::uint32_t cycle_ns = 4;
  Mode mode = Mode::Homogeneous;

  void validate() const;
  const AcceleratorModel& accelerator(const std::string& id) const;
};

void to_json(Json& j, const SweepPlan& v);
void from_json(const Json& j, SweepPlan& v);

struct PlanPoint {
  std::string acc_id;
  ChannelConfig setting;
  std::vector<ProfileRole> roles;  // canonical order
};

std::vector<PlanPoint> enumerate_points(const SweepPlan& plan);

/// Runs one unshaped point and measures total and per-role throughput after
/// a 10% warm-up. Drift above 5% between the two halves of the measured span
/// marks the result low-confidence.
CapacityProfile profile_point(const SweepPlan& plan, const PlanPoint& point);

/// Executes every point (on up to `workers` threads; 0 picks the hardware
/// concurrency) and returns the table. Output is independent of `workers`.
ProfileTable run_sweep(const SweepPlan& plan, unsigned workers = 0);

}  // namespace accelshape
