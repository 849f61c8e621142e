#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace accelshape {

/// Simulation time in datapath cycles.
using Cycle = std::uint64_t;
/// Sub-cycle time used by links and accelerators to keep long-run rates exact.
using Picos = std::int64_t;

/// Raised for invalid scenario, plan, register or model input.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when the simulation itself is driven incorrectly (a bug, not bad input).
class SimulationError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct FlowId {
  std::uint32_t value = 0;
  auto operator<=>(const FlowId&) const = default;
};

enum class PathMode { FunctionCall, InlineNicTx, InlineNicRx, InlineP2P };

/// Interconnect directions. H2D/D2H/P2P are PCIe and draw on the shared credit
/// pool; NicIn/NicOut are the device's network ports.
enum class Direction { H2D, D2H, P2P, NicIn, NicOut };
inline constexpr std::size_t kDirectionCount = 5;

struct PathDirections {
  Direction ingress;
  Direction egress;
};

PathDirections directions_of(PathMode mode);
bool is_pcie(Direction dir);

std::string_view to_string(PathMode mode);
std::string_view to_string(Direction dir);
PathMode path_mode_from_string(std::string_view text);
Direction direction_from_string(std::string_view text);

/// Message-size distribution in bytes.
struct SizeDist {
  enum class Kind { Fixed, Uniform, Bimodal };
  Kind kind = Kind::Fixed;
  std::uint32_t a = 64;  // fixed size, uniform low bound, or first mode
  std::uint32_t b = 64;  // uniform high bound or second mode
  double p_a = 1.0;      // bimodal probability of `a`

  static SizeDist fixed(std::uint32_t bytes) { return {Kind::Fixed, bytes, bytes, 1.0}; }
  static SizeDist uniform(std::uint32_t lo, std::uint32_t hi) { return {Kind::Uniform, lo, hi, 1.0}; }
  static SizeDist bimodal(std::uint32_t first, std::uint32_t second, double p_first) {
    return {Kind::Bimodal, first, second, p_first};
  }

  double mean() const;
  std::uint32_t max() const;
  void validate() const;
  bool operator==(const SizeDist&) const = default;
};

enum class ArrivalProcess { Poisson, FixedGap };

struct TrafficPattern {
  SizeDist sizes;
  double load = 0.0;  // fraction of the scenario's reference line rate
  std::uint32_t burstiness = 1;
  ArrivalProcess arrival = ArrivalProcess::Poisson;

  void validate() const;
  bool operator==(const TrafficPattern&) const = default;
};

enum class SloMetric { ThroughputGbps, ThroughputIops, TailLatency };

struct SloTarget {
  SloMetric metric = SloMetric::ThroughputGbps;
  double value = 1.0;  // Gbps, IOPS, or nanoseconds
  double percentile = 0.99;
  std::uint32_t window_requests = 500;

  void validate() const;
  bool is_throughput() const { return metric != SloMetric::TailLatency; }
  bool operator==(const SloTarget&) const = default;
};

struct FlowSpec {
  FlowId id;
  std::string vm_id;
  std::string acc_id;
  PathMode path = PathMode::FunctionCall;
  TrafficPattern pattern;
  SloTarget slo;
  int priority = 0;            // baseline-priority only
  std::uint32_t weight = 1;    // baseline-wrr / baseline-wfq only

  void validate() const;
  bool operator==(const FlowSpec&) const = default;
};

std::string_view to_string(SloMetric metric);
SloMetric slo_metric_from_string(std::string_view text);

}  // namespace accelshape
