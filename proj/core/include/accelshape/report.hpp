#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "accelshape/control.hpp"
#include "accelshape/dataplane.hpp"
#include "accelshape/serialize.hpp"

namespace accelshape {

/// Nearest-rank percentile: the ceil(p*n)-th smallest value (1-based). `p` in
/// (0,1]; an empty population yields 0.
double nearest_rank(std::vector<double> values, double p);

struct ThroughputSample {
  double end_us = 0.0;
  double gbps = 0.0;
  double iops = 0.0;
  bool operator==(const ThroughputSample&) const = default;
};

/// Splits completions into consecutive windows of `window` requests. Each
/// sample spans from the previous window's last completion (or `from`) to
/// its own last completion. Windows ending at or before `from` are dropped.
std::vector<ThroughputSample> window_samples(std::span<const Completion> done, std::uint32_t window, Cycle from,
                                             const SimClock& clock);

struct CdfPoint {
  double value = 0.0;
  double fraction = 0.0;
  bool operator==(const CdfPoint&) const = default;
};

/// Empirical CDF of `values`: one point per distinct value, ending at 1.0.
std::vector<CdfPoint> empirical_cdf(std::vector<double> values);

struct FlowMetrics {
  FlowId flow;
  std::string vm;
  std::string acc;
  std::string path;
  SloTarget slo;
  bool admitted = true;
  std::string reject_reason;

  std::uint64_t injected = 0;
  std::uint64_t completed = 0;
  std::uint64_t dropped = 0;
  std::uint64_t in_flight = 0;

  double active_from_us = 0.0;
  double active_to_us = 0.0;
  double delivered_gbps = 0.0;  // after warm-up within the active span
  double delivered_iops = 0.0;
  double attainment = 0.0;      // delivered / SLO for throughput, bound / tail for latency
  bool slo_met = false;

  double p50_ns = 0.0;
  double p95_ns = 0.0;
  double p99_ns = 0.0;
  double p999_ns = 0.0;
  double slo_percentile_ns = 0.0;  // latency at the SLO's own percentile

  std::vector<ThroughputSample> samples;
  std::vector<CdfPoint> cdf;        // of sample throughput in the SLO's unit
  double sample_cv = 0.0;           // std/mean of the samples in the SLO's unit
  /// Relative deviation of the p25/p50/p75/p99 sample from the throughput SLO.
  std::array<double, 4> deviation{};

  bool operator==(const FlowMetrics&) const = default;
};

struct DirectionUse {
  std::string direction;
  double bandwidth_gbps = 0.0;
  double utilization = 0.0;
  std::uint64_t bytes = 0;
  bool operator==(const DirectionUse&) const = default;
};

struct MetricsReport {
  static constexpr std::string_view kSchema = "accelshape.report";
  static constexpr int kVersion = 1;

  std::string scenario;
  std::string mode;
  std::uint64_t seed = 0;
  double duration_us = 0.0;
  std::uint32_t cycle_ns = 4;

  std::vector<FlowMetrics> flows;
  double aggregate_gbps = 0.0;
  double jain_fairness = 1.0;     // over attainment of throughput-SLO flows
  double min_max_ratio = 1.0;     // smallest / largest delivered Gbps
  std::vector<DirectionUse> directions;

  std::vector<ControlEvent> control_log;
  std::vector<StatusRecord> status;
  std::uint64_t register_writes = 0;

  std::uint64_t events_dispatched = 0;
  std::uint64_t final_cycle = 0;
  std::uint64_t trace_hash = 0;

  const FlowMetrics& flow(FlowId id) const;
  bool operator==(const MetricsReport&) const = default;
};

/// Jain's index over non-negative values; 1.0 for an empty or all-zero set.
double jain_index(std::span<const double> values);

void to_json(Json& j, const ThroughputSample& v);
void from_json(const Json& j, ThroughputSample& v);
void to_json(Json& j, const CdfPoint& v);
void from_json(const Json& j, CdfPoint& v);
void to_json(Json& j, const FlowMetrics& v);
void from_json(const Json& j, FlowMetrics& v);
void to_json(Json& j, const DirectionUse& v);
void from_json(const Json& j, DirectionUse& v);
void to_json(Json& j, const MetricsReport& v);
void from_json(const Json& j, MetricsReport& v);

std::string report_text(const MetricsReport& report);
MetricsReport load_report(const std::filesystem::path& path);

/// Writes report.json plus flows.csv, samples.csv, cdf.csv, directions.csv and
/// control.csv into `dir` (created if needed).
void write_report(const MetricsReport& report, const std::filesystem::path& dir);

struct FlowDelta {
  FlowId flow;
  double delivered_gbps = 0.0;   // b - a
  double attainment = 0.0;
  double p99_ns = 0.0;
  std::array<double, 4> deviation{};
  std::array<double, 4> abs_deviation_a{};
  std::array<double, 4> abs_deviation_b{};
};

struct Comparison {
  std::vector<FlowDelta> flows;
  double jain_fairness = 0.0;
  double min_max_ratio = 0.0;
  double aggregate_gbps = 0.0;
};

/// Per-flow deltas b - a. Both reports must hold the same flow ids.
Comparison compare_runs(const MetricsReport& a, const MetricsReport& b);
void to_json(Json& j, const Comparison& v);
std::string comparison_table(const Comparison& c);

}  // namespace accelshape
