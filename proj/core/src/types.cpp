#include "accelshape/types.hpp"

#include <algorithm>
#include <array>
#include <string>

namespace accelshape {

namespace {

constexpr std::array<std::string_view, 4> kPathNames = {"function-call", "inline-nic-tx",
                                                        "inline-nic-rx", "inline-p2p"};
constexpr std::array<std::string_view, kDirectionCount> kDirectionNames = {"h2d", "d2h", "p2p",
                                                                           "nic-in", "nic-out"};
constexpr std::array<std::string_view, 3> kMetricNames = {"gbps", "iops", "latency"};

}  // namespace

PathDirections directions_of(PathMode mode) {
  switch (mode) {
    case PathMode::FunctionCall:
      return {Direction::H2D, Direction::D2H};
    case PathMode::InlineNicRx:
      return {Direction::NicIn, Direction::D2H};
    case PathMode::InlineNicTx:
      return {Direction::H2D, Direction::NicOut};
    case PathMode::InlineP2P:
      return {Direction::P2P, Direction::P2P};
  }
  throw SimulationError("unknown path mode");
}

bool is_pcie(Direction dir) {
  return dir == Direction::H2D || dir == Direction::D2H || dir == Direction::P2P;
}

std::string_view to_string(PathMode mode) { return kPathNames[static_cast<std::size_t>(mode)]; }

std::string_view to_string(Direction dir) {
  return kDirectionNames[static_cast<std::size_t>(dir)];
}

std::string_view to_string(SloMetric metric) {
  return kMetricNames[static_cast<std::size_t>(metric)];
}

PathMode path_mode_from_string(std::string_view text) {
  for (std::size_t i = 0; i < kPathNames.size(); ++i) {
    if (kPathNames[i] == text) return static_cast<PathMode>(i);
  }
  throw ConfigError("unknown path mode '" + std::string(text) + "'");
}

Direction direction_from_string(std::string_view text) {
  for (std::size_t i = 0; i < kDirectionNames.size(); ++i) {
    if (kDirectionNames[i] == text) return static_cast<Direction>(i);
  }
  throw ConfigError("unknown direction '" + std::string(text) + "'");
}

SloMetric slo_metric_from_string(std::string_view text) {
  for (std::size_t i = 0; i < kMetricNames.size(); ++i) {
    if (kMetricNames[i] == text) return static_cast<SloMetric>(i);
  }
  throw ConfigError("unknown SLO metric '" + std::string(text) + "'");
}

double SizeDist::mean() const {
  switch (kind) {
    case Kind::Fixed:
      return a;
    case Kind::Uniform:
      return (static_cast<double>(a) + b) / 2.0;
    case Kind::Bimodal:
      return p_a * a + (1.0 - p_a) * b;
  }
  return a;
}

std::uint32_t SizeDist::max() const { return kind == Kind::Fixed ? a : std::max(a, b); }

void SizeDist::validate() const {
  if (a == 0 || (kind != Kind::Fixed && b == 0)) throw ConfigError("message sizes must be > 0");
  if (kind == Kind::Uniform && a > b) throw ConfigError("uniform size bounds are inverted");
  if (kind == Kind::Bimodal && (p_a < 0.0 || p_a > 1.0)) {
    throw ConfigError("bimodal probability must be in [0,1]");
  }
}

void TrafficPattern::validate() const {
  sizes.validate();
  if (!(load >= 0.0 && load <= 1.0)) throw ConfigError("load must be in [0,1]");
  if (burstiness < 1) throw ConfigError("burstiness must be >= 1");
}

void SloTarget::validate() const {
  if (!(value > 0.0)) throw ConfigError("SLO value must be > 0");
  if (!(percentile > 0.0 && percentile < 1.0)) throw ConfigError("SLO percentile must be in (0,1)");
  if (window_requests == 0) throw ConfigError("SLO window must be >= 1 request");
}

void FlowSpec::validate() const {
  if (acc_id.empty()) throw ConfigError("flow " + std::to_string(id.value) + " has no accelerator");
  if (weight == 0) throw ConfigError("flow weight must be positive");
  pattern.validate();
  slo.validate();
}

}  // namespace accelshape
