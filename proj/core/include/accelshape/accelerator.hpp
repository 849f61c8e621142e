#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "accelshape/types.hpp"

namespace accelshape {

class Rng;

inline constexpr std::uint32_t kMinMessageBytes = 64;
inline constexpr std::uint32_t kMaxMessageBytes = 1u << 20;

struct CurveKnot {
  std::uint32_t size = 0;
  double gbps = 0.0;
  bool operator==(const CurveKnot&) const = default;
};

/// Piecewise-linear throughput-vs-message-size curve.
class CapacityCurve {
 public:
  CapacityCurve() = default;
  explicit CapacityCurve(std::vector<CurveKnot> knots);

  /// Linear interpolation between knots, clamped to the end knots.
  double at(std::uint64_t size) const;
  const std::vector<CurveKnot>& knots() const { return knots_; }
  bool empty() const { return knots_.empty(); }
  bool operator==(const CapacityCurve&) const = default;

 private:
  std::vector<CurveKnot> knots_;
};

struct Proportional {
  double ratio = 1.0;
  bool operator==(const Proportional&) const = default;
};
struct FixedOutput {
  std::uint32_t bytes = 64;
  bool operator==(const FixedOutput&) const = default;
};
using EgressRatio = std::variant<Proportional, FixedOutput>;

/// Per-message compute latency in cycles.
struct ServiceTimeDist {
  enum class Kind { Fixed, Uniform, Bimodal, Poisson };
  Kind kind = Kind::Fixed;
  double a = 0.0;    // fixed value, uniform low, first mode, or Poisson mean
  double b = 0.0;    // uniform high or second mode
  double p_a = 1.0;  // bimodal weight of `a`

  Cycle draw(Rng& rng) const;
  double mean() const;
  void validate() const;
  bool operator==(const ServiceTimeDist&) const = default;
};

struct AcceleratorModel {
  std::string id;
  CapacityCurve curve;
  EgressRatio egress = Proportional{1.0};
  ServiceTimeDist service;
  double max_capacity_gbps = 0.0;
  std::uint32_t queue_depth = 32;  // shared device-side input FIFO, in messages

  void validate() const;
  bool operator==(const AcceleratorModel&) const = default;
};

std::uint64_t egress_size(const AcceleratorModel& model, std::uint64_t ingress_bytes);

double curve_throughput(const AcceleratorModel& model, std::uint64_t msg_size);

struct StreamMix {
  std::uint64_t msg_size = 0;
  double offered_gbps = 0.0;
};

/// Aggregate sustainable throughput for a mix of streams, composed by
/// time-sharing: each stream occupies offered/curve(size) of the engine.
double effective_capacity(const AcceleratorModel& model, std::span<const StreamMix> mix);

}  // namespace accelshape
