#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>

#include "accelshape/engine.hpp"
#include "accelshape/shaper.hpp"
#include "accelshape/types.hpp"

namespace accelshape {

/// One finished request, recorded at completion-write time.
struct Completion {
  Cycle at = 0;
  std::uint32_t bytes = 0;
  Cycle latency = 0;  // generator enqueue to completion, in cycles
};

/// What the control plane may observe and program. The simulated datapath
/// implements it; unit tests substitute a scripted fake.
class Dataplane {
 public:
  virtual ~Dataplane() = default;

  virtual Cycle now() const = 0;
  virtual const SimClock& clock() const = 0;
  virtual std::span<const Completion> completions(FlowId flow) const = 0;
  /// Busy fraction of every direction since the previous call.
  virtual std::array<double, kDirectionCount> sample_utilization() = 0;
  virtual double direction_bandwidth(Direction dir) const = 0;
  virtual void write_registers(FlowId flow, const ShaperRegisters& regs) = 0;
  virtual std::optional<ShaperRegisters> committed_registers(FlowId flow) const = 0;
  virtual void set_path(FlowId flow, PathMode path) = 0;
  /// Admitted flows begin injecting; shaped flows wait for their first commit.
  virtual void activate(FlowId flow) = 0;
  virtual void deactivate(FlowId flow) = 0;
};

/// Rate a flow is shaped to when no profile narrows it. Throughput SLOs map
/// to themselves; latency-bound flows get twice their declared rate so the
/// shaper never adds standing queueing delay.
SloTarget shaping_target(const FlowSpec& flow, double reference_gbps);

/// Declared traffic of a flow in Gbps, from its pattern.
double declared_gbps(const FlowSpec& flow, double reference_gbps);

/// SLO expressed in Gbps so mixed metrics can be summed against capacity.
double slo_gbps_equivalent(const FlowSpec& flow, double reference_gbps);

}  // namespace accelshape
