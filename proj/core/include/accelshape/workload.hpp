#pragma once

#include <cstdint>
#include <vector>

#include "accelshape/rng.hpp"
#include "accelshape/types.hpp"

namespace accelshape {

/// Message injection process for one flow. Mean message rate is
/// load x reference line rate / mean size. Each arrival carries a burst of
/// messages: uniform in [1, burstiness] for Poisson, exactly burstiness for
/// fixed-gap injection.
class ArrivalGenerator {
 public:
  ArrivalGenerator(const TrafficPattern& pattern, double reference_gbps, Rng rng, Picos start_ps);

  bool idle() const { return idle_; }
  /// Time of the pending arrival.
  Picos next_ps() const { return next_ps_; }
  /// Burst size of the pending arrival; then draws the following arrival.
  std::uint32_t take_burst();
  std::uint32_t draw_size();

  double messages_per_second() const { return msg_rate_; }

 private:
  Picos gap();

  TrafficPattern pattern_;
  Rng rng_;
  double msg_rate_ = 0.0;
  double burst_mean_ps_ = 0.0;
  bool idle_ = false;
  Picos next_ps_ = 0;
  std::uint32_t pending_burst_ = 0;
};

struct TraceEntry {
  Picos at_ps = 0;
  std::uint32_t bytes = 0;
  bool operator==(const TraceEntry&) const = default;
};

/// Materialised arrival trace over [0, duration_ps).
std::vector<TraceEntry> generate_arrivals(const TrafficPattern& pattern, double reference_gbps,
                                          std::uint64_t seed, Picos duration_ps);

}  // namespace accelshape
