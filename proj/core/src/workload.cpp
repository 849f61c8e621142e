#include "accelshape/workload.hpp"

#include <cmath>

namespace accelshape {

ArrivalGenerator::ArrivalGenerator(const TrafficPattern& pattern, double reference_gbps, Rng rng,
                                   Picos start_ps)
    : pattern_(pattern), rng_(rng) {
  pattern_.validate();
  if (!(reference_gbps > 0.0)) throw ConfigError("reference rate must be > 0");
  msg_rate_ = pattern_.load * reference_gbps * 1e9 / 8.0 / pattern_.sizes.mean();
  if (msg_rate_ <= 0.0) {
    idle_ = true;
    return;
  }
  const double burst_avg = pattern_.arrival == ArrivalProcess::Poisson
                               ? (1.0 + pattern_.burstiness) / 2.0
                               : static_cast<double>(pattern_.burstiness);
  burst_mean_ps_ = burst_avg / msg_rate_ * 1e12;
  next_ps_ = start_ps + gap();
  pending_burst_ = pattern_.arrival == ArrivalProcess::Poisson
                       ? static_cast<std::uint32_t>(rng_.uniform_int(1, pattern_.burstiness))
                       : pattern_.burstiness;
}

Picos ArrivalGenerator::gap() {
  const double g = pattern_.arrival == ArrivalProcess::Poisson ? rng_.exponential(burst_mean_ps_)
                                                               : burst_mean_ps_;
  return static_cast<Picos>(std::llround(g));
}

std::uint32_t ArrivalGenerator::take_burst() {
  if (idle_) throw SimulationError("take_burst on an idle generator");
  const std::uint32_t burst = pending_burst_;
  next_ps_ += gap();
  pending_burst_ = pattern_.arrival == ArrivalProcess::Poisson
                       ? static_cast<std::uint32_t>(rng_.uniform_int(1, pattern_.burstiness))
                       : pattern_.burstiness;
  return burst;
}

std::uint32_t ArrivalGenerator::draw_size() {
  const SizeDist& d = pattern_.sizes;
  switch (d.kind) {
    case SizeDist::Kind::Fixed:
      return d.a;
    case SizeDist::Kind::Uniform:
      return static_cast<std::uint32_t>(rng_.uniform_int(d.a, d.b));
    case SizeDist::Kind::Bimodal:
      return rng_.bernoulli(d.p_a) ? d.a : d.b;
  }
  return d.a;
}

std::vector<TraceEntry> generate_arrivals(const TrafficPattern& pattern, double reference_gbps,
                                          std::uint64_t seed, Picos duration_ps) {
  ArrivalGenerator gen(pattern, reference_gbps, Rng(seed), 0);
  std::vector<TraceEntry> out;
  while (!gen.idle() && gen.next_ps() < duration_ps) {
    const Picos at = gen.next_ps();
    const std::uint32_t burst = gen.take_burst();
    for (std::uint32_t i = 0; i < burst; ++i) out.push_back({at, gen.draw_size()});
  }
  return out;
}

}  // namespace accelshape
