#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>

#include "accelshape/types.hpp"

namespace accelshape {

struct ArbiterPolicy {
  enum class Kind { RoundRobin, WeightedRoundRobin, Priority, WeightedFairQueuing };
  Kind kind = Kind::RoundRobin;
  std::map<FlowId, std::uint32_t> weights;  // WRR/WFQ weight, or priority level (higher wins)
  std::uint32_t wfq_quantum_bytes = 1500;   // bytes credited per unit of weight per round

  std::uint32_t weight_of(FlowId flow) const;
  void validate() const;
};

/// A queue eligible for a grant, with the size of its head message.
struct ReadyQueue {
  FlowId flow;
  std::uint64_t head_bytes = 0;
};

/// Stateful grant selection across per-flow queues.
///
/// RoundRobin grants the next flow in cyclic id order after the last grant.
/// WeightedRoundRobin and WeightedFairQueuing are deficit round robin, charging
/// one unit per grant and head_bytes per grant respectively. Priority picks the
/// highest level and round-robins within it.
class Arbiter {
 public:
  explicit Arbiter(ArbiterPolicy policy);

  /// `ready` must be non-empty and sorted by flow id.
  FlowId arbitrate(std::span<const ReadyQueue> ready);

  const ArbiterPolicy& policy() const { return policy_; }
  void set_weight(FlowId flow, std::uint32_t weight);

 private:
  FlowId round_robin(std::span<const ReadyQueue> ready);
  FlowId deficit(std::span<const ReadyQueue> ready, bool byte_cost);
  FlowId priority(std::span<const ReadyQueue> ready);

  ArbiterPolicy policy_;
  std::optional<FlowId> last_;
  std::optional<FlowId> current_;  // DRR flow holding the turn
  std::map<FlowId, std::int64_t> deficits_;
};

}  // namespace accelshape
