#include "accelshape/arbiter.hpp"

#include <algorithm>
#include <vector>

namespace accelshape {

namespace {

// Index of the first entry whose flow id is strictly greater than `after`, wrapping.
std::size_t next_after(std::span<const ReadyQueue> ready, std::optional<FlowId> after) {
  if (!after) return 0;
  for (std::size_t i = 0; i < ready.size(); ++i) {
    if (ready[i].flow > *after) return i;
  }
  return 0;
}

}  // namespace

std::uint32_t ArbiterPolicy::weight_of(FlowId flow) const {
  auto it = weights.find(flow);
  if (it != weights.end()) return it->second;
  return kind == Kind::Priority ? 0 : 1;
}

void ArbiterPolicy::validate() const {
  if (kind == Kind::WeightedRoundRobin || kind == Kind::WeightedFairQueuing) {
    for (const auto& [flow, w] : weights) {
      if (w == 0) throw ConfigError("arbiter weight for flow " + std::to_string(flow.value) + " must be positive");
    }
  }
  if (kind == Kind::WeightedFairQueuing && wfq_quantum_bytes == 0) {
    throw ConfigError("WFQ quantum must be positive");
  }
}

Arbiter::Arbiter(ArbiterPolicy policy) : policy_(std::move(policy)) { policy_.validate(); }

void Arbiter::set_weight(FlowId flow, std::uint32_t weight) {
  ArbiterPolicy next = policy_;
  next.weights[flow] = weight;
  next.validate();
  policy_ = std::move(next);
}

FlowId Arbiter::arbitrate(std::span<const ReadyQueue> ready) {
  if (ready.empty()) throw SimulationError("arbitrate called with no ready queue");
  FlowId granted;
  switch (policy_.kind) {
    case ArbiterPolicy::Kind::RoundRobin:
      granted = round_robin(ready);
      break;
    case ArbiterPolicy::Kind::WeightedRoundRobin:
      granted = deficit(ready, false);
      break;
    case ArbiterPolicy::Kind::WeightedFairQueuing:
      granted = deficit(ready, true);
      break;
    case ArbiterPolicy::Kind::Priority:
      granted = priority(ready);
      break;
  }
  last_ = granted;
  return granted;
}

FlowId Arbiter::round_robin(std::span<const ReadyQueue> ready) {
  return ready[next_after(ready, last_)].flow;
}

FlowId Arbiter::deficit(std::span<const ReadyQueue> ready, bool byte_cost) {
  auto find = [&](FlowId f) -> const ReadyQueue* {
    for (const auto& r : ready) {
      if (r.flow == f) return &r;
    }
    return nullptr;
  };
  const std::int64_t unit = byte_cost ? policy_.wfq_quantum_bytes : 1;
  for (;;) {
    if (current_) {
      const ReadyQueue* q = find(*current_);
      if (q != nullptr) {
        const auto cost = static_cast<std::int64_t>(byte_cost ? q->head_bytes : 1);
        auto& d = deficits_[*current_];
        if (d >= cost) {
          d -= cost;
          return q->flow;
        }
      } else {
        // An emptied queue forfeits its deficit.
        deficits_.erase(*current_);
      }
    }
    const FlowId next = ready[next_after(ready, current_)].flow;
    current_ = next;
    deficits_[next] += unit * policy_.weight_of(next);
  }
}

FlowId Arbiter::priority(std::span<const ReadyQueue> ready) {
  std::uint32_t top = 0;
  for (const auto& r : ready) top = std::max(top, policy_.weight_of(r.flow));
  std::vector<ReadyQueue> level;
  for (const auto& r : ready) {
    if (policy_.weight_of(r.flow) == top) level.push_back(r);
  }
  return level[next_after(level, last_)].flow;
}

}  // namespace accelshape
