#include "accelshape/engine.hpp"

#include <array>
#include <cmath>
#include <ostream>
#include <string>

namespace accelshape {

namespace {

constexpr std::array<std::string_view, 8> kKindNames = {
    "inject", "token-refill", "fabric-grant", "accel-start",
    "accel-done", "completion-write", "control-tick", "reconfig-commit"};

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xffu;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::string_view to_string(EventKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

Cycle SimClock::cycles_from_ns(double ns) const {
  return static_cast<Cycle>(std::llround(ns / static_cast<double>(cycle_ns)));
}

Cycle SimClock::ceil_cycle(Picos ps) const {
  if (ps <= 0) return 0;
  const Picos c = cycle_ps();
  return static_cast<Cycle>((ps + c - 1) / c);
}

Engine::Engine(std::uint32_t cycle_ns) {
  if (cycle_ns == 0) throw ConfigError("cycle_ns must be > 0");
  clock_.cycle_ns = cycle_ns;
}

void Engine::schedule(Cycle fire_at, EventKind kind, EventHandler& target, std::uint32_t flow,
                      std::uint64_t arg) {
  if (fire_at < clock_.now_cycles) {
    throw SimulationError("event scheduled in the past: " + std::to_string(fire_at) + " < " +
                          std::to_string(clock_.now_cycles));
  }
  queue_.push(Event{fire_at, next_seq_++, kind, flow, arg, &target});
}

SimStats Engine::run_until(Cycle end_cycles) {
  if (end_cycles < clock_.now_cycles) throw SimulationError("run_until target is in the past");
  while (!queue_.empty() && queue_.top().fire_at <= end_cycles) {
    const Event ev = queue_.top();
    queue_.pop();
    clock_.now_cycles = ev.fire_at;
    ++dispatched_;
    hash_ = mix(mix(mix(mix(hash_, ev.fire_at), static_cast<std::uint64_t>(ev.kind)), ev.flow), ev.arg);
    if (trace_ != nullptr) {
      *trace_ << ev.fire_at << ' ' << ev.seq << ' ' << to_string(ev.kind) << ' ' << ev.flow << ' '
              << ev.arg << '\n';
    }
    ev.target->handle(ev);
  }
  if (!queue_.empty()) clock_.now_cycles = end_cycles;
  return stats();
}

SimStats Engine::stats() const {
  return SimStats{next_seq_, dispatched_, queue_.size(), clock_.now_cycles, hash_};
}

}  // namespace accelshape
