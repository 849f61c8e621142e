#pragma once

#include <cstdint>
#include <iosfwd>
#include <queue>
#include <string_view>
#include <vector>

#include "accelshape/types.hpp"

namespace accelshape {

/// Virtual clock. Default cycle is 4 ns, a 250 MHz datapath.
struct SimClock {
  Cycle now_cycles = 0;
  std::uint32_t cycle_ns = 4;

  Picos cycle_ps() const { return static_cast<Picos>(cycle_ns) * 1000; }
  Cycle cycles_from_ns(double ns) const;
  Cycle cycles_from_us(double us) const { return cycles_from_ns(us * 1000.0); }
  double ns(Cycle cycles) const { return static_cast<double>(cycles) * cycle_ns; }
  /// First cycle at or after `ps`.
  Cycle ceil_cycle(Picos ps) const;
};

enum class EventKind : std::uint8_t {
  Inject,
  TokenRefill,
  FabricGrant,
  AccelStart,
  AccelDone,
  CompletionWrite,
  ControlTick,
  ReconfigCommit,
};
std::string_view to_string(EventKind kind);

struct Event;

class EventHandler {
 public:
  virtual ~EventHandler() = default;
  virtual void handle(const Event& ev) = 0;
};

struct Event {
  Cycle fire_at = 0;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::Inject;
  std::uint32_t flow = 0;
  std::uint64_t arg = 0;
  EventHandler* target = nullptr;
};

struct SimStats {
  std::uint64_t scheduled = 0;
  std::uint64_t dispatched = 0;
  std::uint64_t pending = 0;
  Cycle now = 0;
  std::uint64_t trace_hash = 0;
};

/// Single-threaded discrete-event kernel. Events at the same cycle fire in
/// insertion order.
class Engine {
 public:
  explicit Engine(std::uint32_t cycle_ns = 4);

  Cycle now() const { return clock_.now_cycles; }
  const SimClock& clock() const { return clock_; }

  void schedule(Cycle fire_at, EventKind kind, EventHandler& target, std::uint32_t flow = 0,
                std::uint64_t arg = 0);

  /// Dispatches every event with fire_at <= end_cycles.
  SimStats run_until(Cycle end_cycles);

  SimStats stats() const;

  /// One line per dispatched event: `<cycle> <seq> <kind> <flow> <arg>`.
  void set_trace(std::ostream* out) { trace_ = out; }

 private:
  struct Later {
    bool operator()(const Event& l, const Event& r) const {
      return l.fire_at != r.fire_at ? l.fire_at > r.fire_at : l.seq > r.seq;
    }
  };

  SimClock clock_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::uint64_t next_seq_ = 0;
  std::uint64_t dispatched_ = 0;
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
  std::ostream* trace_ = nullptr;
};

}  // namespace accelshape
