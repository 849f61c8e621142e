#include <gtest/gtest.h>

#include <sstream>
#include <vector>

#include <accelshape/engine.hpp>

using namespace accelshape;

namespace {

struct Recorder : EventHandler {
  Engine* engine = nullptr;
  std::vector<std::pair<Cycle, std::uint64_t>> seen;
  int chain = 0;
  void handle(const Event& ev) override {
    seen.emplace_back(ev.fire_at, ev.arg);
    if (chain > 0) {
      --chain;
      engine->schedule(engine->now(), EventKind::Inject, *this, 0, ev.arg + 100);
    }
  }
};

}  // namespace

TEST(Engine, OrdersByCycleThenInsertion) {
  Engine e;
  Recorder r;
  r.engine = &e;
  e.schedule(10, EventKind::Inject, r, 0, 1);
  e.schedule(5, EventKind::Inject, r, 0, 2);
  e.schedule(10, EventKind::Inject, r, 0, 3);
  e.schedule(5, EventKind::Inject, r, 0, 4);
  e.run_until(100);
  const std::vector<std::pair<Cycle, std::uint64_t>> want{{5, 2}, {5, 4}, {10, 1}, {10, 3}};
  EXPECT_EQ(r.seen, want);
}

TEST(Engine, SameCycleEventsScheduledDuringDispatchRunAfter) {
  Engine e;
  Recorder r;
  r.engine = &e;
  r.chain = 1;
  e.schedule(3, EventKind::Inject, r, 0, 1);
  e.schedule(3, EventKind::Inject, r, 0, 2);
  e.run_until(3);
  const std::vector<std::pair<Cycle, std::uint64_t>> want{{3, 1}, {3, 2}, {3, 101}};
  EXPECT_EQ(r.seen, want);
}

TEST(Engine, RunUntilIsInclusiveAndResumable) {
  Engine e;
  Recorder r;
  r.engine = &e;
  e.schedule(10, EventKind::Inject, r);
  e.schedule(11, EventKind::Inject, r);
  SimStats s = e.run_until(10);
  EXPECT_EQ(s.dispatched, 1u);
  EXPECT_EQ(s.pending, 1u);
  EXPECT_EQ(e.now(), 10u);
  s = e.run_until(50);
  EXPECT_EQ(s.dispatched, 2u);
  EXPECT_THROW(e.schedule(5, EventKind::Inject, r), SimulationError);
  EXPECT_THROW(e.run_until(1), SimulationError);
}

TEST(Engine, TraceHashIsDeterministicAndOrderSensitive) {
  auto run = [](bool swap) {
    Engine e;
    Recorder r;
    r.engine = &e;
    e.schedule(1, EventKind::Inject, r, 1, swap ? 8 : 7);
    e.schedule(1, EventKind::AccelDone, r, 2, swap ? 7 : 8);
    return e.run_until(10).trace_hash;
  };
  EXPECT_EQ(run(false), run(false));
  EXPECT_NE(run(false), run(true));
}

TEST(Engine, TraceLines) {
  Engine e;
  Recorder r;
  r.engine = &e;
  std::ostringstream out;
  e.set_trace(&out);
  e.schedule(4, EventKind::ControlTick, r, 3, 9);
  e.run_until(4);
  EXPECT_EQ(out.str(), "4 0 control-tick 3 9\n");
}

TEST(SimClock, Conversions) {
  SimClock c;
  EXPECT_EQ(c.cycles_from_us(10.0), 2500u);
  EXPECT_EQ(c.ceil_cycle(0), 0u);
  EXPECT_EQ(c.ceil_cycle(1), 1u);
  EXPECT_EQ(c.ceil_cycle(4000), 1u);
  EXPECT_EQ(c.ceil_cycle(4001), 2u);
  EXPECT_DOUBLE_EQ(c.ns(250), 1000.0);
  EXPECT_THROW(Engine(0), ConfigError);
}
