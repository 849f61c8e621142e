#include <benchmark/benchmark.h>

#include <vector>

#include <accelshape/arbiter.hpp>
#include <accelshape/datapath.hpp>
#include <accelshape/engine.hpp>
#include <accelshape/shaper.hpp>

using namespace accelshape;

namespace {

struct Bounce : EventHandler {
  Engine* engine = nullptr;
  void handle(const Event& ev) override { engine->schedule(ev.fire_at + 1 + ev.arg % 7, EventKind::Inject, *this, 0, ev.arg + 1); }
};

void BM_EngineDispatch(benchmark::State& state) {
  const auto pending = static_cast<std::uint64_t>(state.range(0));
  for (auto _ : state) {
    Engine e;
    Bounce b;
    b.engine = &e;
    for (std::uint64_t i = 0; i < pending; ++i) e.schedule(i, EventKind::Inject, b, 0, i);
    benchmark::DoNotOptimize(e.run_until(100000).dispatched);
  }
}
BENCHMARK(BM_EngineDispatch)->Arg(1)->Arg(64)->Arg(4096);

void BM_TokenBucketFetch(benchmark::State& state) {
  const ShaperRegisters regs = params_for_rate({SloMetric::ThroughputGbps, 10.0}, SimClock{},
                                               {.largest_message_bytes = 1500});
  TokenBucket b(regs, 0);
  Cycle t = 0;
  for (auto _ : state) {
    const FetchDecision d = b.try_fetch(1500, t);
    t = d.admit ? t + 1 : d.next_eligible;
    benchmark::DoNotOptimize(d);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_TokenBucketFetch);

void BM_ParamsForRate(benchmark::State& state) {
  double g = 0.37;
  for (auto _ : state) {
    benchmark::DoNotOptimize(params_for_rate({SloMetric::ThroughputGbps, g}, SimClock{}));
    g = g < 900.0 ? g * 1.7 : 0.37;
  }
}
BENCHMARK(BM_ParamsForRate);

void BM_Arbiter(benchmark::State& state) {
  ArbiterPolicy p;
  p.kind = static_cast<ArbiterPolicy::Kind>(state.range(0));
  Arbiter a(p);
  std::vector<ReadyQueue> ready;
  for (std::uint32_t i = 1; i <= 16; ++i) ready.push_back({FlowId{i}, 64u * i});
  for (auto _ : state) benchmark::DoNotOptimize(a.arbitrate(ready));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Arbiter)->DenseRange(0, 3);

void BM_DatapathMillisecond(benchmark::State& state) {
  const auto flows = static_cast<std::uint32_t>(state.range(0));
  for (auto _ : state) {
    Engine e;
    DatapathConfig c;
    AcceleratorModel m;
    m.id = "acc";
    m.curve = CapacityCurve({{64, 10.0}, {1500, 32.0}});
    m.max_capacity_gbps = 32.0;
    c.accelerators = {m};
    c.reference_gbps = 32.0;
    Datapath dp(e, c);
    for (std::uint32_t i = 1; i <= flows; ++i) {
      FlowSpec f;
      f.id = FlowId{i};
      f.acc_id = "acc";
      f.pattern.sizes = SizeDist::fixed(1500);
      f.pattern.load = 1.0 / flows;
      dp.add_flow(f, 0);
    }
    benchmark::DoNotOptimize(e.run_until(e.clock().cycles_from_us(1000)).dispatched);
  }
}
BENCHMARK(BM_DatapathMillisecond)->Arg(1)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
