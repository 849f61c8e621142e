#include <gtest/gtest.h>

#include <accelshape/datapath.hpp>

using namespace accelshape;

namespace {

AcceleratorModel flat(double gbps, std::string id = "acc") {
  AcceleratorModel m;
  m.id = std::move(id);
  m.curve = CapacityCurve({{64, gbps}});
  m.max_capacity_gbps = gbps;
  return m;
}

DatapathConfig config(DataplaneMode mode, double acc_gbps = 32.0) {
  DatapathConfig c;
  c.channel.bw_h2d_gbps = c.channel.bw_d2h_gbps = c.channel.bw_p2p_gbps = 128.0;
  c.channel.bw_nic_gbps = 200.0;
  c.accelerators = {flat(acc_gbps)};
  c.mode = mode;
  c.reference_gbps = 32.0;
  return c;
}

FlowSpec flow(std::uint32_t id, std::uint32_t size, double load, PathMode path = PathMode::FunctionCall) {
  FlowSpec f;
  f.id = FlowId{id};
  f.vm_id = "vm" + std::to_string(id);
  f.acc_id = "acc";
  f.path = path;
  f.pattern.sizes = SizeDist::fixed(size);
  f.pattern.load = load;
  return f;
}

double delivered_gbps(const Datapath& dp, FlowId id, Cycle from, Cycle to) {
  double bytes = 0.0;
  for (const Completion& c : dp.completions(id)) {
    if (c.at > from && c.at <= to) bytes += c.bytes;
  }
  return bytes * 8.0 / (static_cast<double>(to - from) * 4e-9) / 1e9;
}

void expect_conserved(const Datapath& dp) {
  for (FlowId id : dp.flow_ids()) {
    const FlowCounters& c = dp.counters(id);
    EXPECT_EQ(c.injected, c.completed + c.dropped + dp.in_flight(id)) << "flow " << id.value;
    EXPECT_EQ(c.completed, dp.completions(id).size());
  }
}

}  // namespace

TEST(Datapath, SingleFlowSaturatesAccelerator) {
  Engine e;
  Datapath dp(e, config(DataplaneMode::Unshaped));
  dp.add_flow(flow(1, 1500, 1.0), 0);
  const Cycle end = e.clock().cycles_from_us(2000);
  e.run_until(end);
  EXPECT_NEAR(delivered_gbps(dp, FlowId{1}, end / 10, end), 32.0, 32.0 * 0.02);
  expect_conserved(dp);
}

TEST(Datapath, ConservationUnderOverloadAndDrops) {
  for (DataplaneMode mode : {DataplaneMode::Unshaped, DataplaneMode::SoftShaped}) {
    Engine e;
    DatapathConfig c = config(mode, 8.0);
    c.host_queue_depth = 8;
    Datapath dp(e, c);
    for (std::uint32_t i = 1; i <= 3; ++i) {
      FlowSpec f = flow(i, 64u << i, 0.6);
      f.slo.value = 4.0;
      dp.add_flow(f, 0);
      dp.activate(FlowId{i});
    }
    e.run_until(e.clock().cycles_from_us(500));
    std::uint64_t drops = 0;
    for (FlowId id : dp.flow_ids()) drops += dp.counters(id).dropped;
    EXPECT_GT(drops, 0u);
    expect_conserved(dp);
  }
}

TEST(Datapath, ShapedFlowWaitsForFirstCommit) {
  Engine e;
  DatapathConfig c = config(DataplaneMode::Shaped);
  Datapath dp(e, c);
  dp.add_flow(flow(1, 1500, 1.0), 0);
  dp.activate(FlowId{1});
  e.run_until(1000);
  EXPECT_FALSE(dp.activated_at(FlowId{1}).has_value());
  EXPECT_EQ(dp.counters(FlowId{1}).injected, 0u);

  dp.write_registers(FlowId{1}, params_for_rate({SloMetric::ThroughputGbps, 10.0}, e.clock(), {.largest_message_bytes = 1500}));
  const Cycle commit = e.now() + c.reconfig_latency;
  const Cycle end = commit + e.clock().cycles_from_us(2000);
  e.run_until(end);
  ASSERT_TRUE(dp.activated_at(FlowId{1}).has_value());
  EXPECT_EQ(*dp.activated_at(FlowId{1}), commit);
  EXPECT_NEAR(delivered_gbps(dp, FlowId{1}, commit + (end - commit) / 10, end), 10.0, 0.1);
  expect_conserved(dp);
}

TEST(Datapath, ShapingIsolatesLargeFromSmall) {
  Engine e;
  Datapath dp(e, config(DataplaneMode::Shaped));
  const FlowSpec big = flow(1, 4096, 0.9);
  const FlowSpec small = flow(2, 256, 0.9);
  dp.add_flow(big, 0);
  dp.add_flow(small, 0);
  for (const FlowSpec& f : {big, small}) {
    dp.activate(f.id);
    dp.write_registers(f.id, params_for_rate({SloMetric::ThroughputGbps, 12.0}, e.clock(),
                                             {.largest_message_bytes = f.pattern.sizes.max()}));
  }
  const Cycle end = e.clock().cycles_from_us(3000);
  e.run_until(end);
  EXPECT_NEAR(delivered_gbps(dp, big.id, end / 5, end), 12.0, 0.12);
  EXPECT_NEAR(delivered_gbps(dp, small.id, end / 5, end), 12.0, 0.12);
}

TEST(Datapath, InlinePathsUseNicPorts) {
  Engine e;
  Datapath dp(e, config(DataplaneMode::Unshaped));
  dp.add_flow(flow(1, 1024, 0.25, PathMode::InlineNicRx), 0);
  dp.add_flow(flow(2, 1024, 0.25, PathMode::InlineNicTx), 0);
  e.run_until(e.clock().cycles_from_us(200));
  const Fabric& f = dp.fabric();
  EXPECT_GT(f.stats(Direction::NicIn).bytes, 0u);
  EXPECT_GT(f.stats(Direction::NicOut).bytes, 0u);
  EXPECT_GT(f.stats(Direction::H2D).bytes, 0u);
  EXPECT_GT(f.stats(Direction::D2H).bytes, 0u);
  EXPECT_EQ(f.stats(Direction::P2P).bytes, 0u);
  // Ingress of one flow equals egress of the other within in-flight slack.
  const auto in = static_cast<double>(f.stats(Direction::NicIn).bytes);
  const auto out = static_cast<double>(f.stats(Direction::D2H).bytes);
  EXPECT_NEAR(out / in, 1.0, 0.05);
}

TEST(Datapath, EgressRatioScalesReturnTraffic) {
  Engine e;
  DatapathConfig c = config(DataplaneMode::Unshaped);
  c.accelerators[0].egress = Proportional{0.25};
  Datapath dp(e, c);
  dp.add_flow(flow(1, 4096, 0.3), 0);
  e.run_until(e.clock().cycles_from_us(300));
  const auto in = static_cast<double>(dp.fabric().stats(Direction::H2D).bytes);
  const auto out = static_cast<double>(dp.fabric().stats(Direction::D2H).bytes);
  EXPECT_NEAR(out / in, 0.25, 0.02);
}

TEST(Datapath, FlowStateIsConstantPerFlow) {
  std::size_t one = 0;
  for (std::uint32_t n = 1; n <= 16; ++n) {
    Engine e;
    Datapath dp(e, config(DataplaneMode::Shaped));
    for (std::uint32_t i = 1; i <= n; ++i) dp.add_flow(flow(i, 1500, 0.05), 0);
    if (n == 1) one = dp.flow_state_bytes();
    EXPECT_EQ(dp.flow_state_bytes(), n * one);
  }
}

TEST(Datapath, RejectsUnknownAcceleratorAndDuplicates) {
  Engine e;
  Datapath dp(e, config(DataplaneMode::Unshaped));
  FlowSpec f = flow(1, 64, 0.1);
  dp.add_flow(f, 0);
  EXPECT_THROW(dp.add_flow(f, 0), ConfigError);
  f.id = FlowId{2};
  f.acc_id = "nope";
  EXPECT_THROW(dp.add_flow(f, 0), ConfigError);
  EXPECT_THROW(dp.counters(FlowId{9}), SimulationError);
}

TEST(Datapath, StopEndsInjection) {
  Engine e;
  Datapath dp(e, config(DataplaneMode::Unshaped));
  const Cycle stop = e.clock().cycles_from_us(100);
  dp.add_flow(flow(1, 1500, 0.5), 0, stop);
  e.run_until(e.clock().cycles_from_us(400));
  const auto done = dp.completions(FlowId{1});
  ASSERT_FALSE(done.empty());
  EXPECT_EQ(dp.counters(FlowId{1}).completed, dp.counters(FlowId{1}).injected);
  EXPECT_LT(done.back().at, stop + e.clock().cycles_from_us(10));
}
