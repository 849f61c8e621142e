#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include <accelshape/fabric.hpp>

using namespace accelshape;

namespace {

struct Sink : TransferListener {
  Engine* engine = nullptr;
  std::vector<std::pair<Cycle, std::uint64_t>> done;  // cycle, tag
  void on_transfer_done(const Transfer& t) override { done.emplace_back(engine->now(), t.tag); }
};

// Wire time from first principles: granules of tlp bytes, each rounded to a
// whole picosecond, back to back.
Picos wire_ps(std::uint64_t bytes, std::uint64_t tlp, double gbps) {
  Picos total = 0;
  for (std::uint64_t left = bytes; left > 0;) {
    const std::uint64_t g = std::min(left, tlp);
    total += static_cast<Picos>(std::llround(static_cast<double>(g) * 8.0 / gbps * 1000.0));
    left -= g;
  }
  return total;
}

Cycle cycle_after(Picos ps) { return static_cast<Cycle>((ps + 3999) / 4000); }

ChannelConfig channel(double gbps, std::uint32_t credits = 64) {
  ChannelConfig c;
  c.bw_h2d_gbps = c.bw_d2h_gbps = c.bw_p2p_gbps = gbps;
  c.bw_nic_gbps = gbps;
  c.credits = credits;
  return c;
}

}  // namespace

TEST(Fabric, SerializationTimeMatchesWireOracle) {
  for (double gbps : {8.0, 50.0, 128.0}) {
    for (std::uint64_t bytes : {64ull, 1500ull, 4096ull, 65536ull}) {
      Engine e;
      Sink s;
      s.engine = &e;
      Fabric f(e, channel(gbps));
      f.request_transfer(FlowId{1}, Direction::H2D, bytes, s, 1);
      e.run_until(10'000'000);
      ASSERT_EQ(s.done.size(), 1u);
      EXPECT_EQ(s.done[0].first, cycle_after(wire_ps(bytes, 256, gbps))) << gbps << " " << bytes;
      EXPECT_EQ(f.stats(Direction::H2D).bytes, bytes);
    }
  }
  EXPECT_EQ(serialization_ps(1500, 8.0), 1'500'000);
}

TEST(Fabric, DirectionsAreFullDuplex) {
  Engine e;
  Sink s;
  s.engine = &e;
  Fabric f(e, channel(50.0));
  f.request_transfer(FlowId{1}, Direction::H2D, 4096, s, 1);
  f.request_transfer(FlowId{2}, Direction::D2H, 4096, s, 2);
  e.run_until(1'000'000);
  ASSERT_EQ(s.done.size(), 2u);
  EXPECT_EQ(s.done[0].first, s.done[1].first);
}

TEST(Fabric, SameDirectionSharesBandwidth) {
  Engine e;
  Sink s;
  s.engine = &e;
  Fabric f(e, channel(50.0));
  f.request_transfer(FlowId{1}, Direction::H2D, 4096, s, 1);
  f.request_transfer(FlowId{2}, Direction::H2D, 4096, s, 2);
  e.run_until(1'000'000);
  ASSERT_EQ(s.done.size(), 2u);
  EXPECT_EQ(s.done[1].first, cycle_after(wire_ps(8192, 256, 50.0)));
}

TEST(Fabric, GranulesInterleaveRoundRobinAcrossFlows) {
  Engine e;
  Sink s;
  s.engine = &e;
  Fabric f(e, channel(10.0));
  // A long transfer from flow 1 does not starve flow 2's short one.
  f.request_transfer(FlowId{1}, Direction::H2D, 256 * 10, s, 1);
  f.request_transfer(FlowId{2}, Direction::H2D, 256, s, 2);
  e.run_until(10'000'000);
  ASSERT_EQ(s.done.size(), 2u);
  EXPECT_EQ(s.done[0].second, 2u);
  EXPECT_EQ(s.done[0].first, cycle_after(wire_ps(512, 256, 10.0)));
}

TEST(Fabric, CreditsBoundOutstandingPcieTransfers) {
  Engine e;
  Sink s;
  s.engine = &e;
  Fabric f(e, channel(50.0, 2));
  for (std::uint64_t i = 0; i < 5; ++i) f.request_transfer(FlowId{1}, Direction::H2D, 1500, s, i);
  EXPECT_EQ(f.in_flight(), 2u);
  EXPECT_EQ(f.credit_waiters(), 3u);
  // NIC ports do not draw on the PCIe pool.
  f.request_transfer(FlowId{2}, Direction::NicIn, 1500, s, 9);
  EXPECT_EQ(f.credit_waiters(), 3u);
  e.run_until(10'000'000);
  EXPECT_EQ(s.done.size(), 6u);
  EXPECT_EQ(f.max_in_flight(), 2u);
  EXPECT_EQ(f.in_flight(), 0u);
  EXPECT_EQ(f.active_transfers(), 0u);
}

TEST(Fabric, RejectsBadInput) {
  Engine e;
  Sink s;
  ChannelConfig c = channel(50.0);
  c.tlp_bytes = 0;
  EXPECT_THROW(Fabric(e, c), ConfigError);
  Fabric f(e, channel(50.0));
  EXPECT_THROW(f.request_transfer(FlowId{1}, Direction::H2D, 0, s), SimulationError);
}

TEST(FlowQueue, BoundedFifoCountsDrops) {
  FlowQueue q(FlowId{3}, 2);
  EXPECT_TRUE(q.try_push({1, 64, 0, 64, 0}));
  EXPECT_TRUE(q.try_push({2, 64, 0, 64, 0}));
  EXPECT_FALSE(q.try_push({3, 64, 0, 64, 0}));
  EXPECT_EQ(q.drops(), 1u);
  EXPECT_EQ(q.front().id, 1u);
  q.pop();
  EXPECT_EQ(q.front().id, 2u);
  EXPECT_THROW(FlowQueue(FlowId{1}, 0), ConfigError);
}

TEST(QueuedMessage, Segments) {
  QueuedMessage m{1, 10000, 0, 4096, 0};
  EXPECT_EQ(m.segment_count(), 3u);
  EXPECT_EQ(m.next_segment(), 4096u);
  m.offset = 8192;
  EXPECT_EQ(m.next_segment(), 1808u);
}
