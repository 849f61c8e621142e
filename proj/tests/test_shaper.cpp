#include <gtest/gtest.h>

#include <cmath>

#include <accelshape/engine.hpp>
#include <accelshape/shaper.hpp>

#include "support/oracle.hpp"

using namespace accelshape;

namespace {

ShaperRegisters regs(std::uint64_t bkt, std::uint64_t refill, Cycle interval, ShaperMode mode = ShaperMode::Gbps) {
  ShaperRegisters r;
  r.bkt_size = bkt;
  r.refill_rate = refill;
  r.interval = interval;
  r.mode = mode;
  return r;
}

}  // namespace

TEST(TokenBucket, StartsFullAndDrains) {
  TokenBucket b(regs(3000, 100, 10));
  EXPECT_EQ(b.tokens(), 3000u);
  EXPECT_TRUE(b.try_fetch(1500, 0).admit);
  EXPECT_TRUE(b.try_fetch(1500, 0).admit);
  EXPECT_EQ(b.tokens(), 0u);
  const FetchDecision d = b.try_fetch(150, 0);
  EXPECT_FALSE(d.admit);
  // 150 tokens need two refills of 100, at cycles 10 and 20.
  EXPECT_EQ(d.next_eligible, 20u);
}

TEST(TokenBucket, RefillIsLazyAndWholeIntervalOnly) {
  TokenBucket b(regs(1000, 100, 10));
  ASSERT_TRUE(b.try_fetch(1000, 0).admit);
  b.refill(9);
  EXPECT_EQ(b.tokens(), 0u);
  b.refill(19);
  EXPECT_EQ(b.tokens(), 100u);
  EXPECT_EQ(b.last_refill(), 10u);
  b.refill(1'000'000);
  EXPECT_EQ(b.tokens(), 1000u);
}

TEST(TokenBucket, IopsModeChargesOnePerMessage) {
  TokenBucket b(regs(2, 1, 100, ShaperMode::Iops));
  EXPECT_TRUE(b.try_fetch(1'000'000, 0).admit);
  EXPECT_TRUE(b.try_fetch(64, 0).admit);
  EXPECT_FALSE(b.try_fetch(64, 0).admit);
  EXPECT_TRUE(b.try_fetch(64, 100).admit);
}

TEST(TokenBucket, PeekDoesNotSpend) {
  TokenBucket b(regs(500, 50, 4));
  EXPECT_TRUE(b.peek(400, 0).admit);
  EXPECT_EQ(b.tokens(), 500u);
}

TEST(TokenBucket, OversizedMessageIsAConfigError) {
  TokenBucket b(regs(100, 10, 4));
  EXPECT_THROW(b.try_fetch(101, 0), ConfigError);
}

TEST(TokenBucket, RejectsInvalidRegisters) {
  EXPECT_THROW(TokenBucket(regs(10, 0, 4)), ConfigError);
  EXPECT_THROW(TokenBucket(regs(10, 20, 4)), ConfigError);
  EXPECT_THROW(TokenBucket(regs(10, 5, 0)), ConfigError);
}

TEST(TokenBucket, ApplyClampsTokensAndRestartsInterval) {
  TokenBucket b(regs(1000, 100, 10));
  b.apply(regs(300, 30, 7), 5);
  EXPECT_EQ(b.tokens(), 300u);
  EXPECT_EQ(b.last_refill(), 5u);
  ASSERT_TRUE(b.try_fetch(300, 5).admit);
  b.refill(11);
  EXPECT_EQ(b.tokens(), 0u);
  b.refill(12);
  EXPECT_EQ(b.tokens(), 30u);
}

TEST(TokenBucket, MatchesBruteForceOracle) {
  Rng rng(7);
  for (int c = 0; c < 2000; ++c) {
    const ShaperRegisters first = oracle::random_registers(rng);
    const auto trace = oracle::random_trace(rng, first, 40);
    TokenBucket real(first, 0);
    oracle::BruteBucket ref(first, 0);
    for (const oracle::Op& op : trace) {
      if (op.kind == oracle::OpKind::Load) {
        real.apply(op.regs, op.at);
        ref.load(op.regs, op.at);
        continue;
      }
      const FetchDecision d = real.try_fetch(op.bytes, op.at);
      const auto e = ref.fetch(op.bytes, op.at);
      ASSERT_EQ(d.admit, e.admit) << "case " << c;
      if (!d.admit) ASSERT_EQ(d.next_eligible, e.next) << "case " << c;
      ASSERT_EQ(real.tokens(), ref.tokens()) << "case " << c;
    }
  }
}

TEST(TokenBucket, EnvelopeHoldsForGreedySources) {
  Rng rng(11);
  for (int c = 0; c < 300; ++c) {
    const ShaperRegisters r = oracle::random_registers(rng);
    TokenBucket b(r, 0);
    std::vector<oracle::Admission> adm;
    Cycle t = 0;
    for (int i = 0; i < 300; ++i) {
      const std::uint64_t bytes = rng.uniform_int(1, r.mode == ShaperMode::Gbps ? r.bkt_size : 1500);
      FetchDecision d = b.try_fetch(bytes, t);
      if (!d.admit) {
        t = d.next_eligible;
        d = b.try_fetch(bytes, t);
        ASSERT_TRUE(d.admit);
      }
      ASSERT_LE(b.tokens(), r.bkt_size);
      adm.push_back({t, b.cost(bytes)});
      t += rng.uniform_int(0, 1);
    }
    for (Cycle w : {Cycle{1}, r.interval, 3 * r.interval + 1, 17 * r.interval, Cycle{5000}}) {
      const std::uint64_t bound = r.bkt_size + r.refill_rate * ((w + r.interval - 1) / r.interval);
      EXPECT_LE(oracle::max_window_spend(adm, w), bound) << "case " << c << " w=" << w;
    }
  }
}

TEST(ParamsForRate, Anchor1000Gbps) {
  SimClock clock;
  const ShaperRegisters r = params_for_rate({SloMetric::ThroughputGbps, 1000.0}, clock);
  EXPECT_EQ(r.interval, 64u);
  EXPECT_EQ(r.refill_rate, 32000u);
}

TEST(ParamsForRate, ProgrammedRateWithinTolerance) {
  SimClock clock;
  for (double g : {0.37, 1.0, 9.6, 10.0, 33.3, 100.0, 400.0}) {
    const ShaperRegisters r = params_for_rate({SloMetric::ThroughputGbps, g}, clock);
    EXPECT_GE(r.interval, 64u);
    EXPECT_NEAR(programmed_rate(r, clock) / g, 1.0, 1e-3) << g;
  }
  const ShaperRegisters iops = params_for_rate({SloMetric::ThroughputIops, 250e3}, clock);
  EXPECT_EQ(iops.mode, ShaperMode::Iops);
  EXPECT_NEAR(programmed_rate(iops, clock), 250e3, 250.0);
}

TEST(ParamsForRate, BucketHoldsLargestMessagePlusSlack) {
  SimClock clock;
  RateParamOptions o;
  o.largest_message_bytes = 1500;
  const ShaperRegisters r = params_for_rate({SloMetric::ThroughputGbps, 10.0}, clock, o);
  EXPECT_EQ(r.bkt_size, o.bucket_refills * r.refill_rate + 1500);
  o.max_msg_bytes = 512;
  const ShaperRegisters cut = params_for_rate({SloMetric::ThroughputGbps, 10.0}, clock, o);
  EXPECT_EQ(cut.bkt_size, o.bucket_refills * cut.refill_rate + 512);
  EXPECT_EQ(cut.max_msg_bytes, 512u);
}

TEST(ParamsForRate, UnachievableReportsClosest) {
  SimClock clock;
  RateParamOptions o;
  o.interval = 64;
  try {
    params_for_rate({SloMetric::ThroughputGbps, 1.01}, clock, o);
    FAIL() << "expected UnachievableRate";
  } catch (const UnachievableRate& e) {
    EXPECT_NEAR(e.closest(), 1.0, 1e-9);
  }
  EXPECT_THROW(params_for_rate({SloMetric::TailLatency, 100.0}, clock), ConfigError);
}

TEST(Resize, SplitsIntoSegmentsAndRemainder) {
  EXPECT_EQ(resize(10000, 4096), (std::vector<std::uint64_t>{4096, 4096, 1808}));
  EXPECT_EQ(resize(64, 4096), (std::vector<std::uint64_t>{64}));
  EXPECT_THROW(resize(64, 0), ConfigError);
}

TEST(RegisterFile, CommitsAfterLatencyAndSupersedes) {
  Engine engine;
  std::vector<std::pair<Cycle, std::uint64_t>> commits;
  RegisterFile rf(engine, 2500, [&](FlowId, const ShaperRegisters& r) { commits.emplace_back(engine.now(), r.refill_rate); });

  struct Writer : EventHandler {
    RegisterFile* rf;
    void handle(const Event& ev) override {
      rf->write(FlowId{1}, regs(ev.arg * 10, ev.arg, 64));
    }
  } w;
  w.rf = &rf;
  engine.schedule(100, EventKind::ControlTick, w, 0, 5);
  engine.schedule(200, EventKind::ControlTick, w, 0, 6);
  engine.schedule(5000, EventKind::ControlTick, w, 0, 7);
  engine.run_until(10000);

  ASSERT_EQ(commits.size(), 2u);
  EXPECT_EQ(commits[0], (std::pair<Cycle, std::uint64_t>{2700, 6}));
  EXPECT_EQ(commits[1], (std::pair<Cycle, std::uint64_t>{7500, 7}));
  ASSERT_EQ(rf.history().size(), 3u);
  EXPECT_TRUE(rf.history()[0].superseded);
  EXPECT_FALSE(rf.history()[1].superseded);
  EXPECT_EQ(rf.committed(FlowId{1})->refill_rate, 7u);
  EXPECT_FALSE(rf.pending(FlowId{1}));
  EXPECT_THROW(rf.write(FlowId{1}, regs(1, 2, 3)), ConfigError);
}

TEST(SoftwareBucket, CreditsPerTickAndAllowsDebt) {
  Rng rng(3);
  // 1 GB/s with a 1 us timer: 1000 bytes per tick.
  SoftwareTokenBucket s(1e9, ShaperMode::Gbps, 1'000'000, 0);
  EXPECT_DOUBLE_EQ(s.tokens(), 1000.0);
  EXPECT_TRUE(s.try_consume(1500));
  EXPECT_DOUBLE_EQ(s.tokens(), -500.0);
  EXPECT_FALSE(s.try_consume(1));
  EXPECT_EQ(s.tick(0, rng), 1'000'000);
  EXPECT_DOUBLE_EQ(s.tokens(), 500.0);
  s.tick(0, rng);
  s.tick(0, rng);
  EXPECT_DOUBLE_EQ(s.tokens(), s.capacity());
}

TEST(SoftwareBucket, JitterStaysInsideBand) {
  Rng rng(5);
  SoftwareTokenBucket s(1e6, ShaperMode::Iops, 10'000'000, 4'000'000);
  Picos t = 0;
  for (int i = 0; i < 1000; ++i) {
    const Picos next = s.tick(t, rng);
    EXPECT_GE(next - t, 6'000'000);
    EXPECT_LE(next - t, 14'000'000);
    t = next;
  }
  EXPECT_THROW(SoftwareTokenBucket(0.0, ShaperMode::Gbps, 1, 0), ConfigError);
}
