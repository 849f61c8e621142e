#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include <accelshape/accelerator.hpp>
#include <accelshape/rng.hpp>
#include <accelshape/types.hpp>

using namespace accelshape;

TEST(Types, PathDirections) {
  EXPECT_EQ(directions_of(PathMode::FunctionCall).ingress, Direction::H2D);
  EXPECT_EQ(directions_of(PathMode::FunctionCall).egress, Direction::D2H);
  EXPECT_EQ(directions_of(PathMode::InlineNicRx).ingress, Direction::NicIn);
  EXPECT_EQ(directions_of(PathMode::InlineNicRx).egress, Direction::D2H);
  EXPECT_EQ(directions_of(PathMode::InlineNicTx).ingress, Direction::H2D);
  EXPECT_EQ(directions_of(PathMode::InlineNicTx).egress, Direction::NicOut);
  EXPECT_EQ(directions_of(PathMode::InlineP2P).ingress, Direction::P2P);
  EXPECT_TRUE(is_pcie(Direction::P2P));
  EXPECT_FALSE(is_pcie(Direction::NicOut));
}

TEST(Types, NamesRoundTrip) {
  for (PathMode m : {PathMode::FunctionCall, PathMode::InlineNicTx, PathMode::InlineNicRx, PathMode::InlineP2P}) {
    EXPECT_EQ(path_mode_from_string(to_string(m)), m);
  }
  for (Direction d : {Direction::H2D, Direction::D2H, Direction::P2P, Direction::NicIn, Direction::NicOut}) {
    EXPECT_EQ(direction_from_string(to_string(d)), d);
  }
  EXPECT_EQ(slo_metric_from_string("latency"), SloMetric::TailLatency);
  EXPECT_THROW(path_mode_from_string("sideways"), ConfigError);
  EXPECT_THROW(slo_metric_from_string("speed"), ConfigError);
}

TEST(Types, SizeDistMoments) {
  EXPECT_DOUBLE_EQ(SizeDist::fixed(1500).mean(), 1500.0);
  EXPECT_DOUBLE_EQ(SizeDist::uniform(64, 128).mean(), 96.0);
  EXPECT_DOUBLE_EQ(SizeDist::bimodal(64, 1500, 0.25).mean(), 0.25 * 64 + 0.75 * 1500);
  EXPECT_EQ(SizeDist::bimodal(64, 1500, 0.25).max(), 1500u);
  EXPECT_THROW(SizeDist::uniform(128, 64).validate(), ConfigError);
  EXPECT_THROW(SizeDist::bimodal(64, 128, 1.5).validate(), ConfigError);
}

TEST(Types, FlowValidation) {
  FlowSpec f;
  f.acc_id = "a";
  EXPECT_NO_THROW(f.validate());
  f.pattern.load = 1.2;
  EXPECT_THROW(f.validate(), ConfigError);
  f.pattern.load = 0.5;
  f.slo.percentile = 1.0;
  EXPECT_THROW(f.validate(), ConfigError);
  f.slo.percentile = 0.99;
  f.weight = 0;
  EXPECT_THROW(f.validate(), ConfigError);
}

TEST(Rng, ForkedStreamsAreStableAndIndependent) {
  Rng a = Rng::fork(42, "arrivals/1");
  Rng b = Rng::fork(42, "arrivals/1");
  Rng c = Rng::fork(42, "arrivals/2");
  const std::uint64_t x = a.next();
  EXPECT_EQ(x, b.next());
  EXPECT_NE(x, c.next());
}

TEST(Rng, UniformIntCoversClosedRange) {
  Rng r(1);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto v = r.uniform_int(3, 7);
    ASSERT_GE(v, 3u);
    ASSERT_LE(v, 7u);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 5u);
}

TEST(Rng, ExponentialAndPoissonMeans) {
  Rng r(9);
  double e = 0.0;
  double p = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    e += r.exponential(3.0);
    p += static_cast<double>(r.poisson(4.5));
  }
  EXPECT_NEAR(e / n, 3.0, 0.05);
  EXPECT_NEAR(p / n, 4.5, 0.05);
}

namespace {

AcceleratorModel model(std::vector<CurveKnot> knots, double max) {
  AcceleratorModel m;
  m.id = "x";
  m.curve = CapacityCurve(std::move(knots));
  m.max_capacity_gbps = max;
  return m;
}

}  // namespace

TEST(Accelerator, CurveInterpolatesAndClamps) {
  const CapacityCurve c({{256, 32.0}, {64, 9.6}, {128, 30.0}});
  EXPECT_DOUBLE_EQ(c.at(1), 9.6);
  EXPECT_DOUBLE_EQ(c.at(64), 9.6);
  EXPECT_DOUBLE_EQ(c.at(96), 9.6 + 0.5 * (30.0 - 9.6));
  EXPECT_DOUBLE_EQ(c.at(192), 31.0);
  EXPECT_DOUBLE_EQ(c.at(1 << 20), 32.0);
  EXPECT_THROW(CapacityCurve({{64, 1.0}, {64, 2.0}}), ConfigError);
}

// Sampled log, saturating-exponential and hand-drawn shapes: interpolation must
// reproduce each sample exactly and stay between neighbouring samples.
TEST(Accelerator, CurveFixturesStayBetweenKnots) {
  std::vector<std::vector<CurveKnot>> fixtures(3);
  for (std::uint32_t s = 64; s <= (1u << 20); s *= 4) {
    fixtures[0].push_back({s, 4.0 * std::log2(static_cast<double>(s)) - 20.0});
    fixtures[1].push_back({s, 45.0 * (1.0 - std::exp(-static_cast<double>(s) / 2048.0))});
  }
  fixtures[2] = {{64, 2.0}, {300, 11.0}, {1000, 9.0}, {9000, 24.0}, {1 << 20, 24.0}};
  for (const auto& knots : fixtures) {
    const CapacityCurve c(knots);
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
      EXPECT_DOUBLE_EQ(c.at(knots[i].size), knots[i].gbps);
      const double lo = std::min(knots[i].gbps, knots[i + 1].gbps);
      const double hi = std::max(knots[i].gbps, knots[i + 1].gbps);
      for (int k = 1; k < 8; ++k) {
        const std::uint64_t s = knots[i].size + (knots[i + 1].size - knots[i].size) * k / 8;
        EXPECT_GE(c.at(s), lo - 1e-9);
        EXPECT_LE(c.at(s), hi + 1e-9);
      }
    }
  }
}

TEST(Accelerator, EgressRatios) {
  AcceleratorModel m = model({{64, 10.0}}, 10.0);
  EXPECT_EQ(egress_size(m, 1500), 1500u);
  m.egress = Proportional{0.5};
  EXPECT_EQ(egress_size(m, 1501), 751u);
  m.egress = Proportional{1e-6};
  EXPECT_EQ(egress_size(m, 64), 1u);
  m.egress = FixedOutput{32};
  EXPECT_EQ(egress_size(m, 1 << 20), 32u);
}

TEST(Accelerator, ModelValidation) {
  EXPECT_NO_THROW(model({{64, 10.0}}, 10.0).validate());
  EXPECT_THROW(model({{64, 11.0}}, 10.0).validate(), ConfigError);
  EXPECT_THROW(model({}, 10.0).validate(), ConfigError);
  AcceleratorModel m = model({{64, 10.0}}, 10.0);
  m.queue_depth = 0;
  EXPECT_THROW(m.validate(), ConfigError);
  m = model({{64, 10.0}}, 10.0);
  m.service = {ServiceTimeDist::Kind::Uniform, 5.0, 2.0, 1.0};
  EXPECT_THROW(m.validate(), ConfigError);
}

TEST(Accelerator, EffectiveCapacityTimeShares) {
  const AcceleratorModel m = model({{64, 10.0}, {1024, 40.0}}, 40.0);
  const StreamMix one[] = {{1024, 20.0}};
  EXPECT_DOUBLE_EQ(effective_capacity(m, one), 40.0);
  // Half the offered bytes at 10 Gbps, half at 40 Gbps: harmonic mean 16.
  const StreamMix two[] = {{64, 5.0}, {1024, 5.0}};
  EXPECT_DOUBLE_EQ(effective_capacity(m, two), 16.0);
  const StreamMix bad[] = {{32, 1.0}};
  EXPECT_THROW(effective_capacity(m, bad), ConfigError);
}

TEST(Accelerator, ServiceDrawsMatchMean) {
  Rng r(4);
  const ServiceTimeDist d{ServiceTimeDist::Kind::Bimodal, 10.0, 30.0, 0.25};
  double sum = 0.0;
  for (int i = 0; i < 40000; ++i) sum += static_cast<double>(d.draw(r));
  EXPECT_NEAR(sum / 40000, d.mean(), 0.3);
  EXPECT_DOUBLE_EQ(d.mean(), 25.0);
}
