#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <accelshape/profiler.hpp>

using namespace accelshape;

namespace {

AcceleratorModel ipsec_like() {
  AcceleratorModel m;
  m.id = "ipsec";
  m.curve = CapacityCurve({{64, 9.6}, {128, 30.0}, {256, 32.0}, {1 << 20, 32.0}});
  m.max_capacity_gbps = 32.0;
  return m;
}

ChannelConfig wide(std::string name) {
  ChannelConfig c;
  c.name = std::move(name);
  c.bw_h2d_gbps = c.bw_d2h_gbps = c.bw_p2p_gbps = 128.0;
  c.bw_nic_gbps = 200.0;
  return c;
}

SweepPlan small_plan() {
  SweepPlan p;
  p.accelerators = {ipsec_like()};
  p.accs = {"ipsec"};
  p.settings = {wide("a"), wide("b")};
  p.sizes = {64, 256, 1500, 4096, 16384};
  p.loads = {0.0, 0.25, 0.5, 0.75, 1.0};
  p.paths = {PathMode::FunctionCall, PathMode::InlineNicRx};
  p.run_us = 300.0;
  return p;
}

std::string dump(const ProfileTable& t) {
  Json j = t;
  return j.dump(2);
}

std::uint64_t choose(std::uint64_t n, std::uint64_t k) {
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

TEST(Profiler, GridProducesOneEntryPerPoint) {
  const ProfileTable t = run_sweep(small_plan(), 2);
  EXPECT_EQ(t.size(), 5u * 5u * 2u * 2u);
  EXPECT_EQ(t.sizes, small_plan().sizes);
  EXPECT_DOUBLE_EQ(t.reference_gbps, 32.0);
}

TEST(Profiler, UnknownAcceleratorFailsBeforeAnyRun) {
  SweepPlan p = small_plan();
  p.accs = {"ipsec", "zip"};
  EXPECT_THROW(enumerate_points(p), ConfigError);
  EXPECT_THROW(run_sweep(p, 1), ConfigError);
}

TEST(Profiler, PlanValidation) {
  SweepPlan p = small_plan();
  p.sizes = {32};
  EXPECT_THROW(p.validate(), ConfigError);
  p = small_plan();
  p.loads = {1.5};
  EXPECT_THROW(p.validate(), ConfigError);
  p = small_plan();
  p.run_us = 10.0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = small_plan();
  p.flow_counts = {};
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(Profiler, MeasuresCurveAndLoad) {
  const SweepPlan p = small_plan();
  auto point = [&](std::uint32_t size, double load) {
    return profile_point(p, {"ipsec", wide("a"), {{size, load, PathMode::FunctionCall}}});
  };
  EXPECT_NEAR(point(1500, 1.0).total_gbps, 32.0, 32.0 * 0.03);
  EXPECT_NEAR(point(1500, 0.5).total_gbps, 16.0, 16.0 * 0.03);
  EXPECT_DOUBLE_EQ(point(1500, 0.0).total_gbps, 0.0);
  EXPECT_GE(point(4096, 1.0).total_gbps, 2.0 * point(64, 1.0).total_gbps);
  EXPECT_NEAR(point(64, 1.0).total_gbps, 9.6, 9.6 * 0.05);
}

TEST(Profiler, SharesSumToTotal) {
  SweepPlan p = small_plan();
  const CapacityProfile c = profile_point(
      p, {"ipsec", wide("a"), {{64, 1.0, PathMode::FunctionCall}, {4096, 1.0, PathMode::FunctionCall}}});
  ASSERT_EQ(c.shares_gbps.size(), 2u);
  EXPECT_NEAR(c.shares_gbps[0] + c.shares_gbps[1], c.total_gbps, 1e-9);
  EXPECT_GT(c.shares_gbps[1], c.shares_gbps[0]);
}

TEST(Profiler, MixedModeEnumeratesMultisets) {
  SweepPlan p = small_plan();
  p.mode = SweepPlan::Mode::Mixed;
  p.settings = {wide("a")};
  p.paths = {PathMode::FunctionCall};
  p.flow_counts = {1, 2, 3};
  const std::uint64_t k = p.sizes.size() * p.loads.size();
  const auto pts = enumerate_points(p);
  EXPECT_EQ(pts.size(), choose(k, 1) + choose(k + 1, 2) + choose(k + 2, 3));
  for (const auto& pt : pts) EXPECT_TRUE(std::is_sorted(pt.roles.begin(), pt.roles.end()));
}

TEST(Profiler, ArtifactIsByteIdenticalAcrossRunsAndWorkers) {
  SweepPlan p = small_plan();
  p.sizes = {256, 4096};
  p.loads = {0.5, 1.0};
  p.flow_counts = {1, 2};
  p.mode = SweepPlan::Mode::Mixed;
  const std::string a = dump(run_sweep(p, 1));
  EXPECT_EQ(a, dump(run_sweep(p, 1)));
  EXPECT_EQ(a, dump(run_sweep(p, 3)));

  const auto dir = std::filesystem::temp_directory_path() / "accelshape_profile_test";
  std::filesystem::create_directories(dir);
  save_profile(run_sweep(p, 2), dir / "one.json");
  save_profile(run_sweep(p, 1), dir / "two.json");
  auto read = [](const std::filesystem::path& f) {
    std::ifstream in(f, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  };
  EXPECT_EQ(read(dir / "one.json"), read(dir / "two.json"));
  EXPECT_EQ(load_profile(dir / "one.json"), run_sweep(p, 1));
  std::filesystem::remove_all(dir);
}

TEST(Profiler, PlanJsonRoundTrip) {
  SweepPlan p = small_plan();
  p.mode = SweepPlan::Mode::Mixed;
  const Json j = p;
  const SweepPlan back = j.get<SweepPlan>();
  EXPECT_EQ(Json(back).dump(), j.dump());
  Json bad = j;
  bad["sizez"] = 1;
  EXPECT_THROW(bad.get<SweepPlan>(), ConfigError);
}
