#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include <accelshape/scenario.hpp>
#include <accelshape/serialize.hpp>

using namespace accelshape;

namespace {

template <class T>
T round_trip(const T& v) {
  const Json j = v;
  return Json::parse(j.dump()).get<T>();
}

FlowSpec sample_flow() {
  FlowSpec f;
  f.id = FlowId{7};
  f.vm_id = "vm-a";
  f.acc_id = "ipsec";
  f.path = PathMode::InlineP2P;
  f.pattern.sizes = SizeDist::bimodal(64, 1500, 0.3);
  f.pattern.load = 0.42;
  f.pattern.burstiness = 3;
  f.pattern.arrival = ArrivalProcess::FixedGap;
  f.slo = {SloMetric::TailLatency, 800.0, 0.999, 200};
  f.priority = 2;
  f.weight = 5;
  return f;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "accelshape_serialize_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Serialize, FlowRoundTrip) {
  EXPECT_EQ(round_trip(sample_flow()), sample_flow());
  FlowSpec u = sample_flow();
  u.pattern.sizes = SizeDist::uniform(100, 900);
  u.slo = {SloMetric::ThroughputIops, 2.5e5, 0.99, 500};
  EXPECT_EQ(round_trip(u), u);
}

TEST(Serialize, AcceleratorRoundTrip) {
  AcceleratorModel m;
  m.id = "sha";
  m.curve = CapacityCurve({{64, 3.0}, {4096, 20.0}});
  m.egress = FixedOutput{32};
  m.service = {ServiceTimeDist::Kind::Uniform, 2.0, 9.0, 1.0};
  m.max_capacity_gbps = 20.0;
  m.queue_depth = 16;
  EXPECT_EQ(round_trip(m), m);
  m.egress = Proportional{0.4};
  m.service = {ServiceTimeDist::Kind::Poisson, 12.0, 0.0, 1.0};
  EXPECT_EQ(round_trip(m), m);
}

TEST(Serialize, RegistersChannelAndControlRoundTrip) {
  ShaperRegisters r{4096, 512, 64, ShaperMode::Iops, 0};
  EXPECT_EQ(round_trip(r), r);
  ChannelConfig c;
  c.name = "pcie-x";
  c.credits = 9;
  c.tlp_bytes = 128;
  EXPECT_EQ(round_trip(c), c);
  ControlConfig cc;
  cc.tick_us = 50.0;
  cc.latency_bursts = 4;
  cc.rate.bucket_refills = 2;
  EXPECT_EQ(round_trip(cc), cc);
}

TEST(Serialize, ProfileTableRoundTrip) {
  ProfileTable t;
  t.sizes = {64, 1500};
  t.loads = {0.5, 1.0};
  t.insert({"a", "s", {{64, 0.5, PathMode::FunctionCall}, {1500, 1.0, PathMode::InlineNicRx}}},
           {21.0, {1.0, 20.0}, true});
  EXPECT_EQ(round_trip(t), t);
}

TEST(Serialize, UnknownFieldsAreRejected) {
  Json j = sample_flow();
  j["colour"] = "blue";
  EXPECT_THROW(j.get<FlowSpec>(), ConfigError);
  Json s = ShaperRegisters{};
  s["burst"] = 3;
  EXPECT_THROW(s.get<ShaperRegisters>(), ConfigError);
  Json p = sample_flow().pattern;
  p["jitter"] = 1;
  EXPECT_THROW(p.get<TrafficPattern>(), ConfigError);
}

TEST(Serialize, BadEnumsAndValuesAreConfigErrors) {
  Json j = sample_flow();
  j["path"] = "teleport";
  EXPECT_THROW(j.get<FlowSpec>(), ConfigError);
  j = sample_flow();
  j["pattern"]["load"] = 2.0;
  EXPECT_THROW(j.get<FlowSpec>(), ConfigError);
}

TEST(Serialize, ProfileSchemaAndVersionChecked) {
  Json j = ProfileTable{};
  j["version"] = 99;
  EXPECT_THROW(j.get<ProfileTable>(), ConfigError);
  j = ProfileTable{};
  j["schema"] = "something.else";
  EXPECT_THROW(j.get<ProfileTable>(), ConfigError);
}

TEST(Serialize, FileHelpers) {
  const auto f = scratch("x.json");
  write_file_atomic(f, "{\"a\": 1}\n");
  EXPECT_EQ(read_json_file(f)["a"], 1);
  write_file_atomic(f, "{oops");
  EXPECT_THROW(read_json_file(f), ConfigError);
  EXPECT_THROW(read_json_file(scratch("missing.json")), ConfigError);
  std::filesystem::remove_all(f.parent_path());
}

TEST(Serialize, ScenarioFilesParse) {
  for (const auto& e : std::filesystem::directory_iterator(ACCELSHAPE_SCENARIO_DIR)) {
    if (e.path().extension() != ".json") continue;
    const ScenarioSpec s = load_scenario(e.path());
    EXPECT_FALSE(s.flows.empty()) << e.path();
    const Json j = s;
    ScenarioSpec back = j.get<ScenarioSpec>();
    back.profile = s.profile;
    EXPECT_EQ(Json(back).dump(), j.dump()) << e.path();
  }
}

TEST(Serialize, ScenarioRejectsUnknownKeysAndBadModes) {
  const ScenarioSpec s = load_scenario(std::filesystem::path(ACCELSHAPE_SCENARIO_DIR) / "casep-same.json");
  Json j = s;
  j["extra"] = true;
  EXPECT_THROW(j.get<ScenarioSpec>(), ConfigError);
  j = s;
  j["mode"] = "baseline-magic";
  EXPECT_THROW(j.get<ScenarioSpec>(), ConfigError);
}
