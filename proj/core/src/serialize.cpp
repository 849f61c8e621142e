#include "accelshape/serialize.hpp"

#include <fstream>
#include <sstream>

namespace accelshape {

namespace {

template <typename T>
T opt(const Json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

template <typename T>
T req(const Json& j, const char* key, std::string_view context) {
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(std::string(context) + ": missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string(context) + "." + key + ": " + e.what());
  }
}

}  // namespace

void expect_keys(const Json& j, std::initializer_list<std::string_view> allowed, std::string_view context) {
  if (!j.is_object()) throw ConfigError(std::string(context) + " must be an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (std::string_view a : allowed) ok = ok || a == k;
    if (!ok) throw ConfigError(std::string(context) + ": unknown field '" + k + "'");
  }
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  try {
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw ConfigError("cannot write " + tmp.string());
      out << text;
      out.flush();
      if (!out) throw ConfigError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove(tmp, ec);
    throw;
  }
}

void to_json(Json& j, const FlowId& v) { j = v.value; }
void from_json(const Json& j, FlowId& v) { v.value = j.get<std::uint32_t>(); }

void to_json(Json& j, const SizeDist& v) {
  switch (v.kind) {
    case SizeDist::Kind::Fixed:
      j = Json{{"kind", "fixed"}, {"bytes", v.a}};
      break;
    case SizeDist::Kind::Uniform:
      j = Json{{"kind", "uniform"}, {"min", v.a}, {"max", v.b}};
      break;
    case SizeDist::Kind::Bimodal:
      j = Json{{"kind", "bimodal"}, {"a", v.a}, {"b", v.b}, {"p_a", v.p_a}};
      break;
  }
}

void from_json(const Json& j, SizeDist& v) {
  if (j.is_number_unsigned() || j.is_number_integer()) {
    v = SizeDist::fixed(j.get<std::uint32_t>());
    return;
  }
  const auto kind = req<std::string>(j, "kind", "sizes");
  if (kind == "fixed") {
    expect_keys(j, {"kind", "bytes"}, "sizes");
    v = SizeDist::fixed(req<std::uint32_t>(j, "bytes", "sizes"));
  } else if (kind == "uniform") {
    expect_keys(j, {"kind", "min", "max"}, "sizes");
    v = SizeDist::uniform(req<std::uint32_t>(j, "min", "sizes"), req<std::uint32_t>(j, "max", "sizes"));
  } else if (kind == "bimodal") {
    expect_keys(j, {"kind", "a", "b", "p_a"}, "sizes");
    v = SizeDist::bimodal(req<std::uint32_t>(j, "a", "sizes"), req<std::uint32_t>(j, "b", "sizes"),
                          req<double>(j, "p_a", "sizes"));
  } else {
    throw ConfigError("unknown size distribution '" + kind + "'");
  }
  v.validate();
}

void to_json(Json& j, const TrafficPattern& v) {
  j = Json{{"sizes", v.sizes},
           {"load", v.load},
           {"burstiness", v.burstiness},
           {"arrival", v.arrival == ArrivalProcess::Poisson ? "poisson" : "fixed"}};
}

void from_json(const Json& j, TrafficPattern& v) {
  expect_keys(j, {"sizes", "load", "burstiness", "arrival"}, "pattern");
  v.sizes = req<SizeDist>(j, "sizes", "pattern");
  v.load = req<double>(j, "load", "pattern");
  v.burstiness = opt<std::uint32_t>(j, "burstiness", 1);
  const auto arrival = opt<std::string>(j, "arrival", "poisson");
  if (arrival == "poisson") {
    v.arrival = ArrivalProcess::Poisson;
  } else if (arrival == "fixed") {
    v.arrival = ArrivalProcess::FixedGap;
  } else {
    throw ConfigError("unknown arrival process '" + arrival + "'");
  }
  v.validate();
}

void to_json(Json& j, const SloTarget& v) {
  j = Json{{"metric", to_string(v.metric)},
           {"value", v.value},
           {"percentile", v.percentile},
           {"window_requests", v.window_requests}};
}

void from_json(const Json& j, SloTarget& v) {
  expect_keys(j, {"metric", "value", "percentile", "window_requests"}, "slo");
  v.metric = slo_metric_from_string(req<std::string>(j, "metric", "slo"));
  v.value = req<double>(j, "value", "slo");
  v.percentile = opt<double>(j, "percentile", 0.99);
  v.window_requests = opt<std::uint32_t>(j, "window_requests", 500);
  v.validate();
}

void to_json(Json& j, const FlowSpec& v) {
  j = Json{{"id", v.id},           {"vm", v.vm_id},   {"acc", v.acc_id},          {"path", to_string(v.path)},
           {"pattern", v.pattern}, {"slo", v.slo},    {"priority", v.priority}, {"weight", v.weight}};
}

void from_json(const Json& j, FlowSpec& v) {
  expect_keys(j, {"id", "vm", "acc", "path", "pattern", "slo", "priority", "weight"}, "flow");
  v.id = req<FlowId>(j, "id", "flow");
  v.vm_id = opt<std::string>(j, "vm", "vm" + std::to_string(v.id.value));
  v.acc_id = req<std::string>(j, "acc", "flow");
  v.path = path_mode_from_string(opt<std::string>(j, "path", "function-call"));
  v.pattern = req<TrafficPattern>(j, "pattern", "flow");
  v.slo = req<SloTarget>(j, "slo", "flow");
  v.priority = opt<int>(j, "priority", 0);
  v.weight = opt<std::uint32_t>(j, "weight", 1);
  v.validate();
}

void to_json(Json& j, const CapacityCurve& v) {
  j = Json::array();
  for (const CurveKnot& k : v.knots()) j.push_back(Json::array({k.size, k.gbps}));
}

void from_json(const Json& j, CapacityCurve& v) {
  if (!j.is_array()) throw ConfigError("curve must be an array of [size, gbps] knots");
  std::vector<CurveKnot> knots;
  for (const Json& k : j) {
    if (!k.is_array() || k.size() != 2) throw ConfigError("curve knot must be [size, gbps]");
    knots.push_back({k[0].get<std::uint32_t>(), k[1].get<double>()});
  }
  v = CapacityCurve(std::move(knots));
}

void to_json(Json& j, const EgressRatio& v) {
  if (const auto* p = std::get_if<Proportional>(&v)) {
    j = Json{{"proportional", p->ratio}};
  } else {
    j = Json{{"fixed_output", std::get<FixedOutput>(v).bytes}};
  }
}

void from_json(const Json& j, EgressRatio& v) {
  expect_keys(j, {"proportional", "fixed_output"}, "egress");
  if (j.contains("proportional") == j.contains("fixed_output")) {
    throw ConfigError("egress needs exactly one of 'proportional' or 'fixed_output'");
  }
  if (j.contains("proportional")) {
    v = Proportional{j.at("proportional").get<double>()};
  } else {
    v = FixedOutput{j.at("fixed_output").get<std::uint32_t>()};
  }
}

namespace {
constexpr std::array<std::string_view, 4> kServiceKinds = {"fixed", "uniform", "bimodal", "poisson"};
}

void to_json(Json& j, const ServiceTimeDist& v) {
  j = Json{{"kind", kServiceKinds[static_cast<std::size_t>(v.kind)]}, {"a", v.a}, {"b", v.b}, {"p_a", v.p_a}};
}

void from_json(const Json& j, ServiceTimeDist& v) {
  expect_keys(j, {"kind", "a", "b", "p_a"}, "service_time");
  const auto kind = opt<std::string>(j, "kind", "fixed");
  bool found = false;
  for (std::size_t i = 0; i < kServiceKinds.size(); ++i) {
    if (kServiceKinds[i] == kind) {
      v.kind = static_cast<ServiceTimeDist::Kind>(i);
      found = true;
    }
  }
  if (!found) throw ConfigError("unknown service time distribution '" + kind + "'");
  v.a = opt<double>(j, "a", 0.0);
  v.b = opt<double>(j, "b", 0.0);
  v.p_a = opt<double>(j, "p_a", 1.0);
  v.validate();
}

void to_json(Json& j, const AcceleratorModel& v) {
  j = Json{{"id", v.id},
           {"curve", v.curve},
           {"egress", v.egress},
           {"service_time", v.service},
           {"max_capacity_gbps", v.max_capacity_gbps},
           {"queue_depth", v.queue_depth}};
}

void from_json(const Json& j, AcceleratorModel& v) {
  expect_keys(j, {"id", "curve", "egress", "service_time", "max_capacity_gbps", "queue_depth", "paths"},
              "accelerator");
  v.id = req<std::string>(j, "id", "accelerator");
  v.curve = req<CapacityCurve>(j, "curve", "accelerator " + v.id);
  v.egress = j.contains("egress") ? j.at("egress").get<EgressRatio>() : EgressRatio{Proportional{1.0}};
  v.service = j.contains("service_time") ? j.at("service_time").get<ServiceTimeDist>() : ServiceTimeDist{};
  double peak = 0.0;
  for (const CurveKnot& k : v.curve.knots()) peak = std::max(peak, k.gbps);
  v.max_capacity_gbps = opt<double>(j, "max_capacity_gbps", peak);
  v.queue_depth = opt<std::uint32_t>(j, "queue_depth", 32);
  v.validate();
}

void to_json(Json& j, const ChannelConfig& v) {
  j = Json{{"name", v.name},
           {"bw_h2d_gbps", v.bw_h2d_gbps},
           {"bw_d2h_gbps", v.bw_d2h_gbps},
           {"bw_p2p_gbps", v.bw_p2p_gbps},
           {"bw_nic_gbps", v.bw_nic_gbps},
           {"credits", v.credits},
           {"tlp_bytes", v.tlp_bytes}};
}

void from_json(const Json& j, ChannelConfig& v) {
  expect_keys(j, {"name", "bw_h2d_gbps", "bw_d2h_gbps", "bw_p2p_gbps", "bw_nic_gbps", "credits", "tlp_bytes"},
              "channel");
  const ChannelConfig d;
  v.name = opt<std::string>(j, "name", d.name);
  v.bw_h2d_gbps = opt<double>(j, "bw_h2d_gbps", d.bw_h2d_gbps);
  v.bw_d2h_gbps = opt<double>(j, "bw_d2h_gbps", d.bw_d2h_gbps);
  v.bw_p2p_gbps = opt<double>(j, "bw_p2p_gbps", d.bw_p2p_gbps);
  v.bw_nic_gbps = opt<double>(j, "bw_nic_gbps", d.bw_nic_gbps);
  v.credits = opt<std::uint32_t>(j, "credits", d.credits);
  v.tlp_bytes = opt<std::uint32_t>(j, "tlp_bytes", d.tlp_bytes);
  v.validate();
}

void to_json(Json& j, const ShaperRegisters& v) {
  j = Json{{"bkt_size", v.bkt_size},
           {"refill_rate", v.refill_rate},
           {"interval", v.interval},
           {"mode", to_string(v.mode)},
           {"max_msg_bytes", v.max_msg_bytes}};
}

void from_json(const Json& j, ShaperRegisters& v) {
  expect_keys(j, {"bkt_size", "refill_rate", "interval", "mode", "max_msg_bytes"}, "registers");
  v.bkt_size = req<std::uint64_t>(j, "bkt_size", "registers");
  v.refill_rate = req<std::uint64_t>(j, "refill_rate", "registers");
  v.interval = req<Cycle>(j, "interval", "registers");
  v.mode = shaper_mode_from_string(opt<std::string>(j, "mode", "gbps"));
  v.max_msg_bytes = opt<std::uint64_t>(j, "max_msg_bytes", 0);
  v.validate();
}

void to_json(Json& j, const SoftShaperConfig& v) {
  j = Json{{"timer_ns", v.timer_ns}, {"jitter_ns", v.jitter_ns}, {"burst_ticks", v.burst_ticks}};
}

void from_json(const Json& j, SoftShaperConfig& v) {
  expect_keys(j, {"timer_ns", "jitter_ns", "burst_ticks"}, "soft_shaper");
  const SoftShaperConfig d;
  v.timer_ns = opt<double>(j, "timer_ns", d.timer_ns);
  v.jitter_ns = opt<double>(j, "jitter_ns", d.jitter_ns);
  v.burst_ticks = opt<double>(j, "burst_ticks", d.burst_ticks);
  if (!(v.timer_ns > 0.0) || v.jitter_ns < 0.0) throw ConfigError("soft_shaper timer must be > 0, jitter >= 0");
}

void to_json(Json& j, const PathOption& v) { j = Json{{"location", v.location}, {"mode", to_string(v.mode)}}; }

void from_json(const Json& j, PathOption& v) {
  expect_keys(j, {"location", "mode"}, "path");
  v.mode = path_mode_from_string(req<std::string>(j, "mode", "path"));
  v.location = opt<std::string>(j, "location", std::string(to_string(v.mode)));
}

void to_json(Json& j, const ProfileRole& v) {
  j = Json{{"size", v.size}, {"load", v.load}, {"path", to_string(v.path)}};
}

void from_json(const Json& j, ProfileRole& v) {
  expect_keys(j, {"size", "load", "path"}, "role");
  v.size = req<std::uint32_t>(j, "size", "role");
  v.load = req<double>(j, "load", "role");
  v.path = path_mode_from_string(req<std::string>(j, "path", "role"));
}

void to_json(Json& j, const ProfileKey& v) {
  j = Json{{"acc", v.acc_id}, {"setting", v.setting}, {"roles", v.roles}};
}

void from_json(const Json& j, ProfileKey& v) {
  expect_keys(j, {"acc", "setting", "roles"}, "key");
  v.acc_id = req<std::string>(j, "acc", "key");
  v.setting = req<std::string>(j, "setting", "key");
  v.roles = req<std::vector<ProfileRole>>(j, "roles", "key");
}

void to_json(Json& j, const CapacityProfile& v) {
  j = Json{{"total_gbps", v.total_gbps}, {"shares_gbps", v.shares_gbps}, {"low_confidence", v.low_confidence}};
}

void from_json(const Json& j, CapacityProfile& v) {
  expect_keys(j, {"total_gbps", "shares_gbps", "low_confidence"}, "profile");
  v.total_gbps = req<double>(j, "total_gbps", "profile");
  v.shares_gbps = req<std::vector<double>>(j, "shares_gbps", "profile");
  v.low_confidence = opt<bool>(j, "low_confidence", false);
}

void to_json(Json& j, const ProfileTable& v) {
  Json entries = Json::array();
  for (const auto& [k, p] : v.entries()) entries.push_back(Json{{"key", k}, {"profile", p}});
  j = Json{{"schema", ProfileTable::kSchema},
           {"version", ProfileTable::kVersion},
           {"reference_gbps", v.reference_gbps},
           {"friendly_size_bound", v.friendly_size_bound},
           {"grid", Json{{"sizes", v.sizes}, {"loads", v.loads}}},
           {"entries", entries}};
}

void from_json(const Json& j, ProfileTable& v) {
  expect_keys(j, {"schema", "version", "reference_gbps", "friendly_size_bound", "grid", "entries"}, "profile artifact");
  if (req<std::string>(j, "schema", "profile artifact") != ProfileTable::kSchema) {
    throw ConfigError("not a profile artifact (schema mismatch)");
  }
  const int version = req<int>(j, "version", "profile artifact");
  if (version != ProfileTable::kVersion) {
    throw ConfigError("unsupported profile artifact version " + std::to_string(version));
  }
  v = ProfileTable{};
  v.reference_gbps = req<double>(j, "reference_gbps", "profile artifact");
  v.friendly_size_bound = opt<std::uint32_t>(j, "friendly_size_bound", 4096);
  const Json& grid = j.at("grid");
  v.sizes = req<std::vector<std::uint32_t>>(grid, "sizes", "grid");
  v.loads = req<std::vector<double>>(grid, "loads", "grid");
  for (const Json& e : req<Json>(j, "entries", "profile artifact")) {
    v.insert(req<ProfileKey>(e, "key", "entry"), req<CapacityProfile>(e, "profile", "entry"));
  }
}

void to_json(Json& j, const ControlConfig& v) {
  j = Json{{"tick_us", v.tick_us},
           {"violation_ticks", v.violation_ticks},
           {"hysteresis", v.hysteresis},
           {"tolerance", v.tolerance},
           {"load_margin", v.load_margin},
           {"latency_bursts", v.latency_bursts},
           {"bucket_refills", v.rate.bucket_refills},
           {"min_interval", v.rate.min_interval}};
}

void from_json(const Json& j, ControlConfig& v) {
  expect_keys(j, {"tick_us", "violation_ticks", "hysteresis", "tolerance", "load_margin", "latency_bursts",
                  "bucket_refills", "min_interval"},
              "control");
  const ControlConfig d;
  v.tick_us = opt<double>(j, "tick_us", d.tick_us);
  v.violation_ticks = opt<std::uint32_t>(j, "violation_ticks", d.violation_ticks);
  v.hysteresis = opt<double>(j, "hysteresis", d.hysteresis);
  v.tolerance = opt<double>(j, "tolerance", d.tolerance);
  v.load_margin = opt<double>(j, "load_margin", d.load_margin);
  v.latency_bursts = opt<std::uint32_t>(j, "latency_bursts", d.latency_bursts);
  v.rate.bucket_refills = opt<std::uint32_t>(j, "bucket_refills", d.rate.bucket_refills);
  v.rate.min_interval = opt<Cycle>(j, "min_interval", d.rate.min_interval);
}

void to_json(Json& j, const StatusRecord& v) {
  j = Json{{"cycle", v.at},         {"flow", v.flow},       {"measured_rate", v.measured},
           {"tail_latency_ns", v.tail_latency_ns}, {"violated", v.violated}, {"path", v.path_id}};
  j["registers"] = v.regs ? Json(*v.regs) : Json(nullptr);
}

void from_json(const Json& j, StatusRecord& v) {
  v.at = j.at("cycle").get<Cycle>();
  v.flow = j.at("flow").get<FlowId>();
  v.measured = j.at("measured_rate").get<double>();
  v.tail_latency_ns = j.at("tail_latency_ns").get<double>();
  v.violated = j.at("violated").get<bool>();
  v.path_id = j.at("path").get<std::string>();
  v.regs.reset();
  if (!j.at("registers").is_null()) v.regs = j.at("registers").get<ShaperRegisters>();
}

void to_json(Json& j, const ControlEvent& v) {
  j = Json{{"cycle", v.at}, {"flow", v.flow}, {"kind", v.kind}, {"detail", v.detail}};
}

void from_json(const Json& j, ControlEvent& v) {
  v.at = j.at("cycle").get<Cycle>();
  v.flow = j.at("flow").get<FlowId>();
  v.kind = j.at("kind").get<std::string>();
  v.detail = j.at("detail").get<std::string>();
}

ProfileTable load_profile(const std::filesystem::path& path) {
  const Json j = read_json_file(path);
  try {
    return j.get<ProfileTable>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void save_profile(const ProfileTable& table, const std::filesystem::path& path) {
  write_file_atomic(path, Json(table).dump(2) + "\n");
}

}  // namespace accelshape
