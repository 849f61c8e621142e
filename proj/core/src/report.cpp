#include "accelshape/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace accelshape {

namespace {

constexpr std::array<double, 4> kDeviationQuantiles{0.25, 0.50, 0.75, 0.99};

std::string num(double v, int precision = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

double nearest_rank(std::vector<double> values, double p) {
  if (values.empty()) return 0.0;
  if (!(p > 0.0 && p <= 1.0)) throw ConfigError("percentile must be in (0,1]");
  std::sort(values.begin(), values.end());
  const double rank = std::ceil(p * static_cast<double>(values.size()) - 1e-9);
  const auto idx = static_cast<std::size_t>(std::clamp(rank, 1.0, static_cast<double>(values.size()))) - 1;
  return values[idx];
}

std::vector<ThroughputSample> window_samples(std::span<const Completion> done, std::uint32_t window, Cycle from,
                                             const SimClock& clock) {
  std::vector<ThroughputSample> out;
  if (window == 0) return out;
  auto it = std::find_if(done.begin(), done.end(), [&](const Completion& c) { return c.at > from; });
  Cycle start = from;
  while (static_cast<std::size_t>(done.end() - it) >= window) {
    double bytes = 0.0;
    for (std::uint32_t i = 0; i < window; ++i) bytes += it[i].bytes;
    const Cycle end = it[window - 1].at;
    it += window;
    if (end <= start) continue;
    const double seconds = clock.ns(end - start) * 1e-9;
    out.push_back({clock.ns(end) / 1000.0, bytes * 8.0 / seconds / 1e9, window / seconds});
    start = end;
  }
  return out;
}

std::vector<CdfPoint> empirical_cdf(std::vector<double> values) {
  std::vector<CdfPoint> out;
  if (values.empty()) return out;
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i + 1 < values.size() && values[i + 1] == values[i]) continue;
    out.push_back({values[i], static_cast<double>(i + 1) / n});
  }
  return out;
}

double jain_index(std::span<const double> values) {
  double sum = 0.0;
  double sq = 0.0;
  for (double v : values) {
    sum += v;
    sq += v * v;
  }
  if (values.empty() || sq == 0.0) return 1.0;
  return sum * sum / (static_cast<double>(values.size()) * sq);
}

const FlowMetrics& MetricsReport::flow(FlowId id) const {
  for (const FlowMetrics& f : flows) {
    if (f.flow == id) return f;
  }
  throw ConfigError("report has no flow " + std::to_string(id.value));
}

void to_json(Json& j, const ThroughputSample& v) { j = Json::array({v.end_us, v.gbps, v.iops}); }

void from_json(const Json& j, ThroughputSample& v) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("sample must be [end_us, gbps, iops]");
  v = {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

void to_json(Json& j, const CdfPoint& v) { j = Json::array({v.value, v.fraction}); }

void from_json(const Json& j, CdfPoint& v) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("cdf point must be [value, fraction]");
  v = {j[0].get<double>(), j[1].get<double>()};
}

void to_json(Json& j, const FlowMetrics& v) {
  j = Json{{"flow", v.flow},
           {"vm", v.vm},
           {"acc", v.acc},
           {"path", v.path},
           {"slo", v.slo},
           {"admitted", v.admitted},
           {"reject_reason", v.reject_reason},
           {"injected", v.injected},
           {"completed", v.completed},
           {"dropped", v.dropped},
           {"in_flight", v.in_flight},
           {"active_from_us", v.active_from_us},
           {"active_to_us", v.active_to_us},
           {"delivered_gbps", v.delivered_gbps},
           {"delivered_iops", v.delivered_iops},
           {"attainment", v.attainment},
           {"slo_met", v.slo_met},
           {"latency_ns", {{"p50", v.p50_ns}, {"p95", v.p95_ns}, {"p99", v.p99_ns}, {"p99.9", v.p999_ns},
                           {"slo_percentile", v.slo_percentile_ns}}},
           {"samples", v.samples},
           {"cdf", v.cdf},
           {"sample_cv", v.sample_cv},
           {"deviation", {{"p25", v.deviation[0]}, {"p50", v.deviation[1]}, {"p75", v.deviation[2]},
                          {"p99", v.deviation[3]}}}};
}

void from_json(const Json& j, FlowMetrics& v) {
  try {
    v.flow = j.at("flow").get<FlowId>();
    v.vm = j.at("vm").get<std::string>();
    v.acc = j.at("acc").get<std::string>();
    v.path = j.at("path").get<std::string>();
    v.slo = j.at("slo").get<SloTarget>();
    v.admitted = j.at("admitted").get<bool>();
    v.reject_reason = j.at("reject_reason").get<std::string>();
    v.injected = j.at("injected").get<std::uint64_t>();
    v.completed = j.at("completed").get<std::uint64_t>();
    v.dropped = j.at("dropped").get<std::uint64_t>();
    v.in_flight = j.at("in_flight").get<std::uint64_t>();
    v.active_from_us = j.at("active_from_us").get<double>();
    v.active_to_us = j.at("active_to_us").get<double>();
    v.delivered_gbps = j.at("delivered_gbps").get<double>();
    v.delivered_iops = j.at("delivered_iops").get<double>();
    v.attainment = j.at("attainment").get<double>();
    v.slo_met = j.at("slo_met").get<bool>();
    const Json& lat = j.at("latency_ns");
    v.p50_ns = lat.at("p50").get<double>();
    v.p95_ns = lat.at("p95").get<double>();
    v.p99_ns = lat.at("p99").get<double>();
    v.p999_ns = lat.at("p99.9").get<double>();
    v.slo_percentile_ns = lat.at("slo_percentile").get<double>();
    v.samples = j.at("samples").get<std::vector<ThroughputSample>>();
    v.cdf = j.at("cdf").get<std::vector<CdfPoint>>();
    v.sample_cv = j.at("sample_cv").get<double>();
    const Json& dev = j.at("deviation");
    v.deviation = {dev.at("p25").get<double>(), dev.at("p50").get<double>(), dev.at("p75").get<double>(),
                   dev.at("p99").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("report flow: ") + e.what());
  }
}

void to_json(Json& j, const DirectionUse& v) {
  j = Json{{"direction", v.direction},
           {"bandwidth_gbps", v.bandwidth_gbps},
           {"utilization", v.utilization},
           {"bytes", v.bytes}};
}

void from_json(const Json& j, DirectionUse& v) {
  v.direction = j.at("direction").get<std::string>();
  v.bandwidth_gbps = j.at("bandwidth_gbps").get<double>();
  v.utilization = j.at("utilization").get<double>();
  v.bytes = j.at("bytes").get<std::uint64_t>();
}

void to_json(Json& j, const MetricsReport& v) {
  j = Json{{"schema", MetricsReport::kSchema},
           {"version", MetricsReport::kVersion},
           {"scenario", v.scenario},
           {"mode", v.mode},
           {"seed", v.seed},
           {"duration_us", v.duration_us},
           {"cycle_ns", v.cycle_ns},
           {"flows", v.flows},
           {"aggregate_gbps", v.aggregate_gbps},
           {"fairness", {{"jain", v.jain_fairness}, {"min_max_ratio", v.min_max_ratio}}},
           {"directions", v.directions},
           {"control", {{"log", v.control_log}, {"status", v.status}, {"register_writes", v.register_writes}}},
           {"engine", {{"events_dispatched", v.events_dispatched},
                       {"final_cycle", v.final_cycle},
                       {"trace_hash", v.trace_hash}}}};
}

void from_json(const Json& j, MetricsReport& v) {
  try {
    if (j.at("schema").get<std::string>() != MetricsReport::kSchema) throw ConfigError("not a metrics report");
    if (j.at("version").get<int>() != MetricsReport::kVersion) throw ConfigError("unsupported report version");
    v.scenario = j.at("scenario").get<std::string>();
    v.mode = j.at("mode").get<std::string>();
    v.seed = j.at("seed").get<std::uint64_t>();
    v.duration_us = j.at("duration_us").get<double>();
    v.cycle_ns = j.at("cycle_ns").get<std::uint32_t>();
    v.flows = j.at("flows").get<std::vector<FlowMetrics>>();
    v.aggregate_gbps = j.at("aggregate_gbps").get<double>();
    v.jain_fairness = j.at("fairness").at("jain").get<double>();
    v.min_max_ratio = j.at("fairness").at("min_max_ratio").get<double>();
    v.directions = j.at("directions").get<std::vector<DirectionUse>>();
    const Json& c = j.at("control");
    v.control_log = c.at("log").get<std::vector<ControlEvent>>();
    v.status = c.at("status").get<std::vector<StatusRecord>>();
    v.register_writes = c.at("register_writes").get<std::uint64_t>();
    const Json& e = j.at("engine");
    v.events_dispatched = e.at("events_dispatched").get<std::uint64_t>();
    v.final_cycle = e.at("final_cycle").get<std::uint64_t>();
    v.trace_hash = e.at("trace_hash").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("report: ") + e.what());
  }
}

std::string report_text(const MetricsReport& report) { return Json(report).dump(2) + "\n"; }

MetricsReport load_report(const std::filesystem::path& path) {
  return read_json_file(path).get<MetricsReport>();
}

void write_report(const MetricsReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create " + dir.string() + ": " + ec.message());
  write_file_atomic(dir / "report.json", report_text(report));

  std::ostringstream flows;
  flows << "flow,vm,acc,path,slo_metric,slo_value,admitted,injected,completed,dropped,in_flight,"
           "delivered_gbps,delivered_iops,attainment,slo_met,p50_ns,p95_ns,p99_ns,p999_ns,sample_cv,"
           "dev_p25,dev_p50,dev_p75,dev_p99\n";
  for (const FlowMetrics& f : report.flows) {
    flows << f.flow.value << ',' << csv_field(f.vm) << ',' << csv_field(f.acc) << ',' << f.path << ','
          << to_string(f.slo.metric) << ',' << num(f.slo.value) << ',' << f.admitted << ',' << f.injected << ','
          << f.completed << ',' << f.dropped << ',' << f.in_flight << ',' << num(f.delivered_gbps) << ','
          << num(f.delivered_iops) << ',' << num(f.attainment) << ',' << f.slo_met << ',' << num(f.p50_ns) << ','
          << num(f.p95_ns) << ',' << num(f.p99_ns) << ',' << num(f.p999_ns) << ',' << num(f.sample_cv);
    for (double d : f.deviation) flows << ',' << num(d);
    flows << '\n';
  }
  write_file_atomic(dir / "flows.csv", flows.str());

  std::ostringstream samples;
  samples << "flow,index,end_us,gbps,iops\n";
  for (const FlowMetrics& f : report.flows) {
    for (std::size_t i = 0; i < f.samples.size(); ++i) {
      const ThroughputSample& s = f.samples[i];
      samples << f.flow.value << ',' << i << ',' << num(s.end_us, 10) << ',' << num(s.gbps) << ',' << num(s.iops)
              << '\n';
    }
  }
  write_file_atomic(dir / "samples.csv", samples.str());

  std::ostringstream cdf;
  cdf << "flow,value,fraction\n";
  for (const FlowMetrics& f : report.flows) {
    for (const CdfPoint& p : f.cdf) cdf << f.flow.value << ',' << num(p.value) << ',' << num(p.fraction) << '\n';
  }
  write_file_atomic(dir / "cdf.csv", cdf.str());

  std::ostringstream dirs;
  dirs << "direction,bandwidth_gbps,utilization,bytes\n";
  for (const DirectionUse& d : report.directions) {
    dirs << d.direction << ',' << num(d.bandwidth_gbps) << ',' << num(d.utilization) << ',' << d.bytes << '\n';
  }
  write_file_atomic(dir / "directions.csv", dirs.str());

  std::ostringstream control;
  control << "cycle,flow,kind,detail\n";
  for (const ControlEvent& e : report.control_log) {
    control << e.at << ',' << e.flow.value << ',' << e.kind << ',' << csv_field(e.detail) << '\n';
  }
  write_file_atomic(dir / "control.csv", control.str());
}

Comparison compare_runs(const MetricsReport& a, const MetricsReport& b) {
  auto ids = [](const MetricsReport& r) {
    std::vector<FlowId> out;
    for (const FlowMetrics& f : r.flows) out.push_back(f.flow);
    std::sort(out.begin(), out.end());
    return out;
  };
  if (ids(a) != ids(b)) throw ConfigError("reports cover different flow sets");
  Comparison c;
  for (FlowId id : ids(a)) {
    const FlowMetrics& fa = a.flow(id);
    const FlowMetrics& fb = b.flow(id);
    FlowDelta d;
    d.flow = id;
    d.delivered_gbps = fb.delivered_gbps - fa.delivered_gbps;
    d.attainment = fb.attainment - fa.attainment;
    d.p99_ns = fb.p99_ns - fa.p99_ns;
    for (std::size_t i = 0; i < kDeviationQuantiles.size(); ++i) {
      d.deviation[i] = fb.deviation[i] - fa.deviation[i];
      d.abs_deviation_a[i] = std::abs(fa.deviation[i]);
      d.abs_deviation_b[i] = std::abs(fb.deviation[i]);
    }
    c.flows.push_back(d);
  }
  c.jain_fairness = b.jain_fairness - a.jain_fairness;
  c.min_max_ratio = b.min_max_ratio - a.min_max_ratio;
  c.aggregate_gbps = b.aggregate_gbps - a.aggregate_gbps;
  return c;
}

void to_json(Json& j, const Comparison& v) {
  j = Json{{"jain_fairness", v.jain_fairness}, {"min_max_ratio", v.min_max_ratio},
           {"aggregate_gbps", v.aggregate_gbps}, {"flows", Json::array()}};
  for (const FlowDelta& d : v.flows) {
    j["flows"].push_back(Json{{"flow", d.flow},
                              {"delivered_gbps", d.delivered_gbps},
                              {"attainment", d.attainment},
                              {"p99_ns", d.p99_ns},
                              {"deviation", d.deviation},
                              {"abs_deviation_a", d.abs_deviation_a},
                              {"abs_deviation_b", d.abs_deviation_b}});
  }
}

std::string comparison_table(const Comparison& c) {
  std::ostringstream out;
  auto pct = [](double v) { return num(v * 100.0, 4) + "%"; };
  out << "flow  d_gbps      d_attain    d_p99_ns    d_dev[p25 p50 p75 p99]\n";
  for (const FlowDelta& d : c.flows) {
    char head[96];
    std::snprintf(head, sizeof head, "%-5u %-11s %-11s %-11s ", d.flow.value, num(d.delivered_gbps, 5).c_str(),
                  pct(d.attainment).c_str(), num(d.p99_ns, 5).c_str());
    out << head;
    for (double v : d.deviation) out << pct(v) << ' ';
    out << '\n';
  }
  out << "fairness: jain " << num(c.jain_fairness, 5) << ", min/max " << num(c.min_max_ratio, 5)
      << "; aggregate " << num(c.aggregate_gbps, 5) << " Gbps\n";
  return out.str();
}

}  // namespace accelshape
