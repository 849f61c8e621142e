#include "accelshape/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace accelshape {

namespace {

constexpr std::array<std::pair<ScenarioMode, std::string_view>, 6> kModeNames{{
    {ScenarioMode::Arcus, "arcus"},
    {ScenarioMode::BaselineRoundRobin, "baseline-rr"},
    {ScenarioMode::BaselineWeightedRoundRobin, "baseline-wrr"},
    {ScenarioMode::BaselinePriority, "baseline-priority"},
    {ScenarioMode::BaselineWfq, "baseline-wfq"},
    {ScenarioMode::BaselineSoftShaper, "baseline-soft-shaper"},
}};

DatapathConfig datapath_config(const ScenarioSpec& s) {
  DatapathConfig cfg;
  cfg.channel = s.channel;
  cfg.accelerators = s.accelerators;
  cfg.host_queue_depth = s.host_queue_depth;
  cfg.reference_gbps = s.reference_gbps;
  cfg.seed = s.seed;
  cfg.soft = s.soft;
  cfg.wfq_quantum_bytes = s.wfq_quantum_bytes;
  cfg.reconfig_latency = SimClock{0, s.cycle_ns}.cycles_from_us(s.reconfig_latency_us);
  switch (s.mode) {
    case ScenarioMode::Arcus:
      cfg.mode = DataplaneMode::Shaped;
      break;
    case ScenarioMode::BaselineSoftShaper:
      cfg.mode = DataplaneMode::SoftShaped;
      break;
    case ScenarioMode::BaselineRoundRobin:
      break;
    case ScenarioMode::BaselineWeightedRoundRobin:
      cfg.arbiter = ArbiterPolicy::Kind::WeightedRoundRobin;
      break;
    case ScenarioMode::BaselinePriority:
      cfg.arbiter = ArbiterPolicy::Kind::Priority;
      break;
    case ScenarioMode::BaselineWfq:
      cfg.arbiter = ArbiterPolicy::Kind::WeightedFairQueuing;
      break;
  }
  return cfg;
}

double slo_unit(const ThroughputSample& s, const SloTarget& slo) {
  return slo.metric == SloMetric::ThroughputIops ? s.iops : s.gbps;
}

FlowMetrics summarize_flow(const ScenarioSpec& scn, const Datapath& dp, const TimelineFlow& tf, Cycle end,
                           const Runtime* rt) {
  const SimClock& clock = dp.clock();
  const FlowId id = tf.spec.id;
  FlowMetrics m;
  m.flow = id;
  m.vm = tf.spec.vm_id;
  m.acc = tf.spec.acc_id;
  m.path = std::string(to_string(dp.path(id)));
  m.slo = tf.spec.slo;
  if (rt != nullptr) {
    auto it = rt->decisions().find(id);
    m.admitted = it != rt->decisions().end() && it->second.admitted;
    if (it != rt->decisions().end() && !it->second.admitted) m.reject_reason = it->second.reason;
  }
  const FlowCounters& c = dp.counters(id);
  m.injected = c.injected;
  m.completed = c.completed;
  m.dropped = c.dropped;
  m.in_flight = dp.in_flight(id);

  const auto comps = dp.completions(id);
  std::vector<double> latencies;
  latencies.reserve(comps.size());
  for (const Completion& done : comps) latencies.push_back(clock.ns(done.latency));
  m.p50_ns = nearest_rank(latencies, 0.50);
  m.p95_ns = nearest_rank(latencies, 0.95);
  m.p99_ns = nearest_rank(latencies, 0.99);
  m.p999_ns = nearest_rank(latencies, 0.999);
  m.slo_percentile_ns = nearest_rank(std::move(latencies), tf.spec.slo.percentile);

  const std::optional<Cycle> from = dp.activated_at(id);
  Cycle to = end;
  if (tf.stop_us > 0.0) to = std::min(end, clock.cycles_from_us(tf.stop_us));
  if (from && *from < to) {
    m.active_from_us = clock.ns(*from) / 1000.0;
    m.active_to_us = clock.ns(to) / 1000.0;
    const auto warm = *from + static_cast<Cycle>(std::floor(scn.warmup_fraction * static_cast<double>(to - *from)));
    double bytes = 0.0;
    double count = 0.0;
    for (const Completion& done : comps) {
      if (done.at <= warm || done.at > to) continue;
      bytes += done.bytes;
      count += 1.0;
    }
    const double seconds = clock.ns(to - warm) * 1e-9;
    if (seconds > 0.0) {
      m.delivered_gbps = bytes * 8.0 / seconds / 1e9;
      m.delivered_iops = count / seconds;
    }
    m.samples = window_samples(comps, scn.sample_window, warm, clock);
  }

  std::vector<double> values;
  for (const ThroughputSample& s : m.samples) values.push_back(slo_unit(s, m.slo));
  if (!values.empty()) {
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());
    m.sample_cv = mean > 0.0 ? std::sqrt(var) / mean : 0.0;
  }
  if (m.slo.is_throughput()) {
    const double delivered = m.slo.metric == SloMetric::ThroughputIops ? m.delivered_iops : m.delivered_gbps;
    m.attainment = delivered / m.slo.value;
    m.slo_met = m.attainment >= 1.0 - scn.control.tolerance;
    if (!values.empty()) {
      const std::array<double, 4> qs{0.25, 0.50, 0.75, 0.99};
      for (std::size_t i = 0; i < qs.size(); ++i) m.deviation[i] = nearest_rank(values, qs[i]) / m.slo.value - 1.0;
    }
  } else {
    m.attainment = m.slo_percentile_ns > 0.0 ? m.slo.value / m.slo_percentile_ns : 0.0;
    m.slo_met = m.completed > 0 && m.slo_percentile_ns <= m.slo.value;
  }
  m.cdf = empirical_cdf(std::move(values));
  return m;
}

}  // namespace

std::string_view to_string(ScenarioMode mode) {
  for (const auto& [m, name] : kModeNames) {
    if (m == mode) return name;
  }
  return "unknown";
}

ScenarioMode scenario_mode_from_string(std::string_view text) {
  for (const auto& [m, name] : kModeNames) {
    if (name == text) return m;
  }
  throw ConfigError("unknown mode '" + std::string(text) + "'");
}

void ScenarioSpec::validate() const {
  if (!(duration_us > 0.0)) throw ConfigError("duration_us must be > 0");
  if (cycle_ns == 0) throw ConfigError("cycle_ns must be > 0");
  if (!(reference_gbps > 0.0)) throw ConfigError("reference_gbps must be > 0");
  if (host_queue_depth == 0) throw ConfigError("host_queue_depth must be > 0");
  if (sample_window == 0) throw ConfigError("sample_window must be > 0");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) throw ConfigError("warmup_fraction must be in [0,1)");
  if (!(reconfig_latency_us >= 0.0)) throw ConfigError("reconfig_latency_us must be >= 0");
  if (!(soft.timer_ns > 0.0) || soft.jitter_ns < 0.0 || !(soft.burst_ticks > 0.0)) {
    throw ConfigError("soft_shaper timer must be > 0, jitter >= 0, burst_ticks > 0");
  }
  channel.validate();
  std::set<std::string> accs;
  for (const AcceleratorModel& a : accelerators) {
    a.validate();
    if (!accs.insert(a.id).second) throw ConfigError("duplicate accelerator '" + a.id + "'");
  }
  for (const auto& [id, opts] : paths.entries()) {
    if (!accs.contains(id)) throw ConfigError("paths given for unknown accelerator '" + id + "'");
    if (opts.empty()) throw ConfigError("accelerator '" + id + "' lists no paths");
  }
  std::set<FlowId> ids;
  for (const TimelineFlow& f : flows) {
    f.spec.validate();
    const std::string name = "flow " + std::to_string(f.spec.id.value);
    if (!ids.insert(f.spec.id).second) throw ConfigError("duplicate " + name);
    if (mode != ScenarioMode::Arcus && !accs.contains(f.spec.acc_id)) {
      throw ConfigError(name + " targets unknown accelerator '" + f.spec.acc_id + "'");
    }
    if (!(f.start_us >= 0.0) || f.start_us >= duration_us) throw ConfigError(name + " starts outside the run");
    if (f.stop_us != 0.0 && (f.stop_us <= f.start_us || f.stop_us > duration_us)) {
      throw ConfigError(name + " stop must lie in (start, duration]");
    }
  }
}

void to_json(Json& j, const ScenarioSpec& v) {
  Json accs = Json::array();
  for (const AcceleratorModel& a : v.accelerators) {
    Json e = a;
    if (const auto* p = v.paths.find(a.id)) e["paths"] = *p;
    accs.push_back(std::move(e));
  }
  Json flows = Json::array();
  for (const TimelineFlow& f : v.flows) {
    Json e = f.spec;
    e["start_us"] = f.start_us;
    e["stop_us"] = f.stop_us;
    flows.push_back(std::move(e));
  }
  j = Json{{"name", v.name},
           {"description", v.description},
           {"seed", v.seed},
           {"duration_us", v.duration_us},
           {"mode", to_string(v.mode)},
           {"cycle_ns", v.cycle_ns},
           {"reference_gbps", v.reference_gbps},
           {"channel", v.channel},
           {"accelerators", accs},
           {"flows", flows},
           {"control", v.control},
           {"soft_shaper", v.soft},
           {"host_queue_depth", v.host_queue_depth},
           {"reconfig_latency_us", v.reconfig_latency_us},
           {"wfq_quantum_bytes", v.wfq_quantum_bytes},
           {"sample_window", v.sample_window},
           {"warmup_fraction", v.warmup_fraction}};
  if (v.profile) j["profile"] = v.profile->generic_string();
}

void from_json(const Json& j, ScenarioSpec& v) {
  expect_keys(j, {"name", "description", "seed", "duration_us", "mode", "cycle_ns", "reference_gbps", "channel",
                  "accelerators", "flows", "control", "soft_shaper", "host_queue_depth", "reconfig_latency_us",
                  "wfq_quantum_bytes", "sample_window", "warmup_fraction", "profile"},
              "scenario");
  v = ScenarioSpec{};
  try {
    v.name = j.value("name", v.name);
    v.description = j.value("description", v.description);
    v.seed = j.value("seed", v.seed);
    v.duration_us = j.value("duration_us", v.duration_us);
    v.mode = scenario_mode_from_string(j.value("mode", std::string(to_string(v.mode))));
    v.cycle_ns = j.value("cycle_ns", v.cycle_ns);
    v.reference_gbps = j.value("reference_gbps", v.reference_gbps);
    if (j.contains("channel")) v.channel = j.at("channel").get<ChannelConfig>();
    for (const Json& a : j.value("accelerators", Json::array())) {
      v.accelerators.push_back(a.get<AcceleratorModel>());
      std::vector<PathOption> opts;
      if (a.contains("paths")) {
        opts = a.at("paths").get<std::vector<PathOption>>();
      } else {
        opts.push_back({"local:" + v.accelerators.back().id, PathMode::FunctionCall});
      }
      v.paths.add(v.accelerators.back().id, std::move(opts));
    }
    for (const Json& f : j.value("flows", Json::array())) {
      expect_keys(f, {"id", "vm", "acc", "path", "pattern", "slo", "priority", "weight", "start_us", "stop_us"},
                  "flow");
      TimelineFlow tf;
      Json bare = f;
      bare.erase("start_us");
      bare.erase("stop_us");
      tf.spec = bare.get<FlowSpec>();
      tf.start_us = f.value("start_us", 0.0);
      tf.stop_us = f.value("stop_us", 0.0);
      v.flows.push_back(std::move(tf));
    }
    if (j.contains("control")) v.control = j.at("control").get<ControlConfig>();
    if (j.contains("soft_shaper")) v.soft = j.at("soft_shaper").get<SoftShaperConfig>();
    v.host_queue_depth = j.value("host_queue_depth", v.host_queue_depth);
    v.reconfig_latency_us = j.value("reconfig_latency_us", v.reconfig_latency_us);
    v.wfq_quantum_bytes = j.value("wfq_quantum_bytes", v.wfq_quantum_bytes);
    v.sample_window = j.value("sample_window", v.sample_window);
    v.warmup_fraction = j.value("warmup_fraction", v.warmup_fraction);
    if (j.contains("profile") && !j.at("profile").is_null()) {
      v.profile = std::filesystem::path(j.at("profile").get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
  v.validate();
}

ScenarioSpec load_scenario(const std::filesystem::path& path) {
  ScenarioSpec spec = read_json_file(path).get<ScenarioSpec>();
  if (spec.profile && spec.profile->is_relative()) spec.profile = path.parent_path() / *spec.profile;
  return spec;
}

std::vector<ProfileKey> missing_profile_keys(const ScenarioSpec& spec, const ProfileTable& profile) {
  Engine engine(spec.cycle_ns);
  Datapath dp(engine, datapath_config(spec));
  Runtime rt(engine, dp, spec.paths, profile, spec.control, spec.reference_gbps, spec.channel.name);
  std::vector<TimelineFlow> timeline = spec.flows;
  std::stable_sort(timeline.begin(), timeline.end(), [](const TimelineFlow& a, const TimelineFlow& b) {
    return a.start_us != b.start_us ? a.start_us < b.start_us : a.spec.id < b.spec.id;
  });
  std::vector<FlowSpec> sequence;
  for (const TimelineFlow& f : timeline) sequence.push_back(f.spec);
  return rt.missing_keys(sequence);
}

MetricsReport run_scenario(const ScenarioSpec& spec, const RunOptions& options) {
  spec.validate();
  Engine engine(spec.cycle_ns);
  if (options.trace != nullptr) engine.set_trace(options.trace);
  Datapath dp(engine, datapath_config(spec));
  const SimClock& clock = engine.clock();
  const Cycle end = clock.cycles_from_us(spec.duration_us);

  std::vector<TimelineFlow> timeline = spec.flows;
  std::stable_sort(timeline.begin(), timeline.end(), [](const TimelineFlow& a, const TimelineFlow& b) {
    return a.start_us != b.start_us ? a.start_us < b.start_us : a.spec.id < b.spec.id;
  });
  auto window = [&](const TimelineFlow& f) {
    return std::pair{clock.cycles_from_us(f.start_us), f.stop_us > 0.0 ? clock.cycles_from_us(f.stop_us) : Cycle{0}};
  };

  std::optional<ProfileTable> loaded;
  std::optional<Runtime> rt;
  if (spec.mode == ScenarioMode::Arcus) {
    const ProfileTable* profile = options.profile;
    if (profile == nullptr) {
      if (!spec.profile) throw ConfigError("arcus mode needs a profile artifact (--profile or scenario 'profile')");
      loaded = load_profile(*spec.profile);
      profile = &*loaded;
    }
    const std::vector<ProfileKey> missing = missing_profile_keys(spec, *profile);
    if (!missing.empty()) {
      std::string names;
      for (const ProfileKey& k : missing) names += "\n  " + to_string(k);
      throw ConfigError("profile artifact lacks " + std::to_string(missing.size()) + " key(s):" + names);
    }
    rt.emplace(engine, dp, spec.paths, *profile, spec.control, spec.reference_gbps, spec.channel.name);
  }
  for (const TimelineFlow& f : timeline) {
    if (spec.mode == ScenarioMode::Arcus && !spec.paths.contains(f.spec.acc_id)) continue;
    const auto [start, stop] = window(f);
    dp.add_flow(f.spec, start, stop);
  }
  if (rt) {
    for (const TimelineFlow& f : timeline) {
      const auto [start, stop] = window(f);
      rt->schedule_registration(f.spec, start, stop);
    }
    if (!timeline.empty()) rt->start();
  }
  const SimStats stats = engine.run_until(end);

  MetricsReport report;
  report.scenario = spec.name;
  report.mode = std::string(to_string(spec.mode));
  report.seed = spec.seed;
  report.duration_us = spec.duration_us;
  report.cycle_ns = spec.cycle_ns;
  std::sort(timeline.begin(), timeline.end(),
            [](const TimelineFlow& a, const TimelineFlow& b) { return a.spec.id < b.spec.id; });
  std::vector<double> attainment;
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (const TimelineFlow& f : timeline) {
    if (rt && !spec.paths.contains(f.spec.acc_id)) {
      FlowMetrics m;
      m.flow = f.spec.id;
      m.vm = f.spec.vm_id;
      m.acc = f.spec.acc_id;
      m.path = std::string(to_string(f.spec.path));
      m.slo = f.spec.slo;
      m.admitted = false;
      m.reject_reason = "unknown-accelerator";
      report.flows.push_back(std::move(m));
      continue;
    }
    FlowMetrics m = summarize_flow(spec, dp, f, end, rt ? &*rt : nullptr);
    if (m.admitted) {
      report.aggregate_gbps += m.delivered_gbps;
      if (m.slo.is_throughput()) attainment.push_back(m.attainment);
      lo = std::min(lo, m.delivered_gbps);
      hi = std::max(hi, m.delivered_gbps);
    }
    report.flows.push_back(std::move(m));
  }
  report.jain_fairness = jain_index(attainment);
  report.min_max_ratio = hi > 0.0 ? lo / hi : 1.0;

  const double span_ps = static_cast<double>(end) * static_cast<double>(clock.cycle_ps());
  for (std::size_t i = 0; i < kDirectionCount; ++i) {
    const auto dir = static_cast<Direction>(i);
    const auto& st = dp.fabric().stats(dir);
    report.directions.push_back({std::string(to_string(dir)), dp.direction_bandwidth(dir),
                                 span_ps > 0.0 ? static_cast<double>(st.busy_ps) / span_ps : 0.0, st.bytes});
  }
  if (rt) {
    report.control_log = rt->log();
    report.status = rt->records();
    report.register_writes = rt->register_writes();
  }
  report.events_dispatched = stats.dispatched;
  report.final_cycle = stats.now;
  report.trace_hash = stats.trace_hash;
  return report;
}

}  // namespace accelshape
