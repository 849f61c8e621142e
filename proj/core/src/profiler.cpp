#include "accelshape/profiler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace accelshape {

void SweepPlan::validate() const {
  if (accs.empty()) throw ConfigError("sweep plan names no accelerator");
  for (const std::string& id : accs) accelerator(id);
  if (settings.empty() || sizes.empty() || loads.empty() || flow_counts.empty() || paths.empty()) {
    throw ConfigError("sweep plan grids must be non-empty");
  }
  for (const ChannelConfig& c : settings) c.validate();
  for (std::uint32_t s : sizes) {
    if (s < kMinMessageBytes || s > kMaxMessageBytes) throw ConfigError("plan size out of [64 B, 1 MiB]");
  }
  for (double l : loads) {
    if (!(l >= 0.0 && l <= 1.0)) throw ConfigError("plan loads must be in [0,1]");
  }
  for (std::uint32_t n : flow_counts) {
    if (n == 0) throw ConfigError("plan flow counts must be >= 1");
  }
  if (!(reference_gbps > 0.0)) throw ConfigError("plan reference_gbps must be > 0");
  // At least 1000 refill intervals of the shortest shaper interval.
  const double min_us = 1000.0 * 64.0 * cycle_ns / 1000.0;
  if (run_us < min_us) throw ConfigError("plan run_us must be >= " + std::to_string(min_us));
}

const AcceleratorModel& SweepPlan::accelerator(const std::string& id) const {
  for (const AcceleratorModel& m : accelerators) {
    if (m.id == id) return m;
  }
  throw ConfigError("sweep plan references unknown accelerator '" + id + "'");
}

void to_json(Json& j, const SweepPlan& v) {
  std::vector<std::string> paths;
  for (PathMode p : v.paths) paths.emplace_back(to_string(p));
  j = Json{{"accelerators", v.accelerators},
           {"acc", v.accs},
           {"settings", v.settings},
           {"sizes", v.sizes},
           {"loads", v.loads},
           {"flow_counts", v.flow_counts},
           {"paths", paths},
           {"run_us", v.run_us},
           {"seed", v.seed},
           {"reference_gbps", v.reference_gbps},
           {"arrival", v.arrival == ArrivalProcess::Poisson ? "poisson" : "fixed"},
           {"friendly_size_bound", v.friendly_size_bound},
           {"host_queue_depth", v.host_queue_depth},
           {"cycle_ns", v.cycle_ns},
           {"mode", v.mode == SweepPlan::Mode::Mixed ? "mixed" : "homogeneous"}};
}

void from_json(const Json& j, SweepPlan& v) {
  expect_keys(j, {"accelerators", "acc", "settings", "sizes", "loads", "flow_counts", "paths", "run_us", "seed",
                  "reference_gbps", "arrival", "friendly_size_bound", "host_queue_depth", "cycle_ns", "mode"},
              "sweep plan");
  v = SweepPlan{};
  try {
    v.accelerators = j.at("accelerators").get<std::vector<AcceleratorModel>>();
    const Json& acc = j.at("acc");
    v.accs = acc.is_string() ? std::vector<std::string>{acc.get<std::string>()} : acc.get<std::vector<std::string>>();
    if (j.contains("settings")) v.settings = j.at("settings").get<std::vector<ChannelConfig>>();
    v.sizes = j.at("sizes").get<std::vector<std::uint32_t>>();
    v.loads = j.at("loads").get<std::vector<double>>();
    if (j.contains("flow_counts")) v.flow_counts = j.at("flow_counts").get<std::vector<std::uint32_t>>();
    if (j.contains("paths")) {
      v.paths.clear();
      for (const auto& p : j.at("paths")) v.paths.push_back(path_mode_from_string(p.get<std::string>()));
    }
    v.run_us = j.value("run_us", v.run_us);
    v.seed = j.value("seed", v.seed);
    v.reference_gbps = j.value("reference_gbps", v.reference_gbps);
    const std::string arrival = j.value("arrival", std::string("fixed"));
    if (arrival != "fixed" && arrival != "poisson") throw ConfigError("unknown arrival '" + arrival + "'");
    v.arrival = arrival == "poisson" ? ArrivalProcess::Poisson : ArrivalProcess::FixedGap;
    v.friendly_size_bound = j.value("friendly_size_bound", v.friendly_size_bound);
    v.host_queue_depth = j.value("host_queue_depth", v.host_queue_depth);
    v.cycle_ns = j.value("cycle_ns", v.cycle_ns);
    const std::string mode = j.value("mode", std::string("homogeneous"));
    if (mode != "homogeneous" && mode != "mixed") throw ConfigError("unknown plan mode '" + mode + "'");
    v.mode = mode == "mixed" ? SweepPlan::Mode::Mixed : SweepPlan::Mode::Homogeneous;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("sweep plan: ") + e.what());
  }
  std::sort(v.sizes.begin(), v.sizes.end());
  std::sort(v.loads.begin(), v.loads.end());
  v.validate();
}

std::vector<PlanPoint> enumerate_points(const SweepPlan& plan) {
  plan.validate();
  std::vector<ProfileRole> items;
  for (std::uint32_t s : plan.sizes) {
    for (double l : plan.loads) {
      for (PathMode p : plan.paths) items.push_back({s, l, p});
    }
  }
  std::sort(items.begin(), items.end());
  std::vector<PlanPoint> out;
  for (const std::string& acc : plan.accs) {
    for (const ChannelConfig& setting : plan.settings) {
      for (std::uint32_t n : plan.flow_counts) {
        if (plan.mode == SweepPlan::Mode::Homogeneous) {
          for (const ProfileRole& r : items) out.push_back({acc, setting, std::vector<ProfileRole>(n, r)});
          continue;
        }
        // Non-decreasing index sequences enumerate multisets in canonical order.
        std::vector<std::size_t> idx(n, 0);
        for (;;) {
          PlanPoint pt{acc, setting, {}};
          for (std::size_t i : idx) pt.roles.push_back(items[i]);
          out.push_back(std::move(pt));
          std::size_t k = n;
          while (k > 0 && idx[k - 1] == items.size() - 1) --k;
          if (k == 0) break;
          ++idx[k - 1];
          for (std::size_t m = k; m < n; ++m) idx[m] = idx[k - 1];
        }
      }
    }
  }
  return out;
}

CapacityProfile profile_point(const SweepPlan& plan, const PlanPoint& point) {
  ProfileKey key{point.acc_id, point.setting.name, point.roles};
  Engine engine(plan.cycle_ns);
  DatapathConfig cfg;
  cfg.channel = point.setting;
  cfg.accelerators = {plan.accelerator(point.acc_id)};
  cfg.mode = DataplaneMode::Unshaped;
  cfg.host_queue_depth = plan.host_queue_depth;
  cfg.reference_gbps = plan.reference_gbps;
  cfg.seed = splitmix64(plan.seed ^ fnv1a(to_string(key)));
  Datapath dp(engine, cfg);
  for (std::size_t i = 0; i < point.roles.size(); ++i) {
    FlowSpec f;
    f.id = FlowId{static_cast<std::uint32_t>(i + 1)};
    f.vm_id = "role" + std::to_string(i);
    f.acc_id = point.acc_id;
    f.path = point.roles[i].path;
    f.pattern.sizes = SizeDist::fixed(point.roles[i].size);
    f.pattern.load = point.roles[i].load;
    f.pattern.arrival = plan.arrival;
    dp.add_flow(f, 0);
  }
  const Cycle end = engine.clock().cycles_from_us(plan.run_us);
  const Cycle warm = end / 10;
  const Cycle mid = warm + (end - warm) / 2;
  engine.run_until(end);

  CapacityProfile out;
  double first = 0.0;
  double second = 0.0;
  const double seconds = static_cast<double>(end - warm) * plan.cycle_ns * 1e-9;
  for (std::size_t i = 0; i < point.roles.size(); ++i) {
    double bytes = 0.0;
    for (const Completion& c : dp.completions(FlowId{static_cast<std::uint32_t>(i + 1)})) {
      if (c.at <= warm) continue;
      bytes += c.bytes;
      (c.at <= mid ? first : second) += c.bytes;
    }
    out.shares_gbps.push_back(bytes * 8.0 / seconds / 1e9);
    out.total_gbps += out.shares_gbps.back();
  }
  const double hi = std::max(first, second);
  out.low_confidence = hi > 0.0 && std::abs(first - second) / hi > 0.05;
  return out;
}

ProfileTable run_sweep(const SweepPlan& plan, unsigned workers) {
  const std::vector<PlanPoint> points = enumerate_points(plan);
  std::vector<CapacityProfile> results(points.size());
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(1, points.size())));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto work = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      try {
        results[i] = profile_point(plan, points[i]);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = points.size();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  ProfileTable table;
  table.reference_gbps = plan.reference_gbps;
  table.friendly_size_bound = plan.friendly_size_bound;
  table.sizes = plan.sizes;
  table.loads = plan.loads;
  for (std::size_t i = 0; i < points.size(); ++i) {
    table.insert(ProfileKey{points[i].acc_id, points[i].setting.name, points[i].roles}, results[i]);
  }
  return table;
}

}  // namespace accelshape
