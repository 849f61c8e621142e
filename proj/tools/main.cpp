#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "accelshape/profiler.hpp"
#include "accelshape/scenario.hpp"

namespace fs = std::filesystem;
using namespace accelshape;

namespace {

MetricsReport read_report(const fs::path& p) {
  return load_report(fs::is_directory(p) ? p / "report.json" : p);
}

void print_summary(const MetricsReport& r, std::ostream& out) {
  out << r.scenario << " [" << r.mode << ", seed " << r.seed << "]\n";
  char line[256];
  std::snprintf(line, sizeof line, "%-5s %-10s %-9s %12s %12s %12s %9s %s\n", "flow", "vm", "admitted", "gbps",
                "iops", "p99_ns", "attain", "slo");
  out << line;
  for (const FlowMetrics& f : r.flows) {
    std::snprintf(line, sizeof line, "%-5u %-10s %-9s %12.4f %12.0f %12.1f %8.2f%% %s\n", f.flow.value, f.vm.c_str(),
                  f.admitted ? "yes" : f.reject_reason.c_str(), f.delivered_gbps, f.delivered_iops, f.p99_ns,
                  f.attainment * 100.0, f.slo_met ? "met" : "missed");
    out << line;
  }
  std::snprintf(line, sizeof line, "aggregate %.4f Gbps, jain %.4f, min/max %.4f, %llu events\n", r.aggregate_gbps,
                r.jain_fairness, r.min_max_ratio, static_cast<unsigned long long>(r.events_dispatched));
  out << line;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete-event simulator for SLO-managed accelerator sharing"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> duration_us;
  std::optional<std::string> mode;
  std::string profile_path;
  std::string out_dir;
  std::optional<std::string> trace_path;
  auto* run = app.add_subcommand("run", "Run a scenario and write its metrics report");
  run->add_option("scenario", scenario_path, "Scenario file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--duration", duration_us, "Override the run length in microseconds");
  run->add_option("--mode", mode, "arcus | baseline-rr | baseline-wrr | baseline-priority | baseline-wfq | "
                                  "baseline-soft-shaper");
  run->add_option("--profile", profile_path, "Profile artifact (arcus mode)")->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory (default: out/<scenario>)");
  run->add_option("--trace", trace_path, "Write a per-event trace (default file: <out>/trace.txt)")
      ->expected(0, 1)
      ->default_str("");

  std::string plan_path;
  std::string profile_out = "profile.json";
  unsigned jobs = 0;
  auto* profile = app.add_subcommand("profile", "Execute a sweep plan and write a profile artifact");
  profile->add_option("plan", plan_path, "Sweep plan file")->required()->check(CLI::ExistingFile);
  profile->add_option("--out", profile_out, "Artifact path")->capture_default_str();
  profile->add_option("-j,--jobs", jobs, "Worker threads (0: hardware concurrency)")->capture_default_str();

  std::string report_a;
  std::string report_b;
  bool as_json = false;
  auto* compare = app.add_subcommand("compare", "Per-flow deltas between two reports (b - a)");
  compare->add_option("a", report_a, "Report file or run directory")->required()->check(CLI::ExistingPath);
  compare->add_option("b", report_b, "Report file or run directory")->required()->check(CLI::ExistingPath);
  compare->add_flag("--json", as_json, "Emit JSON instead of a table");

  std::string validate_path;
  std::string validate_profile;
  auto* validate = app.add_subcommand("validate", "Check a scenario file without running it");
  validate->add_option("scenario", validate_path, "Scenario file")->required()->check(CLI::ExistingFile);
  validate->add_option("--profile", validate_profile, "Also check profile coverage")->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      ScenarioSpec spec = load_scenario(scenario_path);
      if (seed) spec.seed = *seed;
      if (duration_us) spec.duration_us = *duration_us;
      if (mode) spec.mode = scenario_mode_from_string(*mode);
      if (!profile_path.empty()) spec.profile = profile_path;
      spec.validate();
      const fs::path dir = out_dir.empty() ? fs::path("out") / spec.name : fs::path(out_dir);
      fs::create_directories(dir);
      std::ofstream trace;
      RunOptions opts;
      if (run->count("--trace") > 0) {
        const fs::path tp = trace_path && !trace_path->empty() ? fs::path(*trace_path) : dir / "trace.txt";
        trace.open(tp);
        if (!trace) throw ConfigError("cannot write " + tp.string());
        opts.trace = &trace;
      }
      const MetricsReport report = run_scenario(spec, opts);
      write_report(report, dir);
      print_summary(report, std::cout);
      std::cout << "wrote " << (dir / "report.json").string() << "\n";
    } else if (*profile) {
      const SweepPlan plan = read_json_file(plan_path).get<SweepPlan>();
      const ProfileTable table = run_sweep(plan, jobs);
      save_profile(table, profile_out);
      std::cout << "profiled " << table.size() << " points into " << profile_out << "\n";
    } else if (*compare) {
      const Comparison c = compare_runs(read_report(report_a), read_report(report_b));
      if (as_json) {
        std::cout << Json(c).dump(2) << "\n";
      } else {
        std::cout << comparison_table(c);
      }
    } else if (*validate) {
      const ScenarioSpec spec = load_scenario(validate_path);
      std::optional<fs::path> prof = spec.profile;
      if (!validate_profile.empty()) prof = validate_profile;
      if (spec.mode == ScenarioMode::Arcus && prof) {
        const auto missing = missing_profile_keys(spec, load_profile(*prof));
        if (!missing.empty()) {
          std::cerr << "profile lacks " << missing.size() << " key(s):\n";
          for (const ProfileKey& k : missing) std::cerr << "  " << to_string(k) << "\n";
          return 1;
        }
      }
      std::cout << spec.name << ": ok (" << spec.flows.size() << " flows, mode " << to_string(spec.mode) << ")\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
