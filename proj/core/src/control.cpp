#include "accelshape/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace accelshape {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

double nearest_rank(std::vector<double> values, double p) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(values.size())));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

}  // namespace

void AccTable::add(const std::string& acc_id, std::vector<PathOption> paths) {
  if (paths.empty()) throw ConfigError("accelerator '" + acc_id + "' needs at least one path");
  table_[acc_id] = std::move(paths);
}

const std::vector<PathOption>* AccTable::find(const std::string& acc_id) const {
  auto it = table_.find(acc_id);
  return it == table_.end() ? nullptr : &it->second;
}

std::string to_string(const ProfileRole& role) {
  return std::to_string(role.size) + "B@" + fmt(role.load) + "/" + std::string(to_string(role.path));
}

void ProfileKey::canonicalize() { std::sort(roles.begin(), roles.end()); }

std::string to_string(const ProfileKey& key) {
  std::string out = key.acc_id + "|" + key.setting + "|";
  for (std::size_t i = 0; i < key.roles.size(); ++i) {
    if (i > 0) out += "+";
    out += to_string(key.roles[i]);
  }
  return out;
}

std::string_view to_string(ProfileTag tag) {
  return tag == ProfileTag::SloFriendly ? "slo-friendly" : "slo-violating";
}

ProfileTag classify(const CapacityProfile& profile, std::span<const SloTarget> slos) {
  if (slos.empty()) return ProfileTag::SloFriendly;
  if (slos.size() != profile.shares_gbps.size()) {
    throw ConfigError("classify: " + std::to_string(slos.size()) + " SLOs for " +
                      std::to_string(profile.shares_gbps.size()) + " roles");
  }
  for (std::size_t i = 0; i < slos.size(); ++i) {
    if (profile.shares_gbps[i] < slos[i].value) return ProfileTag::SloViolating;
  }
  return ProfileTag::SloFriendly;
}

void ProfileTable::insert(ProfileKey key, CapacityProfile profile) {
  if (profile.shares_gbps.size() != key.roles.size()) {
    throw ConfigError("profile entry " + to_string(key) + " has mismatched share count");
  }
  // Keep shares aligned with the canonical role order.
  std::vector<std::size_t> idx(key.roles.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return key.roles[a] < key.roles[b]; });
  ProfileKey sorted = key;
  CapacityProfile aligned = profile;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    sorted.roles[i] = key.roles[idx[i]];
    aligned.shares_gbps[i] = profile.shares_gbps[idx[i]];
  }
  entries_[std::move(sorted)] = std::move(aligned);
}

const CapacityProfile* ProfileTable::find(const ProfileKey& key) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

void ProfileTable::merge(const ProfileTable& other) {
  for (const auto& [k, v] : other.entries_) entries_[k] = v;
  sizes.insert(sizes.end(), other.sizes.begin(), other.sizes.end());
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
  loads.insert(loads.end(), other.loads.begin(), other.loads.end());
  std::sort(loads.begin(), loads.end());
  loads.erase(std::unique(loads.begin(), loads.end()), loads.end());
}

bool ProfileTable::covers(const std::string& acc_id) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first.acc_id == acc_id; });
}

std::vector<std::uint32_t> ProfileTable::bracket_sizes(double size) const {
  if (sizes.empty()) return {};
  auto hi = std::lower_bound(sizes.begin(), sizes.end(), size, [](std::uint32_t s, double v) { return s < v; });
  if (hi == sizes.end()) return {sizes.back()};
  if (static_cast<double>(*hi) == size || hi == sizes.begin()) return {*hi};
  return {*(hi - 1), *hi};
}

double ProfileTable::round_load_up(double need) const {
  if (loads.empty()) return need;
  for (double l : loads) {
    if (l >= need - 1e-12) return l;
  }
  return loads.back();
}

Runtime::Runtime(Engine& engine, Dataplane& dataplane, AccTable accs, ProfileTable profiles, ControlConfig config,
                 double reference_gbps, std::string setting)
    : engine_(engine),
      dp_(dataplane),
      accs_(std::move(accs)),
      profiles_(std::move(profiles)),
      config_(std::move(config)),
      reference_gbps_(reference_gbps),
      setting_(std::move(setting)) {
  if (!(config_.tick_us > 0.0)) throw ConfigError("control tick must be > 0");
  if (config_.violation_ticks == 0) throw ConfigError("violation_ticks must be >= 1");
  tick_cycles_ = std::max<Cycle>(1, engine_.clock().cycles_from_us(config_.tick_us));
}

void Runtime::schedule_registration(const FlowSpec& spec, Cycle start, Cycle stop) {
  spec.validate();
  timeline_.push_back({spec, start, stop, false, false});
  std::stable_sort(timeline_.begin(), timeline_.end(), [](const Pending& a, const Pending& b) {
    return a.start != b.start ? a.start < b.start : a.spec.id < b.spec.id;
  });
}

void Runtime::start() {
  if (started_) return;
  started_ = true;
  engine_.schedule(engine_.now(), EventKind::ControlTick, *this);
}

void Runtime::handle(const Event&) {
  control_tick();
  engine_.schedule(engine_.now() + tick_cycles_, EventKind::ControlTick, *this);
}

void Runtime::note(FlowId flow, std::string kind, std::string detail) {
  log_.push_back({engine_.now(), flow, std::move(kind), std::move(detail)});
}

SloCheck Runtime::slo_violation_check(FlowId flow) const {
  const FlowStatus& st = status_.at(flow);
  const SloTarget& slo = st.spec.slo;
  const auto comps = dp_.completions(flow);
  const std::size_t w = slo.window_requests;
  SloCheck out;
  if (comps.size() < w + 1) return out;
  const std::size_t first = comps.size() - w;
  const Cycle t0 = comps[first - 1].at;
  const double seconds = static_cast<double>(dp_.now() - t0) * dp_.clock().cycle_ns * 1e-9;
  if (seconds <= 0.0) return out;
  double bytes = 0.0;
  std::vector<double> lat;
  lat.reserve(w);
  for (std::size_t i = first; i < comps.size(); ++i) {
    bytes += comps[i].bytes;
    lat.push_back(static_cast<double>(comps[i].latency) * dp_.clock().cycle_ns);
  }
  out.evaluated = true;
  out.tail_latency_ns = nearest_rank(std::move(lat), slo.percentile);
  switch (slo.metric) {
    case SloMetric::ThroughputGbps:
      out.rate = bytes * 8.0 / seconds / 1e9;
      out.measured = out.rate;
      out.satisfied = out.measured >= slo.value * (1.0 - config_.tolerance);
      break;
    case SloMetric::ThroughputIops:
      out.rate = static_cast<double>(w) / seconds;
      out.measured = out.rate;
      out.satisfied = out.measured >= slo.value * (1.0 - config_.tolerance);
      break;
    case SloMetric::TailLatency:
      out.rate = bytes * 8.0 / seconds / 1e9;
      out.measured = out.tail_latency_ns;
      out.satisfied = out.measured <= slo.value;
      break;
  }
  return out;
}

double Runtime::to_shaping_unit(const FlowSpec& spec, double gbps) const {
  if (spec.slo.metric == SloMetric::ThroughputIops) return gbps * 1e9 / 8.0 / spec.pattern.sizes.mean();
  return gbps;
}

double Runtime::shaping_value(const FlowSpec& spec) const { return shaping_target(spec, reference_gbps_).value; }

std::optional<Runtime::Lookup> Runtime::lookup(const std::vector<std::pair<FlowSpec, PathMode>>& flows,
                                               ProfileKey* first_missing) const {
  if (flows.empty()) return std::nullopt;
  const std::string& acc = flows.front().first.acc_id;
  std::vector<std::vector<ProfileRole>> options;
  for (const auto& [spec, path] : flows) {
    const double need = slo_gbps_equivalent(spec, reference_gbps_) / profiles_.reference_gbps;
    const double load = profiles_.round_load_up(need * (1.0 + config_.load_margin));
    std::vector<ProfileRole> roles;
    for (std::uint32_t s : profiles_.bracket_sizes(spec.pattern.sizes.mean())) roles.push_back({s, load, path});
    if (roles.empty()) return std::nullopt;
    options.push_back(std::move(roles));
  }
  // Enumerate the bracketing combinations; large flow counts keep the lower bracket only.
  std::size_t combos = 1;
  for (const auto& o : options) {
    combos *= o.size();
    if (combos > 4096) break;
  }
  if (combos > 4096) {
    for (auto& o : options) o.resize(1);
    combos = 1;
  }
  std::optional<Lookup> best;
  bool recorded_missing = false;
  std::vector<std::size_t> pick(options.size(), 0);
  for (std::size_t c = 0; c < combos; ++c) {
    std::size_t rem = c;
    for (std::size_t i = 0; i < options.size(); ++i) {
      pick[i] = rem % options[i].size();
      rem /= options[i].size();
    }
    std::vector<std::pair<ProfileRole, FlowId>> placed;
    for (std::size_t i = 0; i < options.size(); ++i) placed.emplace_back(options[i][pick[i]], flows[i].first.id);
    std::sort(placed.begin(), placed.end());
    Lookup l;
    l.key.acc_id = acc;
    l.key.setting = setting_;
    for (const auto& [role, id] : placed) {
      l.key.roles.push_back(role);
      l.order.push_back(id);
    }
    l.profile = profiles_.find(l.key);
    if (l.profile == nullptr) {
      if (first_missing != nullptr && !recorded_missing) {
        *first_missing = l.key;
        recorded_missing = true;
      }
      continue;
    }
    if (!best || l.profile->total_gbps < best->profile->total_gbps) best = std::move(l);
  }
  return best;
}

std::vector<ProfileKey> Runtime::missing_keys(const std::vector<FlowSpec>& sequence) const {
  std::vector<ProfileKey> out;
  std::map<std::string, std::vector<std::pair<FlowSpec, PathMode>>> live;
  for (const FlowSpec& spec : sequence) {
    if (!accs_.contains(spec.acc_id)) continue;
    auto& group = live[spec.acc_id];
    group.emplace_back(spec, spec.path);
    ProfileKey missing;
    if (!lookup(group, &missing)) {
      if (std::find(out.begin(), out.end(), missing) == out.end()) out.push_back(missing);
    }
  }
  return out;
}

void Runtime::refresh_shares(const Lookup& found) {
  for (std::size_t i = 0; i < found.order.size(); ++i) {
    auto it = status_.find(found.order[i]);
    if (it == status_.end()) continue;
    it->second.share = to_shaping_unit(it->second.spec, found.profile->shares_gbps[i]);
  }
}

AdmissionResult Runtime::admission_control(const FlowSpec& spec) {
  AdmissionResult r;
  auto decide = [&](AdmissionResult res) {
    decisions_[spec.id] = res;
    note(spec.id, res.admitted ? "admit" : "reject", res.admitted ? res.detail : res.reason + ": " + res.detail);
    return res;
  };
  const std::vector<PathOption>* paths = accs_.find(spec.acc_id);
  if (paths == nullptr) return decide({false, "unknown-accelerator", "no accelerator '" + spec.acc_id + "'"});

  std::vector<std::pair<FlowSpec, PathMode>> live;
  double admitted_gbps = 0.0;
  for (const auto& [id, st] : status_) {
    if (st.spec.acc_id != spec.acc_id) continue;
    live.emplace_back(st.spec, st.path);
    admitted_gbps += slo_gbps_equivalent(st.spec, reference_gbps_);
  }
  live.emplace_back(spec, spec.path);
  ProfileKey missing;
  const auto found = lookup(live, &missing);
  if (!found) return decide({false, "missing-profile", to_string(missing)});

  const double wanted = slo_gbps_equivalent(spec, reference_gbps_);
  const double remaining = found->profile->total_gbps - admitted_gbps;
  if (remaining + 1e-9 < wanted) {
    return decide({false, "capacity",
                   "remaining " + fmt(remaining) + " Gbps < requested " + fmt(wanted) + " Gbps under " +
                       to_string(found->key)});
  }
  std::vector<SloTarget> slos;
  for (FlowId id : found->order) {
    const FlowSpec& s = id == spec.id ? spec : status_.at(id).spec;
    slos.push_back(SloTarget{SloMetric::ThroughputGbps, slo_gbps_equivalent(s, reference_gbps_)});
  }
  if (classify(*found->profile, slos) == ProfileTag::SloViolating) {
    return decide({false, "pattern", to_string(found->key) + " is tagged slo-violating"});
  }

  FlowStatus st;
  st.spec = spec;
  st.path = spec.path;
  st.path_id = std::string(to_string(spec.path));
  for (const PathOption& p : *paths) {
    if (p.mode == spec.path) {
      st.path_id = p.location;
      break;
    }
  }
  status_[spec.id] = st;
  refresh_shares(*found);
  const ShaperRegisters regs = reshape_decision(spec.id);
  dp_.write_registers(spec.id, regs);
  ++writes_;
  dp_.activate(spec.id);
  return decide({true, "", to_string(found->key)});
}

ShaperRegisters Runtime::registers_for(const FlowStatus& st, double target) const {
  SloTarget t;
  t.metric = st.spec.slo.metric == SloMetric::ThroughputIops ? SloMetric::ThroughputIops : SloMetric::ThroughputGbps;
  t.value = target;
  RateParamOptions o = config_.rate;
  const std::uint32_t max_size = st.spec.pattern.sizes.max();
  if (t.metric == SloMetric::ThroughputGbps) {
    if (max_size > profiles_.friendly_size_bound) o.max_msg_bytes = profiles_.friendly_size_bound;
    // Latency-bound flows get room for several back-to-back bursts so the
    // shaper itself does not queue them.
    const std::uint64_t burst =
        st.spec.slo.is_throughput() ? 1 : std::uint64_t{st.spec.pattern.burstiness} * config_.latency_bursts;
    o.largest_message_bytes = static_cast<std::uint64_t>(max_size) * burst;
  }
  for (double tol : {o.tolerance, 0.05, std::numeric_limits<double>::infinity()}) {
    o.tolerance = tol;
    try {
      return params_for_rate(t, engine_.clock(), o);
    } catch (const UnachievableRate&) {
    }
  }
  throw ConfigError("no shaper registers for flow " + std::to_string(st.spec.id.value));
}

ShaperRegisters Runtime::reshape_decision(FlowId flow) {
  FlowStatus& st = status_.at(flow);
  const double base = shaping_value(st.spec);
  double target = base;
  if (st.spec.slo.is_throughput()) {
    const double cap = st.share > 0.0 ? st.share : base;
    target = std::min(base, cap);
    st.under_capacity = cap < base * (1.0 - 1e-9);
    if (st.violated && st.target > 0.0 && st.measured > 0.0) {
      target = std::min(st.target * st.spec.slo.value / st.measured, cap);
      target = std::max(target, std::min(base, cap));
    }
  } else if (st.violated && st.target > 0.0 && st.measured > 0.0) {
    const double ceiling = 2.0 * base;  // four times the declared rate
    target = std::clamp(st.target * st.measured / st.spec.slo.value, base, ceiling);
  }
  st.target = target;
  return registers_for(st, target);
}

std::optional<PathOption> Runtime::path_selection(FlowId flow) const {
  const FlowStatus& st = status_.at(flow);
  const std::vector<PathOption>* paths = accs_.find(st.spec.acc_id);
  if (paths == nullptr || paths->size() <= 1) return std::nullopt;
  struct Room {
    double headroom;
    double bandwidth;
  };
  auto room = [&](PathMode mode) {
    const PathDirections d = directions_of(mode);
    Room best{std::numeric_limits<double>::infinity(), 0.0};
    for (Direction dir : {d.ingress, d.egress}) {
      const double bw = dp_.direction_bandwidth(dir);
      const double h = bw * (1.0 - util_[static_cast<std::size_t>(dir)]);
      if (h < best.headroom) best = {h, bw};
    }
    return best;
  };
  const Room current = room(st.path);
  std::optional<PathOption> choice;
  double choice_room = current.headroom + config_.hysteresis * current.bandwidth;
  for (const PathOption& p : *paths) {
    if (p.mode == st.path) continue;
    const double h = room(p.mode).headroom;
    if (h > choice_room) {
      choice = p;
      choice_room = h;
    }
  }
  return choice;
}

void Runtime::readjust_pattern(FlowId flow) {
  FlowStatus& st = status_.at(flow);
  const double before = st.target;
  const auto moved = path_selection(flow);
  if (moved) {
    dp_.set_path(flow, moved->mode);
    note(flow, "path-change", st.path_id + " -> " + moved->location);
    st.path = moved->mode;
    st.path_id = moved->location;
    std::vector<std::pair<FlowSpec, PathMode>> live;
    for (const auto& [id, s] : status_) {
      if (s.spec.acc_id == st.spec.acc_id) live.emplace_back(s.spec, s.path);
    }
    if (auto found = lookup(live)) refresh_shares(*found);
  }
  const ShaperRegisters regs = reshape_decision(flow);
  if (!moved && before > 0.0 && std::abs(st.target - before) <= before * 1e-3) {
    st.persistent = true;
    note(flow, "persistently-violating", "no feasible adjustment at target " + fmt(st.target));
    return;
  }
  dp_.write_registers(flow, regs);
  ++writes_;
  note(flow, "reshape", fmt(before) + " -> " + fmt(st.target));
}

void Runtime::deregister(FlowId flow) {
  if (status_.erase(flow) == 0) return;
  dp_.deactivate(flow);
  note(flow, "deregister", "");
}

void Runtime::control_tick() {
  observe_utilization();
  const Cycle now = engine_.now();
  for (auto& [id, st] : status_) {
    const SloCheck chk = slo_violation_check(id);
    st.regs = dp_.committed_registers(id);
    if (chk.evaluated) {
      st.measured = st.spec.slo.is_throughput() ? chk.measured : chk.tail_latency_ns;
      st.tail_latency_ns = chk.tail_latency_ns;
    }
    st.violated = chk.evaluated && !chk.satisfied;
    if (st.violated) {
      ++st.consecutive;
    } else if (chk.evaluated) {
      st.consecutive = 0;
      if (st.persistent) {
        st.persistent = false;
        note(id, "recovered", "");
      }
    }
    if (st.violated && st.consecutive >= config_.violation_ticks && !st.persistent) {
      readjust_pattern(id);
      st.consecutive = 0;
    }
    records_.push_back({now, id, chk.rate, chk.tail_latency_ns, st.violated, st.regs, st.path_id});
  }
  for (Pending& p : timeline_) {
    if (p.registered && !p.removed && p.stop != 0 && p.stop <= now) {
      p.removed = true;
      deregister(p.spec.id);
    }
  }
  for (Pending& p : timeline_) {
    if (p.registered || p.start > now) continue;
    p.registered = true;
    if (p.stop != 0 && p.stop <= now) {
      p.removed = true;
      continue;
    }
    admission_control(p.spec);
  }
}

}  // namespace accelshape
