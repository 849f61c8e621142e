#include "accelshape/datapath.hpp"

#include <algorithm>
#include <string>

namespace accelshape {

namespace {

constexpr std::uint64_t kArrival = 0;
constexpr std::uint64_t kStart = 1;
constexpr std::uint64_t kShaperRetry = 0;
constexpr std::uint64_t kSoftTick = 1;

ArbiterPolicy::Kind fetch_policy(const DatapathConfig& c) {
  // Shaped and software-shaped fetch stages round-robin among eligible queues.
  return c.mode == DataplaneMode::Unshaped ? c.arbiter : ArbiterPolicy::Kind::RoundRobin;
}

}  // namespace

double declared_gbps(const FlowSpec& flow, double reference_gbps) {
  return flow.pattern.load * reference_gbps;
}

SloTarget shaping_target(const FlowSpec& flow, double reference_gbps) {
  if (flow.slo.is_throughput()) return flow.slo;
  SloTarget t;
  t.metric = SloMetric::ThroughputGbps;
  t.value = std::max(2.0 * declared_gbps(flow, reference_gbps), 0.01);
  t.window_requests = flow.slo.window_requests;
  return t;
}

double slo_gbps_equivalent(const FlowSpec& flow, double reference_gbps) {
  switch (flow.slo.metric) {
    case SloMetric::ThroughputGbps:
      return flow.slo.value;
    case SloMetric::ThroughputIops:
      return flow.slo.value * flow.pattern.sizes.mean() * 8.0 / 1e9;
    case SloMetric::TailLatency:
      return declared_gbps(flow, reference_gbps);
  }
  return 0.0;
}

struct Datapath::FlowState {
  FlowSpec spec;
  std::uint32_t port = 0;
  PathMode path = PathMode::FunctionCall;
  Cycle start = 0;
  Cycle stop = 0;
  bool admitted = false;
  bool active = false;
  bool started = false;
  Cycle activated_at = 0;
  std::optional<ArrivalGenerator> gen;
  FlowQueue queue;
  std::optional<TokenBucket> bucket;
  std::optional<SoftwareTokenBucket> soft;
  Rng soft_rng{0};
  Picos soft_next_ps = 0;
  std::optional<Cycle> retry_at;
  FlowCounters counters;
  std::vector<Completion> completions;

  FlowState(const FlowSpec& s, std::size_t depth) : spec(s), path(s.path), queue(s.id, depth) {}
};

Datapath::Datapath(Engine& engine, DatapathConfig config)
    : engine_(engine),
      config_(std::move(config)),
      fabric_(engine, config_.channel),
      regfile_(engine, config_.reconfig_latency, [this](FlowId flow, const ShaperRegisters& regs) {
        FlowState& f = state(flow);
        if (f.bucket) {
          f.bucket->apply(regs, engine_.now());
        } else {
          f.bucket.emplace(regs, engine_.now());
        }
        if (f.admitted && !f.started) start_injection(f);
        fetch_pass(f.port);
      }) {
  if (config_.host_queue_depth == 0) throw ConfigError("host_queue_depth must be >= 1");
  if (!(config_.reference_gbps > 0.0)) throw ConfigError("reference_gbps must be > 0");
  for (std::size_t i = 0; i < config_.accelerators.size(); ++i) {
    const AcceleratorModel& m = config_.accelerators[i];
    for (std::size_t j = 0; j < i; ++j) {
      if (config_.accelerators[j].id == m.id) throw ConfigError("duplicate accelerator id '" + m.id + "'");
    }
    ports_.push_back(std::make_unique<AcceleratorPort>(engine_, m, Rng::fork(config_.seed, "service/" + m.id),
                                                       static_cast<std::uint32_t>(i), *this));
    ArbiterPolicy policy;
    policy.kind = fetch_policy(config_);
    policy.wfq_quantum_bytes = config_.wfq_quantum_bytes;
    arbiters_.emplace_back(policy);
  }
  port_flows_.resize(ports_.size());
}

Datapath::~Datapath() = default;

Datapath::FlowState& Datapath::state(FlowId flow) {
  auto it = flows_.find(flow);
  if (it == flows_.end()) throw SimulationError("unknown flow " + std::to_string(flow.value));
  return *it->second;
}

const Datapath::FlowState& Datapath::state(FlowId flow) const {
  auto it = flows_.find(flow);
  if (it == flows_.end()) throw SimulationError("unknown flow " + std::to_string(flow.value));
  return *it->second;
}

void Datapath::add_flow(const FlowSpec& spec, Cycle start, Cycle stop) {
  spec.validate();
  if (flows_.contains(spec.id)) throw ConfigError("duplicate flow id " + std::to_string(spec.id.value));
  std::uint32_t port = 0;
  bool found = false;
  for (std::uint32_t i = 0; i < ports_.size(); ++i) {
    if (ports_[i]->model().id == spec.acc_id) {
      port = i;
      found = true;
    }
  }
  if (!found) throw ConfigError("flow " + std::to_string(spec.id.value) + " references unknown accelerator '" +
                                spec.acc_id + "'");
  if (stop != 0 && stop <= start) throw ConfigError("flow stop must be after start");
  auto f = std::make_unique<FlowState>(spec, config_.host_queue_depth);
  f->port = port;
  f->start = start;
  f->stop = stop;
  port_flows_[port].push_back(spec.id);
  std::sort(port_flows_[port].begin(), port_flows_[port].end());
  switch (arbiters_[port].policy().kind) {
    case ArbiterPolicy::Kind::WeightedRoundRobin:
    case ArbiterPolicy::Kind::WeightedFairQueuing:
      arbiters_[port].set_weight(spec.id, spec.weight);
      break;
    case ArbiterPolicy::Kind::Priority:
      arbiters_[port].set_weight(spec.id, static_cast<std::uint32_t>(std::max(spec.priority, 0)));
      break;
    case ArbiterPolicy::Kind::RoundRobin:
      break;
  }
  flows_.emplace(spec.id, std::move(f));
  if (config_.mode != DataplaneMode::Shaped) {
    engine_.schedule(std::max(start, engine_.now()), EventKind::Inject, *this, spec.id.value, kStart);
  }
}

void Datapath::start_injection(FlowState& f) {
  if (f.started) return;
  const Cycle now = engine_.now();
  if (f.stop != 0 && now >= f.stop) return;
  f.started = true;
  f.active = true;
  f.activated_at = now;
  const std::string key = std::to_string(f.spec.id.value);
  f.gen.emplace(f.spec.pattern, config_.reference_gbps, Rng::fork(config_.seed, "arrivals/" + key), now_ps());
  if (!f.gen->idle()) {
    const Cycle at = std::max(now, engine_.clock().ceil_cycle(f.gen->next_ps()));
    if (f.stop == 0 || at < f.stop) engine_.schedule(at, EventKind::Inject, *this, f.spec.id.value, kArrival);
  }
  if (config_.mode == DataplaneMode::SoftShaped) {
    const SloTarget t = shaping_target(f.spec, config_.reference_gbps);
    const bool iops = t.metric == SloMetric::ThroughputIops;
    const double rate = iops ? t.value : t.value * 1e9 / 8.0;
    const auto timer = static_cast<Picos>(config_.soft.timer_ns * 1000.0);
    const auto jitter = static_cast<Picos>(config_.soft.jitter_ns * 1000.0);
    f.soft.emplace(rate, iops ? ShaperMode::Iops : ShaperMode::Gbps, timer, jitter, config_.soft.burst_ticks);
    f.soft_rng = Rng::fork(config_.seed, "soft-timer/" + key);
    soft_tick(f);
  }
}

void Datapath::soft_tick(FlowState& f) {
  const Picos base = f.soft_next_ps == 0 ? now_ps() : f.soft_next_ps;
  f.soft_next_ps = f.soft->tick(base, f.soft_rng);
  const Cycle at = std::max(engine_.now(), engine_.clock().ceil_cycle(f.soft_next_ps));
  engine_.schedule(at, EventKind::TokenRefill, *this, f.spec.id.value, kSoftTick);
}

void Datapath::inject(FlowState& f) {
  if (!f.active) return;
  const Cycle now = engine_.now();
  const std::uint32_t burst = f.gen->take_burst();
  for (std::uint32_t i = 0; i < burst; ++i) {
    const std::uint32_t bytes = f.gen->draw_size();
    QueuedMessage msg{next_uid_++, bytes, now, bytes, 0};
    ++f.counters.injected;
    f.counters.bytes_injected += bytes;
    if (!f.queue.try_push(msg)) ++f.counters.dropped;
  }
  const Cycle at = std::max(now, engine_.clock().ceil_cycle(f.gen->next_ps()));
  if (f.stop == 0 || at < f.stop) engine_.schedule(at, EventKind::Inject, *this, f.spec.id.value, kArrival);
  fetch_pass(f.port);
}

void Datapath::schedule_retry(FlowState& f, Cycle at) {
  if (f.retry_at && *f.retry_at <= at) return;
  f.retry_at = at;
  engine_.schedule(at, EventKind::TokenRefill, *this, f.spec.id.value, kShaperRetry);
}

void Datapath::fetch_pass(std::uint32_t p) {
  AcceleratorPort& port = *ports_[p];
  const Cycle now = engine_.now();
  std::vector<ReadyQueue> ready;
  while (port.has_free_slot()) {
    ready.clear();
    for (FlowId id : port_flows_[p]) {
      FlowState& f = *flows_.at(id);
      if (f.queue.empty()) continue;
      QueuedMessage& head = f.queue.front();
      if (head.offset == 0) {
        const std::uint64_t cap = f.bucket ? f.bucket->regs().max_msg_bytes : 0;
        head.segment_bytes = (config_.mode == DataplaneMode::Shaped && cap > 0) ? std::min(cap, head.bytes)
                                                                                  : head.bytes;
      }
      const std::uint64_t seg = head.next_segment();
      if (config_.mode == DataplaneMode::Shaped) {
        if (!f.bucket) continue;
        const FetchDecision d = f.bucket->peek(seg, now);
        if (!d.admit) {
          schedule_retry(f, d.next_eligible);
          continue;
        }
      } else if (config_.mode == DataplaneMode::SoftShaped) {
        if (!f.soft || f.soft->tokens() <= 0.0) continue;
      }
      ready.push_back({id, seg});
    }
    if (ready.empty()) return;
    const FlowId granted = arbiters_[p].arbitrate(ready);
    FlowState& f = *flows_.at(granted);
    QueuedMessage& head = f.queue.front();
    const std::uint64_t seg = head.next_segment();
    if (config_.mode == DataplaneMode::Shaped) {
      f.bucket->try_fetch(seg, now);
    } else if (config_.mode == DataplaneMode::SoftShaped) {
      f.soft->try_consume(seg);
    }
    port.reserve_slot();
    if (head.offset == 0) {
      in_flight_.emplace(head.id, InFlight{granted, static_cast<std::uint32_t>(head.bytes), head.enqueued,
                                           head.segment_count(), p, f.path});
    }
    const InFlight& rec = in_flight_.at(head.id);
    head.offset += seg;
    ++f.counters.segments_fetched;
    fabric_.request_transfer(granted, directions_of(rec.path).ingress, seg, *this, head.id * 2);
    if (head.offset >= head.bytes) f.queue.pop();
  }
}

void Datapath::handle(const Event& ev) {
  FlowState& f = state(FlowId{ev.flow});
  switch (ev.kind) {
    case EventKind::Inject:
      if (ev.arg == kStart) {
        f.admitted = true;
        start_injection(f);
      } else {
        inject(f);
      }
      return;
    case EventKind::TokenRefill:
      if (ev.arg == kSoftTick) {
        if (!f.active && f.queue.empty()) return;
        soft_tick(f);
      } else if (f.retry_at && *f.retry_at == ev.fire_at) {
        f.retry_at.reset();
      }
      fetch_pass(f.port);
      return;
    case EventKind::CompletionWrite: {
      auto it = in_flight_.find(ev.arg);
      if (it == in_flight_.end()) throw SimulationError("completion for unknown message");
      const InFlight& rec = it->second;
      f.completions.push_back({ev.fire_at, rec.bytes, ev.fire_at - rec.enqueued});
      ++f.counters.completed;
      f.counters.bytes_completed += rec.bytes;
      in_flight_.erase(it);
      return;
    }
    default:
      throw SimulationError("datapath received unexpected event kind " + std::string(to_string(ev.kind)));
  }
}

void Datapath::on_transfer_done(const Transfer& t) {
  const std::uint64_t uid = t.tag / 2;
  InFlight& rec = in_flight_.at(uid);
  AcceleratorPort& port = *ports_[rec.port];
  if (t.tag % 2 == 0) {
    port.deliver(PortMessage{t.flow, t.bytes, uid});
    return;
  }
  port.egress_finished();
  if (--rec.segments_left == 0) {
    engine_.schedule(engine_.now(), EventKind::CompletionWrite, *this, rec.flow.value, uid);
  }
}

void Datapath::on_slot_free(std::uint32_t port) { fetch_pass(port); }

void Datapath::on_service_done(std::uint32_t, const PortMessage& msg, std::uint64_t egress_bytes) {
  const InFlight& rec = in_flight_.at(msg.tag);
  fabric_.request_transfer(msg.flow, directions_of(rec.path).egress, egress_bytes, *this, msg.tag * 2 + 1);
}

std::span<const Completion> Datapath::completions(FlowId flow) const { return state(flow).completions; }

std::array<double, kDirectionCount> Datapath::sample_utilization() {
  std::array<double, kDirectionCount> out{};
  const Picos elapsed = static_cast<Picos>(engine_.now() - util_since_) * engine_.clock().cycle_ps();
  for (std::size_t i = 0; i < kDirectionCount; ++i) {
    const Picos busy = fabric_.stats(static_cast<Direction>(i)).busy_ps;
    if (elapsed > 0) {
      out[i] = std::clamp(static_cast<double>(busy - util_busy_[i]) / static_cast<double>(elapsed), 0.0, 1.0);
    }
    util_busy_[i] = busy;
  }
  util_since_ = engine_.now();
  return out;
}

void Datapath::write_registers(FlowId flow, const ShaperRegisters& regs) {
  state(flow);
  regfile_.write(flow, regs);
}

std::optional<ShaperRegisters> Datapath::committed_registers(FlowId flow) const {
  return regfile_.committed(flow);
}

void Datapath::set_path(FlowId flow, PathMode path) { state(flow).path = path; }

void Datapath::activate(FlowId flow) {
  FlowState& f = state(flow);
  f.admitted = true;
  if (config_.mode != DataplaneMode::Shaped || f.bucket) start_injection(f);
}

void Datapath::deactivate(FlowId flow) {
  FlowState& f = state(flow);
  f.admitted = false;
  f.active = false;
}

std::vector<FlowId> Datapath::flow_ids() const {
  std::vector<FlowId> out;
  for (const auto& [id, f] : flows_) out.push_back(id);
  return out;
}

const FlowSpec& Datapath::spec(FlowId flow) const { return state(flow).spec; }
const FlowCounters& Datapath::counters(FlowId flow) const { return state(flow).counters; }
PathMode Datapath::path(FlowId flow) const { return state(flow).path; }

std::optional<Cycle> Datapath::activated_at(FlowId flow) const {
  const FlowState& f = state(flow);
  if (!f.started) return std::nullopt;
  return f.activated_at;
}

std::size_t Datapath::queued(FlowId flow) const { return state(flow).queue.size(); }

std::uint64_t Datapath::in_flight(FlowId flow) const {
  const FlowState& f = state(flow);
  std::uint64_t n = f.queue.size();
  if (!f.queue.empty() && f.queue.front().offset > 0) --n;  // already counted below
  for (const auto& [uid, rec] : in_flight_) n += rec.flow == flow ? 1 : 0;
  return n;
}

std::optional<TokenBucket> Datapath::bucket(FlowId flow) const { return state(flow).bucket; }

std::size_t Datapath::flow_state_bytes() const {
  std::size_t total = 0;
  for (const auto& [id, f] : flows_) {
    total += sizeof(FlowState) + f->queue.depth() * sizeof(QueuedMessage) + sizeof(FlowId);
  }
  return total;
}

}  // namespace accelshape
