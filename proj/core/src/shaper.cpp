#include "accelshape/shaper.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace accelshape {

std::string_view to_string(ShaperMode mode) { return mode == ShaperMode::Gbps ? "gbps" : "iops"; }

ShaperMode shaper_mode_from_string(std::string_view text) {
  if (text == "gbps") return ShaperMode::Gbps;
  if (text == "iops") return ShaperMode::Iops;
  throw ConfigError("unknown shaper mode '" + std::string(text) + "'");
}

void ShaperRegisters::validate() const {
  if (refill_rate < 1) throw ConfigError("refill_rate must be >= 1");
  if (bkt_size < refill_rate) throw ConfigError("bkt_size must be >= refill_rate");
  if (interval < 1) throw ConfigError("interval must be >= 1");
}

double programmed_rate(const ShaperRegisters& regs, const SimClock& clock) {
  const double seconds = static_cast<double>(regs.interval) * clock.cycle_ns * 1e-9;
  const double per_second = static_cast<double>(regs.refill_rate) / seconds;
  return regs.mode == ShaperMode::Gbps ? per_second * 8.0 / 1e9 : per_second;
}

TokenBucket::TokenBucket(const ShaperRegisters& regs, Cycle now)
    : regs_(regs), tokens_(regs.bkt_size), last_refill_(now) {
  regs_.validate();
}

void TokenBucket::refill(Cycle now) {
  if (now < last_refill_) throw SimulationError("token bucket refilled backwards in time");
  const Cycle whole = (now - last_refill_) / regs_.interval;
  if (whole == 0) return;
  last_refill_ += whole * regs_.interval;
  const std::uint64_t room = regs_.bkt_size - tokens_;
  // Avoid overflow on long idle gaps.
  if (whole >= (room + regs_.refill_rate - 1) / regs_.refill_rate) {
    tokens_ = regs_.bkt_size;
  } else {
    tokens_ += whole * regs_.refill_rate;
  }
}

std::uint64_t TokenBucket::cost(std::uint64_t bytes) const {
  return regs_.mode == ShaperMode::Gbps ? bytes : 1;
}

FetchDecision TokenBucket::try_fetch(std::uint64_t bytes, Cycle now) {
  const FetchDecision d = peek(bytes, now);
  if (d.admit) tokens_ -= cost(bytes);
  return d;
}

FetchDecision TokenBucket::peek(std::uint64_t bytes, Cycle now) {
  const std::uint64_t need = cost(bytes);
  if (need > regs_.bkt_size) {
    std::ostringstream msg;
    msg << "message of " << bytes << " B exceeds bkt_size " << regs_.bkt_size
        << " and can never be admitted";
    if (regs_.max_msg_bytes == 0) msg << " (re-sizing disabled)";
    throw ConfigError(msg.str());
  }
  refill(now);
  if (tokens_ >= need) return {true, now};
  const std::uint64_t missing = need - tokens_;
  const Cycle refills = (missing + regs_.refill_rate - 1) / regs_.refill_rate;
  return {false, last_refill_ + refills * regs_.interval};
}

void TokenBucket::apply(const ShaperRegisters& regs, Cycle now) {
  regs.validate();
  refill(now);
  regs_ = regs;
  tokens_ = std::min(tokens_, regs_.bkt_size);
  last_refill_ = now;
}

std::vector<std::uint64_t> resize(std::uint64_t msg_bytes, std::uint64_t max_msg_bytes) {
  if (max_msg_bytes == 0) throw ConfigError("resize threshold must be > 0");
  std::vector<std::uint64_t> out;
  for (std::uint64_t left = msg_bytes; left > 0;) {
    const std::uint64_t seg = std::min(left, max_msg_bytes);
    out.push_back(seg);
    left -= seg;
  }
  return out;
}

ShaperRegisters params_for_rate(const SloTarget& target, const SimClock& clock,
                                const RateParamOptions& options) {
  if (!target.is_throughput()) throw ConfigError("params_for_rate needs a throughput target");
  if (!(target.value > 0.0)) throw ConfigError("target rate must be > 0");
  const bool gbps = target.metric == SloMetric::ThroughputGbps;
  // Tokens per cycle.
  const double rho = gbps ? target.value * clock.cycle_ns / 8.0 : target.value * clock.cycle_ns * 1e-9;

  auto rel_error = [&](Cycle interval, std::uint64_t refill) {
    return std::abs(static_cast<double>(refill) / (rho * static_cast<double>(interval)) - 1.0);
  };

  ShaperRegisters regs;
  regs.mode = gbps ? ShaperMode::Gbps : ShaperMode::Iops;
  regs.max_msg_bytes = gbps ? options.max_msg_bytes : 0;

  double best_err = std::numeric_limits<double>::infinity();
  Cycle best_interval = 0;
  std::uint64_t best_refill = 0;
  auto consider = [&](Cycle interval) {
    const auto refill = static_cast<std::uint64_t>(std::llround(rho * static_cast<double>(interval)));
    if (refill < 1) return false;
    const double err = rel_error(interval, refill);
    if (err < best_err) {
      best_err = err;
      best_interval = interval;
      best_refill = refill;
    }
    return err <= options.tolerance;
  };

  bool found = false;
  if (options.interval) {
    if (*options.interval < 1) throw ConfigError("interval must be >= 1");
    found = consider(*options.interval);
    if (best_refill == 0) {
      best_interval = *options.interval;
      best_refill = 1;
    }
  } else {
    for (Cycle i = std::max<Cycle>(1, options.min_interval); i <= options.max_interval; ++i) {
      if (consider(i)) {
        found = true;
        break;
      }
    }
    if (best_refill == 0) {
      best_interval = options.max_interval;
      best_refill = 1;
    }
  }
  if (!found) {
    ShaperRegisters closest = regs;
    closest.interval = best_interval;
    closest.refill_rate = best_refill;
    const double rate = programmed_rate(closest, clock);
    std::ostringstream msg;
    msg << "rate " << target.value << (gbps ? " Gbps" : " IOPS")
        << " is not achievable within tolerance at this clock; closest is " << rate;
    throw UnachievableRate(msg.str(), rate);
  }
  regs.interval = best_interval;
  regs.refill_rate = best_refill;

  std::uint64_t largest = 1;
  if (gbps) {
    largest = options.largest_message_bytes;
    if (options.max_msg_bytes > 0) largest = std::min(largest, options.max_msg_bytes);
  }
  // Slack of a few refills above one full message so short fetch stalls do
  // not spill tokens.
  regs.bkt_size = options.bucket_refills * regs.refill_rate + largest;
  return regs;
}

RegisterFile::RegisterFile(Engine& engine, Cycle latency, CommitFn on_commit)
    : engine_(engine), latency_(latency), on_commit_(std::move(on_commit)) {}

Cycle RegisterFile::write(FlowId flow, const ShaperRegisters& regs) {
  regs.validate();
  const Cycle at = engine_.now() + latency_;
  if (auto it = pending_.find(flow); it != pending_.end()) history_[it->second].superseded = true;
  pending_[flow] = history_.size();
  history_.push_back({flow, engine_.now(), at, regs, false});
  engine_.schedule(at, EventKind::ReconfigCommit, *this, flow.value, history_.size() - 1);
  return at;
}

void RegisterFile::handle(const Event& ev) {
  const FlowId flow{ev.flow};
  auto it = pending_.find(flow);
  if (it == pending_.end() || it->second != ev.arg) return;  // superseded
  pending_.erase(it);
  const ShaperRegisters regs = history_[ev.arg].regs;
  committed_[flow] = regs;
  if (on_commit_) on_commit_(flow, regs);
}

std::optional<ShaperRegisters> RegisterFile::committed(FlowId flow) const {
  auto it = committed_.find(flow);
  if (it == committed_.end()) return std::nullopt;
  return it->second;
}

SoftwareTokenBucket::SoftwareTokenBucket(double rate, ShaperMode mode, Picos timer_ps, Picos jitter_ps,
                                         double burst_ticks)
    : mode_(mode), timer_ps_(timer_ps), jitter_ps_(jitter_ps) {
  if (!(rate > 0.0)) throw ConfigError("software shaper rate must be > 0");
  if (timer_ps <= 0) throw ConfigError("software shaper timer must be > 0");
  if (jitter_ps < 0) throw ConfigError("software shaper jitter must be >= 0");
  per_tick_ = rate * static_cast<double>(timer_ps) * 1e-12;
  capacity_ = per_tick_ * std::max(1.0, burst_ticks);
  tokens_ = per_tick_;
}

Picos SoftwareTokenBucket::tick(Picos now_ps, Rng& rng) {
  tokens_ = std::min(capacity_, tokens_ + per_tick_);
  Picos gap = timer_ps_;
  if (jitter_ps_ > 0) {
    const auto span = static_cast<std::uint64_t>(2 * jitter_ps_);
    gap += static_cast<Picos>(rng.uniform_int(0, span)) - jitter_ps_;
  }
  return now_ps + std::max<Picos>(gap, 1);
}

bool SoftwareTokenBucket::try_consume(std::uint64_t bytes) {
  if (tokens_ <= 0.0) return false;
  tokens_ -= mode_ == ShaperMode::Gbps ? static_cast<double>(bytes) : 1.0;
  return true;
}

}  // namespace accelshape
