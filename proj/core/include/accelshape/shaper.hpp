#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "accelshape/engine.hpp"
#include "accelshape/rng.hpp"
#include "accelshape/types.hpp"

namespace accelshape {

/// Gbps mode charges one token per byte, Iops mode one token per message.
enum class ShaperMode { Gbps, Iops };
std::string_view to_string(ShaperMode mode);
ShaperMode shaper_mode_from_string(std::string_view text);

struct ShaperRegisters {
  std::uint64_t bkt_size = 1;
  std::uint64_t refill_rate = 1;
  Cycle interval = 1;
  ShaperMode mode = ShaperMode::Gbps;
  std::uint64_t max_msg_bytes = 0;  // 0 disables re-sizing

  void validate() const;
  bool operator==(const ShaperRegisters&) const = default;
};

/// Long-run rate programmed by `regs`: Gbps in Gbps mode, messages/s in Iops mode.
double programmed_rate(const ShaperRegisters& regs, const SimClock& clock);

struct FetchDecision {
  bool admit = false;
  Cycle next_eligible = 0;  // valid when !admit
};

/// Hardware token bucket with lazy, whole-interval refill. Starts full.
class TokenBucket {
 public:
  explicit TokenBucket(const ShaperRegisters& regs, Cycle now = 0);

  void refill(Cycle now);
  /// Tokens a message (or re-sized segment) of `bytes` costs.
  std::uint64_t cost(std::uint64_t bytes) const;
  FetchDecision try_fetch(std::uint64_t bytes, Cycle now);
  /// Same decision as try_fetch without spending tokens.
  FetchDecision peek(std::uint64_t bytes, Cycle now);
  /// Register commit: settle under the old registers, switch, clamp tokens.
  void apply(const ShaperRegisters& regs, Cycle now);

  std::uint64_t tokens() const { return tokens_; }
  Cycle last_refill() const { return last_refill_; }
  const ShaperRegisters& regs() const { return regs_; }

 private:
  ShaperRegisters regs_;
  std::uint64_t tokens_;
  Cycle last_refill_;
};

/// Splits `msg_bytes` into `max_msg_bytes` segments plus the remainder.
std::vector<std::uint64_t> resize(std::uint64_t msg_bytes, std::uint64_t max_msg_bytes);

struct RateParamOptions {
  std::optional<Cycle> interval;        // force this interval instead of searching
  Cycle min_interval = 64;
  Cycle max_interval = Cycle{1} << 20;
  std::uint32_t bucket_refills = 4;     // bkt_size slack above one message, in refills
  std::uint64_t largest_message_bytes = 0;
  std::uint64_t max_msg_bytes = 0;
  double tolerance = 1e-3;
};

/// The requested rate cannot be programmed within tolerance.
class UnachievableRate : public ConfigError {
 public:
  UnachievableRate(const std::string& what, double closest) : ConfigError(what), closest_(closest) {}
  double closest() const { return closest_; }

 private:
  double closest_;
};

/// Registers whose programmed rate matches a Gbps or IOPS target.
ShaperRegisters params_for_rate(const SloTarget& target, const SimClock& clock,
                                const RateParamOptions& options = {});

/// MMIO register file. A write takes effect `latency` cycles later; a newer
/// write to the same flow supersedes any pending one.
class RegisterFile : public EventHandler {
 public:
  using CommitFn = std::function<void(FlowId, const ShaperRegisters&)>;

  struct WriteRecord {
    FlowId flow;
    Cycle written = 0;
    Cycle committed = 0;
    ShaperRegisters regs;
    bool superseded = false;
  };

  RegisterFile(Engine& engine, Cycle latency, CommitFn on_commit);

  /// Validates and schedules the commit; returns the commit cycle.
  Cycle write(FlowId flow, const ShaperRegisters& regs);

  void handle(const Event& ev) override;

  Cycle latency() const { return latency_; }
  std::optional<ShaperRegisters> committed(FlowId flow) const;
  bool pending(FlowId flow) const { return pending_.contains(flow); }
  const std::vector<WriteRecord>& history() const { return history_; }
  const std::map<FlowId, ShaperRegisters>& all_committed() const { return committed_; }

 private:
  Engine& engine_;
  Cycle latency_;
  CommitFn on_commit_;
  std::map<FlowId, std::size_t> pending_;  // flow -> history index of newest write
  std::map<FlowId, ShaperRegisters> committed_;
  std::vector<WriteRecord> history_;
};

/// Host software rate limiter driven by a jittery periodic timer. Each tick
/// credits rate x nominal period regardless of the actual gap. A message is
/// admitted while the balance is positive and may drive it into debt.
class SoftwareTokenBucket {
 public:
  /// `rate` is bytes/s in Gbps mode, messages/s in Iops mode.
  SoftwareTokenBucket(double rate, ShaperMode mode, Picos timer_ps, Picos jitter_ps,
                      double burst_ticks = 1.0);

  /// Credits one tick; returns the picosecond time of the next tick.
  Picos tick(Picos now_ps, Rng& rng);
  bool try_consume(std::uint64_t bytes);

  double tokens() const { return tokens_; }
  double capacity() const { return capacity_; }

 private:
  ShaperMode mode_;
  double per_tick_;
  double capacity_;
  double tokens_;
  Picos timer_ps_;
  Picos jitter_ps_;
};

}  // namespace accelshape
