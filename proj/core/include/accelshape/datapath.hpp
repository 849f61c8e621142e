#pragma once

#include <map>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "accelshape/accel_port.hpp"
#include "accelshape/arbiter.hpp"
#include "accelshape/dataplane.hpp"
#include "accelshape/fabric.hpp"
#include "accelshape/shaper.hpp"
#include "accelshape/workload.hpp"

namespace accelshape {

enum class DataplaneMode { Unshaped, Shaped, SoftShaped };

struct SoftShaperConfig {
  double timer_ns = 10000.0;
  double jitter_ns = 10000.0;
  double burst_ticks = 1.0;
  bool operator==(const SoftShaperConfig&) const = default;
};

struct DatapathConfig {
  ChannelConfig channel;
  std::vector<AcceleratorModel> accelerators;
  DataplaneMode mode = DataplaneMode::Unshaped;
  ArbiterPolicy::Kind arbiter = ArbiterPolicy::Kind::RoundRobin;
  std::uint32_t wfq_quantum_bytes = 1500;
  std::size_t host_queue_depth = 1024;
  double reference_gbps = 100.0;
  std::uint64_t seed = 1;
  Cycle reconfig_latency = 2500;
  SoftShaperConfig soft;
};

struct FlowCounters {
  std::uint64_t injected = 0;
  std::uint64_t completed = 0;
  std::uint64_t dropped = 0;
  std::uint64_t bytes_injected = 0;
  std::uint64_t bytes_completed = 0;
  std::uint64_t segments_fetched = 0;
};

/// The simulated accelerator datapath: per-flow generators feed host DMA
/// queues; a fetch stage per accelerator gates each queue (token bucket,
/// software limiter, or nothing), arbitrates among eligible queues and moves
/// segments over the fabric into the accelerator FIFO; results return on the
/// flow's egress direction and are recorded at completion-write.
class Datapath : public Dataplane,
                 public EventHandler,
                 public TransferListener,
                 public PortListener {
 public:
  Datapath(Engine& engine, DatapathConfig config);
  ~Datapath() override;

  /// `stop` of 0 means the flow injects until the end of the run. Baseline
  /// modes start injecting at `start`; shaped flows wait for activate().
  void add_flow(const FlowSpec& spec, Cycle start, Cycle stop = 0);

  // Dataplane
  Cycle now() const override { return engine_.now(); }
  const SimClock& clock() const override { return engine_.clock(); }
  std::span<const Completion> completions(FlowId flow) const override;
  std::array<double, kDirectionCount> sample_utilization() override;
  double direction_bandwidth(Direction dir) const override { return fabric_.config().bandwidth(dir); }
  void write_registers(FlowId flow, const ShaperRegisters& regs) override;
  std::optional<ShaperRegisters> committed_registers(FlowId flow) const override;
  void set_path(FlowId flow, PathMode path) override;
  void activate(FlowId flow) override;
  void deactivate(FlowId flow) override;

  void handle(const Event& ev) override;
  void on_transfer_done(const Transfer& t) override;
  void on_slot_free(std::uint32_t port) override;
  void on_service_done(std::uint32_t port, const PortMessage& msg, std::uint64_t egress_bytes) override;

  const DatapathConfig& config() const { return config_; }
  const Fabric& fabric() const { return fabric_; }
  const RegisterFile& registers() const { return regfile_; }
  const AcceleratorPort& port(std::size_t i) const { return *ports_.at(i); }
  std::size_t port_count() const { return ports_.size(); }
  std::vector<FlowId> flow_ids() const;
  const FlowSpec& spec(FlowId flow) const;
  const FlowCounters& counters(FlowId flow) const;
  PathMode path(FlowId flow) const;
  /// First cycle the flow injected, if it has started.
  std::optional<Cycle> activated_at(FlowId flow) const;
  std::size_t queued(FlowId flow) const;
  /// Injected messages neither completed nor dropped: queued on the host or
  /// somewhere between fetch and completion-write.
  std::uint64_t in_flight(FlowId flow) const;
  std::optional<TokenBucket> bucket(FlowId flow) const;

  /// Bytes of fixed per-flow simulator state (queues at full depth, shaper,
  /// generator), excluding recorded metrics.
  std::size_t flow_state_bytes() const;

 private:
  struct FlowState;
  struct InFlight {
    FlowId flow;
    std::uint32_t bytes = 0;
    Cycle enqueued = 0;
    std::uint32_t segments_left = 0;
    std::uint32_t port = 0;
    PathMode path = PathMode::FunctionCall;
  };

  FlowState& state(FlowId flow);
  const FlowState& state(FlowId flow) const;
  void start_injection(FlowState& f);
  void inject(FlowState& f);
  void soft_tick(FlowState& f);
  void fetch_pass(std::uint32_t port);
  void schedule_retry(FlowState& f, Cycle at);
  Picos now_ps() const { return static_cast<Picos>(engine_.now()) * engine_.clock().cycle_ps(); }

  Engine& engine_;
  DatapathConfig config_;
  Fabric fabric_;
  RegisterFile regfile_;
  std::vector<std::unique_ptr<AcceleratorPort>> ports_;
  std::vector<Arbiter> arbiters_;
  std::vector<std::vector<FlowId>> port_flows_;
  std::map<FlowId, std::unique_ptr<FlowState>> flows_;
  std::unordered_map<std::uint64_t, InFlight> in_flight_;
  std::uint64_t next_uid_ = 1;
  std::array<Picos, kDirectionCount> util_busy_{};
  Cycle util_since_ = 0;
};

}  // namespace accelshape
