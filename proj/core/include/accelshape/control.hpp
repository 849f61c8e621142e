#pragma once

#include <array>
#include <compare>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "accelshape/dataplane.hpp"
#include "accelshape/engine.hpp"
#include "accelshape/shaper.hpp"

namespace accelshape {

struct PathOption {
  std::string location;  // opaque "server:device" address
  PathMode mode = PathMode::FunctionCall;
  bool operator==(const PathOption&) const = default;
};

/// Accelerator id -> the paths it can be reached on.
class AccTable {
 public:
  void add(const std::string& acc_id, std::vector<PathOption> paths);
  const std::vector<PathOption>* find(const std::string& acc_id) const;
  bool contains(const std::string& acc_id) const { return find(acc_id) != nullptr; }
  const std::map<std::string, std::vector<PathOption>>& entries() const { return table_; }

 private:
  std::map<std::string, std::vector<PathOption>> table_;
};

/// One flow's position in a profiled combination: grid size, grid load, path.
struct ProfileRole {
  std::uint32_t size = 64;
  double load = 0.0;
  PathMode path = PathMode::FunctionCall;
  auto operator<=>(const ProfileRole&) const = default;
};
std::string to_string(const ProfileRole& role);

struct ProfileKey {
  std::string acc_id;
  std::string setting;              // channel configuration name
  std::vector<ProfileRole> roles;   // canonical (sorted) order

  auto operator<=>(const ProfileKey&) const = default;
  /// Sorts roles into canonical order.
  void canonicalize();
};
std::string to_string(const ProfileKey& key);

enum class ProfileTag { SloFriendly, SloViolating };
std::string_view to_string(ProfileTag tag);

struct CapacityProfile {
  double total_gbps = 0.0;
  std::vector<double> shares_gbps;  // aligned with the key's roles
  bool low_confidence = false;
  bool operator==(const CapacityProfile&) const = default;
};

/// Friendly iff every role's achievable share meets its SLO. `slos` must be
/// aligned with the profile's roles and expressed in the shares' unit.
ProfileTag classify(const CapacityProfile& profile, std::span<const SloTarget> slos);

class ProfileTable {
 public:
  static constexpr std::string_view kSchema = "accelshape.profile";
  static constexpr int kVersion = 1;

  double reference_gbps = 32.0;
  std::uint32_t friendly_size_bound = 4096;
  std::vector<std::uint32_t> sizes;  // quantization grid, ascending
  std::vector<double> loads;         // ascending

  void insert(ProfileKey key, CapacityProfile profile);
  const CapacityProfile* find(const ProfileKey& key) const;
  /// Adds another table's entries and merges its grid.
  void merge(const ProfileTable& other);
  bool covers(const std::string& acc_id) const;
  const std::map<ProfileKey, CapacityProfile>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  /// Grid sizes bracketing `size` (one if it lies on the grid or outside it).
  std::vector<std::uint32_t> bracket_sizes(double size) const;
  /// Smallest grid load >= need; the largest grid load if none is.
  double round_load_up(double need) const;

  bool operator==(const ProfileTable& other) const = default;

 private:
  std::map<ProfileKey, CapacityProfile> entries_;
};

struct ControlConfig {
  double tick_us = 100.0;
  std::uint32_t violation_ticks = 3;
  double hysteresis = 0.10;   // fraction of direction bandwidth
  double tolerance = 0.01;    // measured may fall this far below target
  double load_margin = 0.01;  // headroom when rounding a flow's need to a grid load
  std::uint32_t latency_bursts = 16;  // full bursts a latency-bound flow's bucket holds
  RateParamOptions rate;
  bool operator==(const ControlConfig& o) const {
    return tick_us == o.tick_us && violation_ticks == o.violation_ticks && hysteresis == o.hysteresis &&
           tolerance == o.tolerance && load_margin == o.load_margin && latency_bursts == o.latency_bursts &&
           rate.bucket_refills == o.rate.bucket_refills && rate.min_interval == o.rate.min_interval;
  }
};

struct AdmissionResult {
  bool admitted = false;
  std::string reason;  // unknown-accelerator | missing-profile | capacity | pattern
  std::string detail;
};

struct SloCheck {
  bool evaluated = false;  // false during the warm-up grace
  bool satisfied = true;
  double measured = 0.0;   // in the SLO's unit: Gbps, IOPS, or ns
  double rate = 0.0;       // Gbps, or IOPS for IOPS SLOs
  double tail_latency_ns = 0.0;
};

struct FlowStatus {
  FlowSpec spec;
  PathMode path = PathMode::FunctionCall;
  std::string path_id;
  double share = 0.0;        // profiled achievable share, in the shaping unit
  double target = 0.0;       // current shaping target, in the shaping unit
  double measured = 0.0;
  double tail_latency_ns = 0.0;
  bool violated = false;
  std::uint32_t consecutive = 0;
  bool persistent = false;
  bool under_capacity = false;
  std::optional<ShaperRegisters> regs;  // last committed
};

struct StatusRecord {
  Cycle at = 0;
  FlowId flow;
  double measured = 0.0;
  double tail_latency_ns = 0.0;
  bool violated = false;
  std::optional<ShaperRegisters> regs;
  std::string path_id;
  bool operator==(const StatusRecord&) const = default;
};

struct ControlEvent {
  Cycle at = 0;
  FlowId flow;
  std::string kind;
  std::string detail;
  bool operator==(const ControlEvent&) const = default;
};

/// Periodic SLO manager. Each tick it checks every admitted flow, reacts to
/// flows violating for `violation_ticks` consecutive ticks (path move, then
/// reshape), and then processes deregistrations and registrations.
class Runtime : public EventHandler {
 public:
  Runtime(Engine& engine, Dataplane& dataplane, AccTable accs, ProfileTable profiles, ControlConfig config,
          double reference_gbps, std::string setting);

  /// Timeline entry: the flow registers at the first tick at or after
  /// `start` and deregisters at the first tick at or after `stop` (0: never).
  void schedule_registration(const FlowSpec& spec, Cycle start, Cycle stop = 0);
  /// Schedules the first tick at the current cycle.
  void start();

  void handle(const Event& ev) override;
  void control_tick();

  SloCheck slo_violation_check(FlowId flow) const;
  AdmissionResult admission_control(const FlowSpec& spec);
  void readjust_pattern(FlowId flow);
  std::optional<PathOption> path_selection(FlowId flow) const;
  ShaperRegisters reshape_decision(FlowId flow);
  void deregister(FlowId flow);

  /// Profile lookup for a candidate set of flows; lowest-capacity candidate
  /// among bracketing sizes. Returns the key and the flows in role order.
  struct Lookup {
    ProfileKey key;
    const CapacityProfile* profile = nullptr;
    std::vector<FlowId> order;  // flow occupying each role
  };
  std::optional<Lookup> lookup(const std::vector<std::pair<FlowSpec, PathMode>>& flows,
                               ProfileKey* first_missing = nullptr) const;
  /// Keys an all-admitting pass over `sequence` would find missing.
  std::vector<ProfileKey> missing_keys(const std::vector<FlowSpec>& sequence) const;
  /// Samples direction utilization for path selection; called every tick.
  void observe_utilization() { util_ = dp_.sample_utilization(); }

  const std::map<FlowId, FlowStatus>& status() const { return status_; }
  const std::vector<StatusRecord>& records() const { return records_; }
  const std::vector<ControlEvent>& log() const { return log_; }
  const std::map<FlowId, AdmissionResult>& decisions() const { return decisions_; }
  std::uint64_t register_writes() const { return writes_; }
  const ProfileTable& profiles() const { return profiles_; }
  Cycle tick_cycles() const { return tick_cycles_; }

 private:
  struct Pending {
    FlowSpec spec;
    Cycle start = 0;
    Cycle stop = 0;
    bool registered = false;
    bool removed = false;
  };

  double to_shaping_unit(const FlowSpec& spec, double gbps) const;
  double shaping_value(const FlowSpec& spec) const;
  void refresh_shares(const Lookup& found);
  ShaperRegisters registers_for(const FlowStatus& st, double target) const;
  void note(FlowId flow, std::string kind, std::string detail);

  Engine& engine_;
  Dataplane& dp_;
  AccTable accs_;
  ProfileTable profiles_;
  ControlConfig config_;
  double reference_gbps_;
  std::string setting_;
  Cycle tick_cycles_;
  std::vector<Pending> timeline_;
  std::map<FlowId, FlowStatus> status_;
  std::map<FlowId, AdmissionResult> decisions_;
  std::vector<StatusRecord> records_;
  std::vector<ControlEvent> log_;
  std::uint64_t writes_ = 0;
  bool started_ = false;
  std::array<double, kDirectionCount> util_{};
};

}  // namespace accelshape
