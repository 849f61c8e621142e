#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>

#include "accelshape/engine.hpp"
#include "accelshape/types.hpp"

namespace accelshape {

struct ChannelConfig {
  std::string name = "default";
  double bw_h2d_gbps = 50.0;
  double bw_d2h_gbps = 50.0;
  double bw_p2p_gbps = 50.0;
  double bw_nic_gbps = 100.0;
  std::uint32_t credits = 64;      // shared root-complex budget of outstanding PCIe transfers
  std::uint32_t tlp_bytes = 256;   // interleaving granule

  double bandwidth(Direction dir) const;
  void validate() const;
  bool operator==(const ChannelConfig&) const = default;
};

/// Wire time of `bytes` at `gbps`, in picoseconds.
Picos serialization_ps(std::uint64_t bytes, double gbps);

struct Transfer {
  std::uint64_t id = 0;
  FlowId flow;
  Direction dir = Direction::H2D;
  std::uint64_t bytes = 0;
  std::uint64_t tag = 0;
};

class TransferListener {
 public:
  virtual ~TransferListener() = default;
  virtual void on_transfer_done(const Transfer& t) = 0;
};

/// Full-duplex interconnect. Each direction serializes tlp_bytes granules,
/// round-robin across flows with pending transfers. PCIe transfers hold one
/// credit from start to completion and wait FIFO when the pool is empty.
class Fabric : public EventHandler {
 public:
  struct DirectionStats {
    std::uint64_t bytes = 0;
    Picos busy_ps = 0;
    std::uint64_t transfers = 0;
  };

  Fabric(Engine& engine, ChannelConfig config);

  std::uint64_t request_transfer(FlowId flow, Direction dir, std::uint64_t bytes,
                                 TransferListener& listener, std::uint64_t tag = 0);

  void handle(const Event& ev) override;

  const ChannelConfig& config() const { return config_; }
  const DirectionStats& stats(Direction dir) const { return links_[index(dir)].stats; }
  std::uint32_t in_flight() const { return in_flight_; }
  std::uint32_t max_in_flight() const { return max_in_flight_; }
  std::size_t credit_waiters() const { return credit_wait_.size(); }
  std::size_t active_transfers() const { return transfers_.size(); }

 private:
  struct Pending {
    Transfer transfer;
    TransferListener* listener = nullptr;
    std::uint64_t remaining = 0;
    Picos ready_ps = 0;
  };
  struct Link {
    double gbps = 0.0;
    Picos busy_until = 0;
    bool serving = false;
    std::uint64_t current = 0;
    std::uint64_t granule = 0;
    std::map<FlowId, std::deque<std::uint64_t>> per_flow;
    std::optional<FlowId> last_flow;
    DirectionStats stats;
  };

  static std::size_t index(Direction d) { return static_cast<std::size_t>(d); }
  void activate(std::uint64_t id);
  void serve(Direction dir);

  Engine& engine_;
  ChannelConfig config_;
  std::array<Link, kDirectionCount> links_;
  std::unordered_map<std::uint64_t, Pending> transfers_;
  std::deque<std::uint64_t> credit_wait_;
  std::uint64_t next_id_ = 1;
  std::uint32_t in_flight_ = 0;
  std::uint32_t max_in_flight_ = 0;
};

struct QueuedMessage {
  std::uint64_t id = 0;
  std::uint64_t bytes = 0;
  Cycle enqueued = 0;
  std::uint64_t segment_bytes = 0;  // re-size granule; equals `bytes` when not split
  std::uint64_t offset = 0;         // bytes already fetched

  std::uint64_t next_segment() const;
  std::uint32_t segment_count() const;
};

/// Bounded per-flow FIFO. Overflow drops at admission and is counted.
class FlowQueue {
 public:
  FlowQueue(FlowId flow, std::size_t depth);

  bool try_push(const QueuedMessage& msg);
  QueuedMessage& front() { return fifo_.front(); }
  const QueuedMessage& front() const { return fifo_.front(); }
  void pop() { fifo_.pop_front(); }

  FlowId flow() const { return flow_; }
  std::size_t size() const { return fifo_.size(); }
  std::size_t depth() const { return depth_; }
  bool empty() const { return fifo_.empty(); }
  std::uint64_t drops() const { return drops_; }

 private:
  FlowId flow_;
  std::size_t depth_;
  std::deque<QueuedMessage> fifo_;
  std::uint64_t drops_ = 0;
};

}  // namespace accelshape
