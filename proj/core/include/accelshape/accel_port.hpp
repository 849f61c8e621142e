#pragma once

#include <cstdint>
#include <deque>

#include "accelshape/accelerator.hpp"
#include "accelshape/engine.hpp"
#include "accelshape/rng.hpp"

namespace accelshape {

struct PortMessage {
  FlowId flow;
  std::uint64_t bytes = 0;
  std::uint64_t tag = 0;
  Picos ready_ps = 0;  // when the message became available to the engine
};

class PortListener {
 public:
  virtual ~PortListener() = default;
  /// A FIFO slot was released (a message entered service).
  virtual void on_slot_free(std::uint32_t port) = 0;
  /// Service finished; `egress_bytes` must now be carried on the flow's egress direction.
  virtual void on_service_done(std::uint32_t port, const PortMessage& msg, std::uint64_t egress_bytes) = 0;
};

/// One accelerator behind a shared input FIFO.
///
/// Slots are reserved when a fetch is issued and released when the message
/// enters service, so in-flight ingress transfers count against the depth.
/// Service occupancy is max(service-time draw, bytes*8/curve(bytes)). A new
/// message does not start while `queue_depth` egress transfers are outstanding.
class AcceleratorPort : public EventHandler {
 public:
  AcceleratorPort(Engine& engine, AcceleratorModel model, Rng rng, std::uint32_t index,
                  PortListener& listener);

  bool has_free_slot() const { return reserved_ < model_.queue_depth; }
  void reserve_slot();
  /// Ingress transfer finished; the message joins the FIFO.
  void deliver(const PortMessage& msg);
  void egress_finished();

  /// Occupancy of one message, in picoseconds, excluding the random service draw.
  Picos compute_ps(std::uint64_t bytes) const;

  void handle(const Event& ev) override;

  const AcceleratorModel& model() const { return model_; }
  std::uint32_t index() const { return index_; }
  std::uint64_t messages_served() const { return served_; }
  std::uint64_t bytes_served() const { return bytes_served_; }
  Picos busy_ps() const { return busy_total_; }
  bool busy() const { return busy_; }
  std::size_t queued() const { return fifo_.size(); }

 private:
  void try_start();

  Engine& engine_;
  AcceleratorModel model_;
  Rng rng_;
  std::uint32_t index_;
  PortListener& listener_;
  std::deque<PortMessage> fifo_;
  std::uint32_t reserved_ = 0;
  std::uint32_t egress_outstanding_ = 0;
  bool busy_ = false;
  bool start_pending_ = false;
  PortMessage in_service_;
  Picos busy_until_ = 0;
  Picos unblocked_ps_ = 0;
  Picos busy_total_ = 0;
  std::uint64_t served_ = 0;
  std::uint64_t bytes_served_ = 0;
};

}  // namespace accelshape
