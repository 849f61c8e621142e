#include "accelshape/accel_port.hpp"

#include <algorithm>

#include "accelshape/fabric.hpp"

namespace accelshape {

AcceleratorPort::AcceleratorPort(Engine& engine, AcceleratorModel model, Rng rng, std::uint32_t index,
                                 PortListener& listener)
    : engine_(engine), model_(std::move(model)), rng_(rng), index_(index), listener_(listener) {
  model_.validate();
}

void AcceleratorPort::reserve_slot() {
  if (!has_free_slot()) throw SimulationError("accelerator FIFO slot over-reserved");
  ++reserved_;
}

void AcceleratorPort::deliver(const PortMessage& msg) {
  fifo_.push_back(msg);
  fifo_.back().ready_ps = static_cast<Picos>(engine_.now()) * engine_.clock().cycle_ps();
  try_start();
}

void AcceleratorPort::egress_finished() {
  if (egress_outstanding_ == 0) throw SimulationError("egress completion without outstanding egress");
  if (egress_outstanding_ == model_.queue_depth) {
    unblocked_ps_ = static_cast<Picos>(engine_.now()) * engine_.clock().cycle_ps();
  }
  --egress_outstanding_;
  try_start();
}

Picos AcceleratorPort::compute_ps(std::uint64_t bytes) const {
  return serialization_ps(bytes, curve_throughput(model_, bytes));
}

void AcceleratorPort::try_start() {
  if (busy_ || start_pending_ || fifo_.empty() || egress_outstanding_ >= model_.queue_depth) return;
  start_pending_ = true;
  engine_.schedule(engine_.now(), EventKind::AccelStart, *this, fifo_.front().flow.value, 0);
}

void AcceleratorPort::handle(const Event& ev) {
  const Picos cps = engine_.clock().cycle_ps();
  if (ev.kind == EventKind::AccelStart) {
    start_pending_ = false;
    if (busy_ || fifo_.empty() || egress_outstanding_ >= model_.queue_depth) return;
    in_service_ = fifo_.front();
    fifo_.pop_front();
    --reserved_;
    busy_ = true;
    const Picos draw = static_cast<Picos>(model_.service.draw(rng_)) * cps;
    const Picos occupancy = std::max(draw, compute_ps(in_service_.bytes));
    // Back-to-back service continues from the previous finish, not from the
    // cycle boundary the done event was rounded up to.
    const Picos start = std::max({busy_until_, in_service_.ready_ps, unblocked_ps_});
    busy_until_ = start + occupancy;
    busy_total_ += occupancy;
    const Cycle fire = std::max(engine_.now(), engine_.clock().ceil_cycle(busy_until_));
    engine_.schedule(fire, EventKind::AccelDone, *this, in_service_.flow.value, in_service_.tag);
    listener_.on_slot_free(index_);
    return;
  }
  // AccelDone
  busy_ = false;
  ++served_;
  bytes_served_ += in_service_.bytes;
  ++egress_outstanding_;
  const PortMessage done = in_service_;
  listener_.on_service_done(index_, done, egress_size(model_, done.bytes));
  try_start();
}

}  // namespace accelshape
