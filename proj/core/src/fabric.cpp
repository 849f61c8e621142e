#include "accelshape/fabric.hpp"

#include <algorithm>
#include <cmath>

namespace accelshape {

double ChannelConfig::bandwidth(Direction dir) const {
  switch (dir) {
    case Direction::H2D:
      return bw_h2d_gbps;
    case Direction::D2H:
      return bw_d2h_gbps;
    case Direction::P2P:
      return bw_p2p_gbps;
    case Direction::NicIn:
    case Direction::NicOut:
      return bw_nic_gbps;
  }
  return 0.0;
}

void ChannelConfig::validate() const {
  if (!(bw_h2d_gbps > 0.0) || !(bw_d2h_gbps > 0.0) || !(bw_p2p_gbps > 0.0) || !(bw_nic_gbps > 0.0)) {
    throw ConfigError("channel bandwidths must be > 0");
  }
  if (credits < 1) throw ConfigError("channel credits must be >= 1");
  if (tlp_bytes == 0) throw ConfigError("tlp_bytes must be > 0");
}

Picos serialization_ps(std::uint64_t bytes, double gbps) {
  return static_cast<Picos>(std::llround(static_cast<double>(bytes) * 8000.0 / gbps));
}

Fabric::Fabric(Engine& engine, ChannelConfig config) : engine_(engine), config_(std::move(config)) {
  config_.validate();
  for (std::size_t i = 0; i < kDirectionCount; ++i) {
    links_[i].gbps = config_.bandwidth(static_cast<Direction>(i));
  }
}

std::uint64_t Fabric::request_transfer(FlowId flow, Direction dir, std::uint64_t bytes,
                                       TransferListener& listener, std::uint64_t tag) {
  if (bytes == 0) throw SimulationError("zero-byte transfer");
  const std::uint64_t id = next_id_++;
  transfers_.emplace(id, Pending{Transfer{id, flow, dir, bytes, tag}, &listener, bytes});
  if (is_pcie(dir) && in_flight_ >= config_.credits) {
    credit_wait_.push_back(id);
  } else {
    activate(id);
  }
  return id;
}

void Fabric::activate(std::uint64_t id) {
  Pending& p = transfers_.at(id);
  p.ready_ps = static_cast<Picos>(engine_.now()) * engine_.clock().cycle_ps();
  if (is_pcie(p.transfer.dir)) {
    ++in_flight_;
    max_in_flight_ = std::max(max_in_flight_, in_flight_);
  }
  Link& link = links_[index(p.transfer.dir)];
  link.per_flow[p.transfer.flow].push_back(id);
  if (!link.serving) serve(p.transfer.dir);
}

void Fabric::serve(Direction dir) {
  Link& link = links_[index(dir)];
  if (link.per_flow.empty()) return;
  // Next flow in cyclic order after the last one served.
  auto it = link.last_flow ? link.per_flow.upper_bound(*link.last_flow) : link.per_flow.begin();
  if (it == link.per_flow.end()) it = link.per_flow.begin();
  link.last_flow = it->first;
  const std::uint64_t id = it->second.front();
  const Pending& p = transfers_.at(id);
  link.current = id;
  link.granule = std::min<std::uint64_t>(config_.tlp_bytes, p.remaining);
  const Picos start = std::max(p.ready_ps, link.busy_until);
  const Picos dur = serialization_ps(link.granule, link.gbps);
  link.busy_until = start + dur;
  link.stats.busy_ps += dur;
  link.serving = true;
  const Cycle fire = std::max(engine_.now(), engine_.clock().ceil_cycle(link.busy_until));
  engine_.schedule(fire, EventKind::FabricGrant, *this, p.transfer.flow.value, index(dir));
}

void Fabric::handle(const Event& ev) {
  const auto dir = static_cast<Direction>(ev.arg);
  Link& link = links_[index(dir)];
  Pending& p = transfers_.at(link.current);
  p.remaining -= link.granule;
  link.stats.bytes += link.granule;
  link.serving = false;

  std::optional<Pending> done;
  if (p.remaining == 0) {
    auto q = link.per_flow.find(p.transfer.flow);
    q->second.pop_front();
    if (q->second.empty()) link.per_flow.erase(q);
    ++link.stats.transfers;
    done = p;
    transfers_.erase(link.current);
    if (is_pcie(dir)) {
      --in_flight_;
      while (!credit_wait_.empty() && in_flight_ < config_.credits) {
        const std::uint64_t next = credit_wait_.front();
        credit_wait_.pop_front();
        activate(next);
      }
    }
  }
  if (!link.serving) serve(dir);
  if (done) done->listener->on_transfer_done(done->transfer);
}

std::uint64_t QueuedMessage::next_segment() const {
  return std::min(segment_bytes, bytes - offset);
}

std::uint32_t QueuedMessage::segment_count() const {
  return static_cast<std::uint32_t>((bytes + segment_bytes - 1) / segment_bytes);
}

FlowQueue::FlowQueue(FlowId flow, std::size_t depth) : flow_(flow), depth_(depth) {
  if (depth == 0) throw ConfigError("flow queue depth must be >= 1");
}

bool FlowQueue::try_push(const QueuedMessage& msg) {
  if (fifo_.size() >= depth_) {
    ++drops_;
    return false;
  }
  fifo_.push_back(msg);
  return true;
}

}  // namespace accelshape
