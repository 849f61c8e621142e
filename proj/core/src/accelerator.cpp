#include "accelshape/accelerator.hpp"

#include <algorithm>
#include <cmath>

#include "accelshape/rng.hpp"

namespace accelshape {

CapacityCurve::CapacityCurve(std::vector<CurveKnot> knots) : knots_(std::move(knots)) {
  std::sort(knots_.begin(), knots_.end(),
            [](const CurveKnot& l, const CurveKnot& r) { return l.size < r.size; });
  for (std::size_t i = 1; i < knots_.size(); ++i) {
    if (knots_[i].size == knots_[i - 1].size) throw ConfigError("duplicate capacity curve knot");
  }
}

double CapacityCurve::at(std::uint64_t size) const {
  if (knots_.empty()) throw ConfigError("capacity curve has no knots");
  if (size <= knots_.front().size) return knots_.front().gbps;
  if (size >= knots_.back().size) return knots_.back().gbps;
  auto hi = std::upper_bound(knots_.begin(), knots_.end(), size,
                             [](std::uint64_t s, const CurveKnot& k) { return s < k.size; });
  auto lo = std::prev(hi);
  const double frac = static_cast<double>(size - lo->size) / static_cast<double>(hi->size - lo->size);
  return lo->gbps + frac * (hi->gbps - lo->gbps);
}

Cycle ServiceTimeDist::draw(Rng& rng) const {
  double v = 0.0;
  switch (kind) {
    case Kind::Fixed:
      v = a;
      break;
    case Kind::Uniform:
      v = a + rng.uniform01() * (b - a);
      break;
    case Kind::Bimodal:
      v = rng.bernoulli(p_a) ? a : b;
      break;
    case Kind::Poisson:
      return rng.poisson(a);
  }
  return static_cast<Cycle>(std::llround(std::max(0.0, v)));
}

double ServiceTimeDist::mean() const {
  switch (kind) {
    case Kind::Fixed:
    case Kind::Poisson:
      return a;
    case Kind::Uniform:
      return (a + b) / 2.0;
    case Kind::Bimodal:
      return p_a * a + (1.0 - p_a) * b;
  }
  return a;
}

void ServiceTimeDist::validate() const {
  if (a < 0.0 || b < 0.0) throw ConfigError("service times must be >= 0");
  if (kind == Kind::Uniform && a > b) throw ConfigError("uniform service bounds are inverted");
  if (kind == Kind::Bimodal && (p_a < 0.0 || p_a > 1.0)) {
    throw ConfigError("bimodal service probability must be in [0,1]");
  }
}

void AcceleratorModel::validate() const {
  if (id.empty()) throw ConfigError("accelerator id is empty");
  if (curve.empty()) throw ConfigError("accelerator '" + id + "' has an empty capacity curve");
  if (!(max_capacity_gbps > 0.0)) throw ConfigError("accelerator '" + id + "' max capacity must be > 0");
  for (const auto& k : curve.knots()) {
    if (!(k.gbps > 0.0) || k.gbps > max_capacity_gbps * (1.0 + 1e-9)) {
      throw ConfigError("accelerator '" + id + "' curve values must be in (0, max_capacity]");
    }
  }
  if (const auto* p = std::get_if<Proportional>(&egress); p && !(p->ratio > 0.0)) {
    throw ConfigError("accelerator '" + id + "' egress ratio must be > 0");
  }
  if (const auto* f = std::get_if<FixedOutput>(&egress); f && f->bytes == 0) {
    throw ConfigError("accelerator '" + id + "' fixed output must be > 0 bytes");
  }
  if (queue_depth == 0) throw ConfigError("accelerator '" + id + "' queue depth must be >= 1");
  service.validate();
}

std::uint64_t egress_size(const AcceleratorModel& model, std::uint64_t ingress_bytes) {
  if (const auto* f = std::get_if<FixedOutput>(&model.egress)) return f->bytes;
  const double r = std::get<Proportional>(model.egress).ratio;
  const auto out = static_cast<std::uint64_t>(std::llround(r * static_cast<double>(ingress_bytes)));
  return std::max<std::uint64_t>(out, 1);
}

double curve_throughput(const AcceleratorModel& model, std::uint64_t msg_size) {
  return model.curve.at(msg_size);
}

double effective_capacity(const AcceleratorModel& model, std::span<const StreamMix> mix) {
  if (mix.empty()) throw ConfigError("effective_capacity needs a non-empty mix");
  double offered = 0.0;
  double busy = 0.0;
  for (const auto& s : mix) {
    if (s.msg_size < kMinMessageBytes || s.msg_size > kMaxMessageBytes) {
      throw ConfigError("message size " + std::to_string(s.msg_size) + " outside curve domain");
    }
    if (s.offered_gbps < 0.0) throw ConfigError("offered load must be >= 0");
    offered += s.offered_gbps;
    busy += s.offered_gbps / model.curve.at(s.msg_size);
  }
  if (offered == 0.0) return 0.0;
  return std::min(offered / busy, model.max_capacity_gbps);
}

}  // namespace accelshape
