#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace accelshape {

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a(std::string_view text, std::uint64_t seed = 0xcbf29ce484222325ULL);

/// Seeded 64-bit generator. Distribution transforms are written out here rather
/// than using <random> distributions, whose output differs between standard
/// library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  /// Uniform integer in [lo, hi].
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi);
  double exponential(double mean);
  bool bernoulli(double p) { return uniform01() < p; }
  std::uint64_t poisson(double mean);

  /// Independent stream derived from this generator's seed and a stable key, so
  /// adding a consumer does not perturb the draws of any other consumer.
  static Rng fork(std::uint64_t base_seed, std::string_view key) {
    return Rng(splitmix64(base_seed ^ fnv1a(key)));
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace accelshape
