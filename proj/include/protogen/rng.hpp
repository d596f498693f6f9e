#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace protogen {

// SplitMix64 step. Used to derive decorrelated seeds for (seed, stream)
// pairs so that episode draws are independent of evaluation order.
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// One-shot derived seed for a (seed, stream) pair.
inline uint64_t splitmix_seed(uint64_t seed, uint64_t stream) {
  uint64_t state = seed;
  uint64_t mixed = splitmix64(state) ^ (stream + 0x9e3779b97f4a7c15ULL);
  return splitmix64(mixed);
}

// Deterministic RNG wrapper. The engine sequence is fixed by the standard
// and all sampling transforms are hand-rolled, so one seed gives one stream.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  // Independent stream derived from (seed, stream), e.g. one per episode.
  static Rng for_stream(uint64_t seed, uint64_t stream) {
    return Rng(splitmix_seed(seed, stream));
  }

  uint64_t next_u64() { return engine_(); }

  // Unbiased integer in [0, bound), bound > 0.
  uint64_t bounded(uint64_t bound) {
    uint64_t threshold = (-bound) % bound;
    for (;;) {
      uint64_t r = engine_();
      if (r >= threshold) return r % bound;
    }
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal, Box-Muller.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * 3.141592653589793238462643383279502884 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace protogen
