#pragma once

#include <cmath>
#include <cstdint>

namespace avalanche {

/// Splittable counter-based random stream. The core is a SplitMix-style
/// state walk whose (odd) increment is derived from the stream id, so
/// distinct (seed, stream_id) pairs address distinct sequences and a pair
/// always reproduces the same draws. Monte Carlo replicas take consecutive
/// stream ids.
class RngStream {
 public:
  RngStream(uint64_t seed, uint64_t stream_id) {
    inc_ = mix(stream_id + 0x9e3779b97f4a7c15ULL) | 1ULL;
    state_ = mix(seed ^ mix(stream_id + 0x2545f4914f6cdd1dULL));
  }

  uint64_t next_u64() {
    uint64_t z = (state_ += inc_);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform on [0,1), 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n), unbiased.
  uint64_t below(uint64_t n) {
    // rejection sampling on the top of the range
    uint64_t threshold = (0 - n) % n;
    for (;;) {
      uint64_t x = next_u64();
      if (x >= threshold) return x % n;
    }
  }

  /// Exponential with the given rate; strictly positive.
  double exponential(double rate) { return -std::log1p(-next_double()) / rate; }

 private:
  static uint64_t mix(uint64_t z) {
    z = (z ^ (z >> 33)) * 0xff51afd7ed558ccdULL;
    z = (z ^ (z >> 33)) * 0xc4ceb9fe1a85ec53ULL;
    return z ^ (z >> 33);
  }

  uint64_t state_;
  uint64_t inc_;
};

}  // namespace avalanche
