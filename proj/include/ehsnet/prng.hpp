#pragma once

#include <cstdint>

namespace ehsnet {

// Counter-mode SplitMix64. Element i of stream `seed` is the SplitMix64
// finalizer applied to seed + (i+1)*0x9E3779B97F4A7C15. Stateless, so any
// element can be produced independently on any platform with identical bits.
inline uint64_t splitmix64_at(uint64_t seed, uint64_t i) {
  uint64_t z = seed + (i + 1) * 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Uniform in [0, 1) from the top 24 bits; exactly representable in float.
inline float uniform01_at(uint64_t seed, uint64_t i) {
  return float(splitmix64_at(seed, i) >> 40) * (1.0f / 16777216.0f);
}

// Sequential convenience wrapper over the counter generator.
class Prng {
 public:
  explicit Prng(uint64_t seed) : seed_(seed) {}

  uint64_t next_u64() { return splitmix64_at(seed_, counter_++); }
  float next_uniform01() { return uniform01_at(seed_, counter_++); }
  // Uniform in [lo, hi).
  float next_uniform(float lo, float hi) {
    return lo + (hi - lo) * next_uniform01();
  }
  // Uniform integer in [0, n).
  uint64_t next_below(uint64_t n) { return next_u64() % n; }

 private:
  uint64_t seed_;
  uint64_t counter_ = 0;
};

}  // namespace ehsnet
