#pragma once

#include <cmath>
#include <cstdint>

namespace trt {

// splitmix64; used both as a stream deriver and as the core generator.
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Small deterministic RNG with stable cross-platform output. We avoid
// std::uniform_real_distribution & friends so that logs are reproducible
// independent of the standard library implementation.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : state_(seed) {
    // decorrelate trivially related seeds
    for (int i = 0; i < 2; ++i) splitmix64(state_);
  }

  // Derive an independent stream (e.g. one per parallel environment).
  Rng stream(uint64_t id) const {
    uint64_t s = state_ ^ (0x9e3779b97f4a7c15ull * (id + 1));
    return Rng(s);
  }

  uint64_t next_u64() { return splitmix64(state_); }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [lo, hi] inclusive
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(next_u64() % static_cast<uint64_t>(hi - lo + 1));
  }

  // Box-Muller, cosine branch only; stateless across calls.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  uint64_t state_;
};

}  // namespace trt
