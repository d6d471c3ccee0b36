#pragma once

#include <cmath>
#include <cstdint>

namespace bflow {

// Counter-based SplitMix64: draw k of stream `seed` is mix(seed + (k + 1) * gamma),
// so any draw can be reproduced from (seed, k) on any platform. Uniforms take
// the top 53 bits: (x >> 11) * 2^-53.
class SplitMix64 {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  explicit SplitMix64(std::uint64_t seed = 0) : seed_(seed) {}

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t at(std::uint64_t k) const { return mix(seed_ + (k + 1) * kGamma); }
  std::uint64_t next() { return at(counter_++); }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller on two uniforms; the first uniform is shifted off zero.
  double normal() {
    const double u1 = (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  std::uint64_t counter() const { return counter_; }
  std::uint64_t seed() const { return seed_; }

  // Independent stream for a sub-task, derived from this stream's seed.
  SplitMix64 fork(std::uint64_t stream) const { return SplitMix64(mix(seed_ ^ mix(stream + 1))); }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace bflow
