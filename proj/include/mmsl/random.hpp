#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace mmsl {

/// Small deterministic PRNG (splitmix64). Fully specified here so that
/// seeded generation is reproducible byte for byte everywhere; the
/// standard-library distributions are implementation defined and are
/// deliberately not used.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform draw in (0, 1].
  double next_unit() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller.
  double next_normal() {
    const double u1 = next_unit();
    const double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t state_;
};

/// Derive an independent stream seed from a base seed and an index, so
/// per-record generation is deterministic under any scheduling.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  SplitMix64 g(seed ^ (0x9E3779B97F4A7C15ULL * (index + 1)));
  return g.next_u64();
}

}  // namespace mmsl
