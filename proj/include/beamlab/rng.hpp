#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace beamlab::rng {

// SplitMix64 step (Steele/Lea/Flood). Small state, full 64-bit output,
// and easy to derive keyed substreams from — which is what the
// reproducibility contracts here actually need.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Murmur3-style finalizer used to fold keys into a seed.
inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a ^ (b * 0xff51afd7ed558ccdULL + 0x9e3779b97f4a7c15ULL);
  x = (x ^ (x >> 33)) * 0xc4ceb9fe1a85ec53ULL;
  return x ^ (x >> 33);
}

inline std::uint64_t hash_label(std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Deterministic random stream. All draws are defined in terms of the raw
/// 64-bit output so results are identical across platforms and library
/// versions (std::uniform_real_distribution et al. make no such promise).
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  /// Uniform double in [0, 1), 53 random bits.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_unit();
  }

  /// Standard normal via Box-Muller (cosine branch only, no caching, so a
  /// stream's draw sequence is a pure function of its seed).
  double next_gaussian() {
    const double u1 = 1.0 - next_unit();  // (0, 1]: keeps log() finite
    const double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Unbiased integer in [0, n) by rejection.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

 private:
  std::uint64_t state_;
};

/// Independent stream keyed by (master seed, role label, index). Streams for
/// distinct keys do not interact, so adding a consumer never perturbs the
/// draws seen by existing ones.
inline Stream substream(std::uint64_t master, std::string_view label,
                        std::uint64_t index = 0) {
  return Stream(mix(mix(master, hash_label(label)), index));
}

}  // namespace beamlab::rng
