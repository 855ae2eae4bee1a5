#pragma once

#include <cstdint>

namespace condwalk::rng {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

// SplitMix64 finalizer: a well-mixed 64-bit bijection.
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ull;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebull;
  z ^= z >> 31;
  return z;
}

// Counter-based stream keyed by (seed, path index).  Draw i of a path is a
// pure function of (seed, path, i), so path sets are reproducible regardless
// of how paths are scheduled across workers, and unused draws cost nothing.
class PathRng {
 public:
  PathRng(std::uint64_t seed, std::uint64_t path)
      : key_(mix64(seed ^ (kGolden * path))) {}

  // Uniform double in [0, 1) with 53 random bits.
  double next_u01() {
    const std::uint64_t z = mix64(key_ + kGolden * (++counter_));
    return static_cast<double>(z >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace condwalk::rng
