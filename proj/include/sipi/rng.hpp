#pragma once

#include <cstdint>
#include <random>

namespace sipi {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Independent stream seed for (base, index, salt).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index, std::uint64_t salt = 0) {
  return splitmix64(splitmix64(base ^ splitmix64(salt)) + index);
}

/// Unbiased draw from {0, ..., bound - 1}.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t bound) {
  const std::uint64_t limit = Rng::max() - (Rng::max() % bound);
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return r % bound;
}

/// Uniform on the open interval (0, 1) with 53 random bits.
inline double uniform_open(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace sipi
