#pragma once

#include <cstdint>
#include <random>

namespace btof {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Seed for an independent sub-task (a tree, a target, an item). Depends only
// on the parent seed and the stable task index, never on scheduling order.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t task) {
  return splitmix64(seed ^ splitmix64(task + 0x632BE59BD9B4E019ULL));
}

using Rng = std::mt19937_64;

// Portable uniform draws. The std:: distributions are implementation-defined,
// so everything that feeds a persisted artifact goes through these.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return static_cast<std::size_t>(r % n);
}

}  // namespace btof
