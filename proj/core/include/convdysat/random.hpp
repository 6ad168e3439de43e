#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace convdysat {

using Rng = std::mt19937_64;

// Mixes a base seed with stream coordinates (step, node, walk index, ...) into an
// independent seed, so every random stream is a pure function of its coordinates.
inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x9E3779B97F4A7C15ULL;
  for (std::uint64_t p : parts) {
    // splitmix64 finaliser
    std::uint64_t z = h + p + 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    h = z ^ (z >> 31);
  }
  return h;
}

inline Rng make_rng(std::initializer_list<std::uint64_t> parts) { return Rng(derive_seed(parts)); }

}  // namespace convdysat
