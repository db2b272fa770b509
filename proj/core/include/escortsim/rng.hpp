#pragma once

#include <cstdint>
#include <random>

namespace escortsim {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Bijective on 64-bit integers.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Combines a key with two stream indices. Used wherever an independent,
/// order-free substream is needed (per obstacle per step, per episode per
/// grid cell, per rollout worker).
constexpr std::uint64_t mix_seed(std::uint64_t key, std::uint64_t a,
                                 std::uint64_t b = 0) noexcept {
  return mix64(mix64(key ^ mix64(a + 1)) ^ mix64((b + 1) * 0x2545f4914f6cdd1dULL));
}

inline Rng make_rng(std::uint64_t key, std::uint64_t a = 0, std::uint64_t b = 0) {
  return Rng(mix_seed(key, a, b));
}

}  // namespace escortsim
