#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace mlsmo {

using Rng = std::mt19937_64;

// Counter-based seed derivation: mixes a base seed with a stream path
// (e.g. {generation, individual}) through splitmix64. Independent of the
// order in which streams are consumed, so parallel work stays reproducible.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  return Rng(derive_seed(seed, path));
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n). n must be positive.
std::size_t uniform_index(Rng& rng, std::size_t n);

// Fisher-Yates shuffle driven by uniform_index, so the permutation for a seed
// does not depend on the standard library implementation.
void shuffle_indices(std::span<std::size_t> values, Rng& rng);

}  // namespace mlsmo
