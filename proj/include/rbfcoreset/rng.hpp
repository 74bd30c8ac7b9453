#pragma once

#include <cstdint>
#include <random>

namespace rbfcoreset {

/// Derives an independent stream seed from a base seed and a stream tag
/// (splitmix64 finalizer). Keeps all randomness traceable to one user seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Uniform double in [0, 1) built from the generator's high bits; portable
/// across standard library implementations.
inline double uniform_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace rbfcoreset
