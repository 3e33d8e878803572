#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace syncsel {

// SplitMix64 finalizer. Used to derive independent sub-streams from one
// user-facing seed so that per-trial work can be reordered or parallelized
// without changing results.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed ^ splitmix64(index + 1));
}

// Uniform sample from the probability simplex (symmetric Dirichlet(1)),
// drawn as normalized standard exponentials.
std::vector<double> sample_simplex(std::size_t num_classes, std::mt19937_64& rng);

}  // namespace syncsel
