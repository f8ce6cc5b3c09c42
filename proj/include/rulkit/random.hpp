#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>

namespace rulkit {

// mt19937_64 output is pinned by the standard; the std::*_distribution
// adapters are not, so every draw below is hand-rolled. Same seed, same
// stream, on any conforming standard library.
using Rng = std::mt19937_64;

// SplitMix64 finalizer. Derives independent stream seeds from a master seed
// and a salt (run index, trial index, ...).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Uniform in [0, 1) with 53-bit resolution.
inline double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_range(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform_unit(rng);
}

// Uniform index in [0, n). Modulo bias is ~n/2^64, irrelevant for the small
// option sets drawn here.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
  return static_cast<std::size_t>(rng() % n);
}

// Standard normal via Box-Muller. Draws a fresh pair per call; no cached
// state, so streams stay reproducible regardless of call sites.
inline double normal_unit(Rng& rng) {
  double u1 = uniform_unit(rng);
  while (u1 == 0.0) u1 = uniform_unit(rng);
  const double u2 = uniform_unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

template <typename T>
void shuffle_portable(std::vector<T>& values, Rng& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const std::size_t j = uniform_index(rng, i);
    std::swap(values[i - 1], values[j]);
  }
}

}  // namespace rulkit
