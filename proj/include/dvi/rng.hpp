#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace dvi {

// Seed for all stochastic operations. Identical seed + identical inputs
// give bit-identical outputs within one build.
struct Seed {
  std::uint64_t value = 0;
};

// Derives an independent stream seed by hashing (seed, label, index).
// Label hashing is FNV-1a; the combined value goes through the SplitMix64
// finalizer so nearby (seed, index) pairs land far apart.
Seed derive_stream(Seed base, std::string_view label, std::uint64_t index = 0);

// SplitMix64 (Steele, Lea & Vigna). Small, fast, and fully specified, so
// sampled results are reproducible across platforms for a given build.
class Rng {
 public:
  explicit Rng(Seed seed) : state_(seed.value) {}

  std::uint64_t next_u64();

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01();

  // Uniform in (0, 1]; safe as a log() argument.
  double uniform_open01();

  // Uniform integer in [0, n).
  std::uint64_t uniform_below(std::uint64_t n);

  // Standard normal via Box-Muller (cosine branch only).
  double normal();

  // Gamma(shape, 1) via Marsaglia-Tsang; boosted for shape < 1.
  double gamma(double shape);

  // One draw from Dirichlet(alphas).
  std::vector<double> dirichlet(std::span<const double> alphas);

 private:
  std::uint64_t state_;
};

}  // namespace dvi
