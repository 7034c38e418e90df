#include "dvi/rng.hpp"

#include <cmath>

#include "dvi/errors.hpp"

namespace dvi {

namespace {

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

Seed derive_stream(Seed base, std::string_view label, std::uint64_t index) {
  std::uint64_t h = fnv1a(label);
  return Seed{mix64(base.value ^ mix64(h + 0x9e3779b97f4a7c15ULL * (index + 1)))};
}

std::uint64_t Rng::next_u64() {
  state_ += 0x9e3779b97f4a7c15ULL;
  return mix64(state_);
}

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform_open01() { return 1.0 - uniform01(); }

std::uint64_t Rng::uniform_below(std::uint64_t n) {
  if (n == 0) throw EmptyInput("uniform_below: n must be positive");
  // Rejection to stay unbiased.
  std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit && limit != 0);
  return x % n;
}

double Rng::normal() {
  double u1 = uniform_open01();
  double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

double Rng::gamma(double shape) {
  if (!(shape > 0.0)) throw InvalidDistribution("gamma: shape must be > 0");
  if (shape < 1.0) {
    double u = uniform_open01();
    return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  // Marsaglia & Tsang (2000).
  double d = shape - 1.0 / 3.0;
  double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    double u = uniform_open01();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

std::vector<double> Rng::dirichlet(std::span<const double> alphas) {
  if (alphas.empty()) throw EmptyInput("dirichlet: empty concentration vector");
  std::vector<double> g(alphas.size());
  for (int attempt = 0; attempt < 100; ++attempt) {
    double sum = 0.0;
    for (std::size_t i = 0; i < alphas.size(); ++i) {
      g[i] = gamma(alphas[i]);
      sum += g[i];
    }
    if (sum > 0.0) {
      for (double& x : g) x /= sum;
      return g;
    }
    // All gamma draws underflowed (possible for very small shapes); redraw.
  }
  throw InvalidDistribution("dirichlet: draws underflowed repeatedly");
}

}  // namespace dvi
