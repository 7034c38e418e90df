#include "dvi/special.hpp"

#include <cmath>

#include "dvi/errors.hpp"

namespace dvi {

double digamma(double x) {
  if (!(x > 0.0)) throw InvalidDistribution("digamma: requires x > 0");
  double result = 0.0;
  while (x < 12.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  // Asymptotic expansion, Bernoulli terms through 1/x^14.
  double inv = 1.0 / x;
  double inv2 = inv * inv;
  double series =
      inv2 * (1.0 / 12.0 -
              inv2 * (1.0 / 120.0 -
                      inv2 * (1.0 / 252.0 -
                              inv2 * (1.0 / 240.0 -
                                      inv2 * (1.0 / 132.0 -
                                              inv2 * (691.0 / 32760.0 -
                                                      inv2 / 12.0))))));
  return result + std::log(x) - 0.5 * inv - series;
}

double log_multivariate_beta(std::span<const double> alpha) {
  if (alpha.empty()) throw EmptyInput("log_multivariate_beta: empty input");
  double sum = 0.0, lg = 0.0;
  for (double a : alpha) {
    if (!(a > 0.0))
      throw InvalidDistribution("log_multivariate_beta: non-positive entry");
    sum += a;
    lg += std::lgamma(a);
  }
  return lg - std::lgamma(sum);
}

double dirichlet_kl(std::span<const double> alpha,
                    std::span<const double> beta) {
  if (alpha.size() != beta.size())
    throw ShapeMismatch("dirichlet_kl: dimension mismatch");
  if (alpha.empty()) throw EmptyInput("dirichlet_kl: empty input");
  double a0 = 0.0, b0 = 0.0;
  for (double a : alpha) a0 += a;
  for (double b : beta) b0 += b;
  double psi_a0 = digamma(a0);
  double kl = std::lgamma(a0) - std::lgamma(b0);
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    kl -= std::lgamma(alpha[i]);
    kl += std::lgamma(beta[i]);
    kl += (alpha[i] - beta[i]) * (digamma(alpha[i]) - psi_a0);
  }
  return kl;
}

double dirichlet_expected_log(std::span<const double> alpha, std::size_t k) {
  double a0 = 0.0;
  for (double a : alpha) a0 += a;
  return digamma(alpha[k]) - digamma(a0);
}

}  // namespace dvi
