#pragma once

#include <span>

namespace dvi {

// Digamma psi(x) for x > 0. Recurrence up to x >= 12 followed by the
// asymptotic series through the x^-14 Bernoulli term; absolute error is
// at the few-ulp level across the positive axis.
double digamma(double x);

// ln of the multivariate beta function: sum_i lgamma(a_i) - lgamma(sum a_i).
double log_multivariate_beta(std::span<const double> alpha);

// KL(Dir(alpha) || Dir(beta)) in closed form; both parameter vectors must
// be strictly positive and of equal length.
double dirichlet_kl(std::span<const double> alpha, std::span<const double> beta);

// E_{Dir(alpha)}[ln theta_k] = psi(alpha_k) - psi(sum alpha).
double dirichlet_expected_log(std::span<const double> alpha, std::size_t k);

}  // namespace dvi
