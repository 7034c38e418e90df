#pragma once

#include <cstddef>
#include <vector>

#include "dvi/prob.hpp"
#include "dvi/rng.hpp"

namespace dvi {

// Discrete-latent generative model at enumeration scale: a prior over a
// finite parameter grid plus a per-example log-likelihood table. Entries
// of -inf are legal and act as hard zeros.
struct DiscreteGenerativeModel {
  Categorical prior;                         // over the parameter grid
  std::vector<std::vector<double>> log_lik;  // [example][grid point]

  std::size_t n_data() const { return log_lik.size(); }
  std::size_t grid_size() const { return prior.size(); }
  // Throws ShapeMismatch on ragged rows or rows not covering the grid.
  void validate() const;
};

struct VariationalFactor {
  Categorical q;
};

struct PosteriorResult {
  VariationalFactor posterior;
  double log_evidence;
};

// Exact Bayes posterior over the grid, with the log evidence as by-product.
// Throws ZeroEvidence when every joint weight vanishes.
PosteriorResult exact_posterior(const DiscreteGenerativeModel& m);

struct ElboTerms {
  double value;              // expected_log_lik - beta * kl
  double expected_log_lik;   // sum_n E_q[ln p(y_n | theta, X_n)]
  double kl;                 // KL(q || prior)
};

// The evidence lower bound with the KL term weighted by beta >= 0.
// beta = 1 is the plain ELBO; beta = 0 drops the prior entirely.
ElboTerms elbo(const DiscreteGenerativeModel& m, const VariationalFactor& v,
               double beta);

// ln p(y|X) - ELBO(q); equals KL(q || exact posterior).
double evidence_gap(const DiscreteGenerativeModel& m,
                    const VariationalFactor& v);

// p(y*_1..y*_M | X*) = sum_theta q(theta) prod_m p(y*_m | theta, X*_m).
// The product sits inside the theta-sum, so test points couple through
// the shared parameter.
double posterior_predictive(const DiscreteGenerativeModel& m,
                            const VariationalFactor& v,
                            const std::vector<std::vector<double>>& new_log_lik);

// Rescaled-batch ELBO estimate: (N/|batch|) sum_{n in batch} E_q[ln p] - KL.
// Unbiased for elbo(m, v, 1) under uniform batch choice.
double minibatch_elbo_estimate(const DiscreteGenerativeModel& m,
                               const VariationalFactor& v,
                               std::span<const std::size_t> batch);

// Convenience: samples a uniform batch of the given size (without
// replacement) from the derived stream, then scores it.
double minibatch_elbo_estimate(const DiscreteGenerativeModel& m,
                               const VariationalFactor& v,
                               std::size_t batch_size, Seed seed);

}  // namespace dvi
