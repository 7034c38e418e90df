#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "dvi/rng.hpp"

namespace dvi {

// Multiset of (s, a, s') transition triples. The likelihood depends only on
// counts, so storage order never matters.
struct TransitionDataset {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::vector<std::array<std::size_t, 3>> tuples;

  std::size_t size() const { return tuples.size(); }
  void validate() const;
  // Count tensor flattened as [(s * n_actions + a) * n_states + s2].
  std::vector<double> counts() const;
};

// Independent Dirichlet distributions, one per row of a conditional table.
// Transition families use rows indexed s * n_actions + a with dim n_states;
// observation families use one row per state with dim n_obs.
class DirichletFamily {
 public:
  // 1x1 placeholder family.
  DirichletFamily() : n_rows_(1), dim_(1), conc_{1.0} {}
  DirichletFamily(std::size_t n_rows, std::size_t dim, double concentration);
  DirichletFamily(std::size_t n_rows, std::size_t dim,
                  std::vector<double> concentrations);

  std::size_t n_rows() const { return n_rows_; }
  std::size_t dim() const { return dim_; }
  std::span<const double> row(std::size_t r) const;
  double at(std::size_t r, std::size_t k) const { return conc_[r * dim_ + k]; }
  double& at(std::size_t r, std::size_t k) { return conc_[r * dim_ + k]; }
  std::span<const double> flat() const { return conc_; }

  // Row means alpha_k / sum alpha, the plug-in point estimate.
  std::vector<double> mean_row(std::size_t r) const;

 private:
  std::size_t n_rows_, dim_;
  std::vector<double> conc_;
};

struct ElboReport {
  double elbo = 0.0;
  double exp_loglik = 0.0;
  double kl = 0.0;
  std::size_t iteration = 0;
};

// ELBO of q against the dataset: count-weighted digamma expectations of
// ln theta minus the summed per-row Dirichlet KL to the prior.
ElboReport model_elbo(const TransitionDataset& data,
                      const DirichletFamily& prior, const DirichletFamily& q);

struct FitResult {
  DirichletFamily posterior;
  ElboReport report;
};

// Conjugate update alpha* = prior + counts. Because the family is conjugate
// the returned ELBO equals the exact log marginal likelihood.
FitResult fit_variational(const TransitionDataset& data,
                          const DirichletFamily& prior);

// Rescaled-batch ELBO estimate over tuple indices; unbiased for model_elbo
// under uniform batch choice.
double stochastic_elbo(const TransitionDataset& data,
                       const DirichletFamily& prior, const DirichletFamily& q,
                       std::span<const std::size_t> batch);
double stochastic_elbo(const TransitionDataset& data,
                       const DirichletFamily& prior, const DirichletFamily& q,
                       std::size_t batch_size, Seed seed);

// Joint law over length-T sequences with entries in [0, base), stored in
// lexicographic order (first step is the most significant digit).
struct SequenceLaw {
  std::size_t horizon = 0;
  std::size_t base = 0;
  std::vector<double> probs;

  std::size_t index_of(std::span<const std::size_t> seq) const;
  double prob(std::span<const std::size_t> seq) const;
};

// Exact action-conditioned state-sequence law under q, with the parameter
// integrated out (Dirichlet-multinomial sequence predictive). Successive
// steps couple through the shared parameter draw. Guard: base^T <= 1e6.
SequenceLaw predict_states_exact(const DirichletFamily& q, std::size_t s0,
                                 std::span<const std::size_t> actions);

// Monte Carlo unrolling: each rollout samples theta from q once and holds
// it fixed along the whole sequence.
std::vector<std::vector<std::size_t>> predict_states_sample(
    const DirichletFamily& q, std::size_t s0,
    std::span<const std::size_t> actions, std::size_t n_samples, Seed seed);

}  // namespace dvi
