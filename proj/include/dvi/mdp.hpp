#pragma once

#include <cstddef>
#include <vector>

#include "dvi/prob.hpp"

namespace dvi {

// Finite-horizon MDP with decisions at t = 0..horizon. Transition rows are
// indexed by the flattened pair s * n_actions + a.
struct FiniteMdp {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::size_t horizon = 0;  // T; episode has T+1 decision epochs
  Categorical init;
  ConditionalTable trans;
  std::vector<std::vector<double>> reward;  // R[s][a]

  const Categorical& trans_row(std::size_t s, std::size_t a) const {
    return trans.row(s * n_actions + a);
  }
  void validate() const;
};

// One action distribution table per decision epoch t = 0..T.
struct TimeIndexedPolicy {
  std::vector<ConditionalTable> per_step;

  static TimeIndexedPolicy broadcast(const ConditionalTable& stationary,
                                     std::size_t horizon);
  // True when every step's table matches step 0 within tol.
  bool is_stationary(double tol = 1e-12) const;
};

struct MdpTerms {
  double objective;
  double reward_term;
  double kl_term;
};

struct SoftMdpSolution {
  TimeIndexedPolicy policy;
  std::vector<std::vector<double>> values;  // V_t(s), t = 0..T
  double objective;
  double reward_term;
  double kl_term;
  double beta;
};

// Marginal state distribution p_t under pi: p_0 = init,
// p_{t+1}(s') = sum_{s,a} p_t(s) pi_t(a|s) P(s'|s,a). One entry per
// decision epoch t = 0..T.
std::vector<Categorical> state_marginals(const FiniteMdp& m,
                                         const TimeIndexedPolicy& pi);

// sum_t sum_s p_t(s) [ sum_a pi_t(a|s) R(s,a) - beta KL(pi_t(.|s)||pi0) ].
MdpTerms mdp_elbo(const FiniteMdp& m, const Categorical& pi0,
                  const TimeIndexedPolicy& pi, double beta);

// Soft Bellman recursion: V_t(s) = beta ln sum_a pi0(a) exp((R(s,a) +
// E[V_{t+1}]) / beta), with the policy read off the same weights. Exact
// maximizer of mdp_elbo over time-indexed policies. beta = 0 degenerates
// to the plain max backup with lowest-index tie-breaking over support(pi0).
SoftMdpSolution soft_backward_induction(const FiniteMdp& m,
                                        const Categorical& pi0, double beta);

// soft_backward_induction with a uniform prior; the KL penalty is then
// ln|A| minus the policy entropy at every (t, s).
SoftMdpSolution entropy_regularized_solve(const FiniteMdp& m, double beta);

// Oracle search: exact dynamic programming over the class of policies whose
// every row lies on the rowwise simplex grid of the given resolution, plus
// exhaustive scoring of all deterministic time-indexed policies. Returns
// the better of the two, scored by mdp_elbo; deterministic ties break
// lexicographically. Throws TooLarge when the enumeration guard (1e7 row
// evaluations) trips.
SoftMdpSolution brute_force_policy_search(const FiniteMdp& m,
                                          const Categorical& pi0, double beta,
                                          double grid_resolution);

}  // namespace dvi
