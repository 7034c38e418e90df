#pragma once

#include <cstddef>
#include <vector>

#include "dvi/errors.hpp"
#include "dvi/prob.hpp"

namespace dvi {

// Contextual bandit with a known reward table.
struct BanditProblem {
  Categorical state_dist;                   // p(s)
  std::vector<std::vector<double>> reward;  // R[s][a]

  std::size_t n_states() const { return reward.size(); }
  std::size_t n_actions() const { return reward.empty() ? 0 : reward[0].size(); }
  void validate() const;
};

struct BanditTerms {
  double objective;    // reward_term - beta * kl_term
  double reward_term;  // sum_s p(s) sum_a pi(a|s) R(s,a)
  double kl_term;      // sum_s p(s) KL(pi(.|s) || pi0)
};

struct SoftBanditSolution {
  ConditionalTable policy;  // pi(a|s)
  Categorical prior;        // pi0(a)
  double objective;
  double reward_term;
  double kl_term;
  double beta;
};

// KL-penalized expected reward of (pi0, pi); the normalizer-dropped
// objective. Throws SupportViolation if some pi row leaves pi0's support.
BanditTerms bandit_elbo(const BanditProblem& p, const Categorical& pi0,
                        const ConditionalTable& pi, double beta);

// Rowwise maximizer of bandit_elbo for fixed pi0:
// pi*(a|s) proportional to pi0(a) exp(R(s,a)/beta). beta = 0 degenerates to
// the greedy policy over support(pi0), ties broken by lowest action index.
ConditionalTable soft_policy(const BanditProblem& p, const Categorical& pi0,
                             double beta);

// ln sum_s sum_a exp(R(s,a)) over the finite grid; subtracting it from the
// bandit_elbo objective at beta = 1 reconstructs the exact normalized-
// likelihood ELBO.
double bandit_log_partition(const BanditProblem& p);

// Action marginal sum_s p(s) pi(.|s).
Categorical action_marginal(const Categorical& state_dist,
                            const ConditionalTable& pi);

struct BlahutArimotoResult {
  SoftBanditSolution solution;
  std::vector<BanditTerms> trace;  // objective after each full iteration
  std::size_t iterations;
  bool converged;
};

class BanditNotConverged : public NotConverged {
 public:
  BanditNotConverged(std::string msg, BlahutArimotoResult best)
      : NotConverged(std::move(msg)), best_(std::move(best)) {}
  const BlahutArimotoResult& best() const { return best_; }

 private:
  BlahutArimotoResult best_;
};

// Alternates pi <- soft_policy(pi0) and pi0 <- action marginal of pi until
// the objective improves by less than tol. The objective trace is
// non-decreasing; at the returned fixed point pi0 equals the action
// marginal of pi. Starts from a uniform pi0.
BlahutArimotoResult blahut_arimoto(const BanditProblem& p, double beta,
                                   double tol, std::size_t max_iters);

}  // namespace dvi
