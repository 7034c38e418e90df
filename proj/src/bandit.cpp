#include "dvi/bandit.hpp"

#include <cmath>
#include <limits>

namespace dvi {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

void BanditProblem::validate() const {
  if (reward.empty() || reward[0].empty())
    throw InvalidSpec("bandit: empty reward table");
  if (state_dist.size() != reward.size())
    throw ShapeMismatch("bandit: p(s) does not match the reward table");
  for (const auto& row : reward) {
    if (row.size() != reward[0].size())
      throw ShapeMismatch("bandit: ragged reward table");
    for (double r : row)
      if (!std::isfinite(r)) throw InvalidSpec("bandit: non-finite reward");
  }
}

BanditTerms bandit_elbo(const BanditProblem& p, const Categorical& pi0,
                        const ConditionalTable& pi, double beta) {
  p.validate();
  if (pi.n_conditions() != p.n_states() || pi.n_outcomes() != p.n_actions())
    throw ShapeMismatch("bandit_elbo: policy shape mismatch");
  if (pi0.size() != p.n_actions())
    throw ShapeMismatch("bandit_elbo: prior shape mismatch");
  if (beta < 0.0) throw InvalidSpec("bandit_elbo: beta must be >= 0");
  double reward_term = 0.0, kl_term = 0.0;
  for (std::size_t s = 0; s < p.n_states(); ++s) {
    const Categorical& row = pi.row(s);
    double ps = p.state_dist[s];
    double er = 0.0;
    for (std::size_t a = 0; a < p.n_actions(); ++a)
      er += row[a] * p.reward[s][a];
    reward_term += ps * er;
    kl_term += ps * kl_divergence(row, pi0);
  }
  return {reward_term - beta * kl_term, reward_term, kl_term};
}

ConditionalTable soft_policy(const BanditProblem& p, const Categorical& pi0,
                             double beta) {
  p.validate();
  if (pi0.size() != p.n_actions())
    throw ShapeMismatch("soft_policy: prior shape mismatch");
  if (beta < 0.0) throw InvalidSpec("soft_policy: beta must be >= 0");
  std::vector<Categorical> rows;
  rows.reserve(p.n_states());
  for (std::size_t s = 0; s < p.n_states(); ++s) {
    if (beta == 0.0) {
      // Greedy over the prior's support; ties go to the lowest index.
      std::size_t best = p.n_actions();
      for (std::size_t a = 0; a < p.n_actions(); ++a) {
        if (pi0[a] == 0.0) continue;
        if (best == p.n_actions() || p.reward[s][a] > p.reward[s][best])
          best = a;
      }
      rows.push_back(Categorical::dirac(p.n_actions(), best));
      continue;
    }
    std::vector<double> logw(p.n_actions());
    for (std::size_t a = 0; a < p.n_actions(); ++a)
      logw[a] = pi0[a] > 0.0 ? std::log(pi0[a]) + p.reward[s][a] / beta
                             : kNegInf;
    rows.push_back(Categorical::from_log_weights(logw));
  }
  return ConditionalTable(std::move(rows));
}

double bandit_log_partition(const BanditProblem& p) {
  p.validate();
  std::vector<double> flat;
  flat.reserve(p.n_states() * p.n_actions());
  for (const auto& row : p.reward)
    flat.insert(flat.end(), row.begin(), row.end());
  return log_sum_exp(flat);
}

Categorical action_marginal(const Categorical& state_dist,
                            const ConditionalTable& pi) {
  if (state_dist.size() != pi.n_conditions())
    throw ShapeMismatch("action_marginal: shape mismatch");
  std::vector<double> marg(pi.n_outcomes(), 0.0);
  for (std::size_t s = 0; s < state_dist.size(); ++s)
    for (std::size_t a = 0; a < pi.n_outcomes(); ++a)
      marg[a] += state_dist[s] * pi.row(s)[a];
  return Categorical(std::move(marg));
}

BlahutArimotoResult blahut_arimoto(const BanditProblem& p, double beta,
                                   double tol, std::size_t max_iters) {
  p.validate();
  if (!(tol > 0.0)) throw InvalidSpec("blahut_arimoto: tol must be > 0");
  if (!(beta > 0.0)) throw InvalidSpec("blahut_arimoto: beta must be > 0");
  Categorical pi0 = Categorical::uniform(p.n_actions());
  ConditionalTable pi(p.n_states(), p.n_actions());
  std::vector<BanditTerms> trace;
  double prev = kNegInf;
  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    pi = soft_policy(p, pi0, beta);
    pi0 = action_marginal(p.state_dist, pi);
    // The optimal prior can lose support entirely on dominated actions; the
    // marginal underflows to an exact zero while policy rows still hold a
    // denormal. Clip those entries (total mass below 1e-300) so the KL in
    // the objective stays well defined.
    bool dead_actions = false;
    for (std::size_t a = 0; a < pi0.size(); ++a)
      if (pi0[a] == 0.0) dead_actions = true;
    if (dead_actions) {
      std::vector<Categorical> rows;
      rows.reserve(p.n_states());
      for (std::size_t s = 0; s < p.n_states(); ++s) {
        std::vector<double> row(pi.row(s).probs().begin(),
                                pi.row(s).probs().end());
        double remaining = 0.0;
        for (std::size_t a = 0; a < row.size(); ++a) {
          if (pi0[a] == 0.0) row[a] = 0.0;
          remaining += row[a];
        }
        // A row can survive entirely on dead actions only at a zero-mass
        // state; park it on the prior there.
        rows.push_back(remaining > 0.0
                           ? Categorical(std::move(row))
                           : pi0);
      }
      pi = ConditionalTable(std::move(rows));
    }
    BanditTerms terms = bandit_elbo(p, pi0, pi, beta);
    if (!trace.empty() && terms.objective < prev - 1e-12)
      throw Error("blahut_arimoto: objective decreased");  // coordinate ascent broke
    trace.push_back(terms);
    double improvement = terms.objective - prev;
    prev = terms.objective;
    if (iter > 0 && improvement < tol) {
      return {SoftBanditSolution{std::move(pi), std::move(pi0),
                                 terms.objective, terms.reward_term,
                                 terms.kl_term, beta},
              std::move(trace), iter + 1, true};
    }
  }
  BanditTerms last = trace.empty() ? BanditTerms{kNegInf, 0.0, 0.0} : trace.back();
  BlahutArimotoResult best{SoftBanditSolution{std::move(pi), std::move(pi0),
                                              last.objective, last.reward_term,
                                              last.kl_term, beta},
                           std::move(trace), max_iters, false};
  throw BanditNotConverged("blahut_arimoto: no convergence after " +
                               std::to_string(max_iters) + " iterations",
                           std::move(best));
}

}  // namespace dvi
