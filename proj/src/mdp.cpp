#include "dvi/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dvi/errors.hpp"

namespace dvi {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// All ways to split k units over d bins, emitted as probability rows c/k.
void compositions(std::size_t k, std::size_t d, std::vector<double>& cur,
                  std::vector<std::vector<double>>& out) {
  if (d == 1) {
    cur.push_back(static_cast<double>(k));
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (std::size_t c = 0; c <= k; ++c) {
    cur.push_back(static_cast<double>(c));
    compositions(k - c, d - 1, cur, out);
    cur.pop_back();
  }
}

// Grid rows over the full action set, restricted to support(pi0).
std::vector<Categorical> simplex_grid_rows(const Categorical& pi0,
                                           std::size_t k) {
  std::vector<std::size_t> support;
  for (std::size_t a = 0; a < pi0.size(); ++a)
    if (pi0[a] > 0.0) support.push_back(a);
  std::vector<std::vector<double>> pts;
  std::vector<double> cur;
  compositions(k, support.size(), cur, pts);
  std::vector<Categorical> rows;
  rows.reserve(pts.size());
  for (const auto& pt : pts) {
    std::vector<double> full(pi0.size(), 0.0);
    for (std::size_t i = 0; i < support.size(); ++i)
      full[support[i]] = pt[i] / static_cast<double>(k);
    rows.push_back(Categorical(std::move(full)));
  }
  return rows;
}

double n_compositions(std::size_t k, std::size_t d) {
  // C(k + d - 1, d - 1), in floating point to sidestep overflow.
  double n = 1.0;
  for (std::size_t i = 1; i < d; ++i)
    n *= static_cast<double>(k + i) / static_cast<double>(i);
  return n;
}

// Expected continuation sum_{s'} P(s'|s,a) next[s'] for every (s, a).
std::vector<std::vector<double>> continuation(const FiniteMdp& m,
                                              std::span<const double> next) {
  std::vector<std::vector<double>> cont(
      m.n_states, std::vector<double>(m.n_actions, 0.0));
  for (std::size_t s = 0; s < m.n_states; ++s)
    for (std::size_t a = 0; a < m.n_actions; ++a) {
      const Categorical& row = m.trans_row(s, a);
      double v = 0.0;
      for (std::size_t s2 = 0; s2 < m.n_states; ++s2)
        v += row[s2] * next[s2];
      cont[s][a] = v;
    }
  return cont;
}

std::vector<std::vector<double>> policy_values(const FiniteMdp& m,
                                               const Categorical& pi0,
                                               const TimeIndexedPolicy& pi,
                                               double beta) {
  std::vector<std::vector<double>> values(
      m.horizon + 1, std::vector<double>(m.n_states, 0.0));
  std::vector<double> next(m.n_states, 0.0);
  for (std::size_t ti = m.horizon + 1; ti-- > 0;) {
    auto cont = continuation(m, next);
    for (std::size_t s = 0; s < m.n_states; ++s) {
      const Categorical& row = pi.per_step[ti].row(s);
      double v = -beta * kl_divergence(row, pi0);
      for (std::size_t a = 0; a < m.n_actions; ++a)
        v += row[a] * (m.reward[s][a] + cont[s][a]);
      values[ti][s] = v;
    }
    next = values[ti];
  }
  return values;
}

}  // namespace

void FiniteMdp::validate() const {
  if (n_states == 0 || n_actions == 0)
    throw InvalidSpec("mdp: empty state or action set");
  if (init.size() != n_states) throw ShapeMismatch("mdp: init shape mismatch");
  if (trans.n_conditions() != n_states * n_actions ||
      trans.n_outcomes() != n_states)
    throw ShapeMismatch("mdp: transition table shape mismatch");
  if (reward.size() != n_states)
    throw ShapeMismatch("mdp: reward table shape mismatch");
  for (const auto& row : reward) {
    if (row.size() != n_actions)
      throw ShapeMismatch("mdp: reward table shape mismatch");
    for (double r : row)
      if (!std::isfinite(r)) throw InvalidSpec("mdp: non-finite reward");
  }
}

TimeIndexedPolicy TimeIndexedPolicy::broadcast(const ConditionalTable& stationary,
                                               std::size_t horizon) {
  TimeIndexedPolicy pi;
  pi.per_step.assign(horizon + 1, stationary);
  return pi;
}

bool TimeIndexedPolicy::is_stationary(double tol) const {
  if (per_step.empty()) return true;
  const ConditionalTable& head = per_step.front();
  for (const ConditionalTable& step : per_step)
    for (std::size_t s = 0; s < head.n_conditions(); ++s)
      for (std::size_t a = 0; a < head.n_outcomes(); ++a)
        if (std::abs(step.row(s)[a] - head.row(s)[a]) > tol) return false;
  return true;
}

std::vector<Categorical> state_marginals(const FiniteMdp& m,
                                         const TimeIndexedPolicy& pi) {
  m.validate();
  if (pi.per_step.size() != m.horizon + 1)
    throw ShapeMismatch("state_marginals: policy does not cover t = 0..T");
  std::vector<Categorical> marginals;
  marginals.reserve(m.horizon + 1);
  marginals.push_back(m.init);
  for (std::size_t t = 0; t < m.horizon; ++t) {
    std::vector<double> next(m.n_states, 0.0);
    const Categorical& cur = marginals.back();
    for (std::size_t s = 0; s < m.n_states; ++s) {
      if (cur[s] == 0.0) continue;
      const Categorical& policy_row = pi.per_step[t].row(s);
      for (std::size_t a = 0; a < m.n_actions; ++a) {
        double w = cur[s] * policy_row[a];
        if (w == 0.0) continue;
        const Categorical& trans_row = m.trans_row(s, a);
        for (std::size_t s2 = 0; s2 < m.n_states; ++s2)
          next[s2] += w * trans_row[s2];
      }
    }
    marginals.push_back(Categorical(std::move(next)));
  }
  return marginals;
}

MdpTerms mdp_elbo(const FiniteMdp& m, const Categorical& pi0,
                  const TimeIndexedPolicy& pi, double beta) {
  if (pi0.size() != m.n_actions)
    throw ShapeMismatch("mdp_elbo: prior shape mismatch");
  if (beta < 0.0) throw InvalidSpec("mdp_elbo: beta must be >= 0");
  auto marginals = state_marginals(m, pi);
  double reward_term = 0.0, kl_term = 0.0;
  for (std::size_t t = 0; t <= m.horizon; ++t) {
    for (std::size_t s = 0; s < m.n_states; ++s) {
      const Categorical& row = pi.per_step[t].row(s);
      double kl = kl_divergence(row, pi0);
      double ps = marginals[t][s];
      if (ps == 0.0) continue;
      double er = 0.0;
      for (std::size_t a = 0; a < m.n_actions; ++a)
        er += row[a] * m.reward[s][a];
      reward_term += ps * er;
      kl_term += ps * kl;
    }
  }
  return {reward_term - beta * kl_term, reward_term, kl_term};
}

SoftMdpSolution soft_backward_induction(const FiniteMdp& m,
                                        const Categorical& pi0, double beta) {
  m.validate();
  if (pi0.size() != m.n_actions)
    throw ShapeMismatch("soft_backward_induction: prior shape mismatch");
  if (beta < 0.0)
    throw InvalidSpec("soft_backward_induction: beta must be >= 0");
  std::vector<std::vector<double>> values(
      m.horizon + 1, std::vector<double>(m.n_states, 0.0));
  std::vector<ConditionalTable> steps(
      m.horizon + 1, ConditionalTable(m.n_states, m.n_actions));
  std::vector<double> next(m.n_states, 0.0);
  for (std::size_t ti = m.horizon + 1; ti-- > 0;) {
    auto cont = continuation(m, next);
    for (std::size_t s = 0; s < m.n_states; ++s) {
      if (beta == 0.0) {
        std::size_t best = m.n_actions;
        for (std::size_t a = 0; a < m.n_actions; ++a) {
          if (pi0[a] == 0.0) continue;
          double q = m.reward[s][a] + cont[s][a];
          if (best == m.n_actions || q > m.reward[s][best] + cont[s][best])
            best = a;
        }
        values[ti][s] = m.reward[s][best] + cont[s][best];
        steps[ti].set_row(s, Categorical::dirac(m.n_actions, best));
        continue;
      }
      std::vector<double> logw(m.n_actions);
      for (std::size_t a = 0; a < m.n_actions; ++a)
        logw[a] = pi0[a] > 0.0
                      ? std::log(pi0[a]) + (m.reward[s][a] + cont[s][a]) / beta
                      : kNegInf;
      values[ti][s] = beta * log_sum_exp(logw);
      steps[ti].set_row(s, Categorical::from_log_weights(logw));
    }
    next = values[ti];
  }
  TimeIndexedPolicy policy{std::move(steps)};
  MdpTerms terms = mdp_elbo(m, pi0, policy, beta);
  return {std::move(policy), std::move(values), terms.objective,
          terms.reward_term, terms.kl_term, beta};
}

SoftMdpSolution entropy_regularized_solve(const FiniteMdp& m, double beta) {
  return soft_backward_induction(m, Categorical::uniform(m.n_actions), beta);
}

SoftMdpSolution brute_force_policy_search(const FiniteMdp& m,
                                          const Categorical& pi0, double beta,
                                          double grid_resolution) {
  m.validate();
  if (!(grid_resolution > 0.0) || grid_resolution > 1.0)
    throw InvalidSpec("brute_force_policy_search: bad grid resolution");
  const std::size_t k =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(1.0 / grid_resolution)));
  std::size_t support_size = 0;
  for (std::size_t a = 0; a < pi0.size(); ++a)
    if (pi0[a] > 0.0) ++support_size;
  const std::size_t n_rows = (m.horizon + 1) * m.n_states;
  const double grid_evals =
      n_compositions(k, support_size) * static_cast<double>(n_rows);
  const double det_evals =
      std::pow(static_cast<double>(support_size), static_cast<double>(n_rows));
  if (grid_evals + det_evals > 1e7)
    throw TooLarge("brute_force_policy_search: enumeration guard tripped");

  // Exact DP over the grid-restricted policy class. Row choices at distinct
  // (t, s) are independent, so per-row maximization against the optimal
  // continuation is exhaustive over that class.
  auto grid = simplex_grid_rows(pi0, k);
  std::vector<double> grid_kl(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g)
    grid_kl[g] = kl_divergence(grid[g], pi0);
  std::vector<ConditionalTable> steps(
      m.horizon + 1, ConditionalTable(m.n_states, m.n_actions));
  std::vector<double> next(m.n_states, 0.0);
  for (std::size_t ti = m.horizon + 1; ti-- > 0;) {
    auto cont = continuation(m, next);
    std::vector<double> w(m.n_states);
    for (std::size_t s = 0; s < m.n_states; ++s) {
      double best = kNegInf;
      std::size_t best_g = 0;
      for (std::size_t g = 0; g < grid.size(); ++g) {
        double v = -beta * grid_kl[g];
        for (std::size_t a = 0; a < m.n_actions; ++a)
          if (grid[g][a] > 0.0)
            v += grid[g][a] * (m.reward[s][a] + cont[s][a]);
        if (v > best) {
          best = v;
          best_g = g;
        }
      }
      w[s] = best;
      steps[ti].set_row(s, grid[best_g]);
    }
    next = w;
  }
  TimeIndexedPolicy grid_policy{std::move(steps)};
  MdpTerms grid_terms = mdp_elbo(m, pi0, grid_policy, beta);

  // Deterministic policies, scored exactly; lexicographic enumeration so
  // ties resolve toward the lowest action indices.
  std::vector<std::size_t> support;
  for (std::size_t a = 0; a < pi0.size(); ++a)
    if (pi0[a] > 0.0) support.push_back(a);
  std::vector<std::size_t> digits(n_rows, 0);
  TimeIndexedPolicy det_best_policy;
  MdpTerms det_best{kNegInf, 0.0, 0.0};
  bool done = false;
  while (!done) {
    std::vector<ConditionalTable> det_steps(
        m.horizon + 1, ConditionalTable(m.n_states, m.n_actions));
    for (std::size_t t = 0; t <= m.horizon; ++t)
      for (std::size_t s = 0; s < m.n_states; ++s)
        det_steps[t].set_row(
            s, Categorical::dirac(m.n_actions,
                                  support[digits[t * m.n_states + s]]));
    TimeIndexedPolicy det_policy{std::move(det_steps)};
    MdpTerms terms = mdp_elbo(m, pi0, det_policy, beta);
    if (terms.objective > det_best.objective) {
      det_best = terms;
      det_best_policy = std::move(det_policy);
    }
    // Increment from the least significant (last) digit.
    done = true;
    for (std::size_t i = n_rows; i-- > 0;) {
      if (++digits[i] < support.size()) {
        done = false;
        break;
      }
      digits[i] = 0;
    }
  }

  const bool use_grid = grid_terms.objective > det_best.objective + 1e-12;
  const TimeIndexedPolicy& chosen = use_grid ? grid_policy : det_best_policy;
  const MdpTerms& terms = use_grid ? grid_terms : det_best;
  auto values = policy_values(m, pi0, chosen, beta);
  return {chosen, std::move(values), terms.objective, terms.reward_term,
          terms.kl_term, beta};
}

}  // namespace dvi
