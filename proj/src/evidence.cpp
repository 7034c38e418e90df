#include "dvi/evidence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dvi/errors.hpp"

namespace dvi {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_support(const Categorical& q, const Categorical& p,
                   const char* what) {
  for (std::size_t i = 0; i < q.size(); ++i)
    if (q[i] > 0.0 && p[i] == 0.0) throw SupportViolation(what);
}
}  // namespace

void DiscreteGenerativeModel::validate() const {
  for (const auto& row : log_lik) {
    if (row.size() != grid_size())
      throw ShapeMismatch("model: log-likelihood row does not cover the grid");
    for (double x : row)
      if (std::isnan(x) || x == std::numeric_limits<double>::infinity())
        throw InvalidDistribution("model: log-likelihood must be finite or -inf");
  }
}

PosteriorResult exact_posterior(const DiscreteGenerativeModel& m) {
  m.validate();
  const std::size_t k = m.grid_size();
  std::vector<double> log_joint(k);
  for (std::size_t i = 0; i < k; ++i) {
    double w = m.prior[i] > 0.0 ? std::log(m.prior[i]) : kNegInf;
    for (const auto& row : m.log_lik) w += row[i];
    log_joint[i] = std::isnan(w) ? kNegInf : w;  // 0 * -inf tail
  }
  double log_evidence = log_sum_exp(log_joint);
  if (log_evidence == kNegInf)
    throw ZeroEvidence("exact_posterior: all joint weights vanish");
  return {VariationalFactor{Categorical::from_log_weights(log_joint)},
          log_evidence};
}

ElboTerms elbo(const DiscreteGenerativeModel& m, const VariationalFactor& v,
               double beta) {
  m.validate();
  if (v.q.size() != m.grid_size())
    throw ShapeMismatch("elbo: q does not cover the grid");
  if (beta < 0.0) throw InvalidDistribution("elbo: beta must be >= 0");
  double expected = 0.0;
  for (const auto& row : m.log_lik)
    for (std::size_t i = 0; i < v.q.size(); ++i)
      if (v.q[i] > 0.0) expected += v.q[i] * row[i];
  double kl = 0.0;
  if (beta > 0.0) kl = kl_divergence(v.q, m.prior);
  return {expected - beta * kl, expected, kl};
}

double evidence_gap(const DiscreteGenerativeModel& m,
                    const VariationalFactor& v) {
  check_support(v.q, m.prior, "evidence_gap: q outside prior support");
  PosteriorResult exact = exact_posterior(m);
  double gap = exact.log_evidence - elbo(m, v, 1.0).value;
  return std::max(gap, 0.0);
}

double posterior_predictive(const DiscreteGenerativeModel& m,
                            const VariationalFactor& v,
                            const std::vector<std::vector<double>>& new_log_lik) {
  if (v.q.size() != m.grid_size())
    throw ShapeMismatch("posterior_predictive: q does not cover the grid");
  std::vector<double> log_terms;
  log_terms.reserve(v.q.size());
  for (std::size_t i = 0; i < v.q.size(); ++i) {
    if (v.q[i] == 0.0) continue;
    double w = std::log(v.q[i]);
    for (const auto& row : new_log_lik) {
      if (row.size() != m.grid_size())
        throw ShapeMismatch("posterior_predictive: test row does not cover grid");
      w += row[i];
    }
    log_terms.push_back(std::isnan(w) ? kNegInf : w);
  }
  if (log_terms.empty()) return 0.0;
  double lse = log_sum_exp(log_terms);
  return lse == kNegInf ? 0.0 : std::exp(lse);
}

double minibatch_elbo_estimate(const DiscreteGenerativeModel& m,
                               const VariationalFactor& v,
                               std::span<const std::size_t> batch) {
  m.validate();
  if (batch.empty()) throw EmptyBatch("minibatch_elbo_estimate: empty batch");
  double batch_sum = 0.0;
  for (std::size_t n : batch) {
    if (n >= m.n_data())
      throw ShapeMismatch("minibatch_elbo_estimate: index out of range");
    for (std::size_t i = 0; i < v.q.size(); ++i)
      if (v.q[i] > 0.0) batch_sum += v.q[i] * m.log_lik[n][i];
  }
  double scale = static_cast<double>(m.n_data()) / static_cast<double>(batch.size());
  return scale * batch_sum - kl_divergence(v.q, m.prior);
}

double minibatch_elbo_estimate(const DiscreteGenerativeModel& m,
                               const VariationalFactor& v,
                               std::size_t batch_size, Seed seed) {
  if (batch_size == 0 || batch_size > m.n_data())
    throw EmptyBatch("minibatch_elbo_estimate: bad batch size");
  // Partial Fisher-Yates over the index range.
  std::vector<std::size_t> idx(m.n_data());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(derive_stream(seed, "minibatch"));
  for (std::size_t i = 0; i < batch_size; ++i) {
    std::size_t j = i + rng.uniform_below(idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(batch_size);
  return minibatch_elbo_estimate(m, v, idx);
}

}  // namespace dvi
