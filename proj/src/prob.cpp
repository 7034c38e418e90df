#include "dvi/prob.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dvi/errors.hpp"

namespace dvi {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

Categorical::Categorical(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw InvalidDistribution("Categorical: empty support");
  double sum = 0.0;
  for (double& p : probs_) {
    if (std::isnan(p) || std::isinf(p))
      throw InvalidDistribution("Categorical: non-finite entry");
    if (p < 0.0) {
      if (p < -kSimplexTol)
        throw InvalidDistribution("Categorical: negative entry");
      p = 0.0;  // rounding noise
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kSimplexFail)
    throw InvalidDistribution("Categorical: entries sum to " +
                              std::to_string(sum) + ", not 1");
  for (double& p : probs_) p /= sum;
}

Categorical Categorical::uniform(std::size_t n) {
  if (n == 0) throw InvalidDistribution("Categorical::uniform: n = 0");
  return Categorical(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

Categorical Categorical::dirac(std::size_t n, std::size_t index) {
  if (index >= n) throw InvalidDistribution("Categorical::dirac: index out of range");
  std::vector<double> p(n, 0.0);
  p[index] = 1.0;
  return Categorical(std::move(p));
}

Categorical Categorical::from_log_weights(std::span<const double> log_weights) {
  if (log_weights.empty())
    throw InvalidDistribution("from_log_weights: empty input");
  double norm = log_sum_exp(log_weights);
  if (norm == kNegInf)
    throw InvalidDistribution("from_log_weights: all weights are zero");
  std::vector<double> p(log_weights.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    p[i] = log_weights[i] == kNegInf ? 0.0 : std::exp(log_weights[i] - norm);
  return Categorical(std::move(p));
}

std::size_t Categorical::argmax() const {
  return static_cast<std::size_t>(
      std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
}

ConditionalTable::ConditionalTable(std::size_t n_conditions,
                                   std::size_t n_outcomes)
    : n_outcomes_(n_outcomes),
      rows_(n_conditions, Categorical::uniform(n_outcomes)) {
  if (n_conditions == 0)
    throw InvalidDistribution("ConditionalTable: empty condition domain");
}

ConditionalTable::ConditionalTable(std::vector<Categorical> rows)
    : n_outcomes_(rows.empty() ? 0 : rows.front().size()),
      rows_(std::move(rows)) {
  if (rows_.empty())
    throw InvalidDistribution("ConditionalTable: empty condition domain");
  for (const Categorical& r : rows_)
    if (r.size() != n_outcomes_)
      throw ShapeMismatch("ConditionalTable: ragged rows");
}

const Categorical& ConditionalTable::row(std::size_t condition) const {
  if (condition >= rows_.size())
    throw ShapeMismatch("ConditionalTable: condition index out of range");
  return rows_[condition];
}

void ConditionalTable::set_row(std::size_t condition, Categorical row) {
  if (condition >= rows_.size())
    throw ShapeMismatch("ConditionalTable: condition index out of range");
  if (row.size() != n_outcomes_)
    throw ShapeMismatch("ConditionalTable: row size mismatch");
  rows_[condition] = std::move(row);
}

double kl_divergence(const Categorical& q, const Categorical& p) {
  if (q.size() != p.size())
    throw ShapeMismatch("kl_divergence: index sets differ");
  double kl = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] == 0.0) continue;
    if (p[i] == 0.0)
      throw SupportViolation("kl_divergence: q has mass outside support of p");
    kl += q[i] * (std::log(q[i]) - std::log(p[i]));
  }
  return std::max(kl, 0.0);
}

double entropy(const Categorical& d) {
  double h = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d[i] > 0.0) h -= d[i] * std::log(d[i]);
  return std::max(h, 0.0);
}

double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) throw EmptyInput("log_sum_exp: empty input");
  double m = kNegInf;
  for (double x : xs) {
    if (std::isnan(x) || x == std::numeric_limits<double>::infinity())
      throw InvalidDistribution("log_sum_exp: non-finite entry");
    m = std::max(m, x);
  }
  if (m == kNegInf) return kNegInf;
  if (xs.size() == 1) return xs[0];
  double sum = 0.0;
  for (double x : xs) sum += x == kNegInf ? 0.0 : std::exp(x - m);
  return m + std::log(sum);
}

std::size_t sample_categorical(const Categorical& d, Rng& rng) {
  double u = rng.uniform01();
  double acc = 0.0;
  std::size_t last_positive = 0;
  bool seen = false;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] <= 0.0) continue;
    last_positive = i;
    seen = true;
    acc += d[i];
    if (u < acc) return i;
  }
  (void)seen;
  return last_positive;  // u landed in the rounding tail
}

std::size_t sample_categorical(const Categorical& d, Seed seed) {
  Rng rng(seed);
  return sample_categorical(d, rng);
}

}  // namespace dvi
