#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dvi/rng.hpp"

namespace dvi {

// Simplex construction tolerances: inputs whose sum deviates from 1 by more
// than kSimplexFail are rejected as user error; anything closer is treated
// as rounding noise and renormalized.
inline constexpr double kSimplexTol = 1e-12;
inline constexpr double kSimplexFail = 1e-9;

// A probability distribution over a finite index set. Immutable after
// construction; construction renormalizes so entries sum to 1 within
// kSimplexTol.
class Categorical {
 public:
  // A single-point simplex; placeholder until a real value is assigned.
  Categorical() : probs_{1.0} {}
  // Throws InvalidDistribution on negative entries, non-finite entries,
  // or a total further than kSimplexFail from 1.
  explicit Categorical(std::vector<double> probs);

  static Categorical uniform(std::size_t n);
  static Categorical dirac(std::size_t n, std::size_t index);
  // Normalizes exp(logw - max) safely; entries of -inf become hard zeros.
  static Categorical from_log_weights(std::span<const double> log_weights);

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> probs() const { return probs_; }

  // Index of the largest entry; ties break toward the lowest index.
  std::size_t argmax() const;

 private:
  std::vector<double> probs_;
};

// Rows of Categoricals over a shared outcome set, one per condition index.
// Callers with tuple conditions (s,a) flatten them; see FiniteMdp::trans_row.
class ConditionalTable {
 public:
  // 1x1 placeholder table.
  ConditionalTable() : n_outcomes_(1), rows_(1) {}
  ConditionalTable(std::size_t n_conditions, std::size_t n_outcomes);
  explicit ConditionalTable(std::vector<Categorical> rows);

  std::size_t n_conditions() const { return rows_.size(); }
  std::size_t n_outcomes() const { return n_outcomes_; }
  const Categorical& row(std::size_t condition) const;
  void set_row(std::size_t condition, Categorical row);

 private:
  std::size_t n_outcomes_;
  std::vector<Categorical> rows_;
};

// KL(q || p) = sum_i q_i ln(q_i / p_i), with 0 ln 0 = 0.
// Throws SupportViolation if q places mass where p has none.
double kl_divergence(const Categorical& q, const Categorical& p);

// Shannon entropy in nats.
double entropy(const Categorical& d);

// ln sum_i exp(x_i), max-shifted. Exact for a single input. Entries of
// -inf contribute nothing; an empty input throws EmptyInput.
double log_sum_exp(std::span<const double> xs);

// One draw, by inverse CDF walk; never returns a zero-probability index.
std::size_t sample_categorical(const Categorical& d, Rng& rng);
std::size_t sample_categorical(const Categorical& d, Seed seed);

}  // namespace dvi
