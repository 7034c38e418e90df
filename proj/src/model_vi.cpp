#include "dvi/model_vi.hpp"

#include <cmath>
#include <numeric>

#include "dvi/errors.hpp"
#include "dvi/prob.hpp"
#include "dvi/special.hpp"

namespace dvi {

namespace {

void check_shapes(const TransitionDataset& data, const DirichletFamily& fam,
                  const char* what) {
  if (fam.n_rows() != data.n_states * data.n_actions ||
      fam.dim() != data.n_states)
    throw ShapeMismatch(what);
}

// (s, a) row of a transition family.
std::size_t trans_row_index(const DirichletFamily& fam, std::size_t s,
                            std::size_t a) {
  std::size_t n_actions = fam.n_rows() / fam.dim();
  return s * n_actions + a;
}

void check_transition_family(const DirichletFamily& fam, const char* what) {
  if (fam.dim() == 0 || fam.n_rows() % fam.dim() != 0) throw ShapeMismatch(what);
}

}  // namespace

void TransitionDataset::validate() const {
  if (n_states == 0 || n_actions == 0)
    throw InvalidSpec("dataset: empty state or action set");
  for (const auto& [s, a, s2] : tuples)
    if (s >= n_states || a >= n_actions || s2 >= n_states)
      throw ShapeMismatch("dataset: tuple index out of range");
}

std::vector<double> TransitionDataset::counts() const {
  validate();
  std::vector<double> c(n_states * n_actions * n_states, 0.0);
  for (const auto& [s, a, s2] : tuples)
    c[(s * n_actions + a) * n_states + s2] += 1.0;
  return c;
}

DirichletFamily::DirichletFamily(std::size_t n_rows, std::size_t dim,
                                 double concentration)
    : DirichletFamily(n_rows, dim,
                      std::vector<double>(n_rows * dim, concentration)) {}

DirichletFamily::DirichletFamily(std::size_t n_rows, std::size_t dim,
                                 std::vector<double> concentrations)
    : n_rows_(n_rows), dim_(dim), conc_(std::move(concentrations)) {
  if (n_rows_ == 0 || dim_ == 0)
    throw InvalidSpec("DirichletFamily: empty shape");
  if (conc_.size() != n_rows_ * dim_)
    throw ShapeMismatch("DirichletFamily: concentration table shape mismatch");
  for (double a : conc_)
    if (!(a > 0.0) || !std::isfinite(a))
      throw InvalidDistribution("DirichletFamily: concentrations must be > 0");
}

std::span<const double> DirichletFamily::row(std::size_t r) const {
  if (r >= n_rows_) throw ShapeMismatch("DirichletFamily: row out of range");
  return {conc_.data() + r * dim_, dim_};
}

std::vector<double> DirichletFamily::mean_row(std::size_t r) const {
  auto alpha = row(r);
  double sum = std::accumulate(alpha.begin(), alpha.end(), 0.0);
  std::vector<double> mean(alpha.begin(), alpha.end());
  for (double& x : mean) x /= sum;
  return mean;
}

ElboReport model_elbo(const TransitionDataset& data,
                      const DirichletFamily& prior, const DirichletFamily& q) {
  data.validate();
  check_shapes(data, prior, "model_elbo: prior shape mismatch");
  check_shapes(data, q, "model_elbo: q shape mismatch");
  double exp_loglik = 0.0;
  auto counts = data.counts();
  for (std::size_t r = 0; r < q.n_rows(); ++r) {
    auto alpha = q.row(r);
    double a0 = std::accumulate(alpha.begin(), alpha.end(), 0.0);
    double psi_a0 = digamma(a0);
    for (std::size_t k = 0; k < q.dim(); ++k) {
      double c = counts[r * q.dim() + k];
      if (c > 0.0) exp_loglik += c * (digamma(alpha[k]) - psi_a0);
    }
  }
  double kl = 0.0;
  for (std::size_t r = 0; r < q.n_rows(); ++r)
    kl += dirichlet_kl(q.row(r), prior.row(r));
  return {exp_loglik - kl, exp_loglik, kl, 0};
}

FitResult fit_variational(const TransitionDataset& data,
                          const DirichletFamily& prior) {
  data.validate();
  check_shapes(data, prior, "fit_variational: prior shape mismatch");
  std::vector<double> conc(prior.flat().begin(), prior.flat().end());
  for (const auto& [s, a, s2] : data.tuples)
    conc[(s * data.n_actions + a) * data.n_states + s2] += 1.0;
  DirichletFamily posterior(prior.n_rows(), prior.dim(), std::move(conc));
  ElboReport report = model_elbo(data, prior, posterior);
  report.iteration = 1;  // conjugate: closed form in one step
  return {std::move(posterior), report};
}

double stochastic_elbo(const TransitionDataset& data,
                       const DirichletFamily& prior, const DirichletFamily& q,
                       std::span<const std::size_t> batch) {
  data.validate();
  check_shapes(data, prior, "stochastic_elbo: prior shape mismatch");
  check_shapes(data, q, "stochastic_elbo: q shape mismatch");
  if (batch.empty()) throw EmptyBatch("stochastic_elbo: empty batch");
  double batch_sum = 0.0;
  for (std::size_t i : batch) {
    if (i >= data.size())
      throw ShapeMismatch("stochastic_elbo: batch index out of range");
    const auto& [s, a, s2] = data.tuples[i];
    batch_sum += dirichlet_expected_log(q.row(s * data.n_actions + a), s2);
  }
  double scale =
      static_cast<double>(data.size()) / static_cast<double>(batch.size());
  double kl = 0.0;
  for (std::size_t r = 0; r < q.n_rows(); ++r)
    kl += dirichlet_kl(q.row(r), prior.row(r));
  return scale * batch_sum - kl;
}

double stochastic_elbo(const TransitionDataset& data,
                       const DirichletFamily& prior, const DirichletFamily& q,
                       std::size_t batch_size, Seed seed) {
  if (batch_size == 0 || batch_size > data.size())
    throw EmptyBatch("stochastic_elbo: bad batch size");
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(derive_stream(seed, "minibatch"));
  for (std::size_t i = 0; i < batch_size; ++i) {
    std::size_t j = i + rng.uniform_below(idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(batch_size);
  return stochastic_elbo(data, prior, q, idx);
}

std::size_t SequenceLaw::index_of(std::span<const std::size_t> seq) const {
  if (seq.size() != horizon) throw ShapeMismatch("SequenceLaw: length mismatch");
  std::size_t idx = 0;
  for (std::size_t x : seq) {
    if (x >= base) throw ShapeMismatch("SequenceLaw: symbol out of range");
    idx = idx * base + x;
  }
  return idx;
}

double SequenceLaw::prob(std::span<const std::size_t> seq) const {
  return probs[index_of(seq)];
}

SequenceLaw predict_states_exact(const DirichletFamily& q, std::size_t s0,
                                 std::span<const std::size_t> actions) {
  check_transition_family(q, "predict_states_exact: not a transition family");
  const std::size_t n_states = q.dim();
  const std::size_t n_actions = q.n_rows() / q.dim();
  if (actions.empty()) throw EmptyInput("predict_states_exact: no actions");
  if (s0 >= n_states)
    throw ShapeMismatch("predict_states_exact: s0 out of range");
  for (std::size_t a : actions)
    if (a >= n_actions)
      throw ShapeMismatch("predict_states_exact: action out of range");
  const std::size_t horizon = actions.size();
  double n_seqs_f = std::pow(static_cast<double>(n_states),
                             static_cast<double>(horizon));
  if (n_seqs_f > 1e6)
    throw TooLarge("predict_states_exact: sequence space exceeds guard");
  const std::size_t n_seqs = static_cast<std::size_t>(n_seqs_f);

  SequenceLaw law{horizon, n_states, std::vector<double>(n_seqs, 0.0)};
  std::vector<std::size_t> seq(horizon, 0);
  std::vector<double> row_counts(q.n_rows() * n_states);
  for (std::size_t idx = 0; idx < n_seqs; ++idx) {
    std::size_t rem = idx;
    for (std::size_t t = horizon; t-- > 0;) {
      seq[t] = rem % n_states;
      rem /= n_states;
    }
    // Per-row transition counts along this sequence.
    std::fill(row_counts.begin(), row_counts.end(), 0.0);
    std::size_t prev = s0;
    for (std::size_t t = 0; t < horizon; ++t) {
      row_counts[trans_row_index(q, prev, actions[t]) * n_states + seq[t]] += 1.0;
      prev = seq[t];
    }
    // E_q[prod theta^c] = B(alpha + c) / B(alpha) per independent row.
    double log_p = 0.0;
    for (std::size_t r = 0; r < q.n_rows(); ++r) {
      auto counts = std::span<const double>(row_counts)
                        .subspan(r * n_states, n_states);
      bool any = false;
      for (double c : counts)
        if (c > 0.0) any = true;
      if (!any) continue;
      auto alpha = q.row(r);
      std::vector<double> bumped(alpha.begin(), alpha.end());
      for (std::size_t k = 0; k < n_states; ++k) bumped[k] += counts[k];
      log_p += log_multivariate_beta(bumped) - log_multivariate_beta(alpha);
    }
    law.probs[idx] = std::exp(log_p);
  }
  return law;
}

std::vector<std::vector<std::size_t>> predict_states_sample(
    const DirichletFamily& q, std::size_t s0,
    std::span<const std::size_t> actions, std::size_t n_samples, Seed seed) {
  check_transition_family(q, "predict_states_sample: not a transition family");
  const std::size_t n_states = q.dim();
  const std::size_t n_actions = q.n_rows() / q.dim();
  if (actions.empty()) throw EmptyInput("predict_states_sample: no actions");
  if (s0 >= n_states)
    throw ShapeMismatch("predict_states_sample: s0 out of range");
  for (std::size_t a : actions)
    if (a >= n_actions)
      throw ShapeMismatch("predict_states_sample: action out of range");
  std::vector<std::vector<std::size_t>> out;
  out.reserve(n_samples);
  Rng rng(derive_stream(seed, "predict_states"));
  std::vector<std::vector<double>> theta(q.n_rows());
  for (std::size_t i = 0; i < n_samples; ++i) {
    // One parameter draw per rollout, held fixed along the sequence.
    for (std::size_t r = 0; r < q.n_rows(); ++r)
      theta[r] = rng.dirichlet(q.row(r));
    std::vector<std::size_t> seq(actions.size());
    std::size_t state = s0;
    for (std::size_t t = 0; t < actions.size(); ++t) {
      Categorical row(theta[trans_row_index(q, state, actions[t])]);
      state = sample_categorical(row, rng);
      seq[t] = state;
    }
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace dvi
