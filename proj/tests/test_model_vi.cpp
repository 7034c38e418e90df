#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <map>

#include "doctest.h"
#include "dvi/errors.hpp"
#include "dvi/model_vi.hpp"
#include "dvi/special.hpp"
#include "test_util.hpp"

using namespace dvi;

namespace {

// Closed-form log evidence sum_rows [ln B(gamma + counts) - ln B(gamma)],
// assembled here with lgamma only (independent of the digamma ELBO path).
double log_evidence_oracle(const TransitionDataset& data,
                           const DirichletFamily& prior) {
  auto counts = data.counts();
  double total = 0.0;
  for (std::size_t r = 0; r < prior.n_rows(); ++r) {
    auto gamma = prior.row(r);
    double lg_num = 0.0, sum_num = 0.0, lg_den = 0.0, sum_den = 0.0;
    for (std::size_t k = 0; k < prior.dim(); ++k) {
      double c = counts[r * prior.dim() + k];
      lg_num += std::lgamma(gamma[k] + c);
      sum_num += gamma[k] + c;
      lg_den += std::lgamma(gamma[k]);
      sum_den += gamma[k];
    }
    total += (lg_num - std::lgamma(sum_num)) - (lg_den - std::lgamma(sum_den));
  }
  return total;
}

TransitionDataset random_dataset(Rng& rng, std::size_t ns, std::size_t na,
                                 std::size_t n_tuples) {
  TransitionDataset d;
  d.n_states = ns;
  d.n_actions = na;
  for (std::size_t i = 0; i < n_tuples; ++i)
    d.tuples.push_back({rng.uniform_below(ns), rng.uniform_below(na),
                        rng.uniform_below(ns)});
  return d;
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  double tv = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) tv += std::abs(p[i] - q[i]);
  return 0.5 * tv;
}

}  // namespace

TEST_CASE("model elbo base cases") {
  TransitionDataset empty{2, 1, {}};
  DirichletFamily prior(2, 2, 1.0);
  ElboReport r = model_elbo(empty, prior, prior);
  CHECK(r.elbo == 0.0);
  CHECK(r.kl == 0.0);

  // One observed tuple at q = prior: the digamma difference.
  TransitionDataset one{2, 1, {{0, 0, 1}}};
  ElboReport r1 = model_elbo(one, prior, prior);
  CHECK(r1.elbo ==
        doctest::Approx(digamma(1.0) - digamma(2.0)).epsilon(1e-14));

  // Three copies of (0,0,->1) under a flat prior: evidence is the Polya
  // sequence (1/2)(2/3)(3/4) = 1/4 and the conjugate gap vanishes.
  TransitionDataset three{2, 1, {{0, 0, 1}, {0, 0, 1}, {0, 0, 1}}};
  FitResult fit = fit_variational(three, prior);
  CHECK(fit.report.elbo ==
        doctest::Approx(-1.3862943611198906188).epsilon(1e-13));  // -ln 4
  CHECK(std::abs(fit.report.elbo - (-std::log(4.0))) < 1e-12);
}

TEST_CASE("fit_variational is the conjugate update") {
  DirichletFamily prior(6, 3, 0.7);
  TransitionDataset empty{3, 2, {}};
  FitResult none = fit_variational(empty, prior);
  CHECK(none.report.elbo == 0.0);
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t k = 0; k < 3; ++k)
      CHECK(none.posterior.at(r, k) == 0.7);

  TransitionDataset one{3, 2, {{1, 0, 2}}};
  FitResult inc = fit_variational(one, prior);
  CHECK(inc.posterior.at(1 * 2 + 0, 2) == doctest::Approx(1.7));
  CHECK(inc.posterior.at(0, 0) == 0.7);
}

TEST_CASE("conjugate exactness on random datasets") {
  Rng rng(Seed{71});
  for (int i = 0; i < 30; ++i) {
    TransitionDataset data = random_dataset(rng, 3, 2, 50);
    // Random positive prior concentrations.
    std::vector<double> conc(3 * 2 * 3);
    for (double& c : conc) c = 0.2 + 2.0 * rng.uniform01();
    DirichletFamily prior(6, 3, conc);
    FitResult fit = fit_variational(data, prior);
    CHECK(std::abs(fit.report.elbo - log_evidence_oracle(data, prior)) < 1e-10);
    // Posterior concentrations equal prior + counts exactly.
    auto counts = data.counts();
    for (std::size_t r = 0; r < 6; ++r)
      for (std::size_t k = 0; k < 3; ++k)
        CHECK(fit.posterior.at(r, k) ==
              doctest::Approx(prior.at(r, k) + counts[r * 3 + k]));
    // Any other q is strictly worse (ELBO maximality of the exact posterior).
    std::vector<double> other(conc);
    for (double& c : other) c += rng.uniform01();
    DirichletFamily q(6, 3, other);
    CHECK(model_elbo(data, prior, q).elbo <= fit.report.elbo + 1e-10);
  }
}

TEST_CASE("order and policy invariance") {
  Rng rng(Seed{72});
  TransitionDataset data = random_dataset(rng, 3, 2, 40);
  DirichletFamily prior(6, 3, 1.0);
  FitResult base = fit_variational(data, prior);
  double base_elbo = model_elbo(data, prior, base.posterior).elbo;

  // Permuting the tuple multiset changes nothing, bit for bit.
  TransitionDataset shuffled = data;
  std::reverse(shuffled.tuples.begin(), shuffled.tuples.end());
  FitResult perm = fit_variational(shuffled, prior);
  CHECK(model_elbo(shuffled, prior, perm.posterior).elbo == base_elbo);
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t k = 0; k < 3; ++k)
      CHECK(perm.posterior.at(r, k) == base.posterior.at(r, k));

  // Datasets with identical counts give identical posteriors no matter
  // which behavior produced them.
  TransitionDataset source{3, 2, {}};
  TransitionDataset relabeled{3, 2, {}};
  for (int i = 0; i < 30; ++i) {
    auto t = data.tuples[i % data.tuples.size()];
    source.tuples.push_back(t);
    relabeled.tuples.insert(relabeled.tuples.begin(), t);
  }
  FitResult a = fit_variational(source, prior);
  FitResult b = fit_variational(relabeled, prior);
  for (std::size_t r = 0; r < 6; ++r)
    for (std::size_t k = 0; k < 3; ++k)
      CHECK(a.posterior.at(r, k) == b.posterior.at(r, k));
}

TEST_CASE("stochastic elbo estimator") {
  Rng rng(Seed{73});
  TransitionDataset data = random_dataset(rng, 2, 2, 5);
  DirichletFamily prior(4, 2, 1.0);
  std::vector<double> qc(8);
  for (double& c : qc) c = 0.5 + 3.0 * rng.uniform01();
  DirichletFamily q(4, 2, qc);
  double full = model_elbo(data, prior, q).elbo;

  std::vector<std::size_t> all{0, 1, 2, 3, 4};
  CHECK(stochastic_elbo(data, prior, q, all) ==
        doctest::Approx(full).epsilon(1e-12));

  TransitionDataset same{2, 2, {{1, 1, 0}, {1, 1, 0}, {1, 1, 0}}};
  double full_same = model_elbo(same, prior, q).elbo;
  std::vector<std::size_t> b1{2};
  CHECK(stochastic_elbo(same, prior, q, b1) ==
        doctest::Approx(full_same).epsilon(1e-12));

  // All size-2 batches average back to the full ELBO.
  double acc = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = i + 1; j < 5; ++j) {
      std::vector<std::size_t> batch{i, j};
      acc += stochastic_elbo(data, prior, q, batch);
      ++count;
    }
  CHECK(acc / count == doctest::Approx(full).epsilon(1e-10));

  CHECK_THROWS_AS(stochastic_elbo(data, prior, q, std::vector<std::size_t>{}),
                  EmptyBatch);
}

TEST_CASE("predict states exact mode") {
  // T* = 1: the exact law is the posterior-mean row.
  std::vector<double> conc{2.0, 6.0, 1.0, 1.0, 3.0, 3.0, 1.0, 1.0};
  DirichletFamily q(4, 2, conc);  // 2 states x 2 actions
  std::vector<std::size_t> one_step{0};
  SequenceLaw law = predict_states_exact(q, 0, one_step);
  CHECK(law.probs[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(law.probs[1] == doctest::Approx(0.75).epsilon(1e-12));

  // Laws normalize.
  std::vector<std::size_t> two_steps{0, 1};
  SequenceLaw law2 = predict_states_exact(q, 0, two_steps);
  double total = 0.0;
  for (double p : law2.probs) total += p;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

  // Guard trips on long horizons.
  std::vector<std::size_t> deep(25, 0);
  DirichletFamily wide(12, 4, 1.0);  // 3 states
  CHECK_THROWS_AS(predict_states_exact(wide, 0, deep), TooLarge);
}

TEST_CASE("theta coupling: exact sequence law vs naive per-step chaining") {
  // Single action, sparse row Dir(0.5, 0.5) from state 0, revisited when
  // the chain stays at 0. Exact 2-step law couples both steps through the
  // shared draw; chaining posterior means does not.
  std::vector<double> conc{0.5, 0.5, 1e6, 1e6};  // rows: from 0, from 1
  DirichletFamily q(2, 2, conc);                 // 2 states x 1 action
  std::vector<std::size_t> actions{0, 0};
  SequenceLaw exact = predict_states_exact(q, 0, actions);

  // Naive law: product of one-step posterior-mean transitions.
  std::vector<std::vector<double>> mean{q.mean_row(0), q.mean_row(1)};
  std::vector<double> naive(4, 0.0);
  for (std::size_t s1 = 0; s1 < 2; ++s1)
    for (std::size_t s2 = 0; s2 < 2; ++s2)
      naive[s1 * 2 + s2] = mean[0][s1] * mean[s1][s2];

  // E[theta0^2] = 0.375 vs 0.25 for the mean chain.
  std::vector<std::size_t> seq00{0, 0};
  CHECK(exact.prob(seq00) == doctest::Approx(0.375).epsilon(1e-9));
  CHECK(total_variation(exact.probs, naive) > 0.01);
}

TEST_CASE("predict states sampling agrees with the exact law") {
  std::vector<double> conc{0.5, 0.5, 2.0, 5.0};
  DirichletFamily q(2, 2, conc);
  std::vector<std::size_t> actions{0, 0};
  SequenceLaw exact = predict_states_exact(q, 0, actions);

  const std::size_t n = 100000;
  auto seqs = predict_states_sample(q, 0, actions, n, Seed{2030});
  std::vector<double> freq(4, 0.0);
  for (const auto& s : seqs) freq[s[0] * 2 + s[1]] += 1.0 / n;
  CHECK(total_variation(exact.probs, freq) < 0.01);

  // Near-Dirac posterior on a deterministic cycle: every rollout equal.
  std::vector<double> hard{1e-8, 1e8, 1e8, 1e-8};  // 0 -> 1 -> 0
  DirichletFamily dirac(2, 2, hard);
  auto rolled = predict_states_sample(dirac, 0, actions, 200, Seed{4});
  for (const auto& s : rolled) {
    CHECK(s[0] == 1);
    CHECK(s[1] == 0);
  }

  // Determinism contract.
  auto again = predict_states_sample(q, 0, actions, 50, Seed{2030});
  auto again2 = predict_states_sample(q, 0, actions, 50, Seed{2030});
  CHECK(again == again2);
}

TEST_CASE("posterior concentrates on the generator") {
  // Draw data from a known row and watch the posterior mean approach it.
  const std::vector<double> truth{0.8, 0.15, 0.05};
  auto run = [&](std::size_t n, Seed seed) {
    Rng rng(seed);
    Categorical row(truth);
    TransitionDataset d{3, 1, {}};
    for (std::size_t i = 0; i < n; ++i)
      d.tuples.push_back({0, 0, sample_categorical(row, rng)});
    DirichletFamily prior(3, 3, 1.0);
    FitResult fit = fit_variational(d, prior);
    auto mean = fit.posterior.mean_row(0);
    return total_variation(mean, truth);
  };
  double err_small = run(100, Seed{81});
  double err_big = run(10000, Seed{82});
  CHECK(err_big < err_small);
  CHECK(err_big < 0.02);  // ~1/sqrt(10000) scale
}
