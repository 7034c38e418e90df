#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "dvi/bandit.hpp"
#include "dvi/envs.hpp"
#include "dvi/errors.hpp"
#include "test_util.hpp"

using namespace dvi;

namespace {

BanditProblem random_bandit(Rng& rng, std::size_t n_states,
                            std::size_t n_actions) {
  return BanditProblem{
      testutil::random_full_support(rng, n_states),
      testutil::random_matrix(rng, n_states, n_actions, 0.0, 1.0)};
}

// Best objective over policies whose rows all sit on the simplex grid, for
// a fixed prior. Rows separate, so each state maximizes independently.
double grid_best_objective(const BanditProblem& p, const Categorical& pi0,
                           double beta, std::size_t k) {
  auto grid = testutil::simplex_grid_points(k, p.n_actions());
  double total = 0.0;
  for (std::size_t s = 0; s < p.n_states(); ++s) {
    double best = -1e300;
    for (const Categorical& row : grid) {
      double er = 0.0;
      for (std::size_t a = 0; a < p.n_actions(); ++a)
        er += row[a] * p.reward[s][a];
      best = std::max(best, er - beta * kl_divergence(row, pi0));
    }
    total += p.state_dist[s] * best;
  }
  return total;
}

}  // namespace

TEST_CASE("bandit elbo basics") {
  BanditProblem b1 = fixture_b1();
  Categorical uniform = Categorical::uniform(2);
  ConditionalTable broadcast(2, 2);  // rows = pi0 = uniform

  // Zero reward with pi = pi0 gives exactly zero.
  BanditProblem zero{Categorical::uniform(2), {{0.0, 0.0}, {0.0, 0.0}}};
  BanditTerms z = bandit_elbo(zero, uniform, broadcast, 1.0);
  CHECK(z.objective == 0.0);
  CHECK(z.kl_term == 0.0);

  // beta = 0 leaves only the expected reward.
  BanditTerms b0 = bandit_elbo(b1, uniform, broadcast, 0.0);
  CHECK(b0.objective == doctest::Approx(b0.reward_term));
  CHECK(b0.objective == doctest::Approx(0.5));

  // Greedy policy on the diagonal problem at beta = 1: 1 - ln 2.
  std::vector<Categorical> greedy_rows{Categorical::dirac(2, 0),
                                       Categorical::dirac(2, 1)};
  BanditTerms greedy =
      bandit_elbo(b1, uniform, ConditionalTable(greedy_rows), 1.0);
  CHECK(greedy.objective ==
        doctest::Approx(0.30685281944005469058).epsilon(1e-14));  // 1 - ln 2

  // Support violations surface as errors.
  Categorical holey({1.0, 0.0});
  CHECK_THROWS_AS(bandit_elbo(b1, holey, ConditionalTable(greedy_rows), 1.0),
                  SupportViolation);
}

TEST_CASE("soft policy closed form") {
  BanditProblem b1 = fixture_b1();
  Categorical uniform = Categorical::uniform(2);

  // R(s,.) = [1, 0] row with uniform prior at beta = 1: e/(1+e) on top.
  ConditionalTable pi = soft_policy(b1, uniform, 1.0);
  CHECK(pi.row(0)[0] == doctest::Approx(0.73105857863000487925).epsilon(1e-14));
  CHECK(pi.row(1)[1] == doctest::Approx(0.73105857863000487925).epsilon(1e-14));

  // Huge beta collapses to the prior.
  Categorical skew({0.7, 0.3});
  ConditionalTable lazy = soft_policy(b1, skew, 1e6);
  for (std::size_t s = 0; s < 2; ++s)
    for (std::size_t a = 0; a < 2; ++a)
      CHECK(std::abs(lazy.row(s)[a] - skew[a]) < 1e-5);

  // Constant rewards reproduce the prior exactly.
  BanditProblem flat{Categorical::uniform(2), {{0.4, 0.4}, {0.2, 0.2}}};
  ConditionalTable same = soft_policy(flat, skew, 1.0);
  for (std::size_t s = 0; s < 2; ++s)
    for (std::size_t a = 0; a < 2; ++a)
      CHECK(same.row(s)[a] == doctest::Approx(skew[a]).epsilon(1e-12));

  // beta = 0 is greedy with lowest-index ties.
  BanditProblem tie{Categorical::uniform(1), {{0.5, 0.5}}};
  ConditionalTable g = soft_policy(tie, Categorical::uniform(2), 0.0);
  CHECK(g.row(0)[0] == 1.0);
}

TEST_CASE("soft policy beats the rowwise grid") {
  Rng rng(Seed{41});
  for (int i = 0; i < 15; ++i) {
    std::size_t ns = 2 + rng.uniform_below(3);
    std::size_t na = 2 + rng.uniform_below(3);
    BanditProblem p = random_bandit(rng, ns, na);
    Categorical pi0 = Categorical::uniform(na);
    double beta = 0.5 + rng.uniform01();
    ConditionalTable star = soft_policy(p, pi0, beta);
    double star_obj = bandit_elbo(p, pi0, star, beta).objective;
    CHECK(star_obj >= grid_best_objective(p, pi0, beta, 100) - 1e-12);
  }
}

TEST_CASE("soft policy solution checked against fine grid search") {
  // The derived closed-form example, cross-checked at resolution 1e-3.
  BanditProblem b1 = fixture_b1();
  Categorical uniform = Categorical::uniform(2);
  ConditionalTable star = soft_policy(b1, uniform, 1.0);
  double star_obj = bandit_elbo(b1, uniform, star, 1.0).objective;
  double grid_obj = grid_best_objective(b1, uniform, 1.0, 1000);
  CHECK(star_obj >= grid_obj - 1e-12);
  CHECK(star_obj <= grid_obj + 1e-5);
}

TEST_CASE("reward and kl terms trade off monotonically in beta") {
  Rng rng(Seed{42});
  for (int i = 0; i < 10; ++i) {
    BanditProblem p = random_bandit(rng, 3, 3);
    Categorical pi0 = Categorical::uniform(3);
    double prev_reward = -1e300, prev_kl = -1e300;
    for (double beta : {10.0, 1.0, 0.1, 0.01}) {
      ConditionalTable pi = soft_policy(p, pi0, beta);
      BanditTerms t = bandit_elbo(p, pi0, pi, beta);
      CHECK(t.reward_term >= prev_reward - 1e-12);
      CHECK(t.kl_term >= prev_kl - 1e-12);
      prev_reward = t.reward_term;
      prev_kl = t.kl_term;
    }
  }
}

TEST_CASE("argmax invariance at small beta") {
  Rng rng(Seed{43});
  for (int i = 0; i < 20; ++i) {
    BanditProblem p = random_bandit(rng, 3, 3);
    // Enforce unique rowwise maxima separated by at least 0.1.
    for (std::size_t s = 0; s < 3; ++s) {
      std::size_t top = s % 3;
      p.reward[s][top] = 1.5 + 0.2 * static_cast<double>(s);
    }
    ConditionalTable pi = soft_policy(p, Categorical::uniform(3), 1e-3);
    for (std::size_t s = 0; s < 3; ++s) {
      std::size_t greedy = 0;
      for (std::size_t a = 1; a < 3; ++a)
        if (p.reward[s][a] > p.reward[s][greedy]) greedy = a;
      CHECK(pi.row(s).argmax() == greedy);
    }
  }
}

TEST_CASE("bandit log partition") {
  BanditProblem zero{Categorical::uniform(2), {{0.0, 0.0}, {0.0, 0.0}}};
  CHECK(bandit_log_partition(zero) == doctest::Approx(std::log(4.0)).epsilon(1e-14));

  BanditProblem c{Categorical::uniform(2), {{1.3, 1.3}, {1.3, 1.3}}};
  CHECK(bandit_log_partition(c) ==
        doctest::Approx(1.3 + std::log(4.0)).epsilon(1e-14));

  CHECK(bandit_log_partition(fixture_b1()) ==
        doctest::Approx(2.0064088680781681435).epsilon(1e-14));  // ln(2+2e)
}

TEST_CASE("exact inference consistency via enumeration") {
  // With the normalized likelihood, ELBO <= ln p(o=1) and the gap is
  // KL(q(tau) || p(tau|o=1)); everything is enumerable here.
  Rng rng(Seed{44});
  for (int i = 0; i < 25; ++i) {
    BanditProblem p = random_bandit(rng, 2, 3);
    Categorical pi0 = testutil::random_full_support(rng, 3);
    ConditionalTable pi(2, 3);
    {
      std::vector<Categorical> rows;
      for (std::size_t s = 0; s < 2; ++s)
        rows.push_back(testutil::random_full_support(rng, 3));
      pi = ConditionalTable(std::move(rows));
    }
    double log_z = bandit_log_partition(p);
    double exact_elbo =
        bandit_elbo(p, pi0, pi, 1.0).objective - log_z;

    // Evidence and posterior by direct (s, a) enumeration.
    double evidence = 0.0;
    for (std::size_t s = 0; s < 2; ++s)
      for (std::size_t a = 0; a < 3; ++a)
        evidence +=
            p.state_dist[s] * pi0[a] * std::exp(p.reward[s][a] - log_z);
    double log_evidence = std::log(evidence);
    CHECK(exact_elbo <= log_evidence + 1e-12);

    double kl = 0.0;
    for (std::size_t s = 0; s < 2; ++s)
      for (std::size_t a = 0; a < 3; ++a) {
        double q_sa = p.state_dist[s] * pi.row(s)[a];
        double post_sa = p.state_dist[s] * pi0[a] *
                         std::exp(p.reward[s][a] - log_z) / evidence;
        if (q_sa > 0.0) kl += q_sa * std::log(q_sa / post_sa);
      }
    CHECK(std::abs((log_evidence - exact_elbo) - kl) < 1e-10);
  }
}

TEST_CASE("blahut arimoto fixed point") {
  // State-independent rewards: nothing about s is worth encoding.
  BanditProblem flat{Categorical::uniform(3),
                     {{0.9, 0.1, 0.3}, {0.9, 0.1, 0.3}, {0.9, 0.1, 0.3}}};
  BlahutArimotoResult r = blahut_arimoto(flat, 1.0, 1e-10, 1000);
  CHECK(r.converged);
  for (std::size_t s = 0; s < 3; ++s)
    for (std::size_t a = 0; a < 3; ++a) {
      CHECK(r.solution.policy.row(s)[a] ==
            doctest::Approx(r.solution.policy.row(0)[a]).epsilon(1e-10));
      CHECK(r.solution.policy.row(s)[a] ==
            doctest::Approx(r.solution.prior[a]).epsilon(1e-8));
    }

  // Large beta: the policy collapses to a state-independent one.
  BanditProblem b1 = fixture_b1();
  BlahutArimotoResult lazy = blahut_arimoto(b1, 1e4, 1e-12, 1000);
  CHECK(lazy.solution.kl_term < 1e-6);

  // Objective trace never decreases; the prior matches the marginal.
  Rng rng(Seed{45});
  for (int i = 0; i < 20; ++i) {
    BanditProblem p = random_bandit(rng, 3, 3);
    BlahutArimotoResult res = blahut_arimoto(p, 1.0, 1e-10, 10000);
    CHECK(res.converged);
    for (std::size_t k = 1; k < res.trace.size(); ++k)
      CHECK(res.trace[k].objective >= res.trace[k - 1].objective - 1e-12);
    Categorical marg = action_marginal(p.state_dist, res.solution.policy);
    for (std::size_t a = 0; a < 3; ++a)
      CHECK(std::abs(marg[a] - res.solution.prior[a]) < 1e-8);
  }
}

TEST_CASE("blahut arimoto against joint grid search") {
  // 2x2 diagonal problem at beta = 1: scan pi0 on a 1e-3 grid; for each
  // pi0 the best policy factorizes per state over the same grid.
  BanditProblem b1 = fixture_b1();
  double best = -1e300;
  auto grid = testutil::simplex_grid_points(1000, 2);
  for (const Categorical& pi0 : grid) {
    if (pi0[0] == 0.0 || pi0[1] == 0.0) continue;
    best = std::max(best, grid_best_objective(b1, pi0, 1.0, 1000));
  }
  BlahutArimotoResult r = blahut_arimoto(b1, 1.0, 1e-12, 10000);
  CHECK(r.solution.objective >= best - 1e-12);
  CHECK(r.solution.objective <= best + 1e-5);
}

TEST_CASE("blahut arimoto not converged carries best so far") {
  Rng rng(Seed{46});
  BanditProblem p = random_bandit(rng, 3, 3);
  try {
    blahut_arimoto(p, 1.0, 1e-16, 2);
    FAIL("expected BanditNotConverged");
  } catch (const BanditNotConverged& e) {
    CHECK(e.best().iterations == 2);
    CHECK(e.best().trace.size() == 2);
    CHECK_FALSE(e.best().converged);
  }
}
