#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <map>

#include "doctest.h"
#include "dvi/errors.hpp"
#include "dvi/prob.hpp"
#include "dvi/rng.hpp"
#include "test_util.hpp"

using namespace dvi;

TEST_CASE("categorical construction and renormalization") {
  Categorical c({0.25, 0.75});
  CHECK(c[0] == doctest::Approx(0.25));
  CHECK(c.size() == 2);

  // Tiny deviation renormalizes; gross deviation fails.
  Categorical noisy({0.5, 0.5 + 5e-10});
  double sum = noisy[0] + noisy[1];
  CHECK(std::abs(sum - 1.0) < 1e-12);
  CHECK_THROWS_AS(Categorical({0.5, 0.6}), InvalidDistribution);
  CHECK_THROWS_AS(Categorical({1.2, -0.2}), InvalidDistribution);
  CHECK_THROWS_AS(Categorical(std::vector<double>{}), InvalidDistribution);
}

TEST_CASE("kl divergence basics") {
  Categorical half({0.5, 0.5});
  CHECK(kl_divergence(half, half) == 0.0);

  Categorical dirac = Categorical::dirac(2, 0);
  CHECK(kl_divergence(dirac, half) == doctest::Approx(std::log(2.0)).epsilon(1e-14));

  // Frozen term-by-term summation at 40 digits.
  Categorical q({0.2, 0.8});
  Categorical p({0.7, 0.3});
  CHECK(kl_divergence(q, p) ==
        doctest::Approx(0.53411080871030739035).epsilon(1e-14));

  CHECK_THROWS_AS(kl_divergence(half, dirac), SupportViolation);
}

TEST_CASE("kl divergence is nonnegative and zero only at equality") {
  Rng rng(Seed{11});
  for (int i = 0; i < 300; ++i) {
    std::size_t n = 2 + rng.uniform_below(5);
    Categorical q = testutil::random_simplex(rng, n);
    Categorical p = testutil::random_full_support(rng, n);
    double kl = kl_divergence(q, p);
    CHECK(kl >= 0.0);
    double max_diff = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      max_diff = std::max(max_diff, std::abs(q[k] - p[k]));
    if (kl == 0.0) CHECK(max_diff < 1e-12);
    if (max_diff < 1e-14) CHECK(kl < 1e-12);
  }
}

TEST_CASE("log_sum_exp") {
  std::vector<double> single{0.0};
  CHECK(log_sum_exp(single) == 0.0);

  std::vector<double> same(7, 3.25);
  CHECK(log_sum_exp(same) == doctest::Approx(3.25 + std::log(7.0)).epsilon(1e-14));

  // Shift-by-max identity keeps huge inputs finite.
  std::vector<double> big{1000.0, 1000.5};
  CHECK(log_sum_exp(big) ==
        doctest::Approx(1000.974076984180106681).epsilon(1e-15));

  CHECK_THROWS_AS(log_sum_exp(std::vector<double>{}), EmptyInput);
}

TEST_CASE("log_sum_exp permutation and shift invariance") {
  Rng rng(Seed{12});
  for (int i = 0; i < 200; ++i) {
    std::size_t n = 1 + rng.uniform_below(6);
    std::vector<double> xs(n);
    for (double& x : xs) x = -5.0 + 10.0 * rng.uniform01();
    double base = log_sum_exp(xs);

    std::vector<double> perm(xs.rbegin(), xs.rend());
    CHECK(log_sum_exp(perm) == doctest::Approx(base).epsilon(1e-12));

    double c = -3.0 + 6.0 * rng.uniform01();
    std::vector<double> shifted = xs;
    for (double& x : shifted) x += c;
    CHECK(log_sum_exp(shifted) == doctest::Approx(base + c).epsilon(1e-12));
  }
}

TEST_CASE("from_log_weights always yields a valid categorical") {
  Rng rng(Seed{13});
  for (int i = 0; i < 200; ++i) {
    std::size_t n = 1 + rng.uniform_below(5);
    std::vector<double> logw(n);
    for (double& x : logw) x = -700.0 + 1400.0 * rng.uniform01();
    Categorical c = Categorical::from_log_weights(logw);
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      CHECK(c[k] >= 0.0);
      sum += c[k];
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("sample_categorical dirac and determinism") {
  Categorical dirac({1.0, 0.0, 0.0});
  CHECK(sample_categorical(dirac, Seed{99}) == 0);
  CHECK(sample_categorical(dirac, Seed{12345}) == 0);

  Categorical half({0.5, 0.5});
  CHECK(sample_categorical(half, Seed{7}) == sample_categorical(half, Seed{7}));
}

TEST_CASE("sample_categorical frequencies") {
  Categorical half({0.5, 0.5});
  Rng rng(Seed{2024});
  int zeros = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i)
    if (sample_categorical(half, rng) == 0) ++zeros;
  CHECK(std::abs(zeros / static_cast<double>(n) - 0.5) < 0.01);

  // Zero-probability indices never appear.
  Categorical holey({0.5, 0.0, 0.5});
  for (int i = 0; i < 1000; ++i) CHECK(sample_categorical(holey, rng) != 1);
}

TEST_CASE("rng streams and reproducibility") {
  Seed a = derive_stream(Seed{1}, "alpha");
  Seed b = derive_stream(Seed{1}, "beta");
  Seed a2 = derive_stream(Seed{1}, "alpha");
  CHECK(a.value == a2.value);
  CHECK(a.value != b.value);
  CHECK(derive_stream(Seed{1}, "x", 0).value != derive_stream(Seed{1}, "x", 1).value);

  Rng r1(Seed{5}), r2(Seed{5});
  for (int i = 0; i < 10; ++i) CHECK(r1.next_u64() == r2.next_u64());
}

TEST_CASE("rng gamma and dirichlet sanity") {
  Rng rng(Seed{31337});
  // Gamma(k) has mean k; loose Monte Carlo check.
  double sum = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) sum += rng.gamma(2.5);
  CHECK(sum / n == doctest::Approx(2.5).epsilon(0.05));

  std::vector<double> alpha{1.0, 2.0, 3.0};
  std::vector<double> mean(3, 0.0);
  for (int i = 0; i < n; ++i) {
    auto draw = rng.dirichlet(alpha);
    for (int k = 0; k < 3; ++k) mean[k] += draw[k];
  }
  for (int k = 0; k < 3; ++k)
    CHECK(mean[k] / n == doctest::Approx(alpha[k] / 6.0).epsilon(0.05));
}
