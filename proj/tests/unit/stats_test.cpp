#include "sizebench/stats.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "sizebench/errors.hpp"
#include "sizebench/rng.hpp"
#include "support/oracles.hpp"

namespace st = sizebench::stats;
namespace oracle = sizebench::test_oracles;

TEST_CASE("mean and standard deviation on hand-checked values") {
  const std::vector<double> x = {2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0};
  CHECK(st::mean(x) == doctest::Approx(5.0));
  CHECK(st::stdev(x, 0) == doctest::Approx(2.0));
  CHECK(st::stdev(x, 1) == doctest::Approx(std::sqrt(32.0 / 7.0)));
}

TEST_CASE("covariance matches the two-pass formula") {
  const std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
  const std::vector<double> y = {2.0, 4.0, 5.0, 9.0};
  // Deviations: x {-1.5,-0.5,0.5,1.5}, y {-3,-1,0,4}; cross sum = 11.
  CHECK(st::covariance(x, y, 1) == doctest::Approx(11.0 / 3.0));
  CHECK(st::covariance(x, y, 0) == doctest::Approx(11.0 / 4.0));
}

TEST_CASE("normal cdf agrees with the error function") {
  for (double x : {-6.0, -1.96, -0.5, 0.0, 0.3, 1.0, 2.575, 8.0}) {
    CHECK(st::normal_cdf(x) == doctest::Approx(oracle::normal_cdf(x)).epsilon(1e-14));
  }
  CHECK(st::normal_cdf(0.0) == doctest::Approx(0.5));
  CHECK(st::normal_cdf(1.96) == doctest::Approx(0.9750021048517795).epsilon(1e-12));
}

TEST_CASE("normal quantile inverts the cdf to high accuracy") {
  for (double p = 0.0005; p < 1.0; p += 0.0101) {
    const double q = st::normal_quantile(p);
    CHECK(q == doctest::Approx(oracle::normal_quantile(p)).epsilon(5e-12));
    CHECK(st::normal_cdf(q) == doctest::Approx(p).epsilon(1e-12));
  }
  CHECK(st::normal_quantile(0.95) == doctest::Approx(1.6448536269514722).epsilon(1e-13));
  CHECK(st::normal_quantile(0.05) == doctest::Approx(-1.6448536269514722).epsilon(1e-13));
  CHECK_THROWS_AS(st::normal_quantile(0.0), sizebench::DomainError);
  CHECK_THROWS_AS(st::normal_quantile(1.0), sizebench::DomainError);
}

TEST_CASE("regularized gamma halves sum to one") {
  for (double a : {0.5, 1.0, 2.5, 10.0, 50.0}) {
    for (double x : {0.01, 0.5, 1.0, 5.0, 40.0, 120.0}) {
      CHECK(st::gamma_p(a, x) + st::gamma_q(a, x) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  // P(1, x) = 1 - e^{-x} in closed form.
  for (double x : {0.1, 1.0, 3.0}) {
    CHECK(st::gamma_p(1.0, x) == doctest::Approx(1.0 - std::exp(-x)).epsilon(1e-13));
  }
}

TEST_CASE("chi-square survival function hits standard critical values") {
  CHECK(st::chi2_sf(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-10));
  CHECK(st::chi2_sf(5.991464547107979, 2) == doctest::Approx(0.05).epsilon(1e-10));
  CHECK(st::chi2_sf(7.814727903251179, 3) == doctest::Approx(0.05).epsilon(1e-10));
  CHECK(st::chi2_sf(6.634896601021213, 1) == doctest::Approx(0.01).epsilon(1e-10));
  CHECK(st::chi2_sf(0.0, 4) == doctest::Approx(1.0));
  CHECK(st::chi2_sf(-3.0, 4) == doctest::Approx(1.0));
}

TEST_CASE("chi-square survival for 2 dof has a closed form") {
  // k=2 reduces to exp(-x/2).
  for (double x : {0.2, 1.0, 4.5, 11.0}) {
    CHECK(st::chi2_sf(x, 2) == doctest::Approx(std::exp(-x / 2.0)).epsilon(1e-13));
  }
}

TEST_CASE("student t cdf and quantile are consistent") {
  CHECK(st::student_t_cdf(0.0, 7.0) == doctest::Approx(0.5));
  // Textbook two-sided 5% critical value for 10 dof.
  CHECK(st::student_t_quantile(0.975, 10.0) == doctest::Approx(2.228138851986273).epsilon(1e-9));
  // With one dof the distribution is Cauchy: F(1) = 3/4.
  CHECK(st::student_t_cdf(1.0, 1.0) == doctest::Approx(0.75).epsilon(1e-12));
  for (double p : {0.01, 0.2, 0.5, 0.77, 0.999}) {
    for (double df : {1.0, 4.0, 30.0}) {
      CHECK(st::student_t_cdf(st::student_t_quantile(p, df), df) ==
            doctest::Approx(p).epsilon(1e-9));
    }
  }
}

TEST_CASE("ks statistic equals the quadratic counting oracle") {
  sizebench::Rng rng(99);
  auto ref = [](double x) { return oracle::normal_cdf(x); };
  for (int n : {1, 2, 17, 100, 313}) {
    std::vector<double> sample;
    for (int i = 0; i < n; ++i) sample.push_back(rng.normal() * 1.3 + 0.2);
    const double fast = st::ks_statistic(sample, ref);
    const double slow = oracle::ks_statistic(sample, ref);
    CHECK(fast == doctest::Approx(slow).epsilon(1e-12));
    CHECK(fast >= 0.0);
    CHECK(fast <= 1.0);
  }
}

TEST_CASE("ks statistic with ties still matches the oracle") {
  const std::vector<double> sample = {0.5, 0.5, 0.5, -1.0, 2.0, 2.0};
  auto ref = [](double x) { return oracle::normal_cdf(x); };
  CHECK(st::ks_statistic(sample, ref) ==
        doctest::Approx(oracle::ks_statistic(sample, ref)).epsilon(1e-12));
}

TEST_CASE("raw uniform draws against the normal reference are rejected hard") {
  // Without standardization the location mismatch alone pushes the
  // statistic near one half.
  sizebench::Rng rng(3);
  std::vector<double> draws;
  for (int i = 0; i < 500; ++i) draws.push_back(rng.uniform());
  const double d = st::ks_statistic(draws, [](double x) { return st::normal_cdf(x); });
  CHECK(d > 0.3);
  CHECK(st::kolmogorov_pvalue(d, draws.size()) < 0.01);
}

TEST_CASE("kolmogorov p-value matches tabulated points") {
  // Q(1.0) from the standard Kolmogorov table.
  CHECK(st::kolmogorov_pvalue(1.0, 1) == doctest::Approx(0.26999967168735793).epsilon(1e-6));
  // The classic 5% point: Q(1.3581) ~ 0.05.
  CHECK(st::kolmogorov_pvalue(1.3581 / std::sqrt(100.0), 100) ==
        doctest::Approx(0.05).epsilon(2e-3));
  CHECK(st::kolmogorov_pvalue(1e-9, 50) == doctest::Approx(1.0));
  CHECK(st::kolmogorov_pvalue(0.99, 500) == doctest::Approx(0.0));
}

TEST_CASE("average ranks split ties evenly") {
  const std::vector<double> x = {10.0, 20.0, 20.0, 30.0};
  const std::vector<double> r = st::average_ranks(x);
  CHECK(r == std::vector<double>{1.0, 2.5, 2.5, 4.0});
}

TEST_CASE("pearson correlation on exact linear data") {
  const std::vector<double> x = {1.0, 2.0, 3.0, 4.0, 5.0};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 - 2.0 * v);
  CHECK(st::pearson_correlation(x, y) == doctest::Approx(-1.0).epsilon(1e-12));
  const std::vector<double> flat = {1.0, 1.0, 1.0, 1.0, 1.0};
  CHECK(std::isnan(st::pearson_correlation(x, flat)));
}

TEST_CASE("spearman correlation is invariant to monotone transforms") {
  sizebench::Rng rng(31);
  std::vector<double> x, y;
  for (int i = 0; i < 50; ++i) {
    const double v = rng.normal();
    x.push_back(v);
    y.push_back(std::exp(v));  // strictly increasing transform
  }
  CHECK(st::spearman_correlation(x, y) == doctest::Approx(1.0).epsilon(1e-12));
}
