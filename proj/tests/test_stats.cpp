#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "avalanche/rng.hpp"
#include "avalanche/stats.hpp"

using namespace avalanche;

TEST_CASE("chi-square tail values match tables") {
  CHECK(stats::chisq_pvalue(3.841, 1) == doctest::Approx(0.05).epsilon(0.001));
  CHECK(stats::chisq_pvalue(9.488, 4) == doctest::Approx(0.05).epsilon(0.001));
  CHECK(stats::chisq_pvalue(18.467, 4) == doctest::Approx(0.001).epsilon(0.01));
  CHECK(stats::chisq_pvalue(0.0, 3) == doctest::Approx(1.0));
}

TEST_CASE("gamma_q endpoints") {
  CHECK(stats::gamma_q(1.0, 0.0) == doctest::Approx(1.0));
  // Q(1, x) = exp(-x)
  CHECK(stats::gamma_q(1.0, 2.0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-10));
  CHECK(stats::gamma_q(0.5, 100.0) < 1e-10);
}

TEST_CASE("goodness-of-fit statistic is zero on exact proportions") {
  std::vector<uint64_t> counts = {20, 30, 50};
  std::vector<double> probs = {0.2, 0.3, 0.5};
  CHECK(stats::chisq_gof_stat(counts, probs) == doctest::Approx(0.0));
}

TEST_CASE("two-sample statistic on identical histograms") {
  std::vector<uint64_t> a = {10, 20, 30};
  int dof = 0;
  CHECK(stats::chisq_two_sample_stat(a, a, &dof) == doctest::Approx(0.0));
  CHECK(dof == 2);
}

TEST_CASE("KS accepts uniform data and rejects shifted data") {
  RngStream rng(1, 0);
  std::vector<double> u;
  for (int i = 0; i < 20000; ++i) u.push_back(rng.next_double());
  CHECK(stats::ks_uniform_pvalue(u) > 0.001);

  std::vector<double> biased;
  for (int i = 0; i < 20000; ++i) biased.push_back(std::pow(rng.next_double(), 1.2));
  CHECK(stats::ks_uniform_pvalue(biased) < 0.001);
}

TEST_CASE("weighted least squares recovers a line") {
  std::vector<double> x = {1, 2, 3, 4, 5};
  std::vector<double> y, w;
  for (double xi : x) {
    y.push_back(3.0 - 0.7 * xi);
    w.push_back(1.0 + xi);
  }
  auto fit = stats::weighted_least_squares(x, y, w);
  CHECK(fit.ok);
  CHECK(fit.slope == doctest::Approx(-0.7).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("mean-variance accumulator merges consistently") {
  RngStream rng(2, 0);
  stats::MeanVar all, left, right;
  for (int i = 0; i < 1000; ++i) {
    double v = rng.next_double() * 3.0;
    all.add(v);
    (i % 2 ? left : right).add(v);
  }
  left.merge(right);
  CHECK(left.n == all.n);
  CHECK(left.mean == doctest::Approx(all.mean).epsilon(1e-12));
  CHECK(left.variance() == doctest::Approx(all.variance()).epsilon(1e-10));
}
