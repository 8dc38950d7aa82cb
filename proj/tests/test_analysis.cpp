#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "avalanche/analysis.hpp"
#include "avalanche/sampler.hpp"
#include "avalanche/stats.hpp"
#include "test_util.hpp"

using namespace avalanche;

TEST_CASE("green_exact small cases") {
  Lattice single = make_box(2, 0, 1.0);
  CHECK(green_exact(single).at(0, 0) == doctest::Approx(0.2));

  Lattice pair = testutil::make_rect({2}, 1.0);
  GreenTable g = green_exact(pair);
  CHECK(g.at(0, 0) == doctest::Approx(3.0 / 8.0));
  CHECK(g.at(0, 1) == doctest::Approx(1.0 / 8.0));
  CHECK(g.at(1, 0) == doctest::Approx(1.0 / 8.0));
  CHECK(g.at(1, 1) == doctest::Approx(3.0 / 8.0));
}

TEST_CASE("green residual and symmetry") {
  Lattice box = make_box(2, 1, 0.25);
  GreenTable g = green_exact(box);
  TopplingMatrix m(box);
  int n = box->size();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      CHECK(g.at(i, j) == doctest::Approx(g.at(j, i)).epsilon(1e-12));
      CHECK(g.at(i, j) >= 0.0);
      double entry = 0.0;
      for (int k = 0; k < n; ++k) entry += m.at(i, k) * g.at(k, j);
      CHECK(std::fabs(entry - (i == j ? 1.0 : 0.0)) < 1e-10);
    }
  }
}

TEST_CASE("green_column agrees with the dense inverse") {
  Lattice box = make_box(1, 3, 0.5);
  GreenTable g = green_exact(box);
  auto col = green_column(box, 2);
  for (int i = 0; i < box->size(); ++i)
    CHECK(col[static_cast<size_t>(i)] == doctest::Approx(g.at(i, 2)).epsilon(1e-9));
}

TEST_CASE("green monotone in the volume") {
  Lattice small = make_box(2, 1, 0.5);
  Lattice big = make_box(2, 2, 0.5);
  GreenTable gs = green_exact(small);
  GreenTable gb = green_exact(big);
  for (int i = 0; i < small->size(); ++i)
    for (int j = 0; j < small->size(); ++j) {
      int bi = big->site_at(small->point(i));
      int bj = big->site_at(small->point(j));
      CHECK(gs.at(i, j) <= gb.at(bi, bj) + 1e-12);
    }
}

TEST_CASE("green_infinite dominated by the lazy term at huge gamma") {
  double g = green_infinite(1, 1e6, {0}, green_series_depth(1, 1e6, {0}));
  CHECK(std::fabs(g - 1.0 / (2.0 + 1e6)) < 1e-9);
}

TEST_CASE("green_infinite matches a large box in d=1") {
  Lattice line = make_box(1, 60, 1.0);
  GreenTable g = green_exact(line);
  int center = line->site_at({0});
  int depth = green_series_depth(1, 1.0, {5});
  for (int k = 0; k <= 5; ++k) {
    double série = green_infinite(1, 1.0, {k}, depth);
    double box = g.at(center, line->site_at({k}));
    CHECK(std::fabs(série - box) < 1e-6);
  }
}

TEST_CASE("green_infinite insufficient truncation is refused") {
  CHECK_THROWS_AS(green_infinite(1, 1.0, {0}, 10), std::runtime_error);
  try {
    green_infinite(1, 1.0, {0}, 10);
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("need at least") != std::string::npos);
  }
}

TEST_CASE("green_infinite d=3 series agrees with a box solve") {
  int depth = green_series_depth(3, 2.0, {1, 0, 0});
  double series = green_infinite(3, 2.0, {1, 0, 0}, depth);
  Lattice box = make_box(3, 7, 2.0);
  auto col = green_column(box, box->site_at({0, 0, 0}));
  double exact = col[static_cast<size_t>(box->site_at({1, 0, 0}))];
  CHECK(series == doctest::Approx(exact).epsilon(1e-5));
}

TEST_CASE("massive green decay rate doubles between gamma and 4 gamma") {
  // windows scaled by the correlation length 1/sqrt(gamma)
  auto rate = [](double gamma, const std::vector<int>& rs) {
    int depth = green_series_depth(2, gamma, {rs.back(), 0});
    std::vector<double> xs, ys, ws;
    for (int r : rs) {
      xs.push_back(r);
      ys.push_back(-std::log(green_infinite(2, gamma, {r, 0}, depth)));
      ws.push_back(1.0);
    }
    return stats::weighted_least_squares(xs, ys, ws).slope;
  };
  double r1 = rate(0.01, {10, 15, 20});
  double r4 = rate(0.04, {5, 8, 10});
  CHECK(r4 / r1 > 1.6);
  CHECK(r4 / r1 < 2.4);
}

TEST_CASE("dhar single site") {
  Lattice single = make_box(2, 0, 1.0);
  DharCheck c = check_dhar(single, 0, 0, 20000, 77);
  CHECK(c.exact == doctest::Approx(0.2));
  CHECK(std::fabs(c.estimate - c.exact) <= 3.0 * c.stderr_);
}

TEST_CASE("dhar pair lattice off-diagonal") {
  Lattice pair = testutil::make_rect({2}, 1.0);
  DharCheck c = check_dhar(pair, 0, 1, 30000, 78);
  CHECK(c.exact == doctest::Approx(1.0 / 8.0));
  CHECK(std::fabs(c.estimate - c.exact) <= 3.0 * c.stderr_);
}

TEST_CASE("markov bound P(n >= 1) <= G") {
  Lattice pair = testutil::make_rect({2}, 0.5);
  // estimate the hit probability directly
  RngStream rng(79, 0);
  Toppler top(pair);
  uint64_t hits = 0;
  const uint64_t trials = 30000;
  for (uint64_t i = 0; i < trials; ++i) {
    HeightConfig h = sample_m(pair, rng);
    h.h[0] += 1.0;
    top.run(h.h);
    if (top.counts()[1] >= 1) ++hits;
  }
  double p = static_cast<double>(hits) / static_cast<double>(trials);
  double se = std::sqrt(p * (1 - p) / static_cast<double>(trials));
  double bound = green_exact(pair).at(0, 1);
  CHECK(p <= bound + 3.0 * se);
}

TEST_CASE("dhar_table covers all pairs") {
  Lattice box = make_box(1, 1, 1.0);
  DharTable t = dhar_table(box, 20000, 80);
  int n = box->size();
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y) {
      size_t idx = static_cast<size_t>(x) * static_cast<size_t>(n) + static_cast<size_t>(y);
      CHECK(std::fabs(t.estimate[idx] - t.exact[idx]) <= 3.0 * std::max(t.se[idx], 1e-12));
    }
}

TEST_CASE("max height kernel fixes the single-site probability") {
  Lattice single = make_box(2, 0, 1.0);
  GreenTable k = max_height_kernel(single);
  CHECK(k.at(0, 0) == doctest::Approx(0.2));
}

TEST_CASE("determinantal identity against enumeration") {
  for (double g : {0.25, 1.0}) {
    for (const Lattice& spec : testutil::small_specs(4, g)) {
      GreenTable kernel = max_height_kernel(spec);
      const int n = spec->size();
      const int top = 2 * spec->dim();
      // joint maximal-height probabilities for every site subset
      for (uint32_t mask = 1; mask < (1u << n); ++mask) {
        std::vector<int> sites;
        for (int s = 0; s < n; ++s)
          if (mask & (1u << s)) sites.push_back(s);
        double num = 0.0, den = 0.0;
        enumerate_allowed(spec, [&](const DiscreteConfig& c) {
          int nmax = 0;
          for (int v : c.v)
            if (v == top) ++nmax;
          double w = 1.0;
          for (int i = 0; i < nmax; ++i) w *= g;
          den += w;
          bool all = true;
          for (int s : sites)
            if (c.v[static_cast<size_t>(s)] != top) all = false;
          if (all) num += w;
        });
        double exact = num / den;
        double det = kernel_joint_probability(kernel, sites);
        CHECK(std::fabs(det - exact) <= 1e-9);
      }
    }
  }
}

TEST_CASE("pair lattice two-site joint probability is 1/8") {
  Lattice pair = testutil::make_rect({2}, 1.0);
  GreenTable k = max_height_kernel(pair);
  std::vector<int> both = {0, 1};
  CHECK(kernel_joint_probability(k, both) == doctest::Approx(1.0 / 8.0));
}

TEST_CASE("kernel marginal matches sampler frequency") {
  Lattice pair = testutil::make_rect({2}, 1.0);
  GreenTable k = max_height_kernel(pair);
  RngStream rng(81, 0);
  uint64_t hits = 0;
  const uint64_t trials = 30000;
  for (uint64_t i = 0; i < trials; ++i)
    if (sample_nu(pair, rng).v[0] == 2) ++hits;
  double p = static_cast<double>(hits) / static_cast<double>(trials);
  double se = std::sqrt(p * (1 - p) / static_cast<double>(trials));
  CHECK(std::fabs(p - k.at(0, 0)) <= 3.0 * se);
}

TEST_CASE("total variation distances") {
  Lattice pair = testutil::make_rect({2}, 1.0);
  CHECK(tv_distance_exact(pair, 1.0, 0.0) == doctest::Approx(5.0 / 8.0));
  CHECK(tv_distance_exact(pair, 0.7, 0.7) == doctest::Approx(0.0));

  for (const Lattice& spec : {testutil::make_rect({2}, 1.0), testutil::make_rect({2, 3}, 1.0)}) {
    double prev = 2.0;
    for (double g : {1.0, 0.5, 0.1, 0.01}) {
      double tv = tv_distance_exact(spec, g, 0.0);
      CHECK(tv < prev);
      prev = tv;
    }
  }
}

TEST_CASE("covariance decay smoke run") {
  Lattice box = make_box(2, 6, 0.25);
  CovarianceOptions opt;
  opt.distances = {1, 2};
  opt.samples = 20000;
  opt.seed = 82;
  DecayFit fit = covariance_decay(box, opt);
  REQUIRE(fit.ok);
  CHECK(fit.rate > 0.0);
  for (const DecayPoint& p : fit.points) {
    CHECK(p.used);
    CHECK(p.cov < 0.0);  // determinantal field: negative covariance
  }
}

TEST_CASE("covariance decay refuses without signal") {
  // gamma so small that maximal heights essentially never appear
  Lattice box = make_box(2, 4, 1e-8);
  CovarianceOptions opt;
  opt.distances = {1, 2};
  opt.samples = 500;
  opt.seed = 83;
  DecayFit fit = covariance_decay(box, opt);
  CHECK_FALSE(fit.ok);
  CHECK(fit.note.find("insufficient signal") != std::string::npos);
}

TEST_CASE("boundary sensitivity of the center marginal shrinks with the box") {
  // wired-boundary surrogate diagnostic: exact center-site marginals on
  // growing 1-d boxes approach each other as the boundary recedes
  auto center_marginal = [](int radius) {
    Lattice box = make_box(1, radius, 1.0);
    int center = box->site_at({0});
    std::vector<double> m(3, 0.0);
    double z = 0.0;
    enumerate_allowed(box, [&](const DiscreteConfig& c) {
      int nmax = 0;
      for (int v : c.v)
        if (v == 2) ++nmax;
      double w = 1.0;
      for (int i = 0; i < nmax; ++i) w *= 1.0;
      z += w;
      m[static_cast<size_t>(c.v[static_cast<size_t>(center)])] += w;
    });
    for (double& v : m) v /= z;
    return m;
  };
  auto tv = [](const std::vector<double>& a, const std::vector<double>& b) {
    double t = 0.0;
    for (size_t i = 0; i < a.size(); ++i) t += std::fabs(a[i] - b[i]);
    return 0.5 * t;
  };
  auto m2 = center_marginal(2), m4 = center_marginal(4), m6 = center_marginal(6);
  CHECK(tv(m4, m6) < tv(m2, m6));
  CHECK(tv(m4, m6) < 0.01);
}

TEST_CASE("covariance decay validates the margin") {
  Lattice box = make_box(2, 3, 0.5);
  CovarianceOptions opt;
  opt.distances = {5};
  opt.samples = 10;
  CHECK_THROWS_AS(covariance_decay(box, opt), std::invalid_argument);
}
