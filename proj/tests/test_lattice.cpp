#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "avalanche/io.hpp"
#include "avalanche/lattice.hpp"
#include "avalanche/linalg.hpp"
#include "test_util.hpp"

using namespace avalanche;

TEST_CASE("make_box sizes") {
  CHECK(make_box(1, 0, 1.0)->size() == 1);
  CHECK(make_box(2, 1, 0.5)->size() == 9);
  CHECK(make_box(3, 2, 0.0)->size() == 125);
}

TEST_CASE("make_box rejects bad arguments") {
  CHECK_THROWS_AS(make_box(0, 1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(make_box(1, -1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(make_box(1, 1, -0.5), std::invalid_argument);
  CHECK_THROWS_AS(make_sites(2, {{0, 0}, {0, 0}}, 1.0), std::invalid_argument);
}

TEST_CASE("site ordering and neighbors") {
  Lattice s = make_box(2, 1, 1.0);
  // lexicographic order: first site (-1,-1), last (1,1)
  CHECK(s->point(0) == Coord{-1, -1});
  CHECK(s->point(8) == Coord{1, 1});
  int center = s->site_at({0, 0});
  REQUIRE(center != kSink);
  // direction order (+e1, -e1, +e2, -e2)
  CHECK(s->neighbor(center, 0) == s->site_at({1, 0}));
  CHECK(s->neighbor(center, 1) == s->site_at({-1, 0}));
  CHECK(s->neighbor(center, 2) == s->site_at({0, 1}));
  CHECK(s->neighbor(center, 3) == s->site_at({0, -1}));
  CHECK(s->boundary_degree(center) == 0);
  CHECK(s->boundary_degree(0) == 2);  // corner
}

TEST_CASE("toppling matrix small cases") {
  Lattice single = make_box(2, 0, 1.0);
  TopplingMatrix m1(single);
  CHECK(m1.at(0, 0) == doctest::Approx(5.0));
  CHECK(m1.determinant() == doctest::Approx(5.0));

  Lattice pair = testutil::make_rect({2}, 1.0);
  TopplingMatrix m2(pair);
  CHECK(m2.at(0, 0) == doctest::Approx(3.0));
  CHECK(m2.at(0, 1) == doctest::Approx(-1.0));
  CHECK(m2.at(1, 0) == doctest::Approx(-1.0));
  CHECK(m2.determinant() == doctest::Approx(8.0));

  for (double g : {0.0, 0.25, 1.0, 2.0}) {
    TopplingMatrix m(testutil::make_rect({2}, g));
    CHECK(m.determinant() == doctest::Approx(3.0 + 4.0 * g + g * g).epsilon(1e-9));
  }
}

TEST_CASE("toppling matrix invariants") {
  for (Lattice s : {make_box(2, 1, 0.5), make_box(1, 2, 0.0), testutil::make_rect({2, 3}, 2.0)}) {
    TopplingMatrix m(s);
    int n = s->size();
    for (int i = 0; i < n; ++i) {
      CHECK(m.at(i, i) == doctest::Approx(s->threshold()));
      double offdiag = 0.0;
      for (int j = 0; j < n; ++j) {
        CHECK(m.at(i, j) == m.at(j, i));
        if (i != j) offdiag += -m.at(i, j);
      }
      // row structure: diagonal minus in-lattice neighbor count equals
      // gamma plus the number of boundary edges
      CHECK(m.at(i, i) - offdiag ==
            doctest::Approx(s->gamma() + s->boundary_degree(i)));
      double rowsum = m.at(i, i) - offdiag;
      CHECK(rowsum >= s->gamma() - 1e-12);
    }
    if (s->gamma() > 0.0) {
      std::vector<double> a(m.data().begin(), m.data().end());
      CHECK_NOTHROW(DenseCholesky(a, n));
    }
  }
}

TEST_CASE("wired graph structure") {
  Lattice single = make_box(2, 0, 0.7);
  WiredGraph g(single);
  int ordinary = 0, special = 0;
  for (const WiredEdge& e : g.edges()) {
    if (e.special) ++special;
    else ++ordinary;
    if (!e.special) CHECK(e.v == kSink);
  }
  CHECK(ordinary == 4);
  CHECK(special == 1);

  Lattice pair = testutil::make_rect({2}, 0.7);
  WiredGraph g2(pair);
  CHECK(g2.edges().size() == 5);  // {0,1}, {0,w}, {1,w}, two specials

  // per-site edge counts on a mixed lattice
  Lattice s = make_box(2, 1, 0.3);
  WiredGraph g3(s);
  for (int x = 0; x < s->size(); ++x) {
    int cnt = 0, spec_cnt = 0;
    double weight = 0.0;
    for (const WiredEdge& e : g3.edges()) {
      bool at_x = (e.u == x) || (e.v == x);
      if (!at_x) continue;
      if (e.special) {
        ++spec_cnt;
        weight += s->gamma();
      } else {
        ++cnt;
        weight += 1.0;
      }
    }
    CHECK(cnt == s->degree());
    CHECK(spec_cnt == 1);
    CHECK(weight == doctest::Approx(s->threshold()));
  }
}

TEST_CASE("matrix-tree identity on small lattices") {
  for (double g : {0.0, 0.25, 1.0, 2.0}) {
    for (const Lattice& s : testutil::small_specs(6, g)) {
      WiredGraph wg(s);
      auto trees = testutil::enumerate_spanning_trees(wg);
      double total = 0.0;
      for (const auto& t : trees) {
        double w = 1.0;
        for (int i = 0; i < testutil::tree_special_count(wg, t); ++i) w *= g;
        total += w;
      }
      double det = TopplingMatrix(s).determinant();
      CHECK(std::fabs(total - det) <= 1e-9 * std::max(1.0, std::fabs(det)));
    }
  }
}

TEST_CASE("pair lattice tree total is the symbolic determinant") {
  for (double g : {0.0, 0.5, 1.0, 2.0}) {
    Lattice s = testutil::make_rect({2}, g);
    WiredGraph wg(s);
    auto trees = testutil::enumerate_spanning_trees(wg);
    if (g == 1.0) CHECK(trees.size() == 8);
    double total = 0.0;
    for (const auto& t : trees) {
      double w = 1.0;
      for (int i = 0; i < testutil::tree_special_count(wg, t); ++i) w *= g;
      total += w;
    }
    CHECK(total == doctest::Approx(3.0 + 4.0 * g + g * g));
  }
}

TEST_CASE("spec JSON round trip") {
  Lattice box = make_box(2, 3, 0.25);
  auto j = io::spec_to_json(*box);
  Lattice back = io::spec_from_json(j);
  CHECK(back->size() == box->size());
  CHECK(back->gamma() == box->gamma());
  CHECK(back->points() == box->points());

  Lattice sites = make_sites(1, {{4}, {2}}, 1.0);
  Lattice back2 = io::spec_from_json(io::spec_to_json(*sites));
  CHECK(back2->points() == sites->points());

  auto bad = io::spec_to_json(*box);
  bad["surprise"] = 1;
  CHECK_THROWS_AS(io::spec_from_json(bad), std::invalid_argument);
}

TEST_CASE("matrix CSV export carries coordinates") {
  Lattice s = testutil::make_rect({2}, 1.0);
  std::string csv = io::matrix_to_csv(TopplingMatrix(s));
  CHECK(csv.find("\"(0)\"") == std::string::npos);  // no quoting needed without commas
  CHECK(csv.find("(0)") != std::string::npos);
  CHECK(csv.find("(1)") != std::string::npos);
  CHECK(csv.find("3") != std::string::npos);
  CHECK(csv.back() == '\n');
}
