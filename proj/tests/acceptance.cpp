// Acceptance suite: one pass/fail line per criterion. Exits nonzero when any
// criterion fails. Criterion 10 is the long-running one; use --skip 10 /
// --only 10 to split it out (the ctest registration does).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "avalanche/allowed.hpp"
#include "avalanche/analysis.hpp"
#include "avalanche/dynamics.hpp"
#include "avalanche/engine.hpp"
#include "avalanche/lattice.hpp"
#include "avalanche/parallel.hpp"
#include "avalanche/sampler.hpp"
#include "avalanche/stats.hpp"
#include "test_util.hpp"

using namespace avalanche;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome criterion1_matrix_tree() {
  double worst = 0.0;
  int cases = 0;
  for (double g : {0.0, 0.25, 1.0, 2.0}) {
    for (const Lattice& spec : testutil::small_specs(6, g)) {
      WiredGraph wg(spec);
      auto trees = testutil::enumerate_spanning_trees(wg);
      double tree_weight = 0.0;
      for (const auto& t : trees) {
        double w = 1.0;
        for (int i = 0; i < testutil::tree_special_count(wg, t); ++i) w *= g;
        tree_weight += w;
      }
      double allowed_weight = 0.0;
      const int top = 2 * spec->dim();
      enumerate_allowed(spec, [&](const DiscreteConfig& c) {
        int nmax = 0;
        for (int v : c.v)
          if (v == top) ++nmax;
        double w = 1.0;
        for (int i = 0; i < nmax; ++i) w *= g;
        allowed_weight += w;
      });
      double det = TopplingMatrix(spec).determinant();
      double scale = std::max(1.0, std::fabs(det));
      worst = std::max(worst, std::fabs(tree_weight - det) / scale);
      worst = std::max(worst, std::fabs(allowed_weight - det) / scale);
      ++cases;
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%d lattice/gamma cases, worst relative error %.2e (limit 1e-9)",
                cases, worst);
  return {worst <= 1e-9, buf};
}

Outcome criterion2_bijection() {
  int configs_checked = 0, specs = 0;
  for (const Lattice& spec : testutil::small_specs(8, 1.0)) {
    WiredGraph wg(spec);
    auto trees = testutil::enumerate_spanning_trees(wg);
    std::set<std::vector<int>> tree_set(trees.begin(), trees.end());
    std::set<std::vector<int>> seen;
    bool ok = true;
    enumerate_allowed(spec, [&](const DiscreteConfig& c) {
      SpanningTree t = config_to_tree(c);
      if (!(tree_to_config(t) == c)) ok = false;
      auto ids = testutil::tree_edge_ids(wg, t);
      if (!tree_set.count(ids) || !seen.insert(ids).second) ok = false;
      ++configs_checked;
    });
    if (!ok || seen.size() != tree_set.size()) {
      return {false, "bijection failure on a " + std::to_string(spec->size()) + "-site lattice"};
    }
    ++specs;
  }
  return {true, std::to_string(configs_checked) + " configurations across " +
                    std::to_string(specs) + " lattices, all round trips exact and onto"};
}

Outcome criterion3_dhar() {
  // single-site exact value
  if (std::fabs(green_exact(make_box(2, 0, 1.0)).at(0, 0) - 0.2) > 1e-12)
    return {false, "single-site Green value is not 0.2"};
  double worst_z = 0.0;
  for (double g : {0.25, 1.0}) {
    Lattice box = make_box(2, 1, g);
    DharTable t = dhar_table(box, 100000, 2024, 0);
    for (size_t i = 0; i < t.estimate.size(); ++i) {
      double se = t.se[i];
      double dev = std::fabs(t.estimate[i] - t.exact[i]);
      if (se == 0.0) {
        if (dev > 1e-12) return {false, "zero-variance pair deviates"};
        continue;
      }
      worst_z = std::max(worst_z, dev / se);
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "3x3 box, 162 pairs at gamma 0.25 and 1, 1e5 samples, worst |z| = %.2f (limit 3)",
                worst_z);
  return {worst_z <= 3.0, buf};
}

Outcome criterion4_abelian_conservation() {
  RngStream rng(41, 0);
  Lattice box = make_box(2, 1, 0.5);
  const int64_t qn = 2, qk = 1;
  const int64_t thr = 2 * box->dim() * qn + qk;
  const int n = box->size();
  // integer toppling matrix of the discrete model
  auto delta_q = [&](int i, int j) -> int64_t {
    if (i == j) return thr;
    for (int dir = 0; dir < box->degree(); ++dir)
      if (box->neighbor(i, dir) == j) return -qn;
    return 0;
  };
  Lattice fbox = make_box(2, 1, 0.3);
  TopplingMatrix fmat(fbox);
  for (int rep = 0; rep < 1000; ++rep) {
    // rational: conservation exactly
    std::vector<int64_t> q(static_cast<size_t>(n));
    for (int64_t& v : q) v = static_cast<int64_t>(rng.below(static_cast<uint64_t>(3 * thr)));
    auto [stable, counts] = stabilize(RationalConfig(box, qn, qk, q));
    for (int i = 0; i < n; ++i) {
      int64_t lhs = q[static_cast<size_t>(i)] - stable.q[static_cast<size_t>(i)];
      int64_t rhs = 0;
      for (int j = 0; j < n; ++j) rhs += delta_q(i, j) * static_cast<int64_t>(counts[static_cast<size_t>(j)]);
      if (lhs != rhs) return {false, "rational conservation identity violated"};
    }
    // rational: commutativity exactly
    std::vector<int64_t> qs(static_cast<size_t>(n));
    for (int64_t& v : qs) v = static_cast<int64_t>(rng.below(static_cast<uint64_t>(thr)));
    RationalConfig c(box, qn, qk, qs);
    int x = static_cast<int>(rng.below(static_cast<uint64_t>(n)));
    int y = static_cast<int>(rng.below(static_cast<uint64_t>(n)));
    auto xy = add_quantum(add_quantum(c, x).first, y).first;
    auto yx = add_quantum(add_quantum(c, y).first, x).first;
    if (!(xy.q == yx.q)) return {false, "rational commutativity violated"};
    // floating: both within 1e-9
    std::vector<double> h(static_cast<size_t>(n));
    for (double& v : h) v = rng.next_double() * 2.0 * fbox->threshold();
    auto [fs, fc] = stabilize(HeightConfig(fbox, h));
    std::vector<double> nvec(fc.begin(), fc.end());
    auto dn = fmat.multiply(nvec);
    for (int i = 0; i < n; ++i)
      if (std::fabs(h[static_cast<size_t>(i)] - dn[static_cast<size_t>(i)] - fs.h[static_cast<size_t>(i)]) > 1e-9)
        return {false, "floating conservation identity beyond 1e-9"};
    std::vector<double> hs(static_cast<size_t>(n));
    for (double& v : hs) v = rng.next_double() * fbox->threshold();
    HeightConfig fcfg(fbox, hs);
    auto fxy = add(add(fcfg, x).first, y).first;
    auto fyx = add(add(fcfg, y).first, x).first;
    for (int i = 0; i < n; ++i)
      if (std::fabs(fxy.h[static_cast<size_t>(i)] - fyx.h[static_cast<size_t>(i)]) > 1e-9)
        return {false, "floating commutativity beyond 1e-9"};
  }
  return {true, "1000 cases: rational identities exact, floating within 1e-9"};
}

Outcome criterion5_gamma_monotone() {
  RngStream rng(51, 0);
  const std::vector<double> gammas = {1.0, 0.1, 0.01, 0.0};  // descending
  Lattice base = make_box(2, 1, 0.0);
  const int n = base->size();
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> h(static_cast<size_t>(n));
    for (double& v : h) v = rng.next_double() * 2.0 * base->dim();
    int x = static_cast<int>(rng.below(static_cast<uint64_t>(n)));
    std::vector<uint64_t> prev;
    std::set<int> prev_av;
    for (double g : gammas) {
      auto [after, rec] = add(HeightConfig(with_gamma(*base, g), h), x);
      if (!prev.empty()) {
        for (int i = 0; i < n; ++i)
          if (prev[static_cast<size_t>(i)] > rec.toppling_counts[static_cast<size_t>(i)])
            return {false, "toppling numbers increased with gamma"};
        for (int site : prev_av)
          if (!rec.toppling_counts[static_cast<size_t>(site)])
            return {false, "avalanche sets not nested"};
      }
      prev = rec.toppling_counts;
      prev_av.clear();
      for (int s : rec.avalanche_set()) prev_av.insert(s);
    }
  }
  return {true, "200 additions, counts non-increasing and avalanches nested across gamma 1, 0.1, 0.01, 0"};
}

Outcome criterion6_sampler_exactness() {
  double min_p = 1.0;
  int tests = 0;
  for (double g : {0.25, 1.0}) {
    for (Lattice spec : {testutil::make_rect({2}, g), testutil::make_rect({2, 2}, g)}) {
      // exact weights from the enumeration oracle
      std::map<std::vector<int>, size_t> index;
      std::vector<double> probs;
      const int top = 2 * spec->dim();
      enumerate_allowed(spec, [&](const DiscreteConfig& c) {
        int nmax = 0;
        for (int v : c.v)
          if (v == top) ++nmax;
        double w = 1.0;
        for (int i = 0; i < nmax; ++i) w *= g;
        index[c.v] = probs.size();
        probs.push_back(w);
      });
      for (bool reversed : {false, true}) {
        struct Acc {
          std::vector<uint64_t> counts;
          void merge(const Acc& o) {
            if (counts.empty()) {
              counts = o.counts;
              return;
            }
            for (size_t i = 0; i < counts.size(); ++i) counts[i] += o.counts[i];
          }
        };
        McConfig mc{.seed = 600 + static_cast<uint64_t>(reversed), .threads = 0};
        size_t cats = probs.size();
        Acc acc = mc_reduce<Acc>(200000, mc, 0, [&](Acc& a, uint64_t, RngStream& r) {
          if (a.counts.empty()) a.counts.assign(cats, 0);
          WilsonOptions opt;
          opt.reversed_order = reversed;
          DiscreteConfig c = sample_nu(spec, r, opt);
          ++a.counts[index.at(c.v)];
        });
        double stat = stats::chisq_gof_stat(acc.counts, probs);
        double p = stats::chisq_pvalue(stat, static_cast<int>(cats) - 1);
        min_p = std::min(min_p, p);
        ++tests;
      }
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "%d chi-square tests (two lattices, gamma 0.25/1, both site orders), min p = %.4f "
                "(limit 0.001)",
                tests, min_p);
  return {min_p > 0.001, buf};
}

Outcome criterion7_stationarity() {
  Lattice box = make_box(2, 1, 1.0);
  RateProfile rates = RateProfile::constant(box, 1.0);
  StationarityReport rep = stationarity_test(box, rates, 50.0, 100000, 700);
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "3x3 box, t = 50, 1e5 replicas, min per-site p = %.4f (Bonferroni limit %.2e)",
                rep.min_pvalue, rep.bonferroni_threshold);
  return {rep.pass, buf};
}

Outcome criterion8_determinantal() {
  Lattice pair = testutil::make_rect({2}, 1.0);
  GreenTable pk = max_height_kernel(pair);
  std::vector<int> both = {0, 1};
  if (std::fabs(kernel_joint_probability(pk, both) - 0.125) > 1e-12)
    return {false, "two-site joint probability is not 1/8"};

  double worst = 0.0;
  for (double g : {0.25, 1.0}) {
    for (const Lattice& spec : testutil::small_specs(4, g)) {
      GreenTable kernel = max_height_kernel(spec);
      const int n = spec->size();
      const int top = 2 * spec->dim();
      std::vector<double> weights;
      std::vector<uint32_t> max_masks;
      double z = 0.0;
      enumerate_allowed(spec, [&](const DiscreteConfig& c) {
        int nmax = 0;
        uint32_t mask = 0;
        for (int s = 0; s < n; ++s)
          if (c.v[static_cast<size_t>(s)] == top) {
            ++nmax;
            mask |= 1u << s;
          }
        double w = 1.0;
        for (int i = 0; i < nmax; ++i) w *= g;
        weights.push_back(w);
        max_masks.push_back(mask);
        z += w;
      });
      for (uint32_t mask = 1; mask < (1u << n); ++mask) {
        std::vector<int> sites;
        for (int s = 0; s < n; ++s)
          if (mask & (1u << s)) sites.push_back(s);
        double num = 0.0;
        for (size_t i = 0; i < weights.size(); ++i)
          if ((max_masks[i] & mask) == mask) num += weights[i];
        worst = std::max(worst, std::fabs(num / z - kernel_joint_probability(kernel, sites)));
      }
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf), "all site subsets on <=4-site lattices, worst error %.2e (limit 1e-9)",
                worst);
  return {worst <= 1e-9, buf};
}

Outcome criterion9_tv_limit() {
  Lattice pair = testutil::make_rect({2}, 1.0);
  double tv1 = tv_distance_exact(pair, 1.0, 0.0);
  if (std::fabs(tv1 - 0.625) > 1e-12) return {false, "TV(nu_1, nu_0) is not 5/8"};
  double prev = 2.0, last = 0.0;
  for (double g : {1.0, 0.5, 0.1, 0.01, 0.001}) {
    double tv = tv_distance_exact(pair, g, 0.0);
    if (tv >= prev) return {false, "TV not strictly decreasing in gamma"};
    prev = tv;
    last = tv;
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "TV(nu_1, nu_0) = 0.625 exactly, strictly decreasing, TV at gamma = 0.001 is %.5f "
                "(limit 0.002)",
                last);
  return {last < 0.002, buf};
}

Outcome criterion10_covariance_scaling() {
  // windows scaled by the correlation length 1/sqrt(gamma), both spanning
  // [0.4, 0.8] of it; the exact finite-box kernel puts the fitted-rate ratio
  // of these windows at 1.994 with every point far above the 3 se filter
  Lattice base = make_box(2, 40, 0.01);
  CovarianceOptions lo;
  lo.distances = {4, 5, 6, 8};
  lo.margin = 10;
  lo.samples = 1000000;
  lo.seed = 1001;
  DecayFit fit_lo = covariance_decay(base, lo);
  if (!fit_lo.ok) return {false, "gamma = 0.01 fit refused: " + fit_lo.note};

  CovarianceOptions hi;
  hi.distances = {2, 3, 4};
  hi.margin = 5;
  hi.samples = 1000000;
  hi.seed = 1002;
  DecayFit fit_hi = covariance_decay(with_gamma(*base, 0.04), hi);
  if (!fit_hi.ok) return {false, "gamma = 0.04 fit refused: " + fit_hi.note};

  double ratio = fit_hi.rate / fit_lo.rate;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "radius-40 box, 1e6 samples: rate(0.04) = %.4f, rate(0.01) = %.4f, ratio = %.3f "
                "(band [1.6, 2.4])",
                fit_hi.rate, fit_lo.rate, ratio);
  return {ratio >= 1.6 && ratio <= 2.4, buf};
}

Outcome criterion11_green_consistency() {
  Lattice line = make_box(1, 60, 1.0);
  GreenTable g = green_exact(line);
  int center = line->site_at({0});
  int depth = green_series_depth(1, 1.0, {5});
  double worst = 0.0;
  for (int k = 0; k <= 5; ++k) {
    double series = green_infinite(1, 1.0, {k}, depth);
    worst = std::max(worst, std::fabs(series - g.at(center, line->site_at({k}))));
  }
  if (worst > 1e-6)
    return {false, "series vs box difference " + std::to_string(worst) + " above 1e-6"};

  auto rate = [](double gamma, const std::vector<int>& rs) {
    int depth2 = green_series_depth(2, gamma, {rs.back(), 0});
    std::vector<double> xs, ys, ws;
    for (int r : rs) {
      xs.push_back(r);
      ys.push_back(-std::log(green_infinite(2, gamma, {r, 0}, depth2)));
      ws.push_back(1.0);
    }
    return stats::weighted_least_squares(xs, ys, ws).slope;
  };
  double r_lo = rate(0.01, {10, 15, 20});
  double r_hi = rate(0.04, {5, 8, 10});
  double ratio = r_hi / r_lo;
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "series vs radius-60 box within %.1e; decay-rate ratio %.3f (band [1.6, 2.4])",
                worst, ratio);
  return {ratio >= 1.6 && ratio <= 2.4, buf};
}

Outcome criterion12_batch_identity() {
  Lattice box = make_box(2, 1, 0.5);
  RateProfile rates = RateProfile::constant(box, 1.0);
  RngStream rng(120, 0);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<int64_t> q(static_cast<size_t>(box->size()));
    for (int64_t& v : q) v = static_cast<int64_t>(rng.below(9));
    RationalConfig init(box, 2, 1, q);
    RationalTrajectory t = simulate_rational(init, rates, 5.0, rng);
    RationalConfig replay = init;
    for (const TrajEvent& ev : t.events) replay.q[static_cast<size_t>(ev.site)] += replay.n;
    auto [stable, counts] = stabilize(replay);
    if (!(stable.q == t.final_state.q))
      return {false, "replayed stabilization differs from the trajectory final state"};
  }
  return {true, "100 trajectories replayed through one stabilization, all final states exact"};
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0, skip = 0;
  for (int i = 1; i + 1 < argc; i += 2) {
    if (std::strcmp(argv[i], "--only") == 0) only = std::atoi(argv[i + 1]);
    if (std::strcmp(argv[i], "--skip") == 0) skip = std::atoi(argv[i + 1]);
  }

  struct Criterion {
    int id;
    const char* name;
    Outcome (*fn)();
  };
  const Criterion criteria[] = {
      {1, "matrix-tree / volume identity", criterion1_matrix_tree},
      {2, "bijection round-trip", criterion2_bijection},
      {3, "Dhar's formula", criterion3_dhar},
      {4, "abelianness and conservation", criterion4_abelian_conservation},
      {5, "gamma-monotonicity", criterion5_gamma_monotone},
      {6, "sampler exactness", criterion6_sampler_exactness},
      {7, "stationarity", criterion7_stationarity},
      {8, "determinantal maximal-height field", criterion8_determinantal},
      {9, "zero-dissipation limit of measures", criterion9_tv_limit},
      {10, "correlation-length scaling", criterion10_covariance_scaling},
      {11, "Green's-function consistency", criterion11_green_consistency},
      {12, "dynamics batch identity", criterion12_batch_identity},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    if (only && c.id != only) continue;
    if (skip && c.id == skip) continue;
    auto t0 = std::chrono::steady_clock::now();
    Outcome o = c.fn();
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] %2d %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  if (failures) std::printf("%d criterion(s) FAILED\n", failures);
  else std::printf("all criteria passed\n");
  return failures == 0 ? 0 : 1;
}
