#include "avalanche/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

#include "avalanche/allowed.hpp"
#include "avalanche/linalg.hpp"
#include "avalanche/parallel.hpp"
#include "avalanche/sampler.hpp"
#include "avalanche/stats.hpp"

namespace avalanche {

namespace {

constexpr int kDenseGreenCap = 8192;
constexpr double kGreenResidual = 1e-10;

double powi(double base, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

// max |Delta g - rhs| over one column, matrix-free
double column_residual(const LatticeSpec& spec, std::span<const double> g, int rhs_site,
                       std::vector<double>& scratch) {
  const int n = spec.size();
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    double s = spec.threshold() * g[static_cast<size_t>(i)];
    for (int dir = 0; dir < spec.degree(); ++dir) {
      int j = spec.neighbor(i, dir);
      if (j != kSink) s -= g[static_cast<size_t>(j)];
    }
    double r = ((i == rhs_site) ? 1.0 : 0.0) - s;
    scratch[static_cast<size_t>(i)] = r;
    worst = std::max(worst, std::fabs(r));
  }
  return worst;
}

}  // namespace

GreenTable green_exact(const Lattice& spec) {
  const int n = spec->size();
  if (n > kDenseGreenCap)
    throw std::runtime_error("green_exact: lattice above the dense cap (" +
                             std::to_string(kDenseGreenCap) +
                             " sites); use green_column instead");
  TopplingMatrix delta(spec);
  DenseCholesky chol(std::vector<double>(delta.data().begin(), delta.data().end()), n);

  GreenTable table;
  table.spec = spec;
  table.g.assign(static_cast<size_t>(n) * static_cast<size_t>(n), 0.0);
  std::vector<double> col(static_cast<size_t>(n)), res(static_cast<size_t>(n));
  for (int y = 0; y < n; ++y) {
    std::fill(col.begin(), col.end(), 0.0);
    col[static_cast<size_t>(y)] = 1.0;
    chol.solve_in_place(col);
    if (column_residual(*spec, col, y, res) > kGreenResidual) {
      // one pass of iterative refinement
      chol.solve_in_place(res);
      for (int i = 0; i < n; ++i) col[static_cast<size_t>(i)] += res[static_cast<size_t>(i)];
      if (column_residual(*spec, col, y, res) > kGreenResidual)
        throw std::runtime_error("green_exact: residual above 1e-10 after refinement");
    }
    for (int i = 0; i < n; ++i)
      table.g[static_cast<size_t>(i) * static_cast<size_t>(n) + static_cast<size_t>(y)] = col[static_cast<size_t>(i)];
  }
  return table;
}

std::vector<double> green_column(const Lattice& spec, int x) {
  const int n = spec->size();
  if (x < 0 || x >= n) throw std::invalid_argument("green_column: site out of range");
  std::vector<double> b(static_cast<size_t>(n), 0.0);
  b[static_cast<size_t>(x)] = 1.0;
  return cg_solve(*spec, b, kGreenResidual);
}

int green_series_depth(int d, double gamma, const Coord& x) {
  if (gamma <= 0.0) throw std::invalid_argument("green_infinite: gamma must be positive");
  double ratio = 2.0 * d / (2.0 * d + gamma);
  // tail above N is bounded by ratio^(N+1) / gamma
  int depth = static_cast<int>(std::ceil(std::log(1e-10 * gamma) / std::log(ratio)));
  int l1 = 0;
  for (int c : x) l1 += std::abs(c);
  return std::max(depth, l1);
}

namespace {

// log of the one-dimensional simple walk transition probability p_n(0, j),
// -inf when the parity or range forbids it
double log_p1d(int n, int j) {
  int a = std::abs(j);
  if (a > n || ((n - a) % 2) != 0) return -std::numeric_limits<double>::infinity();
  int k = (n + j) / 2;
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) -
         n * std::log(2.0);
}

double series_d1(double gamma, int x, int depth) {
  double logr = std::log(2.0 / (2.0 + gamma));
  double sum = 0.0;
  for (int n = std::abs(x); n <= depth; ++n) {
    double lp = log_p1d(n, x);
    if (std::isinf(lp)) continue;
    sum += std::exp(lp + n * logr);
  }
  return sum / (2.0 + gamma);
}

// two-dimensional walk along the diagonal factorization: rotating by 45
// degrees splits the walk into two independent one-dimensional walks
double series_d2(double gamma, int a, int b, int depth) {
  double logr = std::log(4.0 / (4.0 + gamma));
  int l1 = std::abs(a) + std::abs(b);
  double sum = 0.0;
  for (int n = l1; n <= depth; ++n) {
    double lp = log_p1d(n, a + b) + log_p1d(n, a - b);
    if (std::isinf(lp)) continue;
    sum += std::exp(lp + n * logr);
  }
  return sum / (4.0 + gamma);
}

// n-step probability for d >= 3 by splitting the steps across axes:
// p_n(0,x) = sum over (n_1,...,n_d) of the multinomial share times the
// one-dimensional probabilities p_{n_i}(0, x_i)
double log_pn_multinomial(int d, int n, const Coord& x) {
  double log_d = std::log(static_cast<double>(d));
  double total = 0.0;
  // recursive walk over axis step counts; log-weights accumulate
  auto rec = [&](auto&& self, int axis, int remaining, double acc) -> void {
    if (axis == d - 1) {
      double lp = log_p1d(remaining, x[static_cast<size_t>(axis)]);
      if (std::isinf(lp)) return;
      double term = acc + lp - std::lgamma(remaining + 1.0);
      total += std::exp(term);
      return;
    }
    int a = std::abs(x[static_cast<size_t>(axis)]);
    for (int ni = a; ni <= remaining; ni += 2) {
      double lp = log_p1d(ni, x[static_cast<size_t>(axis)]);
      if (std::isinf(lp)) continue;
      self(self, axis + 1, remaining - ni, acc + lp - std::lgamma(ni + 1.0));
    }
  };
  rec(rec, 0, n, std::lgamma(n + 1.0) - n * log_d);
  return total <= 0.0 ? -std::numeric_limits<double>::infinity() : std::log(total);
}

double series_multinomial(int d, double gamma, const Coord& x, int depth) {
  double comps = std::pow(static_cast<double>(depth), d);
  if (comps > 5e8)
    throw std::runtime_error(
        "green_infinite: series evaluation too expensive for this d and gamma; "
        "use green_exact on a large box instead");
  double logr = std::log(2.0 * d / (2.0 * d + gamma));
  int l1 = 0;
  for (int c : x) l1 += std::abs(c);
  double sum = 0.0;
  for (int n = l1; n <= depth; ++n) {
    double lp = log_pn_multinomial(d, n, x);
    if (std::isinf(lp)) continue;
    sum += std::exp(lp + n * logr);
  }
  return sum / (2.0 * d + gamma);
}

}  // namespace

double green_infinite(int d, double gamma, const Coord& x, int truncation) {
  if (d < 1) throw std::invalid_argument("green_infinite: dimension must be >= 1");
  if (static_cast<int>(x.size()) != d)
    throw std::invalid_argument("green_infinite: coordinate dimension mismatch");
  int needed = green_series_depth(d, gamma, x);
  if (truncation < needed)
    throw std::runtime_error("green_infinite: truncation " + std::to_string(truncation) +
                             " insufficient, need at least " + std::to_string(needed));
  if (d == 1) return series_d1(gamma, x[0], truncation);
  if (d == 2) return series_d2(gamma, x[0], x[1], truncation);
  return series_multinomial(d, gamma, x, truncation);
}

namespace {

struct DharPairAcc {
  stats::MeanVar mean;
  stats::MeanVar hit;  // indicator n >= 1, for the Markov-bound check
  std::unique_ptr<PartialWilson> pw;
  std::unique_ptr<Toppler> top;
  std::vector<int> targets, xi;
  std::vector<double> h;

  void merge(const DharPairAcc& o) {
    mean.merge(o.mean);
    hit.merge(o.hit);
  }
};

void draw_stationary(PartialWilson& pw, std::span<const int> targets, RngStream& rng,
                     std::span<int> xi, std::span<double> h, const LatticeSpec& spec) {
  pw.sample(targets, rng, xi);
  const int top = 2 * spec.dim();
  for (size_t i = 0; i < xi.size(); ++i) {
    if (xi[i] < top)
      h[i] = static_cast<double>(xi[i]) + rng.next_double();
    else
      h[i] = static_cast<double>(top) + rng.next_double() * spec.gamma();
  }
}

}  // namespace

DharCheck check_dhar(const Lattice& spec, int x, int y, uint64_t samples, uint64_t seed,
                     int threads) {
  if (spec->gamma() <= 0.0) throw std::invalid_argument("check_dhar: gamma must be positive");
  const int n = spec->size();
  if (x < 0 || x >= n || y < 0 || y >= n) throw std::invalid_argument("check_dhar: site out of range");

  McConfig cfg{.seed = seed, .threads = threads};
  auto acc = mc_reduce<DharPairAcc>(samples, cfg, 0, [&](DharPairAcc& a, uint64_t, RngStream& rng) {
    if (!a.pw) {
      a.pw = std::make_unique<PartialWilson>(spec);
      a.top = std::make_unique<Toppler>(spec);
      a.targets.resize(static_cast<size_t>(n));
      for (int i = 0; i < n; ++i) a.targets[static_cast<size_t>(i)] = i;
      a.xi.resize(static_cast<size_t>(n));
      a.h.resize(static_cast<size_t>(n));
    }
    draw_stationary(*a.pw, a.targets, rng, a.xi, a.h, *spec);
    a.h[static_cast<size_t>(x)] += 1.0;
    a.top->run(a.h);
    uint64_t c = a.top->counts()[static_cast<size_t>(y)];
    a.mean.add(static_cast<double>(c));
    a.hit.add(c >= 1 ? 1.0 : 0.0);
  });

  DharCheck out;
  out.estimate = acc.mean.mean;
  out.stderr_ = acc.mean.se();
  out.exact = green_column(spec, x)[static_cast<size_t>(y)];
  return out;
}

namespace {

struct DharTableAcc {
  uint64_t n = 0;
  std::vector<double> sum, sum2;
  std::unique_ptr<PartialWilson> pw;
  std::unique_ptr<Toppler> top;
  std::vector<int> targets, xi;
  std::vector<double> h, work;

  void merge(const DharTableAcc& o) {
    if (o.n == 0) return;
    if (sum.empty()) {
      sum = o.sum;
      sum2 = o.sum2;
      n = o.n;
      return;
    }
    for (size_t i = 0; i < sum.size(); ++i) {
      sum[i] += o.sum[i];
      sum2[i] += o.sum2[i];
    }
    n += o.n;
  }
};

}  // namespace

DharTable dhar_table(const Lattice& spec, uint64_t samples, uint64_t seed, int threads) {
  if (spec->gamma() <= 0.0) throw std::invalid_argument("dhar_table: gamma must be positive");
  const int n = spec->size();
  const size_t nn = static_cast<size_t>(n) * static_cast<size_t>(n);

  McConfig cfg{.seed = seed, .threads = threads};
  auto acc = mc_reduce<DharTableAcc>(samples, cfg, 0, [&](DharTableAcc& a, uint64_t, RngStream& rng) {
    if (!a.pw) {
      a.pw = std::make_unique<PartialWilson>(spec);
      a.top = std::make_unique<Toppler>(spec);
      a.targets.resize(static_cast<size_t>(n));
      for (int i = 0; i < n; ++i) a.targets[static_cast<size_t>(i)] = i;
      a.xi.resize(static_cast<size_t>(n));
      a.h.resize(static_cast<size_t>(n));
      a.work.resize(static_cast<size_t>(n));
      a.sum.assign(nn, 0.0);
      a.sum2.assign(nn, 0.0);
    }
    draw_stationary(*a.pw, a.targets, rng, a.xi, a.h, *spec);
    for (int x = 0; x < n; ++x) {
      std::copy(a.h.begin(), a.h.end(), a.work.begin());
      a.work[static_cast<size_t>(x)] += 1.0;
      a.top->run(a.work);
      auto counts = a.top->counts();
      for (int y = 0; y < n; ++y) {
        double c = static_cast<double>(counts[static_cast<size_t>(y)]);
        a.sum[static_cast<size_t>(x) * static_cast<size_t>(n) + static_cast<size_t>(y)] += c;
        a.sum2[static_cast<size_t>(x) * static_cast<size_t>(n) + static_cast<size_t>(y)] += c * c;
      }
    }
    ++a.n;
  });

  GreenTable green = green_exact(spec);
  DharTable out;
  out.spec = spec;
  out.estimate.assign(nn, 0.0);
  out.se.assign(nn, 0.0);
  out.exact = green.g;
  double m = static_cast<double>(acc.n);
  for (size_t i = 0; i < nn; ++i) {
    double mean = acc.sum[i] / m;
    double var = (acc.sum2[i] - acc.sum[i] * acc.sum[i] / m) / (m - 1.0);
    out.estimate[i] = mean;
    out.se[i] = std::sqrt(std::max(var, 0.0) / m);
  }
  return out;
}

namespace {

struct CovAcc {
  uint64_t n = 0;
  std::vector<double> sa, saa;      // per distance: sum of pair-product means
  std::vector<uint64_t> site_sum;   // per inner site
  std::unique_ptr<PartialWilson> pw;
  std::vector<int> xi;
  std::vector<uint8_t> hb;

  void merge(const CovAcc& o) {
    if (o.n == 0) return;
    if (sa.empty()) {
      sa = o.sa;
      saa = o.saa;
      site_sum = o.site_sum;
      n = o.n;
      return;
    }
    for (size_t i = 0; i < sa.size(); ++i) {
      sa[i] += o.sa[i];
      saa[i] += o.saa[i];
    }
    for (size_t i = 0; i < site_sum.size(); ++i) site_sum[i] += o.site_sum[i];
    n += o.n;
  }
};

}  // namespace

DecayFit covariance_decay(const Lattice& spec, const CovarianceOptions& opt) {
  if (spec->gamma() <= 0.0)
    throw std::invalid_argument("covariance_decay: gamma must be positive");
  if (spec->radius() < 0)
    throw std::invalid_argument("covariance_decay: needs a centered box lattice");
  if (opt.distances.empty()) throw std::invalid_argument("covariance_decay: no distances");
  int maxdist = *std::max_element(opt.distances.begin(), opt.distances.end());
  int margin = opt.margin < 0 ? maxdist : opt.margin;
  if (margin < maxdist)
    throw std::invalid_argument("covariance_decay: margin below the largest tested distance");
  int inner_r = spec->radius() - margin;
  if (inner_r < 0) throw std::invalid_argument("covariance_decay: box too small for the margin");

  const int d = spec->dim();
  // inner box targets, in lattice site order
  std::vector<int> targets;
  for (int s = 0; s < spec->size(); ++s) {
    bool inside = true;
    for (int c : spec->point(s))
      if (std::abs(c) > inner_r) inside = false;
    if (inside) targets.push_back(s);
  }
  // position of an inner site within `targets`
  std::vector<int> pos(static_cast<size_t>(spec->size()), -1);
  for (size_t i = 0; i < targets.size(); ++i) pos[static_cast<size_t>(targets[i])] = static_cast<int>(i);

  // translation-averaged pair lists per distance, along every axis
  const size_t ndist = opt.distances.size();
  std::vector<std::vector<std::pair<int, int>>> pairs(ndist);
  for (size_t k = 0; k < ndist; ++k) {
    int r = opt.distances[k];
    for (size_t i = 0; i < targets.size(); ++i) {
      Coord c = spec->point(targets[i]);
      for (int axis = 0; axis < d; ++axis) {
        Coord q = c;
        q[static_cast<size_t>(axis)] += r;
        int s2 = spec->site_at(q);
        if (s2 != kSink && pos[static_cast<size_t>(s2)] >= 0)
          pairs[k].push_back({static_cast<int>(i), pos[static_cast<size_t>(s2)]});
      }
    }
    if (pairs[k].empty())
      throw std::invalid_argument("covariance_decay: no pairs at distance " + std::to_string(r));
  }

  McConfig cfg{.seed = opt.seed, .threads = opt.threads, .chunk = 256};
  const int top = 2 * d;
  auto acc = mc_reduce<CovAcc>(opt.samples, cfg, 0, [&](CovAcc& a, uint64_t, RngStream& rng) {
    if (!a.pw) {
      a.pw = std::make_unique<PartialWilson>(spec);
      a.xi.resize(targets.size());
      a.hb.resize(targets.size());
      a.sa.assign(ndist, 0.0);
      a.saa.assign(ndist, 0.0);
      a.site_sum.assign(targets.size(), 0);
    }
    a.pw->sample(targets, rng, a.xi);
    for (size_t i = 0; i < targets.size(); ++i) {
      a.hb[i] = (a.xi[i] == top) ? 1 : 0;
      a.site_sum[i] += a.hb[i];
    }
    for (size_t k = 0; k < ndist; ++k) {
      uint64_t hits = 0;
      for (const auto& [p, q] : pairs[k])
        hits += static_cast<uint64_t>(a.hb[static_cast<size_t>(p)] & a.hb[static_cast<size_t>(q)]);
      double mean = static_cast<double>(hits) / static_cast<double>(pairs[k].size());
      a.sa[k] += mean;
      a.saa[k] += mean * mean;
    }
    ++a.n;
  });

  double m = static_cast<double>(acc.n);
  DecayFit fit;
  fit.gamma = spec->gamma();
  std::vector<double> xs, ys, ws;
  for (size_t k = 0; k < ndist; ++k) {
    // product mean minus the pair-averaged product of per-site marginals
    double abar = acc.sa[k] / m;
    double prod = 0.0;
    for (const auto& [p, q] : pairs[k])
      prod += (static_cast<double>(acc.site_sum[static_cast<size_t>(p)]) / m) *
              (static_cast<double>(acc.site_sum[static_cast<size_t>(q)]) / m);
    prod /= static_cast<double>(pairs[k].size());
    double cov = abar - prod;
    double var_a = (acc.saa[k] - acc.sa[k] * acc.sa[k] / m) / (m - 1.0);
    double se = std::sqrt(std::max(var_a, 0.0) / m);
    DecayPoint pt;
    pt.distance = opt.distances[k];
    pt.cov = cov;
    pt.se = se;
    pt.used = std::fabs(cov) > 3.0 * se && cov != 0.0;
    if (pt.used) {
      xs.push_back(static_cast<double>(pt.distance));
      ys.push_back(std::log(std::fabs(cov)));
      double sigma = se / std::fabs(cov);
      ws.push_back(1.0 / (sigma * sigma));
    }
    fit.points.push_back(pt);
  }

  if (xs.size() < 2) {
    fit.ok = false;
    fit.note = "insufficient signal: fewer than two distances clear 3 standard errors";
    return fit;
  }
  auto wls = stats::weighted_least_squares(xs, ys, ws);
  fit.ok = wls.ok;
  fit.rate = -wls.slope;
  fit.rate_se = wls.slope_se;
  fit.rate_ci_lo = fit.rate - 1.96 * wls.slope_se;
  fit.rate_ci_hi = fit.rate + 1.96 * wls.slope_se;
  if (!fit.ok) fit.note = "degenerate fit";
  return fit;
}

GreenTable max_height_kernel(const Lattice& spec) {
  if (spec->gamma() <= 0.0)
    throw std::invalid_argument("max_height_kernel: gamma must be positive");
  GreenTable k = green_exact(spec);
  for (double& v : k.g) v *= spec->gamma();
  return k;
}

double kernel_joint_probability(const GreenTable& kernel, std::span<const int> sites) {
  const int n = kernel.spec->size();
  const int k = static_cast<int>(sites.size());
  for (int s : sites)
    if (s < 0 || s >= n) throw std::invalid_argument("kernel_joint_probability: site out of range");
  // det of the restricted kernel via Gaussian elimination with partial pivoting
  std::vector<double> a(static_cast<size_t>(k) * static_cast<size_t>(k));
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      a[static_cast<size_t>(i) * static_cast<size_t>(k) + static_cast<size_t>(j)] =
          kernel.at(sites[static_cast<size_t>(i)], sites[static_cast<size_t>(j)]);
  double det = 1.0;
  for (int c = 0; c < k; ++c) {
    int piv = c;
    for (int r = c + 1; r < k; ++r)
      if (std::fabs(a[static_cast<size_t>(r) * static_cast<size_t>(k) + static_cast<size_t>(c)]) >
          std::fabs(a[static_cast<size_t>(piv) * static_cast<size_t>(k) + static_cast<size_t>(c)]))
        piv = r;
    if (piv != c) {
      for (int j = 0; j < k; ++j)
        std::swap(a[static_cast<size_t>(c) * static_cast<size_t>(k) + static_cast<size_t>(j)],
                  a[static_cast<size_t>(piv) * static_cast<size_t>(k) + static_cast<size_t>(j)]);
      det = -det;
    }
    double p = a[static_cast<size_t>(c) * static_cast<size_t>(k) + static_cast<size_t>(c)];
    if (p == 0.0) return 0.0;
    det *= p;
    for (int r = c + 1; r < k; ++r) {
      double f = a[static_cast<size_t>(r) * static_cast<size_t>(k) + static_cast<size_t>(c)] / p;
      for (int j = c; j < k; ++j)
        a[static_cast<size_t>(r) * static_cast<size_t>(k) + static_cast<size_t>(j)] -=
            f * a[static_cast<size_t>(c) * static_cast<size_t>(k) + static_cast<size_t>(j)];
    }
  }
  return det;
}

double tv_distance_exact(const Lattice& spec, double gamma1, double gamma2, uint64_t cap) {
  if (gamma1 < 0.0 || gamma2 < 0.0)
    throw std::invalid_argument("tv_distance_exact: gamma must be >= 0");
  const int top = 2 * spec->dim();
  double z1 = 0.0, z2 = 0.0;
  std::vector<std::pair<double, double>> weights;
  enumerate_allowed(spec, [&](const DiscreteConfig& c) {
    int nmax = 0;
    for (int v : c.v)
      if (v == top) ++nmax;
    double w1 = powi(gamma1, nmax);
    double w2 = powi(gamma2, nmax);
    z1 += w1;
    z2 += w2;
    weights.push_back({w1, w2});
  }, cap);
  double tv = 0.0;
  for (const auto& [w1, w2] : weights) tv += std::fabs(w1 / z1 - w2 / z2);
  return 0.5 * tv;
}

}  // namespace avalanche
