#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace avalanche::stats {

/// Regularized upper incomplete gamma Q(a, x).
double gamma_q(double a, double x);

/// Upper tail p-value of a chi-square statistic with `dof` degrees of freedom.
double chisq_pvalue(double stat, int dof);

/// Goodness-of-fit chi-square statistic of observed counts against exact
/// category probabilities (counts and probs aligned; probs need not sum to 1,
/// they are renormalized).
double chisq_gof_stat(std::span<const uint64_t> counts, std::span<const double> probs);

/// Two-sample chi-square statistic over shared categories (pooled
/// expectation). Categories where both samples are empty are skipped.
double chisq_two_sample_stat(std::span<const uint64_t> a, std::span<const uint64_t> b, int* dof_out);

/// One-sample Kolmogorov-Smirnov p-value for uniform[0,1) data.
/// `data` is modified (sorted).
double ks_uniform_pvalue(std::vector<double>& data);

/// Online mean/variance accumulator (Welford), mergeable.
struct MeanVar {
  uint64_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  void merge(const MeanVar& o) {
    if (o.n == 0) return;
    if (n == 0) { *this = o; return; }
    double d = o.mean - mean;
    uint64_t t = n + o.n;
    mean += d * static_cast<double>(o.n) / static_cast<double>(t);
    m2 += o.m2 + d * d * static_cast<double>(n) * static_cast<double>(o.n) / static_cast<double>(t);
    n = t;
  }
  double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
  double se() const;
};

/// Weighted least squares for y = intercept + slope * x.
struct WlsFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  int points = 0;
  bool ok = false;
};
WlsFit weighted_least_squares(std::span<const double> x, std::span<const double> y,
                              std::span<const double> w);

}  // namespace avalanche::stats
