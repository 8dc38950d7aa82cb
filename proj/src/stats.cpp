#include "avalanche/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace avalanche::stats {

namespace {

// Series expansion of P(a,x), valid for x < a + 1.
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < 500; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a,x) (modified Lentz), valid for x >= a + 1.
double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 500; ++i) {
    double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_q(double a, double x) {
  if (a <= 0.0 || x < 0.0) throw std::invalid_argument("gamma_q: need a > 0, x >= 0");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_cf(a, x);
}

double chisq_pvalue(double stat, int dof) {
  if (dof <= 0) throw std::invalid_argument("chisq_pvalue: dof must be positive");
  if (stat <= 0.0) return 1.0;
  return gamma_q(0.5 * dof, 0.5 * stat);
}

double chisq_gof_stat(std::span<const uint64_t> counts, std::span<const double> probs) {
  if (counts.size() != probs.size())
    throw std::invalid_argument("chisq_gof_stat: size mismatch");
  double total = 0.0;
  uint64_t n = 0;
  for (double p : probs) total += p;
  for (uint64_t c : counts) n += c;
  if (total <= 0.0 || n == 0) throw std::invalid_argument("chisq_gof_stat: empty input");
  double stat = 0.0;
  for (size_t i = 0; i < counts.size(); ++i) {
    double e = static_cast<double>(n) * probs[i] / total;
    if (e <= 0.0) {
      if (counts[i] > 0) return std::numeric_limits<double>::infinity();
      continue;
    }
    double d = static_cast<double>(counts[i]) - e;
    stat += d * d / e;
  }
  return stat;
}

double chisq_two_sample_stat(std::span<const uint64_t> a, std::span<const uint64_t> b, int* dof_out) {
  if (a.size() != b.size()) throw std::invalid_argument("chisq_two_sample_stat: size mismatch");
  double na = 0.0, nb = 0.0;
  for (uint64_t c : a) na += static_cast<double>(c);
  for (uint64_t c : b) nb += static_cast<double>(c);
  if (na == 0.0 || nb == 0.0) throw std::invalid_argument("chisq_two_sample_stat: empty sample");
  double stat = 0.0;
  int cats = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    double tot = static_cast<double>(a[i] + b[i]);
    if (tot == 0.0) continue;
    ++cats;
    double ea = na * tot / (na + nb);
    double eb = nb * tot / (na + nb);
    double da = static_cast<double>(a[i]) - ea;
    double db = static_cast<double>(b[i]) - eb;
    stat += da * da / ea + db * db / eb;
  }
  if (dof_out) *dof_out = cats - 1;
  return stat;
}

double ks_uniform_pvalue(std::vector<double>& data) {
  if (data.empty()) throw std::invalid_argument("ks_uniform_pvalue: empty data");
  std::sort(data.begin(), data.end());
  double n = static_cast<double>(data.size());
  double d = 0.0;
  for (size_t i = 0; i < data.size(); ++i) {
    double cdf = data[i];  // uniform on [0,1)
    double hi = static_cast<double>(i + 1) / n - cdf;
    double lo = cdf - static_cast<double>(i) / n;
    d = std::max({d, hi, lo});
  }
  // Stephens' asymptotic correction
  double sq = std::sqrt(n);
  double lambda = (sq + 0.12 + 0.11 / sq) * d;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    double term = 2.0 * ((k % 2 == 1) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::fabs(term) < 1e-12) break;
  }
  return std::clamp(sum, 0.0, 1.0);
}

double MeanVar::se() const {
  return n > 1 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0;
}

WlsFit weighted_least_squares(std::span<const double> x, std::span<const double> y,
                              std::span<const double> w) {
  if (x.size() != y.size() || x.size() != w.size())
    throw std::invalid_argument("weighted_least_squares: size mismatch");
  WlsFit fit;
  fit.points = static_cast<int>(x.size());
  if (x.size() < 2) return fit;
  double sw = 0.0, swx = 0.0, swy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    swx += w[i] * x[i];
    swy += w[i] * y[i];
  }
  double xbar = swx / sw, ybar = swy / sw;
  double sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxx += w[i] * (x[i] - xbar) * (x[i] - xbar);
    sxy += w[i] * (x[i] - xbar) * (y[i] - ybar);
  }
  if (sxx <= 0.0) return fit;
  fit.slope = sxy / sxx;
  fit.intercept = ybar - fit.slope * xbar;
  fit.slope_se = std::sqrt(1.0 / sxx);
  fit.ok = true;
  return fit;
}

}  // namespace avalanche::stats
