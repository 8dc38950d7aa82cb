#include "avalanche/linalg.hpp"

#include <cmath>
#include <stdexcept>

#include "avalanche/lattice.hpp"

namespace avalanche {

DenseCholesky::DenseCholesky(std::vector<double> a, int n) : n_(n), l_(std::move(a)) {
  if (static_cast<size_t>(n) * static_cast<size_t>(n) != l_.size())
    throw std::invalid_argument("DenseCholesky: size mismatch");
  auto at = [&](int i, int j) -> double& { return l_[static_cast<size_t>(i) * static_cast<size_t>(n_) + static_cast<size_t>(j)]; };
  for (int j = 0; j < n_; ++j) {
    double d = at(j, j);
    for (int k = 0; k < j; ++k) d -= at(j, k) * at(j, k);
    if (d <= 0.0 || !std::isfinite(d))
      throw std::runtime_error("DenseCholesky: matrix is not positive definite");
    d = std::sqrt(d);
    at(j, j) = d;
    for (int i = j + 1; i < n_; ++i) {
      double s = at(i, j);
      for (int k = 0; k < j; ++k) s -= at(i, k) * at(j, k);
      at(i, j) = s / d;
    }
  }
}

void DenseCholesky::solve_in_place(std::span<double> b) const {
  if (static_cast<int>(b.size()) != n_) throw std::invalid_argument("DenseCholesky::solve: size mismatch");
  auto at = [&](int i, int j) { return l_[static_cast<size_t>(i) * static_cast<size_t>(n_) + static_cast<size_t>(j)]; };
  for (int i = 0; i < n_; ++i) {
    double s = b[static_cast<size_t>(i)];
    for (int k = 0; k < i; ++k) s -= at(i, k) * b[static_cast<size_t>(k)];
    b[static_cast<size_t>(i)] = s / at(i, i);
  }
  for (int i = n_ - 1; i >= 0; --i) {
    double s = b[static_cast<size_t>(i)];
    for (int k = i + 1; k < n_; ++k) s -= at(k, i) * b[static_cast<size_t>(k)];
    b[static_cast<size_t>(i)] = s / at(i, i);
  }
}

std::vector<double> DenseCholesky::solve(std::span<const double> b) const {
  std::vector<double> x(b.begin(), b.end());
  solve_in_place(x);
  return x;
}

double DenseCholesky::log_det() const {
  double s = 0.0;
  for (int i = 0; i < n_; ++i) s += std::log(l_[static_cast<size_t>(i) * static_cast<size_t>(n_) + static_cast<size_t>(i)]);
  return 2.0 * s;
}

double DenseCholesky::det() const { return std::exp(log_det()); }

std::vector<double> cg_solve(const LatticeSpec& spec, std::span<const double> b,
                             double tol, int max_iter) {
  const int n = spec.size();
  const int deg = spec.degree();
  if (static_cast<int>(b.size()) != n) throw std::invalid_argument("cg_solve: size mismatch");
  auto apply = [&](const std::vector<double>& v, std::vector<double>& out) {
    for (int i = 0; i < n; ++i) {
      double s = spec.threshold() * v[static_cast<size_t>(i)];
      for (int dir = 0; dir < deg; ++dir) {
        int j = spec.neighbor(i, dir);
        if (j != kSink) s -= v[static_cast<size_t>(j)];
      }
      out[static_cast<size_t>(i)] = s;
    }
  };
  std::vector<double> x(static_cast<size_t>(n), 0.0);
  std::vector<double> r(b.begin(), b.end());
  std::vector<double> p = r;
  std::vector<double> ap(static_cast<size_t>(n));
  double rs = 0.0;
  for (double v : r) rs += v * v;
  for (int it = 0; it < max_iter; ++it) {
    double rinf = 0.0;
    for (double v : r) rinf = std::max(rinf, std::fabs(v));
    if (rinf <= tol) return x;
    apply(p, ap);
    double pap = 0.0;
    for (int i = 0; i < n; ++i) pap += p[static_cast<size_t>(i)] * ap[static_cast<size_t>(i)];
    if (pap <= 0.0) throw std::runtime_error("cg_solve: matrix is not positive definite");
    double alpha = rs / pap;
    for (int i = 0; i < n; ++i) {
      x[static_cast<size_t>(i)] += alpha * p[static_cast<size_t>(i)];
      r[static_cast<size_t>(i)] -= alpha * ap[static_cast<size_t>(i)];
    }
    double rs2 = 0.0;
    for (double v : r) rs2 += v * v;
    double beta = rs2 / rs;
    rs = rs2;
    for (int i = 0; i < n; ++i) p[static_cast<size_t>(i)] = r[static_cast<size_t>(i)] + beta * p[static_cast<size_t>(i)];
  }
  throw std::runtime_error("cg_solve: did not converge");
}

}  // namespace avalanche
