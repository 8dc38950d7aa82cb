#pragma once

#include <span>
#include <vector>

namespace avalanche {

class LatticeSpec;

/// Dense Cholesky factorization of a symmetric positive definite matrix
/// (row-major). Throws std::runtime_error if the matrix is not SPD.
class DenseCholesky {
 public:
  DenseCholesky(std::vector<double> a, int n);

  int size() const { return n_; }
  void solve_in_place(std::span<double> b) const;
  std::vector<double> solve(std::span<const double> b) const;
  double log_det() const;
  double det() const;

 private:
  int n_;
  std::vector<double> l_;  // lower triangle
};

/// Conjugate gradient solve of Delta^(gamma) x = b, matrix-free on the
/// lattice neighbor table. Converges to ||r||_inf <= tol.
std::vector<double> cg_solve(const LatticeSpec& spec, std::span<const double> b,
                             double tol = 1e-12, int max_iter = 100000);

}  // namespace avalanche
