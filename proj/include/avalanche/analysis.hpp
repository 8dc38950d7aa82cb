#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "avalanche/engine.hpp"
#include "avalanche/lattice.hpp"
#include "avalanche/rng.hpp"

namespace avalanche {

/// Finite-volume Green's function G(x,y) = (Delta)^-1_xy: expected topplings
/// at y per unit addition at x under the stationary measure.
struct GreenTable {
  Lattice spec;
  std::vector<double> g;  // row-major, size n*n

  double at(int x, int y) const {
    return g[static_cast<size_t>(x) * static_cast<size_t>(spec->size()) + static_cast<size_t>(y)];
  }
};

/// Dense inverse of the toppling matrix, with residual check < 1e-10 and one
/// pass of iterative refinement. Lattices above the dense cap are rejected;
/// use green_column for single columns there.
GreenTable green_exact(const Lattice& spec);

/// One column of the Green's function via conjugate gradients, any size.
std::vector<double> green_column(const Lattice& spec, int x);

/// Infinite-volume Green's function of Z^d at lattice offset x, evaluated by
/// the killed-walk series G = 1/(2d+g) * sum_n (2d/(2d+g))^n p_n(0,x).
/// Requires gamma > 0 and a truncation deep enough for a 1e-10 tail; throws
/// with the required depth otherwise. d = 1 and d = 2 use exact binomial
/// transition probabilities; higher d uses a dynamic program.
double green_infinite(int d, double gamma, const Coord& x, int truncation);

/// Smallest truncation giving a geometric tail below 1e-10.
int green_series_depth(int d, double gamma, const Coord& x);

struct DharCheck {
  double estimate = 0.0;
  double stderr_ = 0.0;
  double exact = 0.0;
};

/// Monte Carlo check of E[n(x,y)] = G(x,y) over the stationary measure.
DharCheck check_dhar(const Lattice& spec, int x, int y, uint64_t samples, uint64_t seed,
                     int threads = 0);

/// All-pairs Dhar table: means and standard errors of n(x,y) plus the exact
/// Green values, estimated in one pass (one addition per origin per sample).
struct DharTable {
  Lattice spec;
  std::vector<double> estimate;  // n*n
  std::vector<double> se;        // n*n
  std::vector<double> exact;     // n*n
};
DharTable dhar_table(const Lattice& spec, uint64_t samples, uint64_t seed, int threads = 0);

struct DecayPoint {
  int distance = 0;
  double cov = 0.0;
  double se = 0.0;
  bool used = false;  // |cov| > 3 se, included in the fit
};

struct DecayFit {
  double gamma = 0.0;
  std::vector<DecayPoint> points;
  double rate = 0.0;      // fitted exponential decay rate of |cov|
  double rate_se = 0.0;
  double rate_ci_lo = 0.0;
  double rate_ci_hi = 0.0;
  bool ok = false;
  std::string note;
};

struct CovarianceOptions {
  std::vector<int> distances = {2, 4, 6, 8};
  uint64_t samples = 100000;
  uint64_t seed = 0;
  int threads = 0;
  int margin = -1;  // distance kept to the boundary; default max(distances)
};

/// Covariance decay of the maximal-height indicator field. Pairs at each
/// tested distance are translation-averaged over an inner box kept `margin`
/// away from the boundary; the fit is weighted least squares on log|cov|,
/// using only distances where the estimate clears 3 standard errors.
DecayFit covariance_decay(const Lattice& spec, const CovarianceOptions& opt);

/// Transfer-current kernel of the maximal-height field: K(x,y) = gamma *
/// G(x,y). Joint maximal-height probabilities are det(K restricted).
GreenTable max_height_kernel(const Lattice& spec);

/// det of the kernel restricted to `sites`.
double kernel_joint_probability(const GreenTable& kernel, std::span<const int> sites);

/// Exact total-variation distance between the discretized stationary
/// measures at gamma1 and gamma2 on the same site set (enumeration-based).
double tv_distance_exact(const Lattice& spec, double gamma1, double gamma2,
                         uint64_t cap = 10'000'000);

}  // namespace avalanche
