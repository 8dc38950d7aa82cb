#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "avalanche/engine.hpp"
#include "avalanche/lattice.hpp"
#include "avalanche/rng.hpp"

namespace avalanche {

/// Per-site addition rates of the Poisson clocks.
struct RateProfile {
  Lattice spec;
  std::vector<double> phi;

  static RateProfile constant(Lattice spec, double rate);
  static RateProfile finite_support(Lattice spec, const std::vector<int>& sites, double rate);
  /// rate(x) = amplitude * exp(-decay * |x|_1)
  static RateProfile decaying(Lattice spec, double amplitude, double decay);

  double total() const;
  /// Draw a site with probability phi(x)/total.
  int draw_site(RngStream& rng) const;

 private:
  void validate() const;
  void build_cum();
  std::vector<double> cum_;
};

struct TrajEvent {
  double t = 0.0;
  int site = kSink;
  uint64_t steps = 0;
  uint64_t av_size = 0;
  double dissipated = 0.0;
};

struct Trajectory {
  std::vector<TrajEvent> events;
  std::vector<std::pair<double, DiscreteConfig>> checkpoints;
  HeightConfig final_state;
};

struct SimOptions {
  bool record_events = true;
  std::vector<double> checkpoints;  // strictly increasing times in [0, t_max]
};

/// Event-driven jump process: waiting times are exponential with rate
/// sum(phi), the addition site is drawn proportionally to phi, and each
/// event applies the addition operator. The final state equals the
/// stabilization of the initial state plus all logged additions.
Trajectory simulate(const HeightConfig& initial, const RateProfile& rates, double t_max,
                    RngStream& rng, const SimOptions& opt = {});

/// Rational-mode twin of simulate: integer quanta, exact arithmetic. Each
/// addition adds n quanta (one unit of height).
struct RationalTrajectory {
  std::vector<TrajEvent> events;
  RationalConfig final_state;
};
RationalTrajectory simulate_rational(const RationalConfig& initial, const RateProfile& rates,
                                     double t_max, RngStream& rng);

struct StationarityReport {
  std::vector<double> pvalues;      // per site
  std::vector<double> stats;        // per site chi-square
  double min_pvalue = 1.0;
  double bonferroni_threshold = 0.0;
  bool pass = false;
  uint64_t replicas = 0;
  double horizon = 0.0;
};

/// Two-sample test: per-site discretized histograms of fresh stationary
/// draws against end states of trajectories started from independent
/// stationary draws. Pass when every Bonferroni-corrected p exceeds `alpha`.
StationarityReport stationarity_test(const Lattice& spec, const RateProfile& rates,
                                     double horizon, uint64_t replicas, uint64_t seed,
                                     int threads = 0, double alpha = 0.001);

struct GammaLimitEntry {
  double gamma = 0.0;
  double tv_height_law = 0.0;      // center-site discretized law vs gamma = 0
  double tv_avalanche_size = 0.0;  // avalanche-size law at the center vs gamma = 0
  double addition_diff_fraction = 0.0;  // sites where a^gamma and a^0 land in different cells
  uint64_t nesting_violations = 0;      // avalanche sets not nested into gamma' < gamma
  std::vector<double> height_hist;      // center-site discretized law
};

struct GammaLimitReport {
  std::vector<GammaLimitEntry> entries;  // one per gamma, descending
  bool tv_monotone = false;              // TV decreasing along descending gamma
  double kendall_tau = 0.0;              // trend of TV against gamma
  uint64_t samples = 0;
};

struct GammaLimitOptions {
  std::vector<double> gammas = {1.0, 0.1, 0.01};  // descending, gamma = 0 added as reference
  uint64_t samples = 100000;
  uint64_t fixed_configs = 100;  // for the addition-convergence check
  uint64_t seed = 0;
  int threads = 0;
};

/// Zero-dissipation-limit experiment at finite volume: distances of
/// discretized observable laws to the gamma = 0 reference, avalanche
/// monotonicity, and the convergence of addition operators on fixed inputs.
GammaLimitReport gamma_limit_experiment(const Lattice& spec, const GammaLimitOptions& opt);

}  // namespace avalanche
