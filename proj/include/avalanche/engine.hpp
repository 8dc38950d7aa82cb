#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "avalanche/lattice.hpp"

namespace avalanche {

/// Continuous height configuration on a lattice.
struct HeightConfig {
  Lattice spec;
  std::vector<double> h;

  HeightConfig() = default;
  HeightConfig(Lattice s, std::vector<double> heights);
  explicit HeightConfig(Lattice s, double fill = 0.0);

  bool is_stable() const;
  double total() const;
};

/// Discretized heights in {0, ..., 2d}.
struct DiscreteConfig {
  Lattice spec;
  std::vector<int> v;

  DiscreteConfig() = default;
  DiscreteConfig(Lattice s, std::vector<int> values);

  bool operator==(const DiscreteConfig& o) const { return v == o.v; }
};

/// Integer heights in quanta of 1/n for rational dissipation gamma = k/n.
/// A site is stable when its value is below 2dn + k.
struct RationalConfig {
  Lattice spec;  // gamma of the spec must equal k/n
  int64_t n = 1;
  int64_t k = 0;
  std::vector<int64_t> q;

  RationalConfig() = default;
  RationalConfig(Lattice s, int64_t n_, int64_t k_, std::vector<int64_t> values);

  int64_t threshold() const { return 2 * spec->dim() * n + k; }
  bool is_stable() const;
};

/// Outcome of one addition: toppling numbers, avalanche set, dissipated mass.
struct AvalancheRecord {
  int origin = kSink;
  std::vector<uint64_t> toppling_counts;
  uint64_t steps = 0;        // total topplings
  uint64_t av_size = 0;      // sites toppling at least once
  double dissipated = 0.0;   // gamma * steps + boundary outflow

  std::vector<int> avalanche_set() const;
  uint64_t max_count() const;
};

enum class SchedulePolicy {
  FifoQueue,  // default cascade order
  LexScan,    // reference policy for order-independence tests
};

/// Reusable cascade workspace; one per thread. Stabilizes configurations in
/// place and exposes per-site toppling counts of the last run.
class Toppler {
 public:
  explicit Toppler(Lattice spec);

  struct Outcome {
    uint64_t steps = 0;
    uint64_t crossings = 0;  // ordinary boundary-edge crossings
    uint64_t av_size = 0;
  };

  Outcome run(std::span<double> h, SchedulePolicy policy = SchedulePolicy::FifoQueue);
  Outcome run_rational(std::span<int64_t> q, int64_t n, int64_t k,
                       SchedulePolicy policy = SchedulePolicy::FifoQueue);

  std::span<const uint64_t> counts() const { return counts_; }
  const Lattice& spec() const { return spec_; }

 private:
  template <class T>
  Outcome cascade(std::span<T> h, T thr, T give, SchedulePolicy policy);

  Lattice spec_;
  std::vector<uint64_t> counts_;
  std::vector<int> queue_;
  std::vector<uint8_t> in_queue_;
};

/// One toppling of `site` (legal or forced). Rejects topplings that would
/// drive the site's height negative.
HeightConfig topple(const HeightConfig& config, int site);

/// Stabilize; returns the stable configuration and the toppling numbers.
std::pair<HeightConfig, std::vector<uint64_t>> stabilize(
    const HeightConfig& config, SchedulePolicy policy = SchedulePolicy::FifoQueue);
std::pair<RationalConfig, std::vector<uint64_t>> stabilize(
    const RationalConfig& config, SchedulePolicy policy = SchedulePolicy::FifoQueue);

/// Addition operator a_x: add one unit at `site`, stabilize, record the
/// avalanche. Input must be stable.
std::pair<HeightConfig, AvalancheRecord> add(const HeightConfig& config, int site);

/// Rational-mode addition of a single quantum (the discrete-model a_x).
std::pair<RationalConfig, AvalancheRecord> add_quantum(const RationalConfig& config, int site);
/// Rational-mode addition of one unit of height, i.e. n quanta (b_x = a_x^n).
std::pair<RationalConfig, AvalancheRecord> add_unit(const RationalConfig& config, int site);

/// Map to the discrete model with matrix entries (2dn + k, -n); values are
/// floor(n * height). Requires gamma = k/n in lowest terms.
RationalConfig to_rational(const HeightConfig& config, int64_t n, int64_t k);
HeightConfig from_rational(const RationalConfig& config);

/// Discretizing map: value m on [m, m+1) for m < 2d, value 2d on
/// [2d, 2d + gamma). Input must be stable.
DiscreteConfig discretize(const HeightConfig& config);

}  // namespace avalanche
