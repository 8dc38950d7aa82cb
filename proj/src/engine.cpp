#include "avalanche/engine.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace avalanche {

namespace {

int64_t gcd64(int64_t a, int64_t b) { return b == 0 ? a : gcd64(b, a % b); }

void check_site(const Lattice& spec, int site) {
  if (!spec) throw std::invalid_argument("configuration has no lattice");
  if (site < 0 || site >= spec->size()) throw std::invalid_argument("site index out of range");
}

int64_t checked_add(int64_t a, int64_t b) {
  int64_t r;
  if (__builtin_add_overflow(a, b, &r)) throw std::overflow_error("rational mode: 64-bit overflow");
  return r;
}

}  // namespace

HeightConfig::HeightConfig(Lattice s, std::vector<double> heights)
    : spec(std::move(s)), h(std::move(heights)) {
  if (static_cast<int>(h.size()) != spec->size())
    throw std::invalid_argument("HeightConfig: size mismatch");
  for (double v : h)
    if (!(v >= 0.0) || !std::isfinite(v))
      throw std::invalid_argument("HeightConfig: heights must be finite and >= 0");
}

HeightConfig::HeightConfig(Lattice s, double fill) : spec(std::move(s)) {
  if (fill < 0.0) throw std::invalid_argument("HeightConfig: heights must be >= 0");
  h.assign(static_cast<size_t>(spec->size()), fill);
}

bool HeightConfig::is_stable() const {
  double thr = spec->threshold();
  for (double v : h)
    if (v >= thr) return false;
  return true;
}

double HeightConfig::total() const { return std::accumulate(h.begin(), h.end(), 0.0); }

DiscreteConfig::DiscreteConfig(Lattice s, std::vector<int> values)
    : spec(std::move(s)), v(std::move(values)) {
  if (static_cast<int>(v.size()) != spec->size())
    throw std::invalid_argument("DiscreteConfig: size mismatch");
  int top = 2 * spec->dim();
  for (int x : v)
    if (x < 0 || x > top) throw std::invalid_argument("DiscreteConfig: value out of {0,...,2d}");
}

RationalConfig::RationalConfig(Lattice s, int64_t n_, int64_t k_, std::vector<int64_t> values)
    : spec(std::move(s)), n(n_), k(k_), q(std::move(values)) {
  if (n <= 0 || k < 0) throw std::invalid_argument("RationalConfig: need n >= 1, k >= 0");
  if (k > 0 && gcd64(k, n) != 1)
    throw std::invalid_argument("RationalConfig: k and n must be coprime");
  if (k == 0 && n != 1) throw std::invalid_argument("RationalConfig: gamma = 0 requires n = 1");
  if (static_cast<int>(q.size()) != spec->size())
    throw std::invalid_argument("RationalConfig: size mismatch");
  for (int64_t v : q)
    if (v < 0) throw std::invalid_argument("RationalConfig: values must be >= 0");
}

bool RationalConfig::is_stable() const {
  int64_t thr = threshold();
  for (int64_t v : q)
    if (v >= thr) return false;
  return true;
}

std::vector<int> AvalancheRecord::avalanche_set() const {
  std::vector<int> out;
  for (size_t i = 0; i < toppling_counts.size(); ++i)
    if (toppling_counts[i] >= 1) out.push_back(static_cast<int>(i));
  return out;
}

uint64_t AvalancheRecord::max_count() const {
  uint64_t m = 0;
  for (uint64_t c : toppling_counts) m = std::max(m, c);
  return m;
}

Toppler::Toppler(Lattice spec) : spec_(std::move(spec)) {
  counts_.assign(static_cast<size_t>(spec_->size()), 0);
  queue_.assign(static_cast<size_t>(spec_->size()) + 1, 0);
  in_queue_.assign(static_cast<size_t>(spec_->size()), 0);
}

template <class T>
Toppler::Outcome Toppler::cascade(std::span<T> h, T thr, T give, SchedulePolicy policy) {
  const int n = spec_->size();
  const int deg = spec_->degree();
  std::fill(counts_.begin(), counts_.end(), 0);
  Outcome out;

  auto topple_once = [&](int x) {
    if (counts_[static_cast<size_t>(x)] == 0) ++out.av_size;
    ++counts_[static_cast<size_t>(x)];
    ++out.steps;
    h[static_cast<size_t>(x)] -= thr;
    out.crossings += static_cast<uint64_t>(spec_->boundary_degree(x));
    for (int dir = 0; dir < deg; ++dir) {
      int y = spec_->neighbor(x, dir);
      if (y != kSink) h[static_cast<size_t>(y)] += give;
    }
  };

  if (policy == SchedulePolicy::LexScan) {
    // reference policy: sweep sites in lexicographic order, one toppling per
    // visit, until a sweep performs none
    bool changed = true;
    while (changed) {
      changed = false;
      for (int x = 0; x < n; ++x) {
        if (h[static_cast<size_t>(x)] >= thr) {
          topple_once(x);
          changed = true;
        }
      }
    }
    return out;
  }

  // FIFO queue with an in-queue flag; each site enqueued at most once until
  // processed
  size_t head = 0, tail = 0;
  const size_t cap = queue_.size();
  auto push = [&](int x) {
    if (!in_queue_[static_cast<size_t>(x)]) {
      in_queue_[static_cast<size_t>(x)] = 1;
      queue_[tail] = x;
      tail = (tail + 1) % cap;
    }
  };
  for (int x = 0; x < n; ++x)
    if (h[static_cast<size_t>(x)] >= thr) push(x);
  while (head != tail) {
    int x = queue_[head];
    head = (head + 1) % cap;
    in_queue_[static_cast<size_t>(x)] = 0;
    while (h[static_cast<size_t>(x)] >= thr) {
      topple_once(x);
      for (int dir = 0; dir < deg; ++dir) {
        int y = spec_->neighbor(x, dir);
        if (y != kSink && h[static_cast<size_t>(y)] >= thr) push(y);
      }
    }
  }
  return out;
}

Toppler::Outcome Toppler::run(std::span<double> h, SchedulePolicy policy) {
  return cascade<double>(h, spec_->threshold(), 1.0, policy);
}

Toppler::Outcome Toppler::run_rational(std::span<int64_t> q, int64_t n, int64_t k,
                                       SchedulePolicy policy) {
  int64_t thr = 2 * spec_->dim() * n + k;
  // guard against value blow-up; heights only decrease in total, so checking
  // the inputs once suffices for 64-bit safety
  for (int64_t v : q) checked_add(v, thr);
  return cascade<int64_t>(q, thr, n, policy);
}

HeightConfig topple(const HeightConfig& config, int site) {
  check_site(config.spec, site);
  HeightConfig out = config;
  double thr = config.spec->threshold();
  if (out.h[static_cast<size_t>(site)] - thr < 0.0)
    throw std::invalid_argument("topple: would drive the height at the toppled site negative");
  out.h[static_cast<size_t>(site)] -= thr;
  for (int dir = 0; dir < config.spec->degree(); ++dir) {
    int y = config.spec->neighbor(site, dir);
    if (y != kSink) out.h[static_cast<size_t>(y)] += 1.0;
  }
  return out;
}

std::pair<HeightConfig, std::vector<uint64_t>> stabilize(const HeightConfig& config,
                                                         SchedulePolicy policy) {
  HeightConfig out = config;
  Toppler t(config.spec);
  t.run(out.h, policy);
  return {std::move(out), std::vector<uint64_t>(t.counts().begin(), t.counts().end())};
}

std::pair<RationalConfig, std::vector<uint64_t>> stabilize(const RationalConfig& config,
                                                           SchedulePolicy policy) {
  RationalConfig out = config;
  Toppler t(config.spec);
  t.run_rational(out.q, config.n, config.k, policy);
  return {std::move(out), std::vector<uint64_t>(t.counts().begin(), t.counts().end())};
}

std::pair<HeightConfig, AvalancheRecord> add(const HeightConfig& config, int site) {
  check_site(config.spec, site);
  if (!config.is_stable())
    throw std::invalid_argument("add: addition operators act on stable configurations");
  HeightConfig out = config;
  out.h[static_cast<size_t>(site)] += 1.0;
  Toppler t(config.spec);
  auto o = t.run(out.h);
  AvalancheRecord rec;
  rec.origin = site;
  rec.toppling_counts.assign(t.counts().begin(), t.counts().end());
  rec.steps = o.steps;
  rec.av_size = o.av_size;
  rec.dissipated = config.spec->gamma() * static_cast<double>(o.steps) + static_cast<double>(o.crossings);
  return {std::move(out), std::move(rec)};
}

namespace {

std::pair<RationalConfig, AvalancheRecord> add_quanta(const RationalConfig& config, int site,
                                                      int64_t quanta) {
  check_site(config.spec, site);
  if (!config.is_stable())
    throw std::invalid_argument("add: addition operators act on stable configurations");
  RationalConfig out = config;
  out.q[static_cast<size_t>(site)] = checked_add(out.q[static_cast<size_t>(site)], quanta);
  Toppler t(config.spec);
  auto o = t.run_rational(out.q, config.n, config.k);
  AvalancheRecord rec;
  rec.origin = site;
  rec.toppling_counts.assign(t.counts().begin(), t.counts().end());
  rec.steps = o.steps;
  rec.av_size = o.av_size;
  rec.dissipated = (static_cast<double>(config.k) * static_cast<double>(o.steps) +
                    static_cast<double>(config.n) * static_cast<double>(o.crossings)) /
                   static_cast<double>(config.n);
  return {std::move(out), std::move(rec)};
}

}  // namespace

std::pair<RationalConfig, AvalancheRecord> add_quantum(const RationalConfig& config, int site) {
  return add_quanta(config, site, 1);
}

std::pair<RationalConfig, AvalancheRecord> add_unit(const RationalConfig& config, int site) {
  return add_quanta(config, site, config.n);
}

RationalConfig to_rational(const HeightConfig& config, int64_t n, int64_t k) {
  if (n <= 0 || k < 0) throw std::invalid_argument("to_rational: need n >= 1, k >= 0");
  if (k > 0 && gcd64(k, n) != 1) throw std::invalid_argument("to_rational: k and n must be coprime");
  if (k == 0 && n != 1) throw std::invalid_argument("to_rational: gamma = 0 requires n = 1");
  double g = static_cast<double>(k) / static_cast<double>(n);
  if (std::fabs(config.spec->gamma() - g) > 1e-12)
    throw std::invalid_argument("to_rational: spec gamma is not k/n");
  std::vector<int64_t> q(config.h.size());
  for (size_t i = 0; i < config.h.size(); ++i)
    q[i] = static_cast<int64_t>(std::floor(static_cast<double>(n) * config.h[i]));
  return RationalConfig(config.spec, n, k, std::move(q));
}

HeightConfig from_rational(const RationalConfig& config) {
  std::vector<double> h(config.q.size());
  for (size_t i = 0; i < config.q.size(); ++i)
    h[i] = static_cast<double>(config.q[i]) / static_cast<double>(config.n);
  return HeightConfig(config.spec, std::move(h));
}

DiscreteConfig discretize(const HeightConfig& config) {
  if (!config.is_stable()) throw std::invalid_argument("discretize: configuration is not stable");
  int top = 2 * config.spec->dim();
  std::vector<int> v(config.h.size());
  for (size_t i = 0; i < config.h.size(); ++i)
    v[i] = std::min(static_cast<int>(std::floor(config.h[i])), top);
  return DiscreteConfig(config.spec, std::move(v));
}

}  // namespace avalanche
