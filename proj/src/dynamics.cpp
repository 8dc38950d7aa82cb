#include "avalanche/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "avalanche/parallel.hpp"
#include "avalanche/sampler.hpp"
#include "avalanche/stats.hpp"

namespace avalanche {

void RateProfile::validate() const {
  if (!spec) throw std::invalid_argument("RateProfile: no lattice");
  if (static_cast<int>(phi.size()) != spec->size())
    throw std::invalid_argument("RateProfile: size mismatch");
  double t = 0.0;
  for (double r : phi) {
    if (r < 0.0 || !std::isfinite(r))
      throw std::invalid_argument("RateProfile: rates must be finite and >= 0");
    t += r;
  }
  if (t <= 0.0) throw std::invalid_argument("RateProfile: total rate must be positive");
}

RateProfile RateProfile::constant(Lattice spec, double rate) {
  RateProfile p;
  p.spec = std::move(spec);
  p.phi.assign(static_cast<size_t>(p.spec->size()), rate);
  p.validate();
  p.build_cum();
  return p;
}

RateProfile RateProfile::finite_support(Lattice spec, const std::vector<int>& sites, double rate) {
  RateProfile p;
  p.spec = std::move(spec);
  p.phi.assign(static_cast<size_t>(p.spec->size()), 0.0);
  for (int s : sites) {
    if (s < 0 || s >= p.spec->size()) throw std::invalid_argument("RateProfile: site out of range");
    p.phi[static_cast<size_t>(s)] = rate;
  }
  p.validate();
  p.build_cum();
  return p;
}

RateProfile RateProfile::decaying(Lattice spec, double amplitude, double decay) {
  RateProfile p;
  p.spec = std::move(spec);
  p.phi.resize(static_cast<size_t>(p.spec->size()));
  for (int s = 0; s < p.spec->size(); ++s) {
    int l1 = 0;
    for (int c : p.spec->point(s)) l1 += std::abs(c);
    p.phi[static_cast<size_t>(s)] = amplitude * std::exp(-decay * static_cast<double>(l1));
  }
  p.validate();
  p.build_cum();
  return p;
}

void RateProfile::build_cum() {
  cum_.resize(phi.size());
  double t = 0.0;
  for (size_t i = 0; i < phi.size(); ++i) {
    t += phi[i];
    cum_[i] = t;
  }
}

double RateProfile::total() const { return cum_.empty() ? 0.0 : cum_.back(); }

int RateProfile::draw_site(RngStream& rng) const {
  double u = rng.next_double() * total();
  auto it = std::upper_bound(cum_.begin(), cum_.end(), u);
  if (it == cum_.end()) --it;
  return static_cast<int>(it - cum_.begin());
}

Trajectory simulate(const HeightConfig& initial, const RateProfile& rates, double t_max,
                    RngStream& rng, const SimOptions& opt) {
  if (t_max < 0.0) throw std::invalid_argument("simulate: t_max must be >= 0");
  if (!initial.is_stable()) throw std::invalid_argument("simulate: initial state must be stable");
  if (rates.spec->size() != initial.spec->size())
    throw std::invalid_argument("simulate: rate profile lattice mismatch");
  for (size_t i = 0; i < opt.checkpoints.size(); ++i) {
    double c = opt.checkpoints[i];
    if (c < 0.0 || c > t_max || (i > 0 && c <= opt.checkpoints[i - 1]))
      throw std::invalid_argument("simulate: checkpoints must be strictly increasing in [0, t_max]");
  }

  Trajectory traj;
  traj.final_state = initial;
  Toppler top(initial.spec);
  double total = rates.total();
  double t = 0.0;
  size_t next_cp = 0;
  auto flush_checkpoints = [&](double now) {
    while (next_cp < opt.checkpoints.size() && opt.checkpoints[next_cp] <= now) {
      traj.checkpoints.push_back({opt.checkpoints[next_cp], discretize(traj.final_state)});
      ++next_cp;
    }
  };
  for (;;) {
    t += rng.exponential(total);
    if (t > t_max) break;
    flush_checkpoints(t);
    int x = rates.draw_site(rng);
    traj.final_state.h[static_cast<size_t>(x)] += 1.0;
    auto o = top.run(traj.final_state.h);
    if (opt.record_events) {
      TrajEvent ev;
      ev.t = t;
      ev.site = x;
      ev.steps = o.steps;
      ev.av_size = o.av_size;
      ev.dissipated = initial.spec->gamma() * static_cast<double>(o.steps) +
                      static_cast<double>(o.crossings);
      traj.events.push_back(ev);
    }
  }
  flush_checkpoints(t_max);
  return traj;
}

RationalTrajectory simulate_rational(const RationalConfig& initial, const RateProfile& rates,
                                     double t_max, RngStream& rng) {
  if (t_max < 0.0) throw std::invalid_argument("simulate_rational: t_max must be >= 0");
  if (!initial.is_stable())
    throw std::invalid_argument("simulate_rational: initial state must be stable");
  RationalTrajectory traj;
  traj.final_state = initial;
  Toppler top(initial.spec);
  double total = rates.total();
  double t = 0.0;
  for (;;) {
    t += rng.exponential(total);
    if (t > t_max) break;
    int x = rates.draw_site(rng);
    traj.final_state.q[static_cast<size_t>(x)] += initial.n;
    auto o = top.run_rational(traj.final_state.q, initial.n, initial.k);
    TrajEvent ev;
    ev.t = t;
    ev.site = x;
    ev.steps = o.steps;
    ev.av_size = o.av_size;
    ev.dissipated = (static_cast<double>(initial.k) * static_cast<double>(o.steps) +
                     static_cast<double>(initial.n) * static_cast<double>(o.crossings)) /
                    static_cast<double>(initial.n);
    traj.events.push_back(ev);
  }
  return traj;
}

namespace {

struct StatAcc {
  uint64_t n = 0;
  std::vector<uint64_t> hist_start;  // site * cats + value
  std::vector<uint64_t> hist_end;
  std::unique_ptr<PartialWilson> pw;
  std::unique_ptr<Toppler> top;
  std::vector<int> targets, xi;
  std::vector<double> h;

  void merge(const StatAcc& o) {
    if (o.n == 0) return;
    if (hist_start.empty()) {
      n = o.n;
      hist_start = o.hist_start;
      hist_end = o.hist_end;
      return;
    }
    for (size_t i = 0; i < hist_start.size(); ++i) {
      hist_start[i] += o.hist_start[i];
      hist_end[i] += o.hist_end[i];
    }
    n += o.n;
  }
};

}  // namespace

StationarityReport stationarity_test(const Lattice& spec, const RateProfile& rates,
                                     double horizon, uint64_t replicas, uint64_t seed,
                                     int threads, double alpha) {
  const int n = spec->size();
  const int cats = 2 * spec->dim() + 1;
  const int top_v = 2 * spec->dim();
  McConfig cfg{.seed = seed, .threads = threads};
  double total = rates.total();

  auto acc = mc_reduce<StatAcc>(replicas, cfg, 0, [&](StatAcc& a, uint64_t, RngStream& rng) {
    if (!a.pw) {
      a.pw = std::make_unique<PartialWilson>(spec);
      a.top = std::make_unique<Toppler>(spec);
      a.targets.resize(static_cast<size_t>(n));
      for (int i = 0; i < n; ++i) a.targets[static_cast<size_t>(i)] = i;
      a.xi.resize(static_cast<size_t>(n));
      a.h.resize(static_cast<size_t>(n));
      a.hist_start.assign(static_cast<size_t>(n) * static_cast<size_t>(cats), 0);
      a.hist_end.assign(static_cast<size_t>(n) * static_cast<size_t>(cats), 0);
    }
    // fresh stationary draw for the time-0 histogram
    a.pw->sample(a.targets, rng, a.xi);
    for (int s = 0; s < n; ++s)
      ++a.hist_start[static_cast<size_t>(s) * static_cast<size_t>(cats) + static_cast<size_t>(a.xi[static_cast<size_t>(s)])];
    // independent stationary draw, evolved to the horizon
    a.pw->sample(a.targets, rng, a.xi);
    for (int s = 0; s < n; ++s) {
      int v = a.xi[static_cast<size_t>(s)];
      a.h[static_cast<size_t>(s)] = (v < top_v) ? static_cast<double>(v) + rng.next_double()
                                                : static_cast<double>(top_v) + rng.next_double() * spec->gamma();
    }
    double t = 0.0;
    for (;;) {
      t += rng.exponential(total);
      if (t > horizon) break;
      int x = rates.draw_site(rng);
      a.h[static_cast<size_t>(x)] += 1.0;
      a.top->run(a.h);
    }
    for (int s = 0; s < n; ++s) {
      int v = std::min(static_cast<int>(a.h[static_cast<size_t>(s)]), top_v);
      ++a.hist_end[static_cast<size_t>(s) * static_cast<size_t>(cats) + static_cast<size_t>(v)];
    }
    ++a.n;
  });

  StationarityReport rep;
  rep.replicas = acc.n;
  rep.horizon = horizon;
  rep.bonferroni_threshold = alpha / static_cast<double>(n);
  rep.pass = true;
  for (int s = 0; s < n; ++s) {
    std::span<const uint64_t> a(acc.hist_start.data() + static_cast<size_t>(s) * static_cast<size_t>(cats), static_cast<size_t>(cats));
    std::span<const uint64_t> b(acc.hist_end.data() + static_cast<size_t>(s) * static_cast<size_t>(cats), static_cast<size_t>(cats));
    int dof = 0;
    double stat = stats::chisq_two_sample_stat(a, b, &dof);
    double p = dof > 0 ? stats::chisq_pvalue(stat, dof) : 1.0;
    rep.stats.push_back(stat);
    rep.pvalues.push_back(p);
    rep.min_pvalue = std::min(rep.min_pvalue, p);
    if (p <= rep.bonferroni_threshold) rep.pass = false;
  }
  return rep;
}

namespace {

struct LimitAcc {
  uint64_t n = 0;
  std::vector<uint64_t> height_hist;
  std::vector<uint64_t> size_hist;
  std::unique_ptr<PartialWilson> pw;
  std::unique_ptr<Toppler> top;
  std::vector<int> targets, xi;
  std::vector<double> h;

  void merge(const LimitAcc& o) {
    if (o.n == 0) return;
    if (height_hist.empty()) {
      n = o.n;
      height_hist = o.height_hist;
      size_hist = o.size_hist;
      return;
    }
    for (size_t i = 0; i < height_hist.size(); ++i) height_hist[i] += o.height_hist[i];
    for (size_t i = 0; i < size_hist.size(); ++i) size_hist[i] += o.size_hist[i];
    n += o.n;
  }
};

double hist_tv(std::span<const uint64_t> a, std::span<const uint64_t> b) {
  double na = 0.0, nb = 0.0;
  for (uint64_t v : a) na += static_cast<double>(v);
  for (uint64_t v : b) nb += static_cast<double>(v);
  double tv = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    tv += std::fabs(static_cast<double>(a[i]) / na - static_cast<double>(b[i]) / nb);
  return 0.5 * tv;
}

}  // namespace

GammaLimitReport gamma_limit_experiment(const Lattice& spec, const GammaLimitOptions& opt) {
  if (opt.gammas.empty()) throw std::invalid_argument("gamma_limit_experiment: no gammas");
  for (size_t i = 1; i < opt.gammas.size(); ++i)
    if (opt.gammas[i] >= opt.gammas[i - 1])
      throw std::invalid_argument("gamma_limit_experiment: gammas must be strictly descending");
  if (opt.gammas.back() <= 0.0)
    throw std::invalid_argument("gamma_limit_experiment: gammas must stay positive; 0 is the implicit reference");

  const int n = spec->size();
  const int cats = 2 * spec->dim() + 1;
  const int center = spec->site_at(Coord(static_cast<size_t>(spec->dim()), 0));
  if (center == kSink) throw std::invalid_argument("gamma_limit_experiment: lattice must contain the origin");
  const size_t size_cats = static_cast<size_t>(n) + 2;  // avalanche sizes 0..n, overflow bin

  std::vector<double> all_gammas = opt.gammas;
  all_gammas.push_back(0.0);

  // single-addition observables at stationarity, per gamma
  std::vector<LimitAcc> per_gamma;
  for (double g : all_gammas) {
    Lattice sg = with_gamma(*spec, g);
    McConfig cfg{.seed = opt.seed, .threads = opt.threads};
    per_gamma.push_back(mc_reduce<LimitAcc>(opt.samples, cfg, 0, [&](LimitAcc& a, uint64_t, RngStream& rng) {
      if (!a.pw) {
        a.pw = std::make_unique<PartialWilson>(sg);
        a.top = std::make_unique<Toppler>(sg);
        a.targets.resize(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) a.targets[static_cast<size_t>(i)] = i;
        a.xi.resize(static_cast<size_t>(n));
        a.h.resize(static_cast<size_t>(n));
        a.height_hist.assign(static_cast<size_t>(cats), 0);
        a.size_hist.assign(size_cats, 0);
      }
      a.pw->sample(a.targets, rng, a.xi);
      ++a.height_hist[static_cast<size_t>(a.xi[static_cast<size_t>(center)])];
      const int top_v = 2 * sg->dim();
      for (int s = 0; s < n; ++s) {
        int v = a.xi[static_cast<size_t>(s)];
        a.h[static_cast<size_t>(s)] = (v < top_v) ? static_cast<double>(v) + rng.next_double()
                                                  : static_cast<double>(top_v) + rng.next_double() * sg->gamma();
      }
      a.h[static_cast<size_t>(center)] += 1.0;
      auto o = a.top->run(a.h);
      size_t bin = std::min(static_cast<size_t>(o.av_size), size_cats - 1);
      ++a.size_hist[bin];
      ++a.n;
    }));
  }

  // fixed stable inputs, drawn once at gamma = 0, shared by every gamma
  Lattice s0 = with_gamma(*spec, 0.0);
  std::vector<HeightConfig> fixed;
  {
    RngStream rng(opt.seed, 999999);
    for (uint64_t i = 0; i < opt.fixed_configs; ++i) fixed.push_back(sample_m(s0, rng));
  }
  std::vector<std::vector<double>> a0_results;       // a^0 applied to each fixed config
  std::vector<std::vector<uint64_t>> prev_counts;    // per fixed config, previous gamma's toppling numbers
  for (const HeightConfig& eta : fixed) {
    HeightConfig conf(s0, eta.h);
    auto [res, rec] = add(conf, center);
    a0_results.push_back(res.h);
  }

  GammaLimitReport rep;
  rep.samples = opt.samples;
  prev_counts.assign(fixed.size(), {});
  for (size_t gi = 0; gi < opt.gammas.size(); ++gi) {
    double g = opt.gammas[gi];
    Lattice sg = with_gamma(*spec, g);
    GammaLimitEntry e;
    e.gamma = g;
    e.tv_height_law = hist_tv(per_gamma[gi].height_hist, per_gamma.back().height_hist);
    e.tv_avalanche_size = hist_tv(per_gamma[gi].size_hist, per_gamma.back().size_hist);
    for (uint64_t c : per_gamma[gi].height_hist)
      e.height_hist.push_back(static_cast<double>(c) / static_cast<double>(per_gamma[gi].n));

    double diff_sum = 0.0;
    for (size_t f = 0; f < fixed.size(); ++f) {
      HeightConfig conf(sg, fixed[f].h);
      auto [res, rec] = add(conf, center);
      int differing = 0;
      // half-cell threshold: counts sites whose toppling numbers disagreed,
      // not the O(gamma * N) drift present wherever an avalanche ran
      for (int s = 0; s < n; ++s)
        if (std::fabs(res.h[static_cast<size_t>(s)] - a0_results[f][static_cast<size_t>(s)]) > 0.5)
          ++differing;
      diff_sum += static_cast<double>(differing) / static_cast<double>(n);
      // monotonicity along the descending gamma grid: toppling numbers grow
      // as gamma falls
      if (!prev_counts[f].empty()) {
        for (int s = 0; s < n; ++s)
          if (rec.toppling_counts[static_cast<size_t>(s)] < prev_counts[f][static_cast<size_t>(s)])
            ++e.nesting_violations;
      }
      prev_counts[f] = rec.toppling_counts;
    }
    e.addition_diff_fraction = diff_sum / static_cast<double>(fixed.size());
    rep.entries.push_back(e);
  }

  rep.tv_monotone = true;
  for (size_t i = 1; i < rep.entries.size(); ++i)
    if (rep.entries[i].tv_height_law >= rep.entries[i - 1].tv_height_law) rep.tv_monotone = false;
  // Kendall trend of TV against gamma over all pairs
  int concordant = 0, discordant = 0;
  for (size_t i = 0; i < rep.entries.size(); ++i)
    for (size_t j = i + 1; j < rep.entries.size(); ++j) {
      double d = (rep.entries[i].tv_height_law - rep.entries[j].tv_height_law);
      if (d > 0) ++concordant;
      else if (d < 0) ++discordant;
    }
  int pairs = concordant + discordant;
  rep.kendall_tau = pairs > 0 ? static_cast<double>(concordant - discordant) / pairs : 0.0;
  return rep;
}

}  // namespace avalanche
