// Benchmark of the replica-parallel Monte Carlo kernels against the serial
// reference path. Both paths share the chunked reduction, so the outputs are
// bitwise identical; only the wall time differs.

#include <chrono>
#include <cstdio>
#include <string>

#include "avalanche/analysis.hpp"
#include "avalanche/dynamics.hpp"
#include "avalanche/parallel.hpp"
#include "avalanche/sampler.hpp"

using namespace avalanche;

namespace {

double seconds(std::chrono::steady_clock::time_point a, std::chrono::steady_clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

struct HistAcc {
  std::vector<uint64_t> counts;
  void merge(const HistAcc& o) {
    if (counts.empty()) {
      counts = o.counts;
      return;
    }
    for (size_t i = 0; i < counts.size(); ++i) counts[i] += o.counts[i];
  }
};

template <class Fn>
void bench(const char* name, uint64_t replicas, int threads, Fn&& body) {
  McConfig serial{.seed = 1, .threads = threads, .force_serial = true};
  McConfig parallel{.seed = 1, .threads = threads};
  auto t0 = std::chrono::steady_clock::now();
  HistAcc s = mc_reduce<HistAcc>(replicas, serial, 0, body);
  auto t1 = std::chrono::steady_clock::now();
  HistAcc p = mc_reduce<HistAcc>(replicas, parallel, 0, body);
  auto t2 = std::chrono::steady_clock::now();
  double ts = seconds(t0, t1), tp = seconds(t1, t2);
  bool identical = s.counts == p.counts;
  std::printf("%-28s %10.3fs serial %10.3fs omp(%d)  speedup %.2fx  results %s\n", name, ts, tp,
              threads, ts / tp, identical ? "identical" : "DIFFER");
}

}  // namespace

int main(int argc, char** argv) {
  uint64_t samples = argc > 1 ? std::stoull(argv[1]) : 200000;
  int threads = argc > 2 ? std::stoi(argv[2]) : resolve_threads(0);

  Lattice box = make_box(2, 4, 0.25);
  std::printf("lattice: 9x9 box, gamma = 0.25, %llu replicas\n",
              static_cast<unsigned long long>(samples));

  bench("wilson sample_nu", samples, threads, [&](HistAcc& a, uint64_t, RngStream& rng) {
    thread_local PartialWilson pw(box);
    thread_local std::vector<int> targets, xi;
    if (targets.empty()) {
      for (int i = 0; i < box->size(); ++i) targets.push_back(i);
      xi.resize(targets.size());
    }
    if (a.counts.empty()) a.counts.assign(5, 0);
    pw.sample(targets, rng, xi);
    ++a.counts[static_cast<size_t>(xi[static_cast<size_t>(box->size() / 2)])];
  });

  bench("stationary avalanche", samples, threads, [&](HistAcc& a, uint64_t, RngStream& rng) {
    thread_local PartialWilson pw(box);
    thread_local Toppler top(box);
    thread_local std::vector<int> targets, xi;
    thread_local std::vector<double> h;
    if (targets.empty()) {
      for (int i = 0; i < box->size(); ++i) targets.push_back(i);
      xi.resize(targets.size());
      h.resize(targets.size());
    }
    if (a.counts.empty()) a.counts.assign(static_cast<size_t>(box->size()) + 1, 0);
    pw.sample(targets, rng, xi);
    for (size_t i = 0; i < xi.size(); ++i)
      h[i] = (xi[i] < 4) ? xi[i] + rng.next_double() : 4.0 + rng.next_double() * box->gamma();
    h[static_cast<size_t>(box->size() / 2)] += 1.0;
    auto o = top.run(h);
    ++a.counts[std::min<size_t>(o.av_size, a.counts.size() - 1)];
  });

  return 0;
}
