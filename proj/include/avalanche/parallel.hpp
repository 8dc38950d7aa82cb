#pragma once

#include <cstdint>
#include <vector>

#include "avalanche/rng.hpp"

namespace avalanche {

/// Thread-count resolution: explicit request, else AVALANCHE_THREADS, else
/// the available parallelism.
int resolve_threads(int requested);

struct McConfig {
  uint64_t seed = 0;
  int threads = 0;         // 0 = resolve from env/hardware
  uint64_t chunk = 1024;   // replicas per chunk
  bool force_serial = false;  // serial reference path
};

/// Replica-parallel Monte Carlo reduction. Replica i draws from stream id
/// (stream_base + i) and replicas are grouped into fixed chunks; per-chunk
/// accumulators are merged in ascending chunk order, so the result is
/// bitwise identical for any thread count and for the serial reference path.
///
/// Acc: default-constructible, with void merge(const Acc&). Heavyweight
/// per-thread workspaces belong inside Acc (lazily built once per chunk).
/// Body: void(Acc&, uint64_t replica, RngStream&).
template <class Acc, class Body>
Acc mc_reduce(uint64_t replicas, const McConfig& cfg, uint64_t stream_base, Body&& body) {
  const uint64_t chunk = cfg.chunk == 0 ? 1024 : cfg.chunk;
  const uint64_t nchunks = replicas == 0 ? 0 : (replicas + chunk - 1) / chunk;
  std::vector<Acc> parts(static_cast<size_t>(nchunks));

  auto run_chunk = [&](int64_t c) {
    Acc& acc = parts[static_cast<size_t>(c)];
    uint64_t lo = static_cast<uint64_t>(c) * chunk;
    uint64_t hi = lo + chunk < replicas ? lo + chunk : replicas;
    for (uint64_t i = lo; i < hi; ++i) {
      RngStream rng(cfg.seed, stream_base + i);
      body(acc, i, rng);
    }
  };

  if (cfg.force_serial) {
    for (int64_t c = 0; c < static_cast<int64_t>(nchunks); ++c) run_chunk(c);
  } else {
    const int threads = resolve_threads(cfg.threads);
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (int64_t c = 0; c < static_cast<int64_t>(nchunks); ++c) run_chunk(c);
  }

  Acc out;
  for (const Acc& p : parts) out.merge(p);
  return out;
}

}  // namespace avalanche
