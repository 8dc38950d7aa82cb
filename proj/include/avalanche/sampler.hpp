#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "avalanche/allowed.hpp"
#include "avalanche/engine.hpp"
#include "avalanche/lattice.hpp"
#include "avalanche/rng.hpp"

namespace avalanche {

/// A network random walk trajectory on the wired graph. Vertices are site
/// indices, possibly ending at kSink.
struct WalkPath {
  std::vector<int> vertices;
};

/// One step of the network random walk: each ordinary edge with probability
/// 1/(2d+gamma), the special edge with probability gamma/(2d+gamma).
/// Returns the next vertex (site index or kSink).
int network_walk_step(const LatticeSpec& spec, int v, RngStream& rng);
int network_walk_step(const WiredGraph& graph, int v, RngStream& rng);

/// Chronological loop erasure; first and last vertices are preserved.
WalkPath loop_erase(const WalkPath& path);

struct WilsonOptions {
  bool reversed_order = false;       // site enumeration order (tested invariance)
  uint64_t step_cap = 1'000'000'000; // per-walk safety valve, e.g. gamma = 0
};

/// Sample a spanning tree of the wired graph with P(t) proportional to
/// gamma^(number of special edges): Wilson's algorithm with the network
/// random walk. Requires gamma > 0 or a reachable boundary.
SpanningTree wilson_sample(const Lattice& spec, RngStream& rng, const WilsonOptions& opt = {});

/// Sample the discretized stationary measure nu = tree_to_config(wilson).
DiscreteConfig sample_nu(const Lattice& spec, RngStream& rng, const WilsonOptions& opt = {});

/// Sample the continuous stationary measure m: nu plus independent uniform
/// fill within each cell.
HeightConfig sample_m(const Lattice& spec, RngStream& rng, const WilsonOptions& opt = {});

/// Incremental Wilson sampler producing discrete heights at selected target
/// sites only: walks are run from the targets' closed neighborhoods and the
/// heights are read off the partial forest. Marginals agree exactly with
/// sample_nu. Buffers are reused across samples; one instance per thread.
class PartialWilson {
 public:
  explicit PartialWilson(Lattice spec);

  /// Heights at `targets`, written to `out` (same length).
  void sample(std::span<const int> targets, RngStream& rng, std::span<int> out,
              const WilsonOptions& opt = {});

  const Lattice& spec() const { return spec_; }
  /// Forest accessors for committed sites of the current sample.
  int parent(int site) const { return parent_[static_cast<size_t>(site)]; }
  int parent_dir(int site) const { return parent_dir_[static_cast<size_t>(site)]; }

 private:
  int walk_and_commit(int start, RngStream& rng, uint64_t step_cap);
  int depth_of(int v);

  Lattice spec_;
  uint64_t epoch_ = 0;
  std::vector<uint64_t> forest_mark_;
  std::vector<uint64_t> depth_mark_;
  std::vector<int> parent_;      // site or kSink, valid when forest_mark == epoch
  std::vector<int> parent_dir_;  // direction label or kSpecialDir
  std::vector<int> depth_;
  std::vector<int> next_dir_;    // last exit edge of the current walk
  std::vector<int> stack_;
};

}  // namespace avalanche
