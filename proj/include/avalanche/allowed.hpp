#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "avalanche/engine.hpp"
#include "avalanche/lattice.hpp"

namespace avalanche {

/// Result of the burning recursion. The sink burns at time 1; sites burn at
/// times >= 2, maximal-height sites exactly at time 2. burn_time is 0 for
/// sites that never burn (the configuration then contains a forbidden
/// subconfiguration).
struct BurnResult {
  std::vector<int> burn_time;
  bool allowed = false;
};

/// Parent edge of a site in a spanning tree of the wired graph: either the
/// ordinary edge along `dir`, or the site's special edge (dir == kSpecialDir,
/// parent == kSink).
struct ParentEdge {
  int parent = kSink;
  int dir = kSpecialDir;
  bool special() const { return dir == kSpecialDir; }
};

struct SpanningTree {
  Lattice spec;
  std::vector<ParentEdge> parent;

  int special_count() const;
};

/// Run the burning recursion: starting from W = Λ, repeatedly remove every
/// site whose value is at least the number of its neighbors remaining in W.
BurnResult burn(const DiscreteConfig& config);

/// True iff no finite subset of the lattice is a forbidden subconfiguration.
bool is_allowed(const DiscreteConfig& config);

/// The tree bijection: maximal-height sites take their special edge; every
/// other site takes the ordinary edge, among those leading to sites burnt one
/// step earlier, selected by its height (ascending direction label within the
/// eligible set). Input must be allowed.
SpanningTree config_to_tree(const DiscreteConfig& config);

/// Inverse of config_to_tree: burn times are read off as 1 + tree distance
/// to the sink, heights follow from the eligible-edge ranking. Rejects edge
/// sets that are not spanning trees of the wired graph.
DiscreteConfig tree_to_config(const SpanningTree& tree);

class EnumerationCapError : public std::runtime_error {
 public:
  EnumerationCapError(uint64_t required, uint64_t cap);
  uint64_t required() const { return required_; }

 private:
  uint64_t required_;
};

/// Stream the allowed configurations of the lattice in lexicographic order.
/// This is an oracle: a plain product-space scan filtered through burn.
/// Throws EnumerationCapError when (2d+1)^|Λ| exceeds `cap`.
void enumerate_allowed(const Lattice& spec,
                       const std::function<void(const DiscreteConfig&)>& sink,
                       uint64_t cap = 10'000'000);

std::vector<DiscreteConfig> enumerate_allowed_vec(const Lattice& spec,
                                                  uint64_t cap = 10'000'000);

}  // namespace avalanche
