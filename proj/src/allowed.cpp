#include "avalanche/allowed.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace avalanche {

int SpanningTree::special_count() const {
  int c = 0;
  for (const ParentEdge& e : parent)
    if (e.special()) ++c;
  return c;
}

BurnResult burn(const DiscreteConfig& config) {
  const Lattice& spec = config.spec;
  const int n = spec->size();
  const int deg = spec->degree();
  BurnResult res;
  res.burn_time.assign(static_cast<size_t>(n), 0);

  // remaining[y] = number of in-lattice neighbors of y still unburnt; a site
  // burns when its value reaches that count
  std::vector<int> remaining(static_cast<size_t>(n), 0);
  for (int y = 0; y < n; ++y) remaining[static_cast<size_t>(y)] = deg - spec->boundary_degree(y);

  std::vector<int> frontier, next;
  for (int y = 0; y < n; ++y)
    if (config.v[static_cast<size_t>(y)] >= remaining[static_cast<size_t>(y)]) frontier.push_back(y);

  int burnt = 0;
  int t = 2;
  while (!frontier.empty()) {
    for (int y : frontier) res.burn_time[static_cast<size_t>(y)] = t;
    burnt += static_cast<int>(frontier.size());
    next.clear();
    for (int y : frontier) {
      for (int dir = 0; dir < deg; ++dir) {
        int z = spec->neighbor(y, dir);
        if (z == kSink || res.burn_time[static_cast<size_t>(z)] != 0) continue;
        if (--remaining[static_cast<size_t>(z)] == config.v[static_cast<size_t>(z)])
          next.push_back(z);
      }
    }
    // a site may be appended once per burning neighbor; deduplicate
    std::sort(next.begin(), next.end());
    next.erase(std::unique(next.begin(), next.end()), next.end());
    frontier.swap(next);
    ++t;
  }
  res.allowed = (burnt == n);
  return res;
}

bool is_allowed(const DiscreteConfig& config) { return burn(config).allowed; }

SpanningTree config_to_tree(const DiscreteConfig& config) {
  BurnResult br = burn(config);
  if (!br.allowed) throw std::invalid_argument("config_to_tree: configuration is not allowed");
  const Lattice& spec = config.spec;
  const int n = spec->size();
  const int deg = spec->degree();
  const int top = 2 * spec->dim();

  SpanningTree tree;
  tree.spec = spec;
  tree.parent.assign(static_cast<size_t>(n), ParentEdge{});
  for (int y = 0; y < n; ++y) {
    int xi = config.v[static_cast<size_t>(y)];
    if (xi == top) continue;  // special edge, already the default ParentEdge
    int t = br.burn_time[static_cast<size_t>(y)];
    int earlier = 0;  // ordinary edges to vertices burnt before y
    for (int dir = 0; dir < deg; ++dir) {
      int z = spec->neighbor(y, dir);
      int tz = (z == kSink) ? 1 : br.burn_time[static_cast<size_t>(z)];
      if (tz != 0 && tz < t) ++earlier;
    }
    // eligible edges (burnt exactly one step earlier) in ascending label
    // order carry the values 2d - earlier, 2d - earlier + 1, ...
    int value = top - earlier;
    ParentEdge pe;
    bool found = false;
    for (int dir = 0; dir < deg && !found; ++dir) {
      int z = spec->neighbor(y, dir);
      int tz = (z == kSink) ? 1 : br.burn_time[static_cast<size_t>(z)];
      if (tz == t - 1) {
        if (value == xi) {
          pe.parent = z;
          pe.dir = dir;
          found = true;
        }
        ++value;
      }
    }
    if (!found) throw std::logic_error("config_to_tree: no eligible edge matched the height");
    tree.parent[static_cast<size_t>(y)] = pe;
  }
  return tree;
}

namespace {

// Depth of every site in the tree (distance to the sink); rejects cycles and
// malformed parent edges.
std::vector<int> tree_depths(const SpanningTree& tree) {
  const Lattice& spec = tree.spec;
  const int n = spec->size();
  if (static_cast<int>(tree.parent.size()) != n)
    throw std::invalid_argument("tree_to_config: parent table size mismatch");
  std::vector<int> depth(static_cast<size_t>(n), -1);
  std::vector<int> chain;
  for (int start = 0; start < n; ++start) {
    if (depth[static_cast<size_t>(start)] >= 0) continue;
    chain.clear();
    int v = start;
    int base = 0;
    for (;;) {
      const ParentEdge& pe = tree.parent[static_cast<size_t>(v)];
      if (!pe.special()) {
        if (pe.dir < 0 || pe.dir >= spec->degree() || spec->neighbor(v, pe.dir) != pe.parent)
          throw std::invalid_argument("tree_to_config: edge is not an edge of the wired graph");
      } else if (pe.parent != kSink) {
        throw std::invalid_argument("tree_to_config: special edge must lead to the sink");
      }
      chain.push_back(v);
      if (pe.parent == kSink) {
        base = 1;
        break;
      }
      v = pe.parent;
      if (depth[static_cast<size_t>(v)] >= 0) {
        base = depth[static_cast<size_t>(v)] + 1;
        break;
      }
      if (static_cast<int>(chain.size()) > n)
        throw std::invalid_argument("tree_to_config: edge set contains a cycle");
    }
    for (auto it = chain.rbegin(); it != chain.rend(); ++it)
      depth[static_cast<size_t>(*it)] = base++;
  }
  return depth;
}

}  // namespace

DiscreteConfig tree_to_config(const SpanningTree& tree) {
  const Lattice& spec = tree.spec;
  const int n = spec->size();
  const int deg = spec->degree();
  const int top = 2 * spec->dim();
  std::vector<int> depth = tree_depths(tree);

  std::vector<int> v(static_cast<size_t>(n), 0);
  for (int y = 0; y < n; ++y) {
    const ParentEdge& pe = tree.parent[static_cast<size_t>(y)];
    if (pe.special()) {
      v[static_cast<size_t>(y)] = top;
      continue;
    }
    int t = depth[static_cast<size_t>(y)] + 1;
    int earlier = 0;
    int rank = -1;
    int seen = 0;
    for (int dir = 0; dir < deg; ++dir) {
      int z = spec->neighbor(y, dir);
      int tz = (z == kSink) ? 1 : depth[static_cast<size_t>(z)] + 1;
      if (tz < t) ++earlier;
      if (tz == t - 1) {
        if (dir == pe.dir) rank = seen;
        ++seen;
      }
    }
    if (rank < 0) throw std::logic_error("tree_to_config: parent edge not eligible");
    v[static_cast<size_t>(y)] = top - earlier + rank;
  }
  return DiscreteConfig(spec, std::move(v));
}

EnumerationCapError::EnumerationCapError(uint64_t required, uint64_t cap)
    : std::runtime_error("enumeration needs " + std::to_string(required) +
                         " configurations, above the cap of " + std::to_string(cap)),
      required_(required) {}

void enumerate_allowed(const Lattice& spec,
                       const std::function<void(const DiscreteConfig&)>& sink, uint64_t cap) {
  const int n = spec->size();
  const int vals = 2 * spec->dim() + 1;
  double total = std::pow(static_cast<double>(vals), n);
  if (total > static_cast<double>(cap))
    throw EnumerationCapError(total > 1e18 ? UINT64_MAX : static_cast<uint64_t>(total), cap);

  DiscreteConfig config(spec, std::vector<int>(static_cast<size_t>(n), 0));
  for (;;) {
    if (is_allowed(config)) sink(config);
    int i = n - 1;
    while (i >= 0 && config.v[static_cast<size_t>(i)] == vals - 1) {
      config.v[static_cast<size_t>(i)] = 0;
      --i;
    }
    if (i < 0) break;
    ++config.v[static_cast<size_t>(i)];
  }
}

std::vector<DiscreteConfig> enumerate_allowed_vec(const Lattice& spec, uint64_t cap) {
  std::vector<DiscreteConfig> out;
  enumerate_allowed(spec, [&](const DiscreteConfig& c) { out.push_back(c); }, cap);
  return out;
}

}  // namespace avalanche
