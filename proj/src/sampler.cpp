#include "avalanche/sampler.hpp"

#include <algorithm>
#include <stdexcept>

namespace avalanche {

namespace {

// Draws an edge out of a site: ordinary direction in [0, 2d) or kSpecialDir.
// Each ordinary edge has weight 1, the special edge weight gamma.
inline int draw_exit(const LatticeSpec& spec, RngStream& rng) {
  double u = rng.next_double() * spec.threshold();
  int deg = spec.degree();
  if (u < static_cast<double>(deg)) return static_cast<int>(u);
  return kSpecialDir;
}

}  // namespace

int network_walk_step(const LatticeSpec& spec, int v, RngStream& rng) {
  if (v < 0 || v >= spec.size()) throw std::invalid_argument("network_walk_step: bad vertex");
  int dir = draw_exit(spec, rng);
  if (dir == kSpecialDir) return kSink;
  return spec.neighbor(v, dir);
}

int network_walk_step(const WiredGraph& graph, int v, RngStream& rng) {
  return network_walk_step(*graph.spec(), v, rng);
}

WalkPath loop_erase(const WalkPath& path) {
  WalkPath out;
  std::vector<int>& verts = out.vertices;
  for (int v : path.vertices) {
    if (v == kSink) {
      verts.push_back(v);
      break;
    }
    auto it = std::find(verts.begin(), verts.end(), v);
    if (it != verts.end())
      verts.erase(it + 1, verts.end());
    else
      verts.push_back(v);
  }
  return out;
}

PartialWilson::PartialWilson(Lattice spec) : spec_(std::move(spec)) {
  size_t n = static_cast<size_t>(spec_->size());
  forest_mark_.assign(n, 0);
  depth_mark_.assign(n, 0);
  parent_.assign(n, kSink);
  parent_dir_.assign(n, kSpecialDir);
  depth_.assign(n, 0);
  next_dir_.assign(n, 0);
}

int PartialWilson::walk_and_commit(int start, RngStream& rng, uint64_t step_cap) {
  const LatticeSpec& spec = *spec_;
  if (forest_mark_[static_cast<size_t>(start)] == epoch_) return 0;
  // run the walk, remembering the last exit edge of every visited vertex;
  // following those edges afterwards is exactly the loop erasure
  int v = start;
  uint64_t steps = 0;
  for (;;) {
    if (++steps > step_cap)
      throw std::runtime_error(
          "wilson: walk exceeded the step cap (" + std::to_string(step_cap) +
          "); gamma may be too small for this lattice");
    int dir = draw_exit(spec, rng);
    next_dir_[static_cast<size_t>(v)] = dir;
    int w = (dir == kSpecialDir) ? kSink : spec.neighbor(v, dir);
    if (w == kSink || forest_mark_[static_cast<size_t>(w)] == epoch_) break;
    v = w;
  }
  // commit the loop-erased path to the forest
  int u = start;
  while (forest_mark_[static_cast<size_t>(u)] != epoch_) {
    forest_mark_[static_cast<size_t>(u)] = epoch_;
    int dir = next_dir_[static_cast<size_t>(u)];
    parent_dir_[static_cast<size_t>(u)] = dir;
    int w = (dir == kSpecialDir) ? kSink : spec.neighbor(u, dir);
    parent_[static_cast<size_t>(u)] = w;
    if (w == kSink) break;
    u = w;
  }
  return 0;
}

int PartialWilson::depth_of(int v) {
  // chase parents to a vertex of known depth, then backfill
  stack_.clear();
  while (v != kSink && depth_mark_[static_cast<size_t>(v)] != epoch_) {
    stack_.push_back(v);
    v = parent_[static_cast<size_t>(v)];
  }
  int d = (v == kSink) ? 0 : depth_[static_cast<size_t>(v)];
  for (auto it = stack_.rbegin(); it != stack_.rend(); ++it) {
    depth_[static_cast<size_t>(*it)] = ++d;
    depth_mark_[static_cast<size_t>(*it)] = epoch_;
  }
  return d;
}

void PartialWilson::sample(std::span<const int> targets, RngStream& rng, std::span<int> out,
                           const WilsonOptions& opt) {
  if (targets.size() != out.size())
    throw std::invalid_argument("PartialWilson::sample: output size mismatch");
  const LatticeSpec& spec = *spec_;
  const int deg = spec.degree();
  const int top = 2 * spec.dim();
  ++epoch_;

  // walks start from every target and every lattice neighbor of a target,
  // in the configured enumeration order
  if (!opt.reversed_order) {
    for (int x : targets) {
      walk_and_commit(x, rng, opt.step_cap);
      for (int dir = 0; dir < deg; ++dir) {
        int z = spec.neighbor(x, dir);
        if (z != kSink) walk_and_commit(z, rng, opt.step_cap);
      }
    }
  } else {
    for (auto it = targets.rbegin(); it != targets.rend(); ++it) {
      for (int dir = deg - 1; dir >= 0; --dir) {
        int z = spec.neighbor(*it, dir);
        if (z != kSink) walk_and_commit(z, rng, opt.step_cap);
      }
      walk_and_commit(*it, rng, opt.step_cap);
    }
  }

  // heights from the forest: the height of a site is determined by the burn
  // times of its closed neighborhood, and burn time = 1 + tree depth
  for (size_t i = 0; i < targets.size(); ++i) {
    int y = targets[i];
    int pdir = parent_dir_[static_cast<size_t>(y)];
    if (pdir == kSpecialDir) {
      out[i] = top;
      continue;
    }
    int t = depth_of(y) + 1;
    int earlier = 0;
    int rank = -1;
    int seen = 0;
    for (int dir = 0; dir < deg; ++dir) {
      int z = spec.neighbor(y, dir);
      int tz = (z == kSink) ? 1 : depth_of(z) + 1;
      if (tz < t) ++earlier;
      if (tz == t - 1) {
        if (dir == pdir) rank = seen;
        ++seen;
      }
    }
    if (rank < 0) throw std::logic_error("PartialWilson: parent edge not eligible");
    out[i] = top - earlier + rank;
  }
}

namespace {

std::vector<int> all_sites(const Lattice& spec) {
  std::vector<int> targets(static_cast<size_t>(spec->size()));
  for (int i = 0; i < spec->size(); ++i) targets[static_cast<size_t>(i)] = i;
  return targets;
}

}  // namespace

SpanningTree wilson_sample(const Lattice& spec, RngStream& rng, const WilsonOptions& opt) {
  PartialWilson pw(spec);
  std::vector<int> targets = all_sites(spec);
  std::vector<int> xi(targets.size());
  pw.sample(targets, rng, xi, opt);
  // every site is committed; read the tree straight off the forest
  SpanningTree tree;
  tree.spec = spec;
  tree.parent.assign(targets.size(), ParentEdge{});
  for (int y = 0; y < spec->size(); ++y) {
    ParentEdge pe;
    pe.dir = pw.parent_dir(y);
    pe.parent = pw.parent(y);
    tree.parent[static_cast<size_t>(y)] = pe;
  }
  return tree;
}

DiscreteConfig sample_nu(const Lattice& spec, RngStream& rng, const WilsonOptions& opt) {
  PartialWilson pw(spec);
  std::vector<int> targets = all_sites(spec);
  std::vector<int> xi(targets.size());
  pw.sample(targets, rng, xi, opt);
  return DiscreteConfig(spec, std::move(xi));
}

HeightConfig sample_m(const Lattice& spec, RngStream& rng, const WilsonOptions& opt) {
  DiscreteConfig xi = sample_nu(spec, rng, opt);
  const int top = 2 * spec->dim();
  std::vector<double> h(xi.v.size());
  for (size_t i = 0; i < xi.v.size(); ++i) {
    if (xi.v[i] < top)
      h[i] = static_cast<double>(xi.v[i]) + rng.next_double();
    else
      h[i] = static_cast<double>(top) + rng.next_double() * spec->gamma();
  }
  return HeightConfig(spec, std::move(h));
}

}  // namespace avalanche
