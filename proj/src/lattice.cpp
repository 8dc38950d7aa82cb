#include "avalanche/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "avalanche/linalg.hpp"

namespace avalanche {

std::string coord_to_string(const Coord& c) {
  std::string s = "(";
  for (size_t i = 0; i < c.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(c[i]);
  }
  s += ")";
  return s;
}

LatticeSpec::LatticeSpec(int d, int radius, std::vector<Coord> points, double gamma)
    : d_(d), radius_(radius), gamma_(gamma), points_(std::move(points)) {
  std::sort(points_.begin(), points_.end());
  if (std::adjacent_find(points_.begin(), points_.end()) != points_.end())
    throw std::invalid_argument("lattice: duplicate sites");
  const int deg = 2 * d_;
  neighbors_.assign(points_.size() * static_cast<size_t>(deg), kSink);
  boundary_deg_.assign(points_.size(), 0);
  Coord q;
  for (int i = 0; i < size(); ++i) {
    for (int dir = 0; dir < deg; ++dir) {
      q = points_[static_cast<size_t>(i)];
      int axis = dir / 2;
      q[static_cast<size_t>(axis)] += (dir % 2 == 0) ? 1 : -1;
      int j = site_at(q);
      neighbors_[static_cast<size_t>(i) * static_cast<size_t>(deg) + static_cast<size_t>(dir)] = j;
      if (j == kSink) ++boundary_deg_[static_cast<size_t>(i)];
    }
  }
}

int LatticeSpec::site_at(const Coord& p) const {
  auto it = std::lower_bound(points_.begin(), points_.end(), p);
  if (it == points_.end() || *it != p) return kSink;
  return static_cast<int>(it - points_.begin());
}

Lattice make_box(int d, int radius, double gamma) {
  if (d < 1) throw std::invalid_argument("make_box: dimension must be >= 1");
  if (radius < 0) throw std::invalid_argument("make_box: radius must be >= 0");
  if (gamma < 0.0 || !std::isfinite(gamma))
    throw std::invalid_argument("make_box: gamma must be a finite nonnegative real");
  double count = std::pow(2.0 * radius + 1.0, d);
  if (count > 1e8) throw std::invalid_argument("make_box: box too large");
  std::vector<Coord> pts;
  pts.reserve(static_cast<size_t>(count));
  Coord c(static_cast<size_t>(d), -radius);
  for (;;) {
    pts.push_back(c);
    int axis = d - 1;
    while (axis >= 0 && c[static_cast<size_t>(axis)] == radius) {
      c[static_cast<size_t>(axis)] = -radius;
      --axis;
    }
    if (axis < 0) break;
    ++c[static_cast<size_t>(axis)];
  }
  return Lattice(new LatticeSpec(d, radius, std::move(pts), gamma));
}

Lattice make_sites(int d, std::vector<Coord> sites, double gamma) {
  if (d < 1) throw std::invalid_argument("make_sites: dimension must be >= 1");
  if (gamma < 0.0 || !std::isfinite(gamma))
    throw std::invalid_argument("make_sites: gamma must be a finite nonnegative real");
  if (sites.empty()) throw std::invalid_argument("make_sites: empty site set");
  for (const Coord& c : sites)
    if (static_cast<int>(c.size()) != d)
      throw std::invalid_argument("make_sites: coordinate dimension mismatch");
  return Lattice(new LatticeSpec(d, -1, std::move(sites), gamma));
}

Lattice with_gamma(const LatticeSpec& spec, double gamma) {
  if (gamma < 0.0 || !std::isfinite(gamma))
    throw std::invalid_argument("with_gamma: gamma must be a finite nonnegative real");
  return Lattice(new LatticeSpec(spec.dim(), spec.radius(), spec.points(), gamma));
}

TopplingMatrix::TopplingMatrix(Lattice spec) : spec_(std::move(spec)), n_(spec_->size()) {
  a_.assign(static_cast<size_t>(n_) * static_cast<size_t>(n_), 0.0);
  const int deg = spec_->degree();
  for (int i = 0; i < n_; ++i) {
    a_[static_cast<size_t>(i) * static_cast<size_t>(n_) + static_cast<size_t>(i)] = spec_->threshold();
    for (int dir = 0; dir < deg; ++dir) {
      int j = spec_->neighbor(i, dir);
      if (j != kSink) a_[static_cast<size_t>(i) * static_cast<size_t>(n_) + static_cast<size_t>(j)] = -1.0;
    }
  }
}

std::vector<double> TopplingMatrix::multiply(std::span<const double> v) const {
  if (static_cast<int>(v.size()) != n_) throw std::invalid_argument("TopplingMatrix::multiply: size mismatch");
  std::vector<double> out(static_cast<size_t>(n_), 0.0);
  for (int i = 0; i < n_; ++i) {
    double s = 0.0;
    const double* row = a_.data() + static_cast<size_t>(i) * static_cast<size_t>(n_);
    for (int j = 0; j < n_; ++j) s += row[j] * v[static_cast<size_t>(j)];
    out[static_cast<size_t>(i)] = s;
  }
  return out;
}

double TopplingMatrix::determinant() const {
  DenseCholesky chol(a_, n_);
  return chol.det();
}

TopplingMatrix toppling_matrix(const Lattice& spec) { return TopplingMatrix(spec); }

WiredGraph::WiredGraph(Lattice spec) : spec_(std::move(spec)) {
  const int n = spec_->size();
  const int deg = spec_->degree();
  ord_id_.assign(static_cast<size_t>(n) * static_cast<size_t>(deg), -1);
  special_id_.assign(static_cast<size_t>(n), -1);
  for (int u = 0; u < n; ++u) {
    for (int dir = 0; dir < deg; ++dir) {
      int v = spec_->neighbor(u, dir);
      if (v != kSink && v < u) continue;  // listed from the lower endpoint
      int id = static_cast<int>(edges_.size());
      edges_.push_back(WiredEdge{u, v, dir, false});
      ord_id_[static_cast<size_t>(u) * static_cast<size_t>(deg) + static_cast<size_t>(dir)] = id;
      if (v != kSink)
        ord_id_[static_cast<size_t>(v) * static_cast<size_t>(deg) +
                static_cast<size_t>(LatticeSpec::opposite_dir(dir))] = id;
    }
  }
  for (int u = 0; u < n; ++u) {
    special_id_[static_cast<size_t>(u)] = static_cast<int>(edges_.size());
    edges_.push_back(WiredEdge{u, kSink, kSpecialDir, true});
  }
}

int WiredGraph::edge_id(int site, int dir) const {
  if (dir == kSpecialDir) return special_id_[static_cast<size_t>(site)];
  return ord_id_[static_cast<size_t>(site) * static_cast<size_t>(spec_->degree()) + static_cast<size_t>(dir)];
}

WiredGraph wired_graph(const Lattice& spec) { return WiredGraph(spec); }

}  // namespace avalanche
