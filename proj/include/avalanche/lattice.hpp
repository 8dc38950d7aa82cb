#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace avalanche {

/// Lattice point in Z^d.
using Coord = std::vector<int>;

constexpr int kSink = -1;        ///< vertex id of the wired sink
constexpr int kSpecialDir = -1;  ///< direction label marking a special edge

constexpr const char* kVersion = "0.1.0";

std::string coord_to_string(const Coord& c);

class LatticeSpec;
using Lattice = std::shared_ptr<const LatticeSpec>;

/// Finite subset of Z^d with dissipation gamma. Sites are kept in
/// lexicographic coordinate order and the neighbor relation is |x-y|_1 = 1.
/// Direction labels follow (+e1, -e1, +e2, -e2, ...). Immutable after
/// construction, safe to share read-only across threads.
class LatticeSpec {
 public:
  int dim() const { return d_; }
  double gamma() const { return gamma_; }
  /// Box radius, or -1 when built from an explicit site set.
  int radius() const { return radius_; }
  int size() const { return static_cast<int>(points_.size()); }
  int degree() const { return 2 * d_; }
  /// Toppling threshold 2d + gamma.
  double threshold() const { return 2.0 * d_ + gamma_; }

  const Coord& point(int site) const { return points_[static_cast<size_t>(site)]; }
  const std::vector<Coord>& points() const { return points_; }
  /// Site index of p, or kSink when p is outside the lattice.
  int site_at(const Coord& p) const;
  /// Neighbor of `site` along direction `dir` in [0, 2d); kSink if outside.
  int neighbor(int site, int dir) const {
    return neighbors_[static_cast<size_t>(site) * static_cast<size_t>(2 * d_) + static_cast<size_t>(dir)];
  }
  /// Number of ordinary edges from `site` to the sink.
  int boundary_degree(int site) const { return boundary_deg_[static_cast<size_t>(site)]; }

  static int opposite_dir(int dir) { return dir ^ 1; }

  friend Lattice make_box(int d, int radius, double gamma);
  friend Lattice make_sites(int d, std::vector<Coord> sites, double gamma);
  /// Same site set, different dissipation.
  friend Lattice with_gamma(const LatticeSpec& spec, double gamma);

 private:
  LatticeSpec(int d, int radius, std::vector<Coord> points, double gamma);

  int d_;
  int radius_;
  double gamma_;
  std::vector<Coord> points_;
  std::vector<int> neighbors_;     // size() * 2d, row per site
  std::vector<int> boundary_deg_;  // per site
};

/// The centered box [-radius, radius]^d.
Lattice make_box(int d, int radius, double gamma);

/// Arbitrary site set (duplicates rejected). Used for Λ \ H experiments and
/// non-centered rectangles.
Lattice make_sites(int d, std::vector<Coord> sites, double gamma);

Lattice with_gamma(const LatticeSpec& spec, double gamma);

/// Dense toppling matrix: diagonal 2d + gamma, -1 on nearest-neighbor pairs
/// inside the lattice.
class TopplingMatrix {
 public:
  explicit TopplingMatrix(Lattice spec);

  const Lattice& spec() const { return spec_; }
  int size() const { return n_; }
  double at(int i, int j) const { return a_[static_cast<size_t>(i) * static_cast<size_t>(n_) + static_cast<size_t>(j)]; }
  std::span<const double> data() const { return a_; }

  /// Matrix-vector product.
  std::vector<double> multiply(std::span<const double> v) const;
  /// det(Delta), via a symmetric positive definite factorization.
  double determinant() const;

 private:
  Lattice spec_;
  int n_;
  std::vector<double> a_;
};

TopplingMatrix toppling_matrix(const Lattice& spec);

/// One edge of the wired multigraph. Ordinary edges carry the direction
/// label of their in-lattice endpoint u; the special edge of u has
/// dir == kSpecialDir. Internal edges are listed once, from the lower site.
struct WiredEdge {
  int u;
  int v;  // site index or kSink
  int dir;
  bool special;
};

/// The wired multigraph: lattice sites plus the sink, ordinary edges of
/// weight 1 and one special edge of weight gamma per site.
class WiredGraph {
 public:
  explicit WiredGraph(Lattice spec);

  const Lattice& spec() const { return spec_; }
  const std::vector<WiredEdge>& edges() const { return edges_; }
  double edge_weight(const WiredEdge& e) const { return e.special ? spec_->gamma() : 1.0; }

  /// Edge index of the ordinary edge leaving `site` along `dir`, or of the
  /// site's special edge when dir == kSpecialDir.
  int edge_id(int site, int dir) const;

 private:
  Lattice spec_;
  std::vector<WiredEdge> edges_;
  std::vector<int> ord_id_;
  std::vector<int> special_id_;
};

WiredGraph wired_graph(const Lattice& spec);

}  // namespace avalanche
