#pragma once

// Bounded domains, direction cones, sphere quadrature and the Cartesian
// quadrature grids that carry every integral in the library.

#include <array>
#include <cstdint>
#include <memory>
#include <utility>
#include <variant>
#include <vector>

#include "nlspace/common.hpp"

namespace nlspace {

// ---------------------------------------------------------------------------
// Cones of directions.

/// A spherical cap of directions {v : angle(v, axis) <= aperture}, or the
/// whole sphere. aperture is a half-angle in (0, pi/2].
class Cone {
 public:
  static Cone full_sphere(int d);
  static Cone cap(int d, const Vec& axis, double aperture);

  int dim() const { return d_; }
  const Vec& axis() const { return axis_; }
  double aperture() const { return aperture_; }
  bool is_full_sphere() const { return full_; }

  /// Angle test against the axis. Throws DomainError for z = 0.
  bool contains(const Vec& z) const;
  /// H^{d-1} measure of the direction set (counting measure when d = 1).
  double area() const;

 private:
  Cone(int d, const Vec& axis, double aperture, bool full)
      : d_(d), axis_(axis), aperture_(aperture), full_(full) {}
  int d_;
  Vec axis_;
  double aperture_;
  bool full_;
};

struct SpherePoint {
  Vec direction;
  double weight;
};

/// Quadrature on the direction set of a cone. d = 2 uses uniform angles,
/// d = 3 equal-weight spherical Fibonacci points laid out on the cap, d = 1
/// the (one or two) admissible unit vectors. Weights sum to cone.area().
std::vector<SpherePoint> sphere_quadrature(const Cone& cone, int n_points);

/// min over probe directions w of  int_Lambda |w . s|^p dH(s).
double sector_min_constant(const Cone& cone, double p, int n_probe = 512);

/// Orthonormal frame {t1, t2, axis} with the given unit axis last.
std::array<Vec, 3> frame_around(const Vec& axis);

// ---------------------------------------------------------------------------
// Domains.

/// zeta : R^{d-1} -> R tabulated on a uniform (d-1)-grid, interpolated
/// piecewise linearly (segments for d = 2, triangulated cells for d = 3).
class GraphFunction {
 public:
  /// d = 2: values[i] = zeta(lo + i*step), i < n.
  static GraphFunction on_line(double lo, double step, std::vector<double> values);
  /// d = 3: values[i*n1 + j] = zeta(lo0 + i*step0, lo1 + j*step1).
  static GraphFunction on_plane(std::array<double, 2> lo, std::array<double, 2> step,
                                std::array<int, 2> n, std::vector<double> values);
  /// Tabulates f on [-half_width, half_width]^{d-1} with n points per axis.
  static GraphFunction sample(int d, double half_width, int n,
                              const std::function<double(const Vec&)>& f);

  int domain_dim() const { return k_; }
  double operator()(const Vec& xprime) const;
  /// Largest slope of the piecewise-linear interpolant.
  double lipschitz_estimate() const;
  /// True when the table covers [-w, w]^{d-1}.
  bool covers(double w) const;
  /// Exact distance from x in R^d to the interpolated graph.
  double distance_to_graph(const Vec& x) const;

  const std::vector<double>& values() const { return values_; }
  std::array<double, 2> lo() const { return lo_; }
  std::array<double, 2> step() const { return step_; }
  std::array<int, 2> shape() const { return n_; }

 private:
  GraphFunction() = default;
  Vec vertex(int i, int j) const;
  int k_ = 1;
  std::array<double, 2> lo_{0.0, 0.0};
  std::array<double, 2> step_{1.0, 1.0};
  std::array<int, 2> n_{0, 1};
  std::vector<double> values_;
};

class Domain {
 public:
  enum class Shape { box, ball, graph_patch };

  static Domain box(int d, const Vec& lo, const Vec& hi);
  static Domain ball(int d, const Vec& center, double radius);
  /// {x in B(0, window_radius) : x_d > zeta(x')}. Enforces zeta(0) = 0 and
  /// Lipschitz constant <= 1/2; window_radius plays the role of 4 r0.
  static Domain graph_patch(GraphFunction zeta, double window_radius);

  Shape shape() const { return shape_; }
  int dim() const { return d_; }
  bool contains(const Vec& x) const;
  /// Euclidean distance to the boundary; DomainError when x is not in the domain.
  double distance_to_boundary(const Vec& x) const;
  std::pair<Vec, Vec> bounding_box() const;
  double inradius() const;
  /// Lebesgue measure (exact for box and ball, lattice estimate for patches).
  double volume() const;

  const Vec& lo() const { return a_; }
  const Vec& hi() const { return b_; }
  const Vec& center() const { return a_; }
  double radius() const { return radius_; }
  const GraphFunction& zeta() const { return *zeta_; }
  /// 4 r0 for graph patches.
  double window_radius() const { return radius_; }

 private:
  Domain() = default;
  Shape shape_ = Shape::box;
  int d_ = 1;
  Vec a_{};
  Vec b_{};
  double radius_ = 0.0;
  std::shared_ptr<const GraphFunction> zeta_;
};

/// Outcome of the Monte-Carlo check of
///   Omega cap B_{r/2}  subset  Gamma_r + (Sigma cap B_r)  subset  Omega cap B_{3r}.
struct InclusionReport {
  double r = 0.0;
  std::size_t lower_samples = 0;  ///< points of Omega cap B_{r/2} tested
  std::size_t upper_samples = 0;  ///< points of Gamma_r + (Sigma cap B_r) tested
  std::vector<Vec> lower_counterexamples;
  std::vector<Vec> upper_counterexamples;
  bool holds() const { return lower_counterexamples.empty() && upper_counterexamples.empty(); }
};

InclusionReport verify_graph_inclusion(const Domain& patch, double r, std::size_t samples = 20000,
                                       std::uint64_t seed = 0);

// ---------------------------------------------------------------------------
// Grids.

using Index = std::array<int, kMaxDim>;

/// Cell-centred lattice over the bounding box of a domain. Nodes are the
/// centres lying in the domain; weights are cell volumes clipped to it.
class Grid {
 public:
  static std::shared_ptr<const Grid> uniform(const Domain& domain, int n_per_axis);
  static std::shared_ptr<const Grid> with_spacing(const Domain& domain, double h);

  const Domain& domain() const { return domain_; }
  int dim() const { return domain_.dim(); }
  std::size_t size() const { return nodes_.size(); }
  const Vec& node(std::size_t i) const { return nodes_[i]; }
  double weight(std::size_t i) const { return weights_[i]; }
  const std::vector<double>& weights() const { return weights_; }
  const Index& lattice_index(std::size_t i) const { return index_[i]; }

  const Vec& h() const { return h_; }
  double max_h() const;
  double min_h() const;
  double cell_volume() const;
  const Index& shape() const { return shape_; }
  const Vec& origin() const { return origin_; }

  /// Centre of the lattice cell with the given (possibly out-of-range) index.
  Vec lattice_point(const Index& idx) const;
  /// Node number of a lattice cell, or -1 when the cell is not a node.
  long node_at(const Index& idx) const;
  /// Same grid construction on a lattice with half as many cells per axis.
  std::shared_ptr<const Grid> coarsened() const;
  std::uint64_t digest() const;

 private:
  Grid(const Domain& domain, const Index& shape);
  Domain domain_;
  Index shape_{1, 1, 1};
  Vec h_{1.0, 1.0, 1.0};
  Vec origin_{};
  std::vector<Vec> nodes_;
  std::vector<double> weights_;
  std::vector<Index> index_;
  std::vector<long> lookup_;
};

using GridPtr = std::shared_ptr<const Grid>;

/// Node mask of Omega_tau = {x : dist(x, boundary) > tau}; tau = 0 keeps every node.
std::vector<char> interior_subset(const Grid& grid, double tau);

/// Per-node quadrature weight of Omega_tau: the part of each node's cell
/// lying in Omega_tau (exact for boxes, sub-sampled otherwise).
std::vector<double> interior_weights(const Grid& grid, double tau);

/// Lattice offsets z != 0 with |z| <= delta whose direction lies in the cone.
std::vector<Index> ball_sector(const Cone& cone, const Grid& grid, double delta);

}  // namespace nlspace
