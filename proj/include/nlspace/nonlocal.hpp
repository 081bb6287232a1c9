#pragma once

// The projected difference quotient and seminorm, the direction functional
// F_p, translation moduli, the cone matrix Q and the matrix mollifier P^delta.

#include <string>
#include <vector>

#include "nlspace/fields.hpp"
#include "nlspace/kernels.hpp"

namespace nlspace {

using Mat = std::array<Vec, kMaxDim>;

/// D(u)(x, y) = (u(y) - u(x)) . (y - x) / |y - x|^2 for nodes x != y.
double projected_quotient(const VectorField& u, std::size_t x, std::size_t y);

struct SeminormResult {
  double value_p = 0.0;
  std::size_t pair_count = 0;  ///< ordered node pairs with rho > 0
  double diagonal_exclusion_radius = 0.0;
  /// |value - value on the coarsened grid| when requested (needs the field's
  /// expression), NaN when not computed, +inf when the kernel overflows at
  /// the nearest-pair distance.
  double estimated_quadrature_error = 0.0;
  double h = 0.0;
  std::string kernel_hash;
  std::string field_hash;
};

/// Double Riemann sum over node pairs, self-pairs excluded.
SeminormResult seminorm(const VectorField& u, const Kernel& k, double p, bool estimate_error = false);

struct SymgradReport {
  double lhs = 0.0;  ///< seminorm
  double rhs = 0.0;  ///< ||Sym grad u||_p^p ||rho||_1
  double ratio = 0.0;
};

/// CapabilityError when u carries no expression or rho is not integrable.
SymgradReport symgrad_upper_bound_check(const VectorField& u, const Kernel& k, double p);

/// F_p[u](h v) = int |(u(x + h v) - u(x)) . v|^p dx for the zero extension,
/// summed over the lattice covering Omega and Omega - h v; off-lattice shifts
/// use multilinear interpolation.
double direction_functional_F(const VectorField& u, double h_mag, const Vec& v, double p);

/// ||u(. + h) - u||_{L^p(region)}; region_weights are per-node weights of
/// the region (empty: the whole domain).
double translation_modulus(const VectorField& u, const Vec& h, double p,
                           const std::vector<double>& region_weights = {});

/// Value of the zero-extended, multilinearly interpolated field at y.
Vec interpolate_zero_extended(const VectorField& u, const Vec& y);

// ---------------------------------------------------------------------------

struct MollifierMatrix {
  int d = 1;
  Mat Q{};
  Mat Q_inverse{};
  Cone cone = Cone::full_sphere(1);
  double lambda_min = 0.0;
  double sector_constant = 0.0;  ///< probe-based inf of <Q w, w>
};

/// Q = int_Lambda s (x) s dH(s); DegenerateError when Q is numerically singular.
MollifierMatrix cone_matrix(const Cone& cone);

/// Lattice offsets z and the cell integrals W(z) = int_{cell(z)} P^delta.
struct MollifierStencil {
  double delta = 0.0;
  std::vector<Index> offsets;
  std::vector<Mat> weights;
  /// sum_z W(z); equals the identity up to quadrature error.
  Mat total() const;
};

/// ResolutionError when delta < 2 h.
MollifierStencil mollifier_stencil(const Grid& grid, double delta, const MollifierMatrix& mm);

/// (P^delta * u)(x) = int P^delta(y - x) u(y) dy at the nodes.
VectorField mollify(const VectorField& u, double delta, const MollifierMatrix& mm);
VectorField mollify(const VectorField& u, const MollifierStencil& stencil);

/// ||u - P^delta * u||_p^p over the lattice cells within delta of the grid's
/// bounding box, with u extended by zero.
double smoothing_gap(const VectorField& u, double delta, const MollifierMatrix& mm, double p);
double smoothing_gap(const VectorField& u, const MollifierStencil& stencil, double p);

/// {2^-j} intersected with [2h, diameter of the bounding box], decreasing.
std::vector<double> resolvable_deltas(const Grid& grid);

/// F_p[u](t v) divided by
///   delta^p / int_0^delta rho_theta0(s v0) s^{d-1} ds * int_0^D rho(h v) h^{d-1} F_p[u](h v) h^{-p} dh
/// with D the bounding-box diameter.
double est_for_F_ratio(const VectorField& u, const Kernel& k, double theta0, const Cone& cone, double delta,
                       double t, const Vec& v, double p);

}  // namespace nlspace
