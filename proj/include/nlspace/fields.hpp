#pragma once

// Vector fields sampled at grid nodes (zero outside the domain), rigid
// motions, constraint subspaces V with V cap R = {0}, and the field
// sequences fed to the compactness experiments.

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nlspace/geometry.hpp"

namespace nlspace {

class VectorField {
 public:
  using Expression = std::function<Vec(const Vec&)>;

  /// values holds d components per node, node-major.
  VectorField(GridPtr grid, std::vector<double> values);
  static VectorField zero(GridPtr grid);
  /// Node-wise evaluation; DomainError if the expression is not finite at a
  /// node. The expression is kept for operations needing derivatives.
  static VectorField sample(GridPtr grid, Expression expr);

  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  int dim() const { return grid_->dim(); }
  std::size_t size() const { return grid_->size(); }

  Vec at(std::size_t node) const;
  double operator()(std::size_t node, int comp) const {
    return values_[node * static_cast<std::size_t>(dim()) + static_cast<std::size_t>(comp)];
  }
  const std::vector<double>& values() const { return values_; }
  const Expression* expression() const { return expr_ ? &expr_ : nullptr; }

  VectorField scaled(double c) const;
  VectorField operator+(const VectorField& o) const;
  VectorField operator-(const VectorField& o) const;

  /// int_Omega |u|^p with grid weights (Euclidean norm of u).
  double lp_norm_p(double p) const;
  /// Discrete L^2 inner product.
  double inner(const VectorField& o) const;
  /// Largest |u| over the nodes.
  double max_abs() const;

  std::string hash() const;

 private:
  GridPtr grid_;
  std::vector<double> values_;
  Expression expr_;
};

// ---------------------------------------------------------------------------

/// x -> A x + b with A skew-symmetric.
class RigidMotion {
 public:
  using Matrix = std::array<std::array<double, kMaxDim>, kMaxDim>;
  /// ArgumentError unless A + A^T = 0 exactly on the leading d x d block.
  RigidMotion(int d, const Matrix& A, const Vec& b);

  int dim() const { return d_; }
  const Matrix& A() const { return A_; }
  const Vec& b() const { return b_; }
  Vec operator()(const Vec& x) const;

 private:
  int d_;
  Matrix A_{};
  Vec b_{};
};

VectorField rigid_motion_field(const RigidMotion& rm, GridPtr grid);

/// Basis of R on a grid: d translations then the rotations e_i x_j - e_j x_i, i < j.
std::vector<VectorField> rigid_basis(GridPtr grid);

inline int rigid_dimension(int d) { return d + d * (d - 1) / 2; }

// ---------------------------------------------------------------------------

/// V = {u : <u, w_k> = 0 for every constraint field w_k}.
class SubspaceSpec {
 public:
  /// Zero mean and zero skew moments: the constraint fields are the rigid
  /// generators themselves, so V is the L^2-orthogonal complement of R.
  static SubspaceSpec orthogonal_to_rigid(GridPtr grid);
  /// Arbitrary constraints; their number must equal dim R and the matrix
  /// <r_j, w_k> must be nonsingular (DegenerateError otherwise).
  static SubspaceSpec from_constraints(GridPtr grid, std::vector<VectorField> constraints);

  const GridPtr& grid_ptr() const { return grid_; }
  const std::vector<VectorField>& constraints() const { return constraints_; }
  bool is_default() const { return default_; }
  /// Largest |<u, w_k>| / (|u| |w_k|).
  double constraint_residual(const VectorField& u) const;
  std::string describe() const;

 private:
  SubspaceSpec() = default;
  GridPtr grid_;
  std::vector<VectorField> constraints_;
  std::vector<VectorField> rigid_;
  std::vector<double> gram_;  // <r_j, w_k>, row k
  bool default_ = false;
  friend VectorField project_out_rigid(const VectorField& u, const SubspaceSpec& spec);
};

/// u - r with r in R chosen so the result lies in V (the L^2 projection for
/// the default subspace).
VectorField project_out_rigid(const VectorField& u, const SubspaceSpec& spec);

// ---------------------------------------------------------------------------

enum class SequenceKind { oscillatory, concentrating, translating, random };

std::string to_string(SequenceKind k);
SequenceKind sequence_kind_from_string(const std::string& s);

struct SequenceSpec {
  SequenceKind kind = SequenceKind::oscillatory;
  double p = 2.0;
  bool normalize = true;  ///< scale each member to unit L^p norm
  // oscillatory: sin(2 pi frequency n x_1) e_1
  double frequency = 1.0;
  // concentrating: (1 - dist(x, boundary) / (scale / n))_+ e_1
  double scale = 0.5;
  // translating: bump of radius width centred at center + (1 - 1/n) shift
  std::optional<Vec> center;  ///< defaults to the centre of the bounding box
  Vec shift{};
  double width = 0.15;
  // random: Gaussian cosine series with coefficients decaying like (1 + |m|)^-smoothness
  std::uint64_t seed = 0;
  double smoothness = 2.0;
  int modes = 6;

  bool operator==(const SequenceSpec&) const = default;
};

VectorField make_sequence(const SequenceSpec& spec, GridPtr grid, int n);

// ---------------------------------------------------------------------------
// Field files: header x_1..x_d,u_1..u_d then one row per node.

void write_field_csv(const VectorField& u, std::ostream& out);
/// ArgumentError when the rows do not match the grid's nodes.
VectorField read_field_csv(std::istream& in, GridPtr grid);

}  // namespace nlspace
