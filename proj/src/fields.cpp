#include "nlspace/fields.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

namespace nlspace {

namespace {

std::size_t ucast(int i) { return static_cast<std::size_t>(i); }

}  // namespace

VectorField::VectorField(GridPtr grid, std::vector<double> values) : grid_(std::move(grid)), values_(std::move(values)) {
  if (!grid_) throw ArgumentError("vector field needs a grid");
  if (values_.size() != grid_->size() * ucast(grid_->dim()))
    throw ArgumentError("vector field has " + std::to_string(values_.size()) + " values for " +
                        std::to_string(grid_->size()) + " nodes");
  for (double v : values_)
    if (!std::isfinite(v)) throw DomainError("vector field value is not finite");
}

VectorField VectorField::zero(GridPtr grid) {
  const std::size_t n = grid->size() * ucast(grid->dim());
  return VectorField(std::move(grid), std::vector<double>(n, 0.0));
}

VectorField VectorField::sample(GridPtr grid, Expression expr) {
  const int d = grid->dim();
  std::vector<double> v(grid->size() * ucast(d));
  for (std::size_t i = 0; i < grid->size(); ++i) {
    const Vec u = expr(grid->node(i));
    for (int a = 0; a < d; ++a) {
      if (!std::isfinite(u[ucast(a)])) throw DomainError("field expression is not finite at a grid node");
      v[i * ucast(d) + ucast(a)] = u[ucast(a)];
    }
  }
  VectorField f(std::move(grid), std::move(v));
  f.expr_ = std::move(expr);
  return f;
}

Vec VectorField::at(std::size_t node) const {
  Vec u{};
  const int d = dim();
  for (int a = 0; a < d; ++a) u[ucast(a)] = values_[node * ucast(d) + ucast(a)];
  return u;
}

VectorField VectorField::scaled(double c) const {
  std::vector<double> v(values_);
  for (double& x : v) x *= c;
  VectorField f(grid_, std::move(v));
  if (expr_) f.expr_ = [e = expr_, c](const Vec& x) { return c * e(x); };
  return f;
}

VectorField VectorField::operator+(const VectorField& o) const {
  if (o.grid_->digest() != grid_->digest()) throw ArgumentError("fields live on different grids");
  std::vector<double> v(values_);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += o.values_[i];
  VectorField f(grid_, std::move(v));
  if (expr_ && o.expr_) f.expr_ = [a = expr_, b = o.expr_](const Vec& x) { return a(x) + b(x); };
  return f;
}

VectorField VectorField::operator-(const VectorField& o) const { return *this + o.scaled(-1.0); }

double VectorField::lp_norm_p(double p) const {
  std::vector<double> terms(size());
  for (std::size_t i = 0; i < size(); ++i) terms[i] = grid_->weight(i) * std::pow(norm(at(i)), p);
  return pairwise_sum(terms);
}

double VectorField::inner(const VectorField& o) const {
  if (o.grid_->digest() != grid_->digest()) throw ArgumentError("fields live on different grids");
  std::vector<double> terms(size());
  for (std::size_t i = 0; i < size(); ++i) terms[i] = grid_->weight(i) * dot(at(i), o.at(i));
  return pairwise_sum(terms);
}

double VectorField::max_abs() const {
  double m = 0.0;
  for (std::size_t i = 0; i < size(); ++i) m = std::max(m, norm(at(i)));
  return m;
}

std::string VectorField::hash() const {
  Hasher h;
  h.value(static_cast<std::int64_t>(grid_->digest()));
  h.bytes(values_.data(), values_.size() * sizeof(double));
  return h.hex();
}

// ---------------------------------------------------------------------------

RigidMotion::RigidMotion(int d, const Matrix& A, const Vec& b) : d_(d), A_(A), b_(b) {
  require_dim(d);
  for (int i = 0; i < kMaxDim; ++i)
    for (int j = 0; j < kMaxDim; ++j) {
      if (i >= d || j >= d) {
        A_[ucast(i)][ucast(j)] = 0.0;
        continue;
      }
      if (A[ucast(i)][ucast(j)] + A[ucast(j)][ucast(i)] != 0.0)
        throw ArgumentError("rigid motion matrix is not skew-symmetric");
    }
  for (int i = d; i < kMaxDim; ++i) b_[ucast(i)] = 0.0;
}

Vec RigidMotion::operator()(const Vec& x) const {
  Vec u = b_;
  for (int i = 0; i < d_; ++i)
    for (int j = 0; j < d_; ++j) u[ucast(i)] += A_[ucast(i)][ucast(j)] * x[ucast(j)];
  return u;
}

VectorField rigid_motion_field(const RigidMotion& rm, GridPtr grid) {
  if (rm.dim() != grid->dim()) throw ArgumentError("rigid motion and grid dimensions differ");
  return VectorField::sample(std::move(grid), [rm](const Vec& x) { return rm(x); });
}

std::vector<VectorField> rigid_basis(GridPtr grid) {
  const int d = grid->dim();
  std::vector<VectorField> out;
  for (int a = 0; a < d; ++a) out.push_back(VectorField::sample(grid, [a](const Vec&) { return unit(a); }));
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j)
      out.push_back(VectorField::sample(grid, [i, j](const Vec& x) {
        Vec u{};
        u[ucast(i)] = x[ucast(j)];
        u[ucast(j)] = -x[ucast(i)];
        return u;
      }));
  return out;
}

// ---------------------------------------------------------------------------

SubspaceSpec SubspaceSpec::orthogonal_to_rigid(GridPtr grid) {
  auto spec = from_constraints(grid, rigid_basis(grid));
  spec.default_ = true;
  return spec;
}

SubspaceSpec SubspaceSpec::from_constraints(GridPtr grid, std::vector<VectorField> constraints) {
  const int m = rigid_dimension(grid->dim());
  if (static_cast<int>(constraints.size()) != m)
    throw ArgumentError("subspace needs " + std::to_string(m) + " constraints, got " +
                        std::to_string(constraints.size()));
  if (static_cast<int>(grid->size()) * grid->dim() < m)
    throw DegenerateError("grid has fewer degrees of freedom than the rigid motions");
  SubspaceSpec s;
  s.grid_ = grid;
  s.constraints_ = std::move(constraints);
  s.rigid_ = rigid_basis(grid);
  s.gram_.assign(ucast(m * m), 0.0);
  Eigen::MatrixXd G(m, m);
  for (int k = 0; k < m; ++k)
    for (int j = 0; j < m; ++j) {
      G(k, j) = s.rigid_[ucast(j)].inner(s.constraints_[ucast(k)]);
      s.gram_[ucast(k * m + j)] = G(k, j);
    }
  // Rank test relative to the natural scale of the entries.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(G);
  const auto sv = svd.singularValues();
  if (!(sv(m - 1) > 1e-12 * sv(0)))
    throw DegenerateError("constraints do not determine the rigid component (singular Gram matrix)");
  return s;
}

double SubspaceSpec::constraint_residual(const VectorField& u) const {
  const double un = std::sqrt(u.inner(u));
  if (un == 0.0) return 0.0;
  double worst = 0.0;
  for (const auto& w : constraints_) worst = std::max(worst, std::abs(u.inner(w)) / (un * std::sqrt(w.inner(w))));
  return worst;
}

std::string SubspaceSpec::describe() const {
  return default_ ? "zero mean and zero skew moments" : "custom constraints (" + std::to_string(constraints_.size()) + ")";
}

VectorField project_out_rigid(const VectorField& u, const SubspaceSpec& spec) {
  if (u.grid_ptr()->digest() != spec.grid_ptr()->digest()) throw ArgumentError("field and subspace grids differ");
  const int m = static_cast<int>(spec.rigid_.size());
  Eigen::MatrixXd G(m, m);
  Eigen::VectorXd rhs(m);
  for (int k = 0; k < m; ++k) {
    rhs(k) = u.inner(spec.constraints_[ucast(k)]);
    for (int j = 0; j < m; ++j) G(k, j) = spec.gram_[ucast(k * m + j)];
  }
  const Eigen::VectorXd c = G.fullPivLu().solve(rhs);
  std::vector<double> v(u.values());
  for (int j = 0; j < m; ++j) {
    const auto& r = spec.rigid_[ucast(j)].values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= c(j) * r[i];
  }
  return VectorField(u.grid_ptr(), std::move(v));
}

// ---------------------------------------------------------------------------

std::string to_string(SequenceKind k) {
  switch (k) {
    case SequenceKind::oscillatory: return "oscillatory";
    case SequenceKind::concentrating: return "concentrating";
    case SequenceKind::translating: return "translating";
    case SequenceKind::random: return "random";
  }
  return "?";
}

SequenceKind sequence_kind_from_string(const std::string& s) {
  for (auto k : {SequenceKind::oscillatory, SequenceKind::concentrating, SequenceKind::translating, SequenceKind::random})
    if (to_string(k) == s) return k;
  throw ArgumentError("unknown sequence kind '" + s + "'");
}

namespace {

VectorField::Expression random_series(const SequenceSpec& spec, const Grid& grid, int n) {
  const int d = grid.dim();
  const auto [lo, hi] = grid.domain().bounding_box();
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                    static_cast<std::uint32_t>(n)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  struct Mode {
    std::array<int, kMaxDim> m;
    int comp;
    double amp, phi;
  };
  std::vector<Mode> modes;
  const int M = spec.modes;
  const int mj = d > 1 ? M : 0, mk = d > 2 ? M : 0;
  for (int a = 0; a < d; ++a)
    for (int i = 0; i <= M; ++i)
      for (int j = 0; j <= mj; ++j)
        for (int k = 0; k <= mk; ++k) {
          const double len = std::sqrt(double(i * i + j * j + k * k));
          const double g = gauss(rng);
          modes.push_back({{i, j, k}, a, g * std::pow(1.0 + len, -spec.smoothness), phase(rng)});
        }
  Vec len{};
  for (int a = 0; a < d; ++a) len[ucast(a)] = hi[ucast(a)] - lo[ucast(a)];
  return [modes, lo, len, d](const Vec& x) {
    Vec u{};
    for (const auto& md : modes) {
      double arg = md.phi;
      for (int a = 0; a < d; ++a) arg += std::numbers::pi * md.m[ucast(a)] * (x[ucast(a)] - lo[ucast(a)]) / len[ucast(a)];
      u[ucast(md.comp)] += md.amp * std::cos(arg);
    }
    return u;
  };
}

}  // namespace

VectorField make_sequence(const SequenceSpec& spec, GridPtr grid, int n) {
  if (n < 1) throw ArgumentError("sequence index must be >= 1");
  if (!(spec.p >= 1.0)) throw ArgumentError("p >= 1 required");
  VectorField::Expression expr;
  switch (spec.kind) {
    case SequenceKind::oscillatory: {
      const double k = 2.0 * std::numbers::pi * spec.frequency * n;
      expr = [k](const Vec& x) { return Vec{std::sin(k * x[0]), 0.0, 0.0}; };
      break;
    }
    case SequenceKind::concentrating: {
      if (!(spec.scale > 0.0)) throw ArgumentError("concentrating scale must be positive");
      const double w = spec.scale / n;
      const Domain dom = grid->domain();
      expr = [w, dom](const Vec& x) {
        const double dist = dom.contains(x) ? dom.distance_to_boundary(x) : 0.0;
        return Vec{std::max(0.0, 1.0 - dist / w), 0.0, 0.0};
      };
      break;
    }
    case SequenceKind::translating: {
      if (!(spec.width > 0.0)) throw ArgumentError("bump width must be positive");
      Vec c{};
      if (spec.center) {
        c = *spec.center;
      } else {
        const auto [lo, hi] = grid->domain().bounding_box();
        c = 0.5 * (lo + hi);
      }
      c = c + (1.0 - 1.0 / n) * spec.shift;
      const double w2 = spec.width * spec.width;
      expr = [c, w2](const Vec& x) {
        const double q = std::max(0.0, 1.0 - dot(x - c, x - c) / w2);
        return Vec{q * q, 0.0, 0.0};
      };
      break;
    }
    case SequenceKind::random: expr = random_series(spec, *grid, n); break;
  }
  VectorField u = VectorField::sample(grid, expr);
  if (!spec.normalize) return u;
  const double norm_p = u.lp_norm_p(spec.p);
  if (!(norm_p > 0.0)) throw DegenerateError("sequence member vanishes on the grid; cannot normalize");
  return u.scaled(std::pow(norm_p, -1.0 / spec.p));
}

// ---------------------------------------------------------------------------

void write_field_csv(const VectorField& u, std::ostream& out) {
  const int d = u.dim();
  for (int a = 0; a < d; ++a) out << "x_" << a + 1 << ',';
  for (int a = 0; a < d; ++a) out << "u_" << a + 1 << (a + 1 < d ? "," : "\n");
  char buf[64];
  for (std::size_t i = 0; i < u.size(); ++i) {
    const Vec& x = u.grid().node(i);
    for (int a = 0; a < d; ++a) {
      std::snprintf(buf, sizeof buf, "%.17g,", x[ucast(a)]);
      out << buf;
    }
    for (int a = 0; a < d; ++a) {
      std::snprintf(buf, sizeof buf, a + 1 < d ? "%.17g," : "%.17g\n", u(i, a));
      out << buf;
    }
  }
}

VectorField read_field_csv(std::istream& in, GridPtr grid) {
  const int d = grid->dim();
  std::string line;
  if (!std::getline(in, line)) throw ArgumentError("field file is empty");
  std::vector<double> values;
  values.reserve(grid->size() * ucast(d));
  std::size_t row = 0;
  const double tol = 1e-9 * grid->max_h();
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::vector<double> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        cols.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ArgumentError("field file row " + std::to_string(row + 2) + ": bad number '" + cell + "'");
      }
    }
    if (static_cast<int>(cols.size()) != 2 * d)
      throw ArgumentError("field file row " + std::to_string(row + 2) + ": expected " + std::to_string(2 * d) + " columns");
    if (row >= grid->size()) throw ArgumentError("field file has more rows than grid nodes");
    const Vec& x = grid->node(row);
    for (int a = 0; a < d; ++a)
      if (std::abs(cols[ucast(a)] - x[ucast(a)]) > tol)
        throw ArgumentError("field file row " + std::to_string(row + 2) + " does not match grid node coordinates");
    for (int a = 0; a < d; ++a) values.push_back(cols[ucast(d + a)]);
    ++row;
  }
  if (row != grid->size())
    throw ArgumentError("field file has " + std::to_string(row) + " rows, grid has " + std::to_string(grid->size()) + " nodes");
  return VectorField(std::move(grid), std::move(values));
}

}  // namespace nlspace
