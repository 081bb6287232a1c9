#include "nlspace/nonlocal.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <limits>

namespace nlspace {

namespace {

std::size_t ucast(int i) { return static_cast<std::size_t>(i); }

double abs_pow(double x, double p) {
  x = std::abs(x);
  if (p == 2.0) return x * x;
  if (p == 1.0) return x;
  return std::pow(x, p);
}

// rho, unit direction and 1/|z| for every lattice offset between two cells.
struct OffsetTable {
  Index n{1, 1, 1};
  Index span{1, 1, 1};
  std::vector<double> rho, inv_r;
  std::vector<Vec> dir;
  bool overflow = false;

  OffsetTable(const Grid& g, const Kernel& k) : n(g.shape()) {
    const int d = g.dim();
    for (int a = 0; a < kMaxDim; ++a) span[ucast(a)] = 2 * n[ucast(a)] - 1;
    const std::size_t total = ucast(span[0]) * ucast(span[1]) * ucast(span[2]);
    rho.assign(total, 0.0);
    inv_r.assign(total, 0.0);
    dir.assign(total, Vec{});
    const Vec& h = g.h();
    for (int i = 0; i < span[0]; ++i)
      for (int j = 0; j < span[1]; ++j)
        for (int l = 0; l < span[2]; ++l) {
          const Vec z{(i - n[0] + 1) * h[0], d > 1 ? (j - n[1] + 1) * h[1] : 0.0, d > 2 ? (l - n[2] + 1) * h[2] : 0.0};
          const double r = norm(z);
          if (r == 0.0) continue;
          const std::size_t s = (ucast(i) * ucast(span[1]) + ucast(j)) * ucast(span[2]) + ucast(l);
          rho[s] = k(z);
          if (!std::isfinite(rho[s])) overflow = true;
          inv_r[s] = 1.0 / r;
          dir[s] = (1.0 / r) * z;
        }
  }
  std::size_t slot(const Index& from, const Index& to) const {
    return (ucast(to[0] - from[0] + n[0] - 1) * ucast(span[1]) + ucast(to[1] - from[1] + n[1] - 1)) * ucast(span[2]) +
           ucast(to[2] - from[2] + n[2] - 1);
  }
};

SeminormResult seminorm_raw(const VectorField& u, const Kernel& k, double p) {
  const Grid& g = u.grid();
  if (k.dim() != g.dim()) throw ArgumentError("kernel and grid dimensions differ");
  if (!(p >= 1.0)) throw ArgumentError("p >= 1 required");
  const OffsetTable tab(g, k);
  const std::size_t N = g.size();
  std::vector<double> rows(N);
  std::vector<std::size_t> counts(N);
  parallel_for(N, [&](std::size_t i) {
    std::vector<double> terms;
    terms.reserve(N);
    const Vec ui = u.at(i);
    std::size_t c = 0;
    for (std::size_t j = 0; j < N; ++j) {
      if (j == i) continue;
      const std::size_t s = tab.slot(g.lattice_index(i), g.lattice_index(j));
      const double r = tab.rho[s];
      if (r == 0.0) continue;
      ++c;
      const double D = dot(u.at(j) - ui, tab.dir[s]) * tab.inv_r[s];
      terms.push_back(g.weight(j) * r * abs_pow(D, p));
    }
    rows[i] = g.weight(i) * pairwise_sum(terms);
    counts[i] = c;
  });
  SeminormResult res;
  res.value_p = pairwise_sum(rows);
  for (auto c : counts) res.pair_count += c;
  res.diagonal_exclusion_radius = g.min_h();
  res.h = g.max_h();
  res.kernel_hash = k.hash();
  res.field_hash = u.hash();
  res.estimated_quadrature_error = tab.overflow ? std::numeric_limits<double>::infinity()
                                                : std::numeric_limits<double>::quiet_NaN();
  return res;
}

}  // namespace

double projected_quotient(const VectorField& u, std::size_t x, std::size_t y) {
  if (x == y) throw DomainError("projected quotient needs x != y");
  const Vec z = u.grid().node(y) - u.grid().node(x);
  return dot(u.at(y) - u.at(x), z) / dot(z, z);
}

SeminormResult seminorm(const VectorField& u, const Kernel& k, double p, bool estimate_error) {
  SeminormResult res = seminorm_raw(u, k, p);
  if (estimate_error && std::isnan(res.estimated_quadrature_error) && u.expression()) {
    const auto coarse = VectorField::sample(u.grid().coarsened(), *u.expression());
    res.estimated_quadrature_error = std::abs(res.value_p - seminorm_raw(coarse, k, p).value_p);
  }
  return res;
}

SymgradReport symgrad_upper_bound_check(const VectorField& u, const Kernel& k, double p) {
  if (!u.expression()) throw CapabilityError("symmetric-gradient bound needs a field with an expression");
  const double l1 = l1_norm(k);
  const auto& f = *u.expression();
  const Grid& g = u.grid();
  const int d = g.dim();
  const double eta = 1e-5 * g.max_h();
  std::vector<double> terms(g.size());
  for (std::size_t n = 0; n < g.size(); ++n) {
    const Vec& x = g.node(n);
    Mat J{};
    for (int b = 0; b < d; ++b) {
      const Vec e = eta * unit(b);
      const Vec df = (1.0 / (2.0 * eta)) * (f(x + e) - f(x - e));
      for (int a = 0; a < d; ++a) J[ucast(a)][ucast(b)] = df[ucast(a)];
    }
    double fro = 0.0;
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) {
        const double s = 0.5 * (J[ucast(a)][ucast(b)] + J[ucast(b)][ucast(a)]);
        fro += s * s;
      }
    terms[n] = g.weight(n) * std::pow(std::sqrt(fro), p);
  }
  SymgradReport rep;
  rep.lhs = seminorm(u, k, p).value_p;
  rep.rhs = pairwise_sum(terms) * l1;
  // Rigid motions have both sides zero up to finite-difference noise.
  rep.ratio = rep.rhs > 1e-20 ? rep.lhs / rep.rhs : 0.0;
  return rep;
}

Vec interpolate_zero_extended(const VectorField& u, const Vec& y) {
  const Grid& g = u.grid();
  const int d = g.dim();
  Index base{0, 0, 0};
  std::array<double, kMaxDim> frac{0.0, 0.0, 0.0};
  for (int a = 0; a < d; ++a) {
    const double s = (y[ucast(a)] - g.origin()[ucast(a)]) / g.h()[ucast(a)] - 0.5;
    const double fl = std::floor(s);
    base[ucast(a)] = static_cast<int>(fl);
    frac[ucast(a)] = s - fl;
  }
  Vec out{};
  const int corners = 1 << d;
  for (int c = 0; c < corners; ++c) {
    Index idx = base;
    double w = 1.0;
    for (int a = 0; a < d; ++a) {
      const bool up = (c >> a) & 1;
      idx[ucast(a)] += up;
      w *= up ? frac[ucast(a)] : 1.0 - frac[ucast(a)];
    }
    if (w == 0.0) continue;
    const long node = g.node_at(idx);
    if (node < 0) continue;
    out = out + w * u.at(static_cast<std::size_t>(node));
  }
  return out;
}

namespace {

Vec lattice_value(const VectorField& u, const Index& idx) {
  const long node = u.grid().node_at(idx);
  return node < 0 ? Vec{} : u.at(static_cast<std::size_t>(node));
}

// Cells of the lattice extended by pad[a] cells on each side.
struct ExtendedLattice {
  Index lo{0, 0, 0}, extent{1, 1, 1};
  ExtendedLattice(const Grid& g, const Index& pad) {
    for (int a = 0; a < g.dim(); ++a) {
      lo[ucast(a)] = -pad[ucast(a)];
      extent[ucast(a)] = g.shape()[ucast(a)] + 2 * pad[ucast(a)];
    }
  }
  std::size_t size() const { return ucast(extent[0]) * ucast(extent[1]) * ucast(extent[2]); }
  Index index(std::size_t flat) const {
    const std::size_t e1 = ucast(extent[1]), e2 = ucast(extent[2]);
    return {lo[0] + static_cast<int>(flat / (e1 * e2)), lo[1] + static_cast<int>((flat / e2) % e1),
            lo[2] + static_cast<int>(flat % e2)};
  }
};

}  // namespace

double direction_functional_F(const VectorField& u, double h_mag, const Vec& v, double p) {
  if (!(h_mag > 0.0)) throw ArgumentError("shift length must be positive");
  const Grid& g = u.grid();
  const Vec e = normalized(v);
  const Vec shift = h_mag * e;
  Index pad{0, 0, 0};
  for (int a = 0; a < g.dim(); ++a)
    pad[ucast(a)] = static_cast<int>(std::ceil(std::abs(shift[ucast(a)]) / g.h()[ucast(a)])) + 1;
  const ExtendedLattice lat(g, pad);
  std::vector<double> terms(lat.size());
  const double vol = g.cell_volume();
  parallel_for(lat.size(), [&](std::size_t flat) {
    const Index idx = lat.index(flat);
    const Vec a = lattice_value(u, idx);
    const Vec b = interpolate_zero_extended(u, g.lattice_point(idx) + shift);
    terms[flat] = vol * abs_pow(dot(b - a, e), p);
  });
  return pairwise_sum(terms);
}

double translation_modulus(const VectorField& u, const Vec& h, double p, const std::vector<double>& region_weights) {
  const Grid& g = u.grid();
  const auto& w = region_weights.empty() ? g.weights() : region_weights;
  if (w.size() != g.size()) throw ArgumentError("region weights do not match the grid");
  std::vector<double> terms(g.size());
  parallel_for(g.size(), [&](std::size_t i) {
    if (w[i] == 0.0) return;
    const Vec diff = interpolate_zero_extended(u, g.node(i) + h) - u.at(i);
    terms[i] = w[i] * std::pow(norm(diff), p);
  });
  return std::pow(pairwise_sum(terms), 1.0 / p);
}

// ---------------------------------------------------------------------------

MollifierMatrix cone_matrix(const Cone& cone) {
  const int d = cone.dim();
  const int n = d == 1 ? 8 : d == 2 ? 20000 : 400000;
  const auto quad = sphere_quadrature(cone, n);
  MollifierMatrix mm;
  mm.d = d;
  mm.cone = cone;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      std::vector<double> terms(quad.size());
      for (std::size_t q = 0; q < quad.size(); ++q)
        terms[q] = quad[q].weight * quad[q].direction[ucast(i)] * quad[q].direction[ucast(j)];
      mm.Q[ucast(i)][ucast(j)] = pairwise_sum(terms);
    }
  Eigen::MatrixXd Q(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) Q(i, j) = 0.5 * (mm.Q[ucast(i)][ucast(j)] + mm.Q[ucast(j)][ucast(i)]);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q);
  const auto ev = es.eigenvalues();
  mm.lambda_min = ev(0);
  if (!(ev(0) > 1e-10 * ev(d - 1))) throw DegenerateError("cone matrix Q is numerically singular (aperture too small)");
  const Eigen::MatrixXd Qi = Q.inverse();
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) mm.Q_inverse[ucast(i)][ucast(j)] = Qi(i, j);
  // The probe minimum over finitely many directions bounds lambda_min from above.
  mm.sector_constant = sector_min_constant(cone, 2.0);
  if (mm.lambda_min > mm.sector_constant * (1.0 + 1e-3))
    throw DegenerateError("cone matrix eigenvalue inconsistent with the sector constant");
  return mm;
}

Mat MollifierStencil::total() const {
  Mat t{};
  for (const auto& w : weights)
    for (int i = 0; i < kMaxDim; ++i)
      for (int j = 0; j < kMaxDim; ++j) t[ucast(i)][ucast(j)] += w[ucast(i)][ucast(j)];
  return t;
}

namespace {

constexpr std::array<double, 3> kGaussX{-0.7745966692414834, 0.0, 0.7745966692414834};
constexpr std::array<double, 3> kGaussW{5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};

// Integral of (z z^T)/|z|^2 over the part of the box c +- half lying in B_delta^Lambda.
class SectorCellIntegrator {
 public:
  SectorCellIntegrator(int d, double delta, const Cone& cone)
      : d_(d), delta_(delta), cone_(cone), max_depth_(d == 1 ? 40 : d == 2 ? 12 : 6) {}

  void integrate(const Vec& c, const Vec& half, int depth, Mat& acc) const {
    Vec gap{};
    bool origin_in = true;
    for (int a = 0; a < d_; ++a) {
      gap[ucast(a)] = std::max(0.0, std::abs(c[ucast(a)]) - half[ucast(a)]);
      if (std::abs(c[ucast(a)]) > half[ucast(a)]) origin_in = false;
    }
    if (norm(gap) >= delta_) return;
    if (!cone_.is_full_sphere() && !origin_in) {
      // Bounding-sphere test against the (convex) cone.
      const double rc = norm(c), rb = norm(half);
      if (rc > rb) {
        const double ang = std::acos(std::clamp(dot(c, cone_.axis()) / rc, -1.0, 1.0));
        if (ang - std::asin(rb / rc) > cone_.aperture()) return;
      }
    }
    bool inside = !origin_in;
    const int corners = 1 << d_;
    for (int k = 0; k < corners && inside; ++k) {
      Vec q = c;
      for (int a = 0; a < d_; ++a) q[ucast(a)] += ((k >> a) & 1 ? 1.0 : -1.0) * half[ucast(a)];
      if (norm(q) > delta_) inside = false;
      else if (!cone_.is_full_sphere() && norm(q) > 0.0 && !cone_.contains(q)) inside = false;
    }
    if (inside || depth == max_depth_) {
      gauss(c, half, !inside, acc);
      return;
    }
    const Vec h2 = 0.5 * half;
    for (int k = 0; k < corners; ++k) {
      Vec q = c;
      for (int a = 0; a < d_; ++a) q[ucast(a)] += ((k >> a) & 1 ? 1.0 : -1.0) * h2[ucast(a)];
      integrate(q, h2, depth + 1, acc);
    }
  }

 private:
  void gauss(const Vec& c, const Vec& half, bool mask, Mat& acc) const {
    double jac = 1.0;
    for (int a = 0; a < d_; ++a) jac *= half[ucast(a)];
    const int nj = d_ > 1 ? 3 : 1, nk = d_ > 2 ? 3 : 1;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < nj; ++j)
        for (int k = 0; k < nk; ++k) {
          const Vec z{c[0] + kGaussX[ucast(i)] * half[0], d_ > 1 ? c[1] + kGaussX[ucast(j)] * half[1] : 0.0,
                      d_ > 2 ? c[2] + kGaussX[ucast(k)] * half[2] : 0.0};
          const double r2 = dot(z, z);
          if (r2 == 0.0) continue;
          if (mask && (r2 > delta_ * delta_ || (!cone_.is_full_sphere() && !cone_.contains(z)))) continue;
          double w = jac * kGaussW[ucast(i)];
          if (d_ > 1) w *= kGaussW[ucast(j)];
          if (d_ > 2) w *= kGaussW[ucast(k)];
          for (int a = 0; a < d_; ++a)
            for (int b = 0; b < d_; ++b) acc[ucast(a)][ucast(b)] += w * z[ucast(a)] * z[ucast(b)] / r2;
        }
  }

  int d_;
  double delta_;
  const Cone& cone_;
  int max_depth_;
};

}  // namespace

MollifierStencil mollifier_stencil(const Grid& grid, double delta, const MollifierMatrix& mm) {
  const int d = grid.dim();
  if (mm.d != d) throw ArgumentError("mollifier and grid dimensions differ");
  if (delta < 2.0 * grid.max_h() * (1.0 - 1e-12))
    throw ResolutionError("mollifier radius " + std::to_string(delta) + " is below two grid cells");
  const Vec& h = grid.h();
  Index m{0, 0, 0};
  for (int a = 0; a < d; ++a) m[ucast(a)] = static_cast<int>(std::ceil(delta / h[ucast(a)] + 0.5));
  std::vector<Index> cand;
  for (int i = -m[0]; i <= m[0]; ++i)
    for (int j = -m[1]; j <= m[1]; ++j)
      for (int k = -m[2]; k <= m[2]; ++k) cand.push_back({i, j, k});
  std::vector<Mat> raw(cand.size());
  const SectorCellIntegrator integ(d, delta, mm.cone);
  const Vec half = 0.5 * h;
  parallel_for(cand.size(), [&](std::size_t n) {
    const Index& z = cand[n];
    const Vec c{z[0] * h[0], d > 1 ? z[1] * h[1] : 0.0, d > 2 ? z[2] * h[2] : 0.0};
    integ.integrate(c, half, 0, raw[n]);
  });
  const double scale = d * std::pow(delta, -d);
  MollifierStencil st;
  st.delta = delta;
  for (std::size_t n = 0; n < cand.size(); ++n) {
    bool nonzero = false;
    Mat W{};
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) {
        double s = 0.0;
        for (int c = 0; c < d; ++c) s += mm.Q_inverse[ucast(a)][ucast(c)] * raw[n][ucast(c)][ucast(b)];
        W[ucast(a)][ucast(b)] = scale * s;
        nonzero = nonzero || s != 0.0;
      }
    if (!nonzero) continue;
    st.offsets.push_back(cand[n]);
    st.weights.push_back(W);
  }
  return st;
}

namespace {

Vec apply_stencil(const VectorField& u, const MollifierStencil& st, const Index& at) {
  const int d = u.dim();
  Vec out{};
  for (std::size_t s = 0; s < st.offsets.size(); ++s) {
    const Index idx{at[0] + st.offsets[s][0], at[1] + st.offsets[s][1], at[2] + st.offsets[s][2]};
    const long node = u.grid().node_at(idx);
    if (node < 0) continue;
    const Vec v = u.at(static_cast<std::size_t>(node));
    const Mat& W = st.weights[s];
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) out[ucast(a)] += W[ucast(a)][ucast(b)] * v[ucast(b)];
  }
  return out;
}

}  // namespace

VectorField mollify(const VectorField& u, const MollifierStencil& st) {
  const Grid& g = u.grid();
  const int d = g.dim();
  std::vector<double> out(g.size() * ucast(d));
  parallel_for(g.size(), [&](std::size_t i) {
    const Vec v = apply_stencil(u, st, g.lattice_index(i));
    for (int a = 0; a < d; ++a) out[i * ucast(d) + ucast(a)] = v[ucast(a)];
  });
  return VectorField(u.grid_ptr(), std::move(out));
}

VectorField mollify(const VectorField& u, double delta, const MollifierMatrix& mm) {
  return mollify(u, mollifier_stencil(u.grid(), delta, mm));
}

double smoothing_gap(const VectorField& u, const MollifierStencil& st, double p) {
  const Grid& g = u.grid();
  Index pad{0, 0, 0};
  for (int a = 0; a < g.dim(); ++a) pad[ucast(a)] = static_cast<int>(std::ceil(st.delta / g.h()[ucast(a)])) + 1;
  const ExtendedLattice lat(g, pad);
  std::vector<double> terms(lat.size());
  const double vol = g.cell_volume();
  parallel_for(lat.size(), [&](std::size_t flat) {
    const Index idx = lat.index(flat);
    const Vec diff = lattice_value(u, idx) - apply_stencil(u, st, idx);
    terms[flat] = vol * std::pow(norm(diff), p);
  });
  return pairwise_sum(terms);
}

double smoothing_gap(const VectorField& u, double delta, const MollifierMatrix& mm, double p) {
  return smoothing_gap(u, mollifier_stencil(u.grid(), delta, mm), p);
}

std::vector<double> resolvable_deltas(const Grid& grid) {
  const auto [lo, hi] = grid.domain().bounding_box();
  const double diam = norm(hi - lo);
  std::vector<double> out;
  for (int j = -8; j < 60; ++j) {
    const double delta = std::ldexp(1.0, -j);
    if (delta > diam) continue;
    if (delta < 2.0 * grid.max_h() * (1.0 - 1e-12)) break;
    out.push_back(delta);
  }
  return out;
}

double est_for_F_ratio(const VectorField& u, const Kernel& k, double theta0, const Cone& cone, double delta,
                       double t, const Vec& v, double p) {
  if (!(t > 0.0 && t < delta)) throw ArgumentError("t must lie in (0, delta)");
  const int d = u.dim();
  const auto [lo, hi] = u.grid().domain().bounding_box();
  const double D = norm(hi - lo);
  const Vec e = normalized(v);
  const double base = cone_mass_ratio(k, theta0, cone, delta);
  using boost::math::quadrature::gauss;
  double integral = 0.0;
  constexpr int kPanels = 24;
  for (int j = kPanels; j >= 1; --j) {
    const double a = D * std::ldexp(1.0, -j), b = D * std::ldexp(1.0, -(j - 1));
    integral += gauss<double, 7>::integrate(
        [&](double h) {
          const double r = k(h * e);
          if (r == 0.0) return 0.0;
          return r * std::pow(h, d - 1.0 - p) * direction_functional_F(u, h, e, p);
        },
        a, b);
  }
  const double denom = base * integral;
  if (!(denom > 0.0)) throw DegenerateError("vanishing denominator in the F_p ratio");
  return direction_functional_F(u, t, e, p) / denom;
}

}  // namespace nlspace
