#include "nlspace/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace nlspace {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double abs_pow(double x, double p) {
  x = std::abs(x);
  if (p == 2.0) return x * x;
  if (p == 1.0) return x;
  return std::pow(x, p);
}

// Composite Simpson for f on [a, b] with an even number of panels of width <= step.
double simpson(const std::function<double(double)>& f, double a, double b, double step) {
  std::size_t m = static_cast<std::size_t>(std::ceil((b - a) / step));
  m += m % 2;
  m = std::max<std::size_t>(m, 2);
  const double hh = (b - a) / static_cast<double>(m);
  std::vector<double> terms(m + 1);
  for (std::size_t i = 0; i <= m; ++i) {
    const double c = (i == 0 || i == m) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    terms[i] = c * f(a + hh * static_cast<double>(i));
  }
  return pairwise_sum(terms) * hh / 3.0;
}

}  // namespace

// ---------------------------------------------------------------------------

PonceReport ponce_1d_check(const std::vector<double>& g, double spacing, double delta, double t, double p) {
  if (!(p >= 1.0)) throw ArgumentError("p >= 1 required");
  if (!(delta > 0.0) || !(spacing > 0.0)) throw ArgumentError("delta and spacing must be positive");
  if (!(t > 0.0 && t < delta)) throw ArgumentError("t must lie in (0, delta)");
  if (delta / spacing < 64.0 * (1.0 - 1e-12)) throw ArgumentError("need at least 64 samples per delta");
  if (g.size() < 2 || static_cast<double>(g.size() - 1) * spacing < 3.0 * delta * (1.0 - 1e-12))
    throw ArgumentError("samples must cover [0, 3 delta]");
  for (double v : g)
    if (!std::isfinite(v)) throw DomainError("non-finite sample");

  const double last = static_cast<double>(g.size() - 1);
  auto G = [&](double x) {
    const double s = std::clamp(x / spacing, 0.0, last);
    const std::size_t i = std::min(static_cast<std::size_t>(s), g.size() - 2);
    const double f = s - static_cast<double>(i);
    return (1.0 - f) * g[i] + f * g[i + 1];
  };
  // Simpson panels a quarter of the sample spacing keep the piecewise-linear
  // interpolant's kinks inside panels small.
  const double step = spacing / 4.0;
  PonceReport rep;
  rep.constant = std::pow(2.0, 2.0 * p - 1.0);
  rep.lhs = simpson([&](double x) { return abs_pow(G(x), p); }, 0.0, delta, step);
  const double diff = simpson([&](double x) { return abs_pow(G(x + t) - G(x), p); }, 0.0, 2.0 * delta, step);
  const double tail = simpson([&](double x) { return abs_pow(G(x), p); }, delta, 3.0 * delta, step);
  rep.rhs = rep.constant * std::pow(delta, p) * diff / std::pow(t, p) + std::pow(2.0, p - 1.0) * tail;
  rep.holds = rep.lhs <= rep.rhs * (1.0 + kPonceQuadTol);
  return rep;
}

PonceReport ponce_1d_check(const std::function<double(double)>& g, double delta, double t, double p,
                           int samples_per_delta) {
  if (samples_per_delta < 64) throw ArgumentError("need at least 64 samples per delta");
  if (!(delta > 0.0)) throw ArgumentError("delta must be positive");
  const double spacing = delta / samples_per_delta;
  std::vector<double> s(static_cast<std::size_t>(3 * samples_per_delta + 1));
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = g(spacing * static_cast<double>(i));
  return ponce_1d_check(s, spacing, delta, t, p);
}

// ---------------------------------------------------------------------------

double default_r0(const Domain& dom) {
  if (dom.shape() == Domain::Shape::graph_patch) return dom.window_radius() / 4.0;
  return dom.inradius() / 4.0;
}

BoundaryMassReport boundary_mass_check(const VectorField& u, const Kernel& k, double r, double epsilon0, double p,
                                       std::optional<double> r0) {
  if (!k.is_radial()) throw CapabilityError("boundary mass check needs a radial kernel");
  if (!(p >= 1.0)) throw ArgumentError("p >= 1 required");
  const Grid& g = u.grid();
  const double r0v = r0 ? *r0 : default_r0(g.domain());
  if (!(r > 0.0 && r < r0v)) throw ArgumentError("r must lie in (0, r0)");
  if (!(epsilon0 > 0.0 && epsilon0 <= 0.125)) throw ArgumentError("epsilon0 must lie in (0, 1/8]");

  const std::size_t N = g.size();
  std::vector<double> up(N);
  for (std::size_t i = 0; i < N; ++i) up[i] = abs_pow(norm(u.at(i)), p);
  const auto iw = interior_weights(g, epsilon0 * r);
  const auto iw2 = interior_weights(g, 2.0 * epsilon0 * r);
  std::vector<double> a(N), b(N), c(N);
  for (std::size_t i = 0; i < N; ++i) {
    a[i] = g.weight(i) * up[i];
    b[i] = iw[i] * up[i];
    c[i] = (g.weight(i) - iw2[i]) * up[i];
  }
  BoundaryMassReport rep;
  rep.r = r;
  rep.epsilon0 = epsilon0;
  rep.lhs = pairwise_sum(a);
  rep.interior_term = pairwise_sum(b);
  const double vin = pairwise_sum(iw);
  if (!(vin > 0.0)) throw DegenerateError("interior region carries no quadrature weight");
  rep.C1 = pairwise_sum(g.weights()) / vin;
  rep.seminorm = seminorm(u, k, p).value_p;
  const double mass = ball_mass(k, r);
  if (!(mass > 0.0)) throw DegenerateError("kernel has no mass in B_r");
  rep.seminorm_term = std::pow(r, p) / mass * rep.seminorm;
  const double floor = 1e-12 * std::max(rep.lhs, std::numeric_limits<double>::min());
  if (rep.seminorm_term > floor) rep.implied_C2 = (rep.lhs - rep.C1 * rep.interior_term) / rep.seminorm_term;
  rep.collar_term = pairwise_sum(c);

  const auto inner = interior_subset(g, r / 2.0);
  const double umax = u.max_abs();
  rep.vanishes_on_inner = true;
  for (std::size_t i = 0; i < N; ++i)
    if (inner[i] && norm(u.at(i)) > 1e-14 * umax) {
      rep.vanishes_on_inner = false;
      break;
    }
  if (rep.vanishes_on_inner && rep.seminorm_term > floor) rep.implied_collar_C = rep.collar_term / rep.seminorm_term;
  return rep;
}

// ---------------------------------------------------------------------------
// Poincare-Korn constants.

std::string to_string(PoincareMethod m) {
  switch (m) {
    case PoincareMethod::dense_eigen: return "dense_eigen";
    case PoincareMethod::inverse_iteration: return "inverse_iteration";
    case PoincareMethod::rayleigh_descent: return "rayleigh_descent";
  }
  return "?";
}

namespace {

// Unordered node pairs i < j with c = w_i w_j (rho(z) + rho(-z)), z = x_j - x_i.
// The projected quotient is symmetric in the pair, so the seminorm is
// sum c |(u_j - u_i) . e / |z||^p.
struct PairList {
  std::vector<std::uint32_t> i, j;
  std::vector<double> c;
  std::vector<Vec> e;  // unit direction divided by |z|

  PairList(const Grid& g, const Kernel& k) {
    if (k.dim() != g.dim()) throw ArgumentError("kernel and grid dimensions differ");
    const std::size_t N = g.size();
    for (std::size_t a = 0; a < N; ++a)
      for (std::size_t b = a + 1; b < N; ++b) {
        const Vec z = g.node(b) - g.node(a);
        const double rho = k(z) + k(-1.0 * z);
        if (!(rho > 0.0)) continue;
        if (!std::isfinite(rho)) throw DegenerateError("kernel overflows at the grid's nearest-pair distance");
        const double r2 = dot(z, z);
        i.push_back(static_cast<std::uint32_t>(a));
        j.push_back(static_cast<std::uint32_t>(b));
        c.push_back(g.weight(a) * g.weight(b) * rho);
        e.push_back((1.0 / r2) * z);
      }
  }
  std::size_t size() const { return c.size(); }
};

// Node-major dense K with u^T K u = |u|_S^2.
Eigen::MatrixXd dense_form(const Grid& g, const PairList& pl) {
  const int d = g.dim();
  const auto n = static_cast<Eigen::Index>(g.size()) * d;
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t s = 0; s < pl.size(); ++s) {
    const auto I = static_cast<Eigen::Index>(pl.i[s]) * d, J = static_cast<Eigen::Index>(pl.j[s]) * d;
    const Vec& e = pl.e[s];
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) {
        const double v = pl.c[s] * (e[static_cast<std::size_t>(a)] * e[static_cast<std::size_t>(b)]);
        K(I + a, I + b) += v;
        K(J + a, J + b) += v;
        K(I + a, J + b) -= v;
        K(J + a, I + b) -= v;
      }
  }
  return K;
}

// y = K x, matrix-free.
void apply_form(const Grid& g, const PairList& pl, const Eigen::VectorXd& x, Eigen::VectorXd& y) {
  const int d = g.dim();
  y.setZero(x.size());
  for (std::size_t s = 0; s < pl.size(); ++s) {
    const auto I = static_cast<Eigen::Index>(pl.i[s]) * d, J = static_cast<Eigen::Index>(pl.j[s]) * d;
    const Vec& e = pl.e[s];
    double D = 0.0;
    for (int a = 0; a < d; ++a) D += (x(J + a) - x(I + a)) * e[static_cast<std::size_t>(a)];
    for (int a = 0; a < d; ++a) {
      const double f = pl.c[s] * D * e[static_cast<std::size_t>(a)];
      y(J + a) += f;
      y(I + a) -= f;
    }
  }
}

double form_value(const Grid& g, const PairList& pl, const std::vector<double>& u, double p,
                  std::vector<double>* grad) {
  const int d = g.dim();
  std::vector<double> terms(pl.size());
  if (grad) grad->assign(u.size(), 0.0);
  for (std::size_t s = 0; s < pl.size(); ++s) {
    const std::size_t I = pl.i[s] * static_cast<std::size_t>(d), J = pl.j[s] * static_cast<std::size_t>(d);
    const Vec& e = pl.e[s];
    double D = 0.0;
    for (int a = 0; a < d; ++a) D += (u[J + a] - u[I + a]) * e[static_cast<std::size_t>(a)];
    terms[s] = pl.c[s] * abs_pow(D, p);
    if (grad) {
      // d/dD |D|^p = p |D|^{p-1} sign D
      const double dD = D == 0.0 ? 0.0 : p * std::pow(std::abs(D), p - 1.0) * (D > 0 ? 1.0 : -1.0);
      for (int a = 0; a < d; ++a) {
        const double f = pl.c[s] * dD * e[static_cast<std::size_t>(a)];
        (*grad)[J + a] += f;
        (*grad)[I + a] -= f;
      }
    }
  }
  return pairwise_sum(terms);
}

double lp_value(const Grid& g, const std::vector<double>& u, double p, std::vector<double>* grad) {
  const int d = g.dim();
  std::vector<double> terms(g.size());
  if (grad) grad->assign(u.size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    double n2 = 0.0;
    for (int a = 0; a < d; ++a) n2 += u[i * static_cast<std::size_t>(d) + a] * u[i * static_cast<std::size_t>(d) + a];
    const double nrm = std::sqrt(n2);
    terms[i] = g.weight(i) * abs_pow(nrm, p);
    if (grad && nrm > 0.0) {
      const double f = g.weight(i) * p * std::pow(nrm, p - 2.0);
      for (int a = 0; a < d; ++a) (*grad)[i * static_cast<std::size_t>(d) + a] = f * u[i * static_cast<std::size_t>(d) + a];
    }
  }
  return pairwise_sum(terms);
}

// Orthonormal basis (columns) of the complement of span(C) in R^n.
Eigen::MatrixXd complement_basis(const Eigen::MatrixXd& C) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(C);
  const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(C.rows(), C.rows());
  return Q.rightCols(C.rows() - C.cols());
}

struct Scaled {
  Eigen::VectorXd sqrt_m, inv_sqrt_m;
  Eigen::MatrixXd C;  // columns M^{1/2} w_k
};

Scaled scaled_constraints(const SubspaceSpec& spec) {
  const Grid& g = *spec.grid_ptr();
  const int d = g.dim();
  const auto n = static_cast<Eigen::Index>(g.size()) * d;
  Scaled s;
  s.sqrt_m.resize(n);
  s.inv_sqrt_m.resize(n);
  for (std::size_t i = 0; i < g.size(); ++i)
    for (int a = 0; a < d; ++a) {
      const double w = g.weight(i);
      if (!(w > 0.0)) throw DegenerateError("grid node with zero weight");
      s.sqrt_m(static_cast<Eigen::Index>(i) * d + a) = std::sqrt(w);
      s.inv_sqrt_m(static_cast<Eigen::Index>(i) * d + a) = 1.0 / std::sqrt(w);
    }
  const auto& cons = spec.constraints();
  s.C.resize(n, static_cast<Eigen::Index>(cons.size()));
  for (std::size_t k = 0; k < cons.size(); ++k)
    for (Eigen::Index r = 0; r < n; ++r)
      s.C(r, static_cast<Eigen::Index>(k)) = s.sqrt_m(r) * cons[k].values()[static_cast<std::size_t>(r)];
  return s;
}

constexpr double kEigenFloor = 1e-12;

PoincareEstimate dense_poincare(const SubspaceSpec& spec, const PairList& pl) {
  const Grid& g = *spec.grid_ptr();
  const Scaled s = scaled_constraints(spec);
  Eigen::MatrixXd K = dense_form(g, pl);
  K = s.inv_sqrt_m.asDiagonal() * K * s.inv_sqrt_m.asDiagonal();
  const Eigen::MatrixXd Z = complement_basis(s.C);
  const Eigen::MatrixXd A = Z.transpose() * K * Z;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  if (es.info() != Eigen::Success) throw DegenerateError("eigen solver failed");
  const double lam = es.eigenvalues()(0);
  if (!(lam >= kEigenFloor)) throw DegenerateError("seminorm vanishes on a direction of V (smallest eigenvalue below 1e-12)");
  const Eigen::VectorXd u = s.inv_sqrt_m.asDiagonal() * (Z * es.eigenvectors().col(0));
  PoincareEstimate est;
  est.constant = 1.0 / lam;
  est.method = PoincareMethod::dense_eigen;
  est.minimizer.assign(u.data(), u.data() + u.size());
  return est;
}

PoincareEstimate iterative_poincare(const SubspaceSpec& spec, const PairList& pl, std::uint64_t seed) {
  const Grid& g = *spec.grid_ptr();
  const Scaled s = scaled_constraints(spec);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(s.C);
  const Eigen::MatrixXd Qc = qr.householderQ() * Eigen::MatrixXd::Identity(s.C.rows(), s.C.cols());
  auto project = [&](Eigen::VectorXd& v) { v -= Qc * (Qc.transpose() * v); };
  Eigen::VectorXd tmp;
  auto op = [&](const Eigen::VectorXd& v, Eigen::VectorXd& out) {
    apply_form(g, pl, s.inv_sqrt_m.cwiseProduct(v), tmp);
    out = s.inv_sqrt_m.cwiseProduct(tmp);
    project(out);
  };
  const auto n = s.C.rows();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N01;
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = N01(rng);
  project(x);
  x.normalize();

  // Inverse iteration, each solve by conjugate gradients inside V.
  double lam = 0.0, prev = std::numeric_limits<double>::infinity();
  Eigen::VectorXd Ax(n), r(n), pdir(n), Ap(n), y(n);
  for (int it = 0; it < 200; ++it) {
    y.setZero();
    r = x;
    pdir = r;
    double rr = r.squaredNorm();
    for (int k = 0; k < 4 * static_cast<int>(n) && rr > 1e-24; ++k) {
      op(pdir, Ap);
      const double pAp = pdir.dot(Ap);
      if (!(pAp > 0.0)) throw DegenerateError("seminorm vanishes on a direction of V");
      const double alpha = rr / pAp;
      y += alpha * pdir;
      r -= alpha * Ap;
      const double rr2 = r.squaredNorm();
      pdir = r + (rr2 / rr) * pdir;
      rr = rr2;
    }
    project(y);
    x = y.normalized();
    op(x, Ax);
    lam = x.dot(Ax);
    if (std::abs(lam - prev) <= 1e-12 * std::abs(lam)) break;
    prev = lam;
  }
  if (!(lam >= kEigenFloor)) throw DegenerateError("seminorm vanishes on a direction of V (smallest eigenvalue below 1e-12)");
  const Eigen::VectorXd u = s.inv_sqrt_m.cwiseProduct(x);
  PoincareEstimate est;
  est.constant = 1.0 / lam;
  est.method = PoincareMethod::inverse_iteration;
  est.minimizer.assign(u.data(), u.data() + u.size());
  return est;
}

// Projected descent on |u|_S^p / int |u|^p from smooth random starts; the
// largest reciprocal found is a lower bound for the constant.
PoincareEstimate descent_poincare(const SubspaceSpec& spec, const PairList& pl, double p, const PoincareOptions& opt) {
  const GridPtr& gp = spec.grid_ptr();
  const Grid& g = *gp;
  const std::size_t n = g.size() * static_cast<std::size_t>(g.dim());
  PoincareEstimate best;
  best.method = PoincareMethod::rayleigh_descent;
  best.lower_bound = true;
  best.constant = 0.0;
  std::vector<double> gs, gn, dir(n), trial(n);
  for (int r = 0; r < opt.restarts; ++r) {
    SequenceSpec ss;
    ss.kind = SequenceKind::random;
    ss.seed = opt.seed + static_cast<std::uint64_t>(r);
    ss.p = p;
    ss.normalize = false;
    VectorField u0 = project_out_rigid(make_sequence(ss, gp, 1), spec);
    std::vector<double> u = u0.values();
    double N = lp_value(g, u, p, nullptr);
    if (!(N > 0.0)) continue;
    for (double& v : u) v *= std::pow(N, -1.0 / p);
    double S = form_value(g, pl, u, p, nullptr);
    double step = 1.0;
    for (int it = 0; it < opt.iterations; ++it) {
      S = form_value(g, pl, u, p, &gs);
      N = lp_value(g, u, p, &gn);
      const double R = S / N;
      // L^2-metric gradient of the quotient, pulled back into V.
      for (std::size_t k = 0; k < n; ++k) {
        const double w = g.weight(k / static_cast<std::size_t>(g.dim()));
        dir[k] = (gs[k] - R * gn[k]) / (N * w);
      }
      const VectorField gv = project_out_rigid(VectorField(gp, dir), spec);
      const auto& G = gv.values();
      double slope = 0.0;
      for (std::size_t k = 0; k < n; ++k) slope += G[k] * (gs[k] - R * gn[k]) / N;
      if (!(slope > 1e-15 * R)) break;
      bool moved = false;
      for (int ls = 0; ls < 40; ++ls) {
        for (std::size_t k = 0; k < n; ++k) trial[k] = u[k] - step * G[k];
        const double Nt = lp_value(g, trial, p, nullptr);
        const double St = form_value(g, pl, trial, p, nullptr);
        if (Nt > 0.0 && St / Nt <= R - 1e-4 * step * slope) {
          const double sc = std::pow(Nt, -1.0 / p);
          for (std::size_t k = 0; k < n; ++k) u[k] = trial[k] * sc;
          step *= 2.0;
          moved = true;
          break;
        }
        step *= 0.5;
      }
      if (!moved) break;
    }
    S = form_value(g, pl, u, p, nullptr);
    N = lp_value(g, u, p, nullptr);
    if (!(S > 0.0)) throw DegenerateError("seminorm vanishes on a field of V");
    const double c = N / S;
    if (c > best.constant) {
      best.constant = c;
      best.minimizer = u;
    }
  }
  best.restarts = opt.restarts;
  if (best.minimizer.empty()) throw DegenerateError("no admissible start field in V");
  return best;
}

PoincareEstimate solve_poincare(const SubspaceSpec& spec, const Kernel& k, double p, const PoincareOptions& opt) {
  const Grid& g = *spec.grid_ptr();
  if (k.dim() != g.dim()) throw ArgumentError("kernel and grid dimensions differ");
  if (!(p >= 1.0)) throw ArgumentError("p >= 1 required");
  const std::size_t n = g.size() * static_cast<std::size_t>(g.dim());
  if (n <= static_cast<std::size_t>(rigid_dimension(g.dim())))
    throw DegenerateError("grid has no degrees of freedom left in V");
  if (p != 2.0 && g.size() > 4096) throw CapabilityError("general-p descent limited to 4096 nodes");
  const PairList pl(g, k);
  PoincareEstimate est;
  if (p == 2.0)
    est = n <= opt.dense_limit ? dense_poincare(spec, pl) : iterative_poincare(spec, pl, opt.seed);
  else
    est = descent_poincare(spec, pl, p, opt);
  est.grid_h = g.max_h();
  est.subspace = spec.describe();
  est.minimizer_hash = VectorField(spec.grid_ptr(), est.minimizer).hash();
  est.refinement_drift = kNaN;
  return est;
}

}  // namespace

PoincareEstimate poincare_constant(const SubspaceSpec& spec, const Kernel& k, double p, const PoincareOptions& opt) {
  PoincareEstimate est = solve_poincare(spec, k, p, opt);
  // Custom constraint fields live on one grid only, so the drift is only
  // available for the default subspace.
  if (opt.refine && spec.is_default()) {
    try {
      const auto coarse = spec.grid_ptr()->coarsened();
      const auto ce = solve_poincare(SubspaceSpec::orthogonal_to_rigid(coarse), k, p, opt);
      est.refinement_drift = std::abs(est.constant - ce.constant) / est.constant;
    } catch (const ResolutionError&) {
    } catch (const DegenerateError&) {
    }
  }
  return est;
}

std::vector<double> seminorm_quadratic_form(const Grid& grid, const Kernel& k) {
  const PairList pl(grid, k);
  const Eigen::MatrixXd K = dense_form(grid, pl);
  std::vector<double> out(static_cast<std::size_t>(K.size()));
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(out.data(), K.rows(), K.cols()) = K;
  return out;
}

// ---------------------------------------------------------------------------
// Kernel sequences.

std::string to_string(KernelFamily f) {
  switch (f) {
    case KernelFamily::mollified: return "mollified";
    case KernelFamily::truncated: return "truncated";
    case KernelFamily::rescaled_delta: return "rescaled_delta";
  }
  return "?";
}

KernelFamily kernel_family_from_string(const std::string& s) {
  if (s == "mollified") return KernelFamily::mollified;
  if (s == "truncated") return KernelFamily::truncated;
  if (s == "rescaled_delta") return KernelFamily::rescaled_delta;
  throw ArgumentError("unknown kernel family '" + s + "'");
}

namespace {

// int_0^1 (1 - t^2)^3 t^{d-1} dt
double bump_moment(int d) {
  switch (d) {
    case 1: return 16.0 / 35.0;
    case 2: return 1.0 / 8.0;
    default: return 16.0 / 315.0;
  }
}

// (rho * phi_eps)(r e_1) with phi_eps(y) = c (1 - |y|^2/eps^2)^3_+ / eps^d.
double mollified_profile(const Kernel& rho, double eps, double r) {
  const int d = rho.dim();
  const double c = 1.0 / (sphere_area(d) * bump_moment(d) * std::pow(eps, d));
  auto phi_q2 = [&](double q2) {
    const double t = 1.0 - q2 / (eps * eps);
    return t > 0.0 ? c * t * t * t : 0.0;
  };
  // Spherical average of phi(r e_1 - s w) times the sphere area.
  auto shell = [&](double s) {
    if (d == 1) return phi_q2((r - s) * (r - s)) + phi_q2((r + s) * (r + s));
    const double rs = r * s;
    if (rs == 0.0) return sphere_area(d) * phi_q2(r * r + s * s);
    const double cmin = std::clamp((r * r + s * s - eps * eps) / (2.0 * rs), -1.0, 1.0);
    if (cmin >= 1.0) return 0.0;
    if (d == 3) {
      // polynomial in cos(beta): Gauss is exact
      auto f = [&](double t) { return phi_q2(r * r + s * s - 2.0 * rs * t); };
      return 2.0 * std::numbers::pi * boost::math::quadrature::gauss<double, 7>::integrate(f, cmin, 1.0);
    }
    const double amax = std::acos(cmin);
    auto f = [&](double a) { return phi_q2(r * r + s * s - 2.0 * rs * std::cos(a)); };
    return 2.0 * boost::math::quadrature::gauss<double, 30>::integrate(f, 0.0, amax);
  };
  double lo = std::max(0.0, r - eps), hi = std::min(rho.support_radius(), r + eps);
  if (!(hi > lo)) return 0.0;
  std::vector<double> cuts{lo, hi};
  if (rho.inner_cutoff() > lo && rho.inner_cutoff() < hi) cuts.insert(cuts.begin() + 1, rho.inner_cutoff());
  boost::math::quadrature::tanh_sinh<double> ts;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    auto f = [&](double s) {
      if (s <= 0.0) return 0.0;
      return rho.profile(s) * std::pow(s, d - 1) * shell(s);
    };
    total += ts.integrate(f, cuts[i], cuts[i + 1], 1e-9);
  }
  return total;
}

}  // namespace

Kernel kernel_family_member(KernelFamily family, const Kernel& rho, int n) {
  if (n < 1) throw ArgumentError("family index must be >= 1");
  if (!rho.is_radial()) throw CapabilityError("kernel families need a radial kernel");
  const double eps = 1.0 / n;
  const int d = rho.dim();
  if (family == KernelFamily::truncated) return rho.with_inner_cutoff(eps);
  if (!std::isfinite(rho.support_radius()))
    throw ArgumentError(to_string(family) + " family needs a kernel with bounded support");
  const double R = rho.support_radius();
  if (family == KernelFamily::mollified) {
    // log-spaced away from the edge, uniform across the smeared edge
    std::vector<double> radii;
    const double rmin = 1e-3 * eps, edge = std::max(R - eps, 2.0 * rmin);
    for (int i = 0; i < 64; ++i) radii.push_back(rmin * std::pow(edge / rmin, i / 63.0));
    for (int i = 1; i <= 64; ++i) radii.push_back(edge + (R + eps - edge) * i / 64.0);
    std::vector<double> vals;
    for (double r : radii) vals.push_back(mollified_profile(rho, eps, r));
    return Kernel::custom_radial(d, rho.p(), std::move(radii), std::move(vals));
  }

  // rho plus mass 1/n spread uniformly over B_{1/n}.
  const double spike = (1.0 / n) / (ball_volume(d) * std::pow(eps, d));
  const double rmin = 1e-4 * std::min(eps, R);
  std::vector<double> radii;
  const int m = 96;
  for (int i = 0; i < m; ++i) radii.push_back(rmin * std::pow(R / rmin, static_cast<double>(i) / (m - 1)));
  radii.push_back(eps * (1.0 - 1e-9));
  radii.push_back(eps * (1.0 + 1e-9));
  std::sort(radii.begin(), radii.end());
  radii.erase(std::remove_if(radii.begin(), radii.end(), [&](double r) { return r > R; }), radii.end());
  radii.erase(std::unique(radii.begin(), radii.end(), [](double a, double b) { return !(b > a * (1.0 + 1e-12)); }),
              radii.end());
  std::vector<double> vals;
  for (double r : radii) vals.push_back(rho.profile(r) + (r < eps ? spike : 0.0));
  return Kernel::custom_radial(d, rho.p(), std::move(radii), std::move(vals));
}

std::string to_string(CompactnessVerdict v) {
  switch (v) {
    case CompactnessVerdict::no_obstruction: return "no_obstruction";
    case CompactnessVerdict::concentration_detected: return "concentration_detected";
    case CompactnessVerdict::oscillation_detected: return "oscillation_detected";
    case CompactnessVerdict::hypothesis_violated: return "hypothesis_violated";
  }
  return "?";
}

SequenceSource sequence_source(const SequenceSpec& spec, GridPtr grid) {
  std::ostringstream id;
  id << to_string(spec.kind) << ":p=" << spec.p;
  switch (spec.kind) {
    case SequenceKind::oscillatory: id << ",frequency=" << spec.frequency; break;
    case SequenceKind::concentrating: id << ",scale=" << spec.scale; break;
    case SequenceKind::translating:
      id << ",width=" << spec.width << ",shift=(" << spec.shift[0] << ',' << spec.shift[1] << ',' << spec.shift[2]
         << ')';
      break;
    case SequenceKind::random: id << ",seed=" << spec.seed; break;
  }
  return {id.str(), [spec, grid](int n) { return make_sequence(spec, grid, n); }};
}

namespace {

std::vector<double> experiment_deltas(const Grid& g, const ExperimentOptions& opt) {
  auto ds = opt.deltas.empty() ? resolvable_deltas(g) : opt.deltas;
  if (ds.empty()) throw ResolutionError("no mollifier radius is resolvable on this grid");
  return ds;
}

std::vector<double> experiment_taus(const Grid& g, const ExperimentOptions& opt) {
  if (!opt.taus.empty()) return opt.taus;
  std::vector<double> out;
  const double in = g.domain().inradius();
  for (int j = 0; j < 60; ++j) {
    const double t = std::ldexp(1.0, -j);
    if (t < in && t >= g.max_h() * (1.0 - 1e-12)) out.push_back(t);
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw ResolutionError("no collar width between h and the inradius");
  return out;
}

// Shared part of both harnesses: seminorms, norms, gaps, boundary mass.
struct SequenceData {
  std::vector<VectorField> fields;
  std::vector<MollifierStencil> stencils;
  std::vector<std::vector<double>> gaps;  // [n][delta]
};

void fill_common(CompactnessReport& rep, SequenceData& sd, const SequenceSource& src,
                 const std::function<Kernel(int)>& kernel_of, double p, const GridPtr& grid,
                 const MollifierMatrix& mm, const ExperimentOptions& opt) {
  if (opt.n_values.empty()) throw ArgumentError("no sequence indices given");
  rep.sequence_id = src.id;
  rep.n_values = opt.n_values;
  const auto deltas = experiment_deltas(*grid, opt);
  for (double dl : deltas) sd.stencils.push_back(mollifier_stencil(*grid, dl, mm));
  for (int n : opt.n_values) {
    VectorField u = src.member(n);
    if (u.grid().digest() != grid->digest()) throw ArgumentError("sequence member lives on a different grid");
    rep.seminorms.push_back(seminorm(u, kernel_of(n), p).value_p);
    rep.lp_norms.push_back(u.lp_norm_p(p));
    std::vector<double> row;
    for (const auto& st : sd.stencils) row.push_back(smoothing_gap(u, st, p));
    sd.gaps.push_back(row);
    sd.fields.push_back(std::move(u));
  }
  rep.sup_seminorm = *std::max_element(rep.seminorms.begin(), rep.seminorms.end());
  rep.sup_lp = *std::max_element(rep.lp_norms.begin(), rep.lp_norms.end());
  for (std::size_t k = 0; k < deltas.size(); ++k) {
    double m = 0.0;
    for (const auto& row : sd.gaps) m = std::max(m, row[k]);
    rep.gap_curve.emplace_back(deltas[k], m);
  }
  for (double tau : experiment_taus(*grid, opt)) {
    const auto iw = interior_weights(*grid, tau);
    double m = 0.0;
    for (std::size_t n = 0; n < sd.fields.size(); ++n) {
      const auto& u = sd.fields[n];
      std::vector<double> t(u.size());
      for (std::size_t i = 0; i < u.size(); ++i) t[i] = (grid->weight(i) - iw[i]) * abs_pow(norm(u.at(i)), p);
      if (rep.lp_norms[n] > 0.0) m = std::max(m, pairwise_sum(t) / rep.lp_norms[n]);
    }
    rep.boundary_mass_curve.emplace_back(tau, m);
  }
  const auto& bm = rep.boundary_mass_curve;
  if (bm.size() == 1) {
    rep.boundary_mass_limit = bm[0].second;
  } else {
    const auto [t1, f1] = bm[0];
    const auto [t2, f2] = bm[1];
    rep.boundary_mass_limit = std::clamp(f1 - t1 * (f2 - f1) / (t2 - t1), 0.0, 1.0);
  }
}

void classify(CompactnessReport& rep, const CompactnessThresholds& th) {
  double min_gap = std::numeric_limits<double>::infinity();
  for (const auto& [dl, gap] : rep.gap_curve) min_gap = std::min(min_gap, gap);
  if (rep.boundary_mass_limit >= th.mass_fraction)
    rep.verdict = CompactnessVerdict::concentration_detected;
  else if (min_gap >= th.gap_fraction * rep.sup_lp)
    rep.verdict = CompactnessVerdict::oscillation_detected;
  else
    rep.verdict = CompactnessVerdict::no_obstruction;
}

// max/min seminorm ratio over the sequence
double seminorm_growth(const CompactnessReport& rep) {
  const double lo = *std::min_element(rep.seminorms.begin(), rep.seminorms.end());
  if (rep.sup_seminorm == 0.0) return 1.0;
  return lo > 0.0 ? rep.sup_seminorm / lo : std::numeric_limits<double>::infinity();
}

}  // namespace

CompactnessReport kernel_sequence_experiment(KernelFamily family, const Kernel& rho, const SequenceSource& fields,
                                             double p, const GridPtr& grid, const ExperimentOptions& opt) {
  if (!(p >= 1.0)) throw ArgumentError("p >= 1 required");
  if (!rho.is_radial()) throw CapabilityError("kernel families need a radial kernel");
  CompactnessReport rep;
  SequenceData sd;
  const auto mm = cone_matrix(Cone::full_sphere(grid->dim()));
  fill_common(rep, sd, fields, [&](int n) { return kernel_family_member(family, rho, n); }, p, grid, mm, opt);
  for (const auto& [dl, gap] : rep.gap_curve) rep.bound_curve.emplace_back(dl, mass_ratio(rho, dl));
  const double growth = seminorm_growth(rep);
  if (growth > opt.thresholds.seminorm_growth) {
    rep.verdict = CompactnessVerdict::hypothesis_violated;
    std::ostringstream msg;
    msg << "seminorms grow by a factor " << growth << " across the sequence";
    rep.note = msg.str();
    return rep;
  }
  classify(rep, opt.thresholds);
  rep.note = "family " + to_string(family) + ", limit kernel " + rho.describe();
  return rep;
}

CompactnessReport compactness_probe(const SequenceSource& fields, const Kernel& k, double p, const GridPtr& grid,
                                    const Cone& cone, double theta0, const ExperimentOptions& opt) {
  if (!(p >= 1.0)) throw ArgumentError("p >= 1 required");
  CompactnessReport rep;
  const auto cc = check_cone_condition(k, theta0, cone, default_deltas());
  if (cc.verdict != Verdict::satisfied) {
    rep.sequence_id = fields.id;
    rep.verdict = CompactnessVerdict::hypothesis_violated;
    rep.note = "cone condition " + to_string(cc.verdict) + ": " + cc.note;
    return rep;
  }
  SequenceData sd;
  const auto mm = cone_matrix(cone);
  fill_common(rep, sd, fields, [&](int) { return k; }, p, grid, mm, opt);
  std::vector<double> base;
  for (const auto& [dl, gap] : rep.gap_curve) {
    base.push_back(cone_mass_ratio(k, theta0, cone, dl));
    rep.bound_curve.emplace_back(dl, base.back());
  }
  // c_{n, delta} = gap / (base(delta) |u_n|_S^p); the envelope is their max.
  rep.envelope_constant = 0.0;
  for (std::size_t n = 0; n < sd.gaps.size(); ++n) {
    std::vector<double> row;
    for (std::size_t j = 0; j < base.size(); ++j) {
      const double denom = base[j] * rep.seminorms[n];
      const double c = denom > 0.0 ? sd.gaps[n][j] / denom
                                   : (sd.gaps[n][j] > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
      row.push_back(c);
      rep.envelope_constant = std::max(rep.envelope_constant, c);
    }
    rep.normalized_gaps.push_back(row);
  }
  // Deltas are decreasing: the growth compares the finest against the coarsest.
  double coarse = 0.0, fine = 0.0;
  for (const auto& row : rep.normalized_gaps) {
    coarse = std::max(coarse, row.front());
    fine = std::max(fine, row.back());
  }
  rep.envelope_growth = coarse > 0.0 ? fine / coarse : (fine > 0.0 ? std::numeric_limits<double>::infinity() : 1.0);
  rep.envelope_holds = std::isfinite(rep.envelope_constant) && rep.envelope_growth <= 2.0;
  classify(rep, opt.thresholds);
  rep.note = "cone-certified bound, theta0 = " + std::to_string(theta0);
  return rep;
}

}  // namespace nlspace
