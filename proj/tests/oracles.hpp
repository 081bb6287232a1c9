#pragma once

// Brute-force reference computations used as test oracles. They share no
// code paths with the library beyond the grid, field and kernel containers.

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "nlspace/nonlocal.hpp"

namespace oracle {

using namespace nlspace;

inline double dense_seminorm(const VectorField& u, const Kernel& k, double p) {
  const Grid& g = u.grid();
  const int d = g.dim();
  long double total = 0.0L;
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (i == j) continue;
      double num = 0.0, r2 = 0.0;
      for (int a = 0; a < d; ++a) {
        const double z = g.node(j)[a] - g.node(i)[a];
        num += (u(j, a) - u(i, a)) * z;
        r2 += z * z;
      }
      Vec z{};
      for (int a = 0; a < d; ++a) z[a] = g.node(j)[a] - g.node(i)[a];
      total += static_cast<long double>(g.weight(i) * g.weight(j) * k(z) * std::pow(std::abs(num / r2), p));
    }
  return static_cast<double>(total);
}

// Zero-extended lattice value by scanning the node list.
inline Vec scan_value(const VectorField& u, int i, int j, int l) {
  const Grid& g = u.grid();
  for (std::size_t n = 0; n < g.size(); ++n) {
    const auto& idx = g.lattice_index(n);
    if (idx[0] == i && idx[1] == j && idx[2] == l) return u.at(n);
  }
  return Vec{};
}

// F_p for a shift of k cells along an axis, as a plain index-shift sum.
inline double index_shift_F(const VectorField& u, int axis, int k, double p) {
  const Grid& g = u.grid();
  const auto& n = g.shape();
  long double total = 0.0L;
  const int pad = std::abs(k) + 1;
  const int d = g.dim();
  for (int i = -pad; i < n[0] + pad; ++i)
    for (int j = d > 1 ? -pad : 0; j < (d > 1 ? n[1] + pad : 1); ++j)
      for (int l = d > 2 ? -pad : 0; l < (d > 2 ? n[2] + pad : 1); ++l) {
        int s[3] = {i, j, l};
        s[axis] += k;
        const Vec a = scan_value(u, i, j, l), b = scan_value(u, s[0], s[1], s[2]);
        const double proj = (b[axis] - a[axis]) * (k > 0 ? 1.0 : -1.0);
        total += static_cast<long double>(g.cell_volume() * std::pow(std::abs(proj), p));
      }
  return static_cast<double>(total);
}

// Bilinear interpolation of the zero extension in 2D, written out longhand.
inline Vec bilinear(const VectorField& u, const Vec& y) {
  const Grid& g = u.grid();
  const double sx = (y[0] - g.origin()[0]) / g.h()[0] - 0.5, sy = (y[1] - g.origin()[1]) / g.h()[1] - 0.5;
  const int i = static_cast<int>(std::floor(sx)), j = static_cast<int>(std::floor(sy));
  const double fx = sx - i, fy = sy - j;
  return (1 - fx) * (1 - fy) * scan_value(u, i, j, 0) + fx * (1 - fy) * scan_value(u, i + 1, j, 0) +
         (1 - fx) * fy * scan_value(u, i, j + 1, 0) + fx * fy * scan_value(u, i + 1, j + 1, 0);
}

inline double dense_F_2d(const VectorField& u, double h, const Vec& v, double p) {
  const Grid& g = u.grid();
  const Vec e = (1.0 / norm(v)) * v;
  const int pad = static_cast<int>(std::ceil(h / g.min_h())) + 2;
  long double total = 0.0L;
  for (int i = -pad; i < g.shape()[0] + pad; ++i)
    for (int j = -pad; j < g.shape()[1] + pad; ++j) {
      const Vec x = g.lattice_point({i, j, 0});
      const Vec diff = bilinear(u, x + h * e) - scan_value(u, i, j, 0);
      total += static_cast<long double>(g.cell_volume() * std::pow(std::abs(dot(diff, e)), p));
    }
  return static_cast<double>(total);
}

// (P^delta * u)(x) = sum_z W(z) u(x + z), looping over all node pairs and
// looking the offset up in the stencil table.
inline std::vector<Vec> dense_mollify(const VectorField& u, const MollifierStencil& st) {
  const Grid& g = u.grid();
  const int d = g.dim();
  std::vector<Vec> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = 0; j < g.size(); ++j) {
      Index z{};
      for (int a = 0; a < 3; ++a) z[a] = g.lattice_index(j)[a] - g.lattice_index(i)[a];
      for (std::size_t s = 0; s < st.offsets.size(); ++s) {
        if (st.offsets[s] != z) continue;
        for (int a = 0; a < d; ++a)
          for (int b = 0; b < d; ++b) out[i][a] += st.weights[s][a][b] * u(j, b);
      }
    }
  return out;
}

// Smallest eigenvalue of |u|_S^2 / int |u|^2 on V, by a route independent of
// the library: the form is polarized from the brute-force seminorm, V is
// spanned by the left singular vectors of the M-orthogonal projector.
inline double lambda_min(const SubspaceSpec& spec, const Kernel& k) {
  const GridPtr& g = spec.grid_ptr();
  const int d = g->dim();
  const auto n = static_cast<Eigen::Index>(g->size()) * d;
  auto unitf = [&](Eigen::Index a, Eigen::Index b) {
    std::vector<double> v(static_cast<std::size_t>(n), 0.0);
    v[static_cast<std::size_t>(a)] += 1.0;
    if (b >= 0) v[static_cast<std::size_t>(b)] += 1.0;
    return VectorField(g, v);
  };
  Eigen::VectorXd diag(n);
  for (Eigen::Index a = 0; a < n; ++a) diag(a) = oracle::dense_seminorm(unitf(a, -1), k, 2.0);
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    K(a, a) = diag(a);
    for (Eigen::Index b = a + 1; b < n; ++b)
      K(a, b) = K(b, a) = 0.5 * (oracle::dense_seminorm(unitf(a, b), k, 2.0) - diag(a) - diag(b));
  }
  Eigen::VectorXd m(n);
  for (Eigen::Index a = 0; a < n; ++a) m(a) = g->weight(static_cast<std::size_t>(a / d));
  const auto& cons = spec.constraints();
  Eigen::MatrixXd W(n, static_cast<Eigen::Index>(cons.size()));
  for (std::size_t c = 0; c < cons.size(); ++c)
    for (Eigen::Index a = 0; a < n; ++a) W(a, static_cast<Eigen::Index>(c)) = cons[c].values()[static_cast<std::size_t>(a)];
  // v = M^{1/2} u; constraint rows (M^{1/2} W)^T v = 0.
  const Eigen::MatrixXd C = m.cwiseSqrt().asDiagonal() * W;
  const Eigen::MatrixXd P = Eigen::MatrixXd::Identity(n, n) - C * (C.transpose() * C).inverse() * C.transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(P, Eigen::ComputeFullU);
  const Eigen::MatrixXd U = svd.matrixU().leftCols(n - C.cols());
  const Eigen::VectorXd is = m.cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd A = U.transpose() * is.asDiagonal() * K * is.asDiagonal() * U;
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(A).eigenvalues()(0);
}

}  // namespace oracle
