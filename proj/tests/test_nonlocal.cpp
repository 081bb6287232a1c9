#include <doctest.h>

#include <numbers>
#include <random>

#include "oracles.hpp"

using namespace nlspace;
using std::numbers::pi;

namespace {

GridPtr unit_box(int d, int n) { return Grid::uniform(Domain::box(d, {0, 0, 0}, {1, d > 1 ? 1.0 : 0.0, d > 2 ? 1.0 : 0.0}), n); }

RigidMotion random_rigid(int d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  RigidMotion::Matrix A{};
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      A[i][j] = u(rng);
      A[j][i] = -A[i][j];
    }
  return RigidMotion(d, A, {u(rng), d > 1 ? u(rng) : 0.0, d > 2 ? u(rng) : 0.0});
}

VectorField random_field(GridPtr g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  std::vector<double> v(g->size() * static_cast<std::size_t>(g->dim()));
  for (double& x : v) x = n(rng);
  return VectorField(g, std::move(v));
}

double max_rel(const Mat& A, const Mat& B, int d) {
  double err = 0.0, scale = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      err = std::max(err, std::abs(A[i][j] - B[i][j]));
      scale = std::max(scale, std::abs(B[i][j]));
    }
  return err / scale;
}

}  // namespace

TEST_CASE("projected_quotient") {
  const auto g = unit_box(2, 6);
  const auto id = VectorField::sample(g, [](const Vec& x) { return x; });
  const auto rot = VectorField::sample(g, [](const Vec& x) { return Vec{-x[1], x[0], 0}; });
  const auto c = VectorField::sample(g, [](const Vec&) { return Vec{3, 4, 0}; });
  for (std::size_t i = 0; i < g->size(); i += 5)
    for (std::size_t j = 0; j < g->size(); j += 3) {
      if (i == j) continue;
      CHECK(projected_quotient(id, i, j) == doctest::Approx(1.0));
      CHECK(std::abs(projected_quotient(rot, i, j)) < 1e-15);
      CHECK(projected_quotient(c, i, j) == 0.0);
    }
  CHECK_THROWS_AS(projected_quotient(id, 3, 3), DomainError);
}

TEST_CASE("seminorm vanishes on rigid motions") {
  std::mt19937_64 rng(17);
  const std::vector<Kernel> kernels{Kernel::fractional(2, 2.0, 0.5), Kernel::indicator(2, 2.0, 0.5),
                                    Kernel::cone_restricted(Kernel::fractional(2, 2.0, 0.3), Cone::cap(2, {0, 1, 0}, pi / 4))};
  const auto g = unit_box(2, 16);
  for (const auto& k : kernels)
    for (int t = 0; t < 20; ++t) CHECK(seminorm(rigid_motion_field(random_rigid(2, rng), g), k, 2.0).value_p <= 1e-12);
  const auto g3 = unit_box(3, 5);
  for (int t = 0; t < 5; ++t)
    CHECK(seminorm(rigid_motion_field(random_rigid(3, rng), g3), Kernel::fractional(3, 1.5, 0.5), 1.5).value_p <= 1e-12);
}

TEST_CASE("seminorm of the identity field") {
  SUBCASE("d = 1 indicator, closed form 1") {
    const auto g = unit_box(1, 2000);
    const auto id = VectorField::sample(g, [](const Vec& x) { return x; });
    const auto r = seminorm(id, Kernel::indicator(1, 2.0, 1.0), 2.0);
    CHECK(r.value_p == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(r.pair_count == 2000u * 1999u);
    CHECK(r.diagonal_exclusion_radius == doctest::Approx(1.0 / 2000));
  }
  SUBCASE("general radial kernel against a pair-sum oracle on 8 nodes") {
    const auto g = Grid::uniform(Domain::box(1, {0, 0, 0}, {2, 0, 0}), 8);
    const auto id = VectorField::sample(g, [](const Vec& x) { return x; });
    const Kernel k = Kernel::fractional(1, 2.0, 0.3);
    double oracle = 0.0;
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j)
        if (i != j) oracle += 0.25 * 0.25 * std::pow(std::abs(i - j) * 0.25, -(1 + 2 * (0.3 - 1)));
    CHECK(seminorm(id, k, 2.0).value_p == doctest::Approx(oracle).epsilon(1e-13));
  }
}

TEST_CASE("seminorm brute-force equivalence") {
  const std::vector<std::pair<GridPtr, Kernel>> cases{
      {unit_box(1, 16), Kernel::fractional(1, 1.5, 0.4)},
      {unit_box(2, 4), Kernel::log(2, 2.0)},
      {unit_box(2, 4), Kernel::cone_restricted(Kernel::fractional(2, 2.0, 0.5), Cone::cap(2, {0, 1, 0}, pi / 4))},
      {Grid::uniform(Domain::ball(2, {0, 0, 0}, 1.0), 5), Kernel::indicator(2, 1.0, 0.7)},
  };
  std::uint64_t seed = 1;
  for (const auto& [g, k] : cases)
    for (double p : {1.0, 1.5, 2.0, 3.0}) {
      const auto u = random_field(g, seed++);
      CHECK(seminorm(u, k, p).value_p == doctest::Approx(oracle::dense_seminorm(u, k, p)).epsilon(1e-12));
    }
}

TEST_CASE("seminorm algebraic properties") {
  const auto g = unit_box(2, 8);
  const Kernel k = Kernel::fractional(2, 1.5, 0.5);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto u = random_field(g, 100 + s), v = random_field(g, 200 + s);
    const double p = 1.0 + 0.25 * static_cast<double>(s);
    const double su = seminorm(u, k, p).value_p, sv = seminorm(v, k, p).value_p;
    const double c = -2.5 + 0.7 * static_cast<double>(s);
    CHECK(seminorm(u.scaled(c), k, p).value_p == doctest::Approx(std::pow(std::abs(c), p) * su).epsilon(1e-10));
    CHECK(std::pow(seminorm(u + v, k, p).value_p, 1 / p) <= std::pow(su, 1 / p) + std::pow(sv, 1 / p) + 1e-10);
  }
}

TEST_CASE("seminorm is independent of the thread count") {
  const auto g = unit_box(2, 16);
  const auto u = random_field(g, 5);
  const Kernel k = Kernel::fractional(2, 2.0, 0.5);
  set_thread_count(1);
  const double a = seminorm(u, k, 2.0).value_p;
  set_thread_count(4);
  const double b = seminorm(u, k, 2.0).value_p;
  set_thread_count(0);
  CHECK(a == b);
}

TEST_CASE("seminorm error estimate") {
  const auto g = unit_box(2, 16);
  const auto f = VectorField::sample(g, [](const Vec& x) { return Vec{std::sin(2 * pi * x[0]), 0, 0}; });
  const auto r = seminorm(f, Kernel::fractional(2, 2.0, 0.5), 2.0, true);
  CHECK(std::isfinite(r.estimated_quadrature_error));
  CHECK(r.estimated_quadrature_error < 0.5 * r.value_p);
  CHECK(std::isnan(seminorm(random_field(g, 1), Kernel::fractional(2, 2.0, 0.5), 2.0, true).estimated_quadrature_error));
  CHECK_FALSE(r.kernel_hash.empty());
  CHECK(r.field_hash == f.hash());
}

TEST_CASE("symgrad_upper_bound_check") {
  const Kernel k = Kernel::indicator(2, 2.0, 0.25);
  SUBCASE("rigid motion") {
    const auto g = unit_box(2, 12);
    RigidMotion::Matrix A{};
    A[0][1] = 2;
    A[1][0] = -2;
    const auto rep = symgrad_upper_bound_check(rigid_motion_field(RigidMotion(2, A, {1, 1, 0}), g), k, 2.0);
    CHECK(rep.lhs < 1e-12);
    CHECK(rep.rhs < 1e-12);
    CHECK(rep.ratio == 0.0);
  }
  SUBCASE("identity") {
    const auto g = unit_box(2, 12);
    const auto rep = symgrad_upper_bound_check(VectorField::sample(g, [](const Vec& x) { return x; }), k, 2.0);
    CHECK(rep.rhs == doctest::Approx(std::sqrt(2.0) * std::sqrt(2.0) * pi / 16).epsilon(1e-6));
    CHECK(rep.lhs > 0.0);
    CHECK(std::isfinite(rep.ratio));
  }
  SUBCASE("sine field ratio is stable under refinement") {
    auto f = [](const Vec& x) { return Vec{std::sin(2 * pi * x[0]), 0, 0}; };
    const double r32 = symgrad_upper_bound_check(VectorField::sample(unit_box(2, 32), f), k, 2.0).ratio;
    const double r64 = symgrad_upper_bound_check(VectorField::sample(unit_box(2, 64), f), k, 2.0).ratio;
    CHECK(std::abs(r32 - r64) < 0.2 * r64);
  }
  CHECK_THROWS_AS(symgrad_upper_bound_check(random_field(unit_box(2, 4), 1), k, 2.0), CapabilityError);
  CHECK_THROWS_AS(
      symgrad_upper_bound_check(VectorField::sample(unit_box(2, 4), [](const Vec& x) { return x; }), Kernel::fractional(2, 2.0, 0.5), 2.0),
      CapabilityError);
}

TEST_CASE("direction_functional_F") {
  SUBCASE("zero field") {
    const auto g = unit_box(2, 8);
    CHECK(direction_functional_F(VectorField::zero(g), 0.3, {1, 1, 0}, 2.0) == 0.0);
  }
  SUBCASE("grid-aligned shifts match the index-shift oracle") {
    const auto g1 = unit_box(1, 16);
    const auto u1 = random_field(g1, 3);
    for (int k : {1, 3, -2})
      CHECK(direction_functional_F(u1, std::abs(k) * g1->h()[0], {k > 0 ? 1.0 : -1.0, 0, 0}, 1.5) ==
            doctest::Approx(oracle::index_shift_F(u1, 0, k, 1.5)).epsilon(1e-12));
    const auto g2 = unit_box(2, 8);
    const auto u2 = random_field(g2, 4);
    CHECK(direction_functional_F(u2, 2 * g2->h()[1], {0, 1, 0}, 2.0) ==
          doctest::Approx(oracle::index_shift_F(u2, 1, 2, 2.0)).epsilon(1e-12));
  }
  SUBCASE("off-grid shifts match a dense bilinear oracle") {
    const auto g = Grid::uniform(Domain::ball(2, {0, 0, 0}, 1.0), 8);
    const auto c = VectorField::sample(g, [](const Vec&) { return Vec{1.0, -0.5, 0}; });
    const auto u = random_field(g, 8);
    for (double h : {0.07, 0.31})
      for (const Vec& v : {Vec{1, 2, 0}, Vec{-0.3, 0.1, 0}}) {
        CHECK(direction_functional_F(c, h, v, 2.0) == doctest::Approx(oracle::dense_F_2d(c, h, v, 2.0)).epsilon(1e-12));
        CHECK(direction_functional_F(u, h, v, 1.3) == doctest::Approx(oracle::dense_F_2d(u, h, v, 1.3)).epsilon(1e-12));
      }
  }
  CHECK_THROWS_AS(direction_functional_F(VectorField::zero(unit_box(1, 4)), 0.0, {1, 0, 0}, 2.0), ArgumentError);
}

TEST_CASE("translation_modulus") {
  const auto g = unit_box(2, 16);
  const auto id = VectorField::sample(g, [](const Vec& x) { return x; });
  CHECK(translation_modulus(id, {0, 0, 0}, 2.0) == 0.0);
  const Vec h{0.05, -0.02, 0};
  const double tau = 0.2;
  const auto w = interior_weights(*g, tau);
  CHECK(translation_modulus(id, h, 2.0, w) == doctest::Approx(norm(h) * std::sqrt(pairwise_sum(w))).epsilon(1e-12));
  // one cell along x_1: compare against node-by-node shifting
  const auto u = random_field(g, 6);
  double oracle = 0.0;
  for (std::size_t i = 0; i < g->size(); ++i) {
    auto idx = g->lattice_index(i);
    idx[0] += 1;
    const long j = g->node_at(idx);
    const Vec shifted = j < 0 ? Vec{} : u.at(static_cast<std::size_t>(j));
    oracle += g->weight(i) * std::pow(norm(shifted - u.at(i)), 1.5);
  }
  CHECK(translation_modulus(u, {g->h()[0], 0, 0}, 1.5) == doctest::Approx(std::pow(oracle, 1 / 1.5)).epsilon(1e-12));
}

TEST_CASE("cone_matrix") {
  SUBCASE("full circle") {
    const auto mm = cone_matrix(Cone::full_sphere(2));
    CHECK(max_rel(mm.Q, Mat{Vec{pi, 0, 0}, Vec{0, pi, 0}, Vec{}}, 2) < 1e-12);
    CHECK(mm.lambda_min == doctest::Approx(pi));
    CHECK(mm.Q_inverse[0][0] == doctest::Approx(1 / pi));
  }
  SUBCASE("full sphere") {
    const auto mm = cone_matrix(Cone::full_sphere(3));
    const double q = 4 * pi / 3;
    CHECK(max_rel(mm.Q, Mat{Vec{q, 0, 0}, Vec{0, q, 0}, Vec{0, 0, q}}, 3) < 1e-3);
  }
  SUBCASE("quarter-aperture cap in 2d against a dense angular sum") {
    const auto mm = cone_matrix(Cone::cap(2, {0, 1, 0}, pi / 4));
    Mat dense{};
    const int n = 1000000;
    const double dt = (pi / 2) / n;
    for (int i = 0; i < n; ++i) {
      const double t = pi / 4 + (i + 0.5) * dt;
      const double c = std::cos(t), s = std::sin(t);
      dense[0][0] += c * c * dt;
      dense[0][1] += c * s * dt;
      dense[1][1] += s * s * dt;
    }
    dense[1][0] = dense[0][1];
    CHECK(max_rel(mm.Q, dense, 2) < 1e-8);
    CHECK(mm.lambda_min == doctest::Approx(pi / 4 - 0.5).epsilon(1e-8));
    CHECK(mm.lambda_min <= mm.sector_constant * (1 + 1e-9));
  }
  SUBCASE("3d cap against the closed form") {
    const double a = pi / 4;
    const auto mm = cone_matrix(Cone::cap(3, {0, 0, 1}, a));
    const double c = std::cos(a);
    const double axial = 2 * pi * (1 - c * c * c) / 3;
    const double trans = pi * (2.0 / 3 - c + c * c * c / 3);
    CHECK(max_rel(mm.Q, Mat{Vec{trans, 0, 0}, Vec{0, trans, 0}, Vec{0, 0, axial}}, 3) < 1e-3);
  }
  SUBCASE("1d") {
    CHECK(cone_matrix(Cone::full_sphere(1)).Q[0][0] == doctest::Approx(2.0));
    CHECK(cone_matrix(Cone::cap(1, {1, 0, 0}, pi / 2)).Q[0][0] == doctest::Approx(1.0));
  }
  CHECK_THROWS_AS(cone_matrix(Cone::cap(2, {0, 1, 0}, 1e-7)), DegenerateError);
}

TEST_CASE("mollifier normalization") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int d : {1, 2, 3})
    for (bool cap : {false, true}) {
      const Cone cone = cap ? Cone::cap(d, unit(d - 1), pi / 4) : Cone::full_sphere(d);
      const auto mm = cone_matrix(cone);
      const auto g = unit_box(d, d == 3 ? 12 : 32);
      for (int ratio : {4, 8}) {
        if (d == 3 && ratio == 8) continue;
        const double delta = ratio * g->max_h();
        const auto st = mollifier_stencil(*g, delta, mm);
        const Mat T = st.total();
        const Mat I{Vec{1, 0, 0}, Vec{0, 1, 0}, Vec{0, 0, 1}};
        CHECK(max_rel(T, I, d) < 1e-3);
        for (int t = 0; t < (d == 3 ? 3 : 10); ++t) {
          const Vec c{u(rng), d > 1 ? u(rng) : 0.0, d > 2 ? u(rng) : 0.0};
          const auto f = VectorField::sample(g, [c](const Vec&) { return c; });
          const auto m = mollify(f, st);
          for (std::size_t i = 0; i < g->size(); ++i) {
            if (g->domain().distance_to_boundary(g->node(i)) <= delta + g->max_h()) continue;
            CHECK(norm(m.at(i) - c) <= 1e-3 * norm(c));
          }
        }
      }
    }
}

TEST_CASE("full-sphere mollifier reproduces linear fields") {
  const auto g = unit_box(2, 32);
  const auto mm = cone_matrix(Cone::full_sphere(2));
  const auto id = VectorField::sample(g, [](const Vec& x) { return x; });
  const double delta = 4 * g->max_h();
  const auto m = mollify(id, delta, mm);
  for (std::size_t i = 0; i < g->size(); ++i) {
    if (g->domain().distance_to_boundary(g->node(i)) <= delta + g->max_h()) continue;
    CHECK(norm(m.at(i) - g->node(i)) < 1e-9);
  }
  CHECK_THROWS_AS(mollify(id, g->max_h(), mm), ResolutionError);
}

TEST_CASE("mollify brute-force equivalence") {
  const auto g1 = unit_box(1, 16);
  const auto u1 = random_field(g1, 31);
  const auto st1 = mollifier_stencil(*g1, 3 * g1->max_h(), cone_matrix(Cone::cap(1, {1, 0, 0}, pi / 2)));
  const auto m1 = mollify(u1, st1);
  const auto o1 = oracle::dense_mollify(u1, st1);
  for (std::size_t i = 0; i < g1->size(); ++i) CHECK(m1(i, 0) == doctest::Approx(o1[i][0]).epsilon(1e-12));

  const auto g2 = unit_box(2, 8);
  const auto u2 = random_field(g2, 32);
  const auto st2 = mollifier_stencil(*g2, 0.3, cone_matrix(Cone::cap(2, normalized({1, 1, 0}), pi / 3)));
  const auto m2 = mollify(u2, st2);
  const auto o2 = oracle::dense_mollify(u2, st2);
  for (std::size_t i = 0; i < g2->size(); ++i)
    for (int a = 0; a < 2; ++a) CHECK(m2(i, a) == doctest::Approx(o2[i][a]).epsilon(1e-12));
}

TEST_CASE("smoothing_gap") {
  const auto mm = cone_matrix(Cone::full_sphere(2));
  SUBCASE("zero field") { CHECK(smoothing_gap(VectorField::zero(unit_box(2, 16)), 0.25, mm, 2.0) == 0.0); }
  SUBCASE("dense convolution oracle on a 16^2 grid") {
    const auto g = unit_box(2, 16);
    const auto u = make_sequence({.kind = SequenceKind::oscillatory, .frequency = 1.0}, g, 2);
    const auto st = mollifier_stencil(*g, 0.25, mm);
    const int pad = 5;
    double oracle = 0.0;
    for (int i = -pad; i < 16 + pad; ++i)
      for (int j = -pad; j < 16 + pad; ++j) {
        Vec conv{};
        for (std::size_t s = 0; s < st.offsets.size(); ++s) {
          const Vec v = oracle::scan_value(u, i + st.offsets[s][0], j + st.offsets[s][1], 0);
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) conv[a] += st.weights[s][a][b] * v[b];
        }
        oracle += g->cell_volume() * std::pow(norm(oracle::scan_value(u, i, j, 0) - conv), 2.0);
      }
    CHECK(smoothing_gap(u, st, 2.0) == doctest::Approx(oracle).epsilon(1e-12));
  }
  SUBCASE("oscillation raises the gap at fixed delta") {
    const auto g = unit_box(2, 32);
    double prev = 0.0;
    for (int n : {1, 2, 4}) {
      const double gap = smoothing_gap(make_sequence({.kind = SequenceKind::oscillatory}, g, n), 0.125, mm, 2.0);
      CHECK(gap > prev);
      prev = gap;
    }
  }
  SUBCASE("cut-off rigid motion: small and decreasing in delta") {
    const auto g = Grid::uniform(Domain::box(2, {-2, -2, 0}, {2, 2, 0}), 64);
    const auto u = VectorField::sample(g, [](const Vec& x) {
      const double r2 = dot(x, x);
      const double cut = r2 < 1 ? std::pow(1 - r2, 3) : 0.0;
      return cut * Vec{-x[1] + 0.5, x[0], 0};
    });
    const double big = smoothing_gap(u, 0.5, mm, 2.0), small = smoothing_gap(u, 0.25, mm, 2.0);
    CHECK(small < big);
    CHECK(small < 0.05 * u.lp_norm_p(2.0));
  }
  CHECK_THROWS_AS(smoothing_gap(VectorField::zero(unit_box(2, 8)), 0.1, mm, 2.0), ResolutionError);
}

TEST_CASE("resolvable_deltas") {
  const auto d = resolvable_deltas(*unit_box(2, 32));
  CHECK(d.front() == 1.0);
  CHECK(d.back() == 1.0 / 16);
  CHECK(d.size() == 5);
}

TEST_CASE("est_for_F ratio stays bounded under delta halving") {
  const auto g = Grid::uniform(Domain::box(2, {-1, -1, 0}, {1, 1, 0}), 32);
  const auto u = VectorField::sample(g, [](const Vec& x) {
    const double r2 = dot(x, x) / 0.49;
    const double b = r2 < 1 ? (1 - r2) * (1 - r2) : 0.0;
    return b * Vec{std::cos(3 * x[1]), std::sin(2 * x[0]) + 0.3, 0};
  });
  const Kernel k = Kernel::fractional(2, 2.0, 0.5);
  const Cone full = Cone::full_sphere(2);
  std::vector<double> maxima;
  for (double delta : {0.5, 0.25, 0.125}) {
    double m = 0.0;
    for (double frac : {0.25, 0.5, 0.75})
      for (const Vec& v : {Vec{1, 0, 0}, Vec{0.6, 0.8, 0}}) m = std::max(m, est_for_F_ratio(u, k, 0.5, full, delta, frac * delta, v, 2.0));
    CHECK(std::isfinite(m));
    maxima.push_back(m);
  }
  for (std::size_t i = 1; i < maxima.size(); ++i) CHECK(maxima[i] <= 2.0 * maxima[0]);
  CHECK_THROWS_AS(est_for_F_ratio(u, k, 0.5, full, 0.25, 0.3, {1, 0, 0}, 2.0), ArgumentError);
}
