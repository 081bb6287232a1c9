#include <doctest.h>

#include <numbers>
#include <random>

#include "nlspace/kernels.hpp"

using namespace nlspace;
using std::numbers::pi;

namespace {

// Closed form of delta^p / int_{B_delta} |xi|^{-(d+p(s-1))}.
double fractional_ratio_closed_form(int d, double p, double s, double delta) {
  return p * (1.0 - s) * std::pow(delta, p * s) / sphere_area(d);
}

Kernel integrable_quotient(int d, double p) {
  // rho = |xi|^p chi_{B_1}, exact under log-log interpolation.
  return Kernel::tabulate(d, p, [p](double r) { return std::pow(r, p); }, 1e-6, 1.0, 61);
}

}  // namespace

TEST_CASE("eval_kernel worked values") {
  CHECK(Kernel::fractional(1, 2.0, 0.5)(Vec{0.3, 0, 0}) == doctest::Approx(1.0));
  CHECK(Kernel::fractional(1, 2.0, 0.5)(Vec{-7.0, 0, 0}) == doctest::Approx(1.0));
  CHECK(Kernel::indicator(2, 2.0)(Vec{2.0, 0, 0}) == 0.0);
  CHECK(Kernel::fractional(2, 2.0, 0.5)(Vec{0.3, 0.4, 0}) == doctest::Approx(2.0));
  const Kernel lg = Kernel::log(2, 2.0);
  CHECK(lg(Vec{0.5, 0, 0}) == doctest::Approx(-std::log(0.5)));
  CHECK(lg(Vec{1.5, 0, 0}) == 0.0);
}

TEST_CASE("singular kernels reject the origin") {
  CHECK_THROWS_AS(Kernel::fractional(2, 2.0, 0.5)(Vec{0, 0, 0}), DomainError);
  CHECK_THROWS_WITH(Kernel::fractional(2, 2.0, 0.5)(Vec{0, 0, 0}), "kernel singularity");
  CHECK_THROWS_AS(Kernel::log(2, 1.0)(Vec{0, 0, 0}), DomainError);
  CHECK(Kernel::indicator(3, 1.0)(Vec{0, 0, 0}) == 1.0);
  CHECK(Kernel::fractional(1, 2.0, 0.5)(Vec{0, 0, 0}) == 1.0);
}

TEST_CASE("kernel construction validates parameters") {
  CHECK_THROWS_AS(Kernel::fractional(2, 2.0, 1.0), ArgumentError);
  CHECK_THROWS_AS(Kernel::fractional(2, 0.5, 0.5), ArgumentError);
  CHECK_THROWS_AS(Kernel::fractional(4, 2.0, 0.5), CapabilityError);
  CHECK_THROWS_AS(Kernel::custom_radial(1, 1.0, {0.1, 0.05}, {1.0, 1.0}), ArgumentError);
}

TEST_CASE("cone-restricted kernel vanishes off the cap and beyond the unit ball") {
  const Cone cap = Cone::cap(2, {0, 1, 0}, pi / 4);
  const Kernel k = Kernel::cone_restricted(Kernel::fractional(2, 2.0, 0.5), cap);
  CHECK(k(Vec{0.0, 0.5, 0}) == doctest::Approx(2.0));
  CHECK(k(Vec{0.5, 0.0, 0}) == 0.0);
  CHECK(k(Vec{0.0, 1.5, 0}) == 0.0);
  CHECK_FALSE(k.is_radial());
}

TEST_CASE("tabulated kernels interpolate power laws exactly") {
  const Kernel k = integrable_quotient(2, 2.0);
  for (double r : {1e-9, 3e-5, 0.013, 0.5, 0.999}) CHECK(k(Vec{r, 0, 0}) == doctest::Approx(r * r).epsilon(1e-12));
  CHECK(k(Vec{1.01, 0, 0}) == 0.0);
}

TEST_CASE("rho_theta0") {
  const Vec e1{1, 0, 0};
  SUBCASE("equals rho for radial monotone kernels") {
    for (double s : {0.25, 0.5, 0.75}) {
      const Kernel k = Kernel::fractional(2, 2.0, s);
      for (double r : {1e-3, 0.1, 0.7}) CHECK(rho_theta0(k, 0.3, r, e1) == doctest::Approx(k(r * e1)).epsilon(1e-14));
    }
  }
  SUBCASE("indicator with p = 2 attains its infimum at theta = 1") {
    CHECK(rho_theta0(Kernel::indicator(2, 2.0), 0.5, 0.5, e1) == doctest::Approx(1.0));
  }
  SUBCASE("vanishes when the base vanishes on [theta0 r, r]") {
    const Kernel k = Kernel::indicator(2, 2.0, 0.1);
    CHECK(rho_theta0(k, 0.5, 0.5, e1) == 0.0);
  }
  SUBCASE("never exceeds rho on random samples") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0), th(0.05, 0.95), rr(1e-3, 1.5);
    const Cone cap = Cone::cap(2, {1, 1, 0}, pi / 3);
    const std::vector<Kernel> catalog{Kernel::fractional(2, 1.0, 0.3), Kernel::log(2, 2.0),
                                      Kernel::borderline(2, 1.5), Kernel::indicator(2, 2.0, 0.8),
                                      Kernel::cone_restricted(Kernel::fractional(2, 2.0, 0.5), cap),
                                      integrable_quotient(2, 2.0)};
    for (const auto& k : catalog)
      for (int t = 0; t < 200; ++t) {
        const Vec v = normalized({u(rng), u(rng), 0.0});
        const double r = rr(rng);
        CHECK(rho_theta0(k, th(rng), r, v) <= k(r * v) * (1.0 + 1e-14));
      }
  }
  CHECK_THROWS_AS(rho_theta0(Kernel::indicator(1, 1.0), 1.0, 0.5, e1), ArgumentError);
}

TEST_CASE("mass_ratio worked values") {
  CHECK(mass_ratio(Kernel::fractional(2, 2.0, 0.5), 0.1) == doctest::Approx(0.1 / (2 * pi)).epsilon(1e-9));
  CHECK(mass_ratio(Kernel::fractional(2, 2.0, 0.5), 0.1) == doctest::Approx(0.0159155).epsilon(1e-5));
  CHECK(mass_ratio(Kernel::fractional(1, 2.0, 0.5), 0.1) == doctest::Approx(0.05).epsilon(1e-9));
  for (double delta : {1.0, 0.5, 1e-3, 1e-8}) CHECK(mass_ratio(Kernel::borderline(2, 2.0), delta) == doctest::Approx(1.0 / pi).epsilon(1e-9));
  CHECK_THROWS_AS(mass_ratio(Kernel::indicator(2, 1.0).with_inner_cutoff(0.5), 0.1), DegenerateError);
}

TEST_CASE("mass_ratio matches the fractional closed form to 1e-6") {
  for (int d : {1, 2, 3})
    for (double p : {1.0, 1.5, 2.0})
      for (double s : {0.1, 0.25, 0.5, 0.75, 0.9})
        for (double delta : {0.5, 1e-3, 1e-9}) {
          const double got = mass_ratio(Kernel::fractional(d, p, s), delta);
          CHECK(got == doctest::Approx(fractional_ratio_closed_form(d, p, s, delta)).epsilon(1e-6));
        }
}

TEST_CASE("log kernel mass matches its closed form") {
  // int_{B_delta} -|xi|^{p-d} ln|xi| = sigma delta^p (-ln(delta)/p + 1/p^2)
  for (double p : {1.0, 2.0})
    for (double delta : {0.5, 1e-4}) {
      const double expected = 2 * pi * std::pow(delta, p) * (-std::log(delta) / p + 1.0 / (p * p));
      CHECK(ball_mass(Kernel::log(2, p), delta) == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("check_radial_monotone") {
  const std::vector<double> radii{0.05, 0.1, 0.2, 0.4, 0.8};
  for (int d : {1, 2, 3})
    for (double s : {0.25, 0.75}) {
      const auto rep = check_radial_monotone(Kernel::fractional(d, 2.0, s), radii);
      CHECK(rep.verdict == Verdict::satisfied);
      CHECK(rep.fitted_log_slope == doctest::Approx(-(d + 2.0 * s)));
      CHECK(rep.samples.front().first > rep.samples.back().first);
    }
  const Cone cap = Cone::cap(2, {0, 1, 0}, pi / 4);
  CHECK(check_radial_monotone(Kernel::cone_restricted(Kernel::fractional(2, 2.0, 0.5), cap), radii).verdict == Verdict::violated);
  CHECK(check_radial_monotone(Kernel::indicator(1, 1.0), {0.1, 0.25, 0.5, 1.0}).verdict == Verdict::satisfied);
  // |xi|^p chi_{B_1}: r^{-p} rho = 1 is nonincreasing, so still satisfied.
  CHECK(check_radial_monotone(integrable_quotient(2, 2.0), radii).verdict == Verdict::satisfied);
  // |xi|^{2p} chi: r^{-p} rho = r^p increases.
  const Kernel rising = Kernel::tabulate(2, 1.0, [](double r) { return r * r; }, 1e-3, 1.0, 31);
  CHECK(check_radial_monotone(rising, radii).verdict == Verdict::violated);
  CHECK_THROWS_AS(check_radial_monotone(Kernel::indicator(1, 1.0), {}), ArgumentError);
}

TEST_CASE("check_mass_ratio_limit reproduces the trichotomy") {
  const auto deltas = default_deltas();
  for (int d : {1, 2})
    for (double p : {1.0, 2.0})
      for (double s : {0.25, 0.5, 0.75}) {
        const auto rep = check_mass_ratio_limit(Kernel::fractional(d, p, s), deltas);
        CHECK(rep.verdict == Verdict::satisfied);
        CHECK(rep.fitted_log_slope == doctest::Approx(p * s).epsilon(1e-6));
      }
  const auto border = check_mass_ratio_limit(Kernel::borderline(2, 2.0), deltas);
  CHECK(border.verdict == Verdict::inconclusive);
  CHECK(std::abs(border.fitted_log_slope) < 0.05);
  CHECK(border.samples.back().second == doctest::Approx(1.0 / pi).epsilon(1e-9));
  const auto lp = check_mass_ratio_limit(integrable_quotient(2, 2.0), deltas);
  CHECK(lp.verdict == Verdict::violated);
  CHECK_THROWS_AS(check_mass_ratio_limit(Kernel::borderline(2, 2.0), {0.1, 0.05, 0.025}), ArgumentError);
  CHECK_THROWS_AS(check_mass_ratio_limit(Kernel::borderline(2, 2.0), {0.1, 0.05, 0.02, 0.01}), ArgumentError);
}

TEST_CASE("check_cone_condition") {
  const auto deltas = default_deltas();
  SUBCASE("radial admissible kernels satisfy it on the full sphere") {
    const auto rep = check_cone_condition(Kernel::fractional(2, 2.0, 0.5), 0.5, Cone::full_sphere(2), deltas);
    CHECK(rep.verdict == Verdict::satisfied);
    CHECK(rep.fitted_log_slope == doctest::Approx(1.0).epsilon(1e-4));
  }
  SUBCASE("cone-restricted kernels satisfy it on their cap") {
    const Cone cap = Cone::cap(2, {0, 1, 0}, pi / 4);
    const Kernel k = Kernel::cone_restricted(Kernel::fractional(2, 2.0, 0.5), cap);
    const auto rep = check_cone_condition(k, 0.5, cap, deltas);
    CHECK(rep.verdict == Verdict::satisfied);
    // ratio = p(1-s) delta^{ps} with no sphere factor
    CHECK(rep.samples[3].second == doctest::Approx(deltas[3]).epsilon(1e-6));
  }
  SUBCASE("a cone on which rho vanishes is degenerate") {
    const Cone cap = Cone::cap(2, {0, 1, 0}, pi / 4);
    const Kernel k = Kernel::cone_restricted(Kernel::fractional(2, 2.0, 0.5), cap);
    CHECK_THROWS_AS(check_cone_condition(k, 0.5, Cone::cap(2, {0, -1, 0}, pi / 8), deltas), DegenerateError);
  }
  SUBCASE("direction dependence inside the tested cone is a violation") {
    const Cone cap = Cone::cap(2, {0, 1, 0}, pi / 8);
    const Kernel k = Kernel::cone_restricted(Kernel::fractional(2, 2.0, 0.5), cap);
    const auto rep = check_cone_condition(k, 0.5, Cone::cap(2, {0, 1, 0}, pi / 4), deltas);
    CHECK(rep.verdict == Verdict::violated);
  }
}

TEST_CASE("l1_norm") {
  CHECK(l1_norm(Kernel::indicator(2, 2.0, 0.5)) == doctest::Approx(pi * 0.25).epsilon(1e-10));
  CHECK_THROWS_AS(l1_norm(Kernel::fractional(2, 2.0, 0.5)), CapabilityError);
  CHECK(l1_norm(Kernel::fractional(2, 2.0, 0.5, 0.5)) == doctest::Approx(2 * pi * 0.5).epsilon(1e-9));
}
