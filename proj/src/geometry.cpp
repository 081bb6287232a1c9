#include "nlspace/geometry.hpp"

#include <algorithm>
#include <limits>
#include <random>

namespace nlspace {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kGoldenAngle = 2.399963229728653;  // pi (3 - sqrt 5)

Vec cross(const Vec& a, const Vec& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

void require_trailing_zero(int d, const Vec& v, const char* what) {
  for (int i = d; i < kMaxDim; ++i)
    if (v[static_cast<std::size_t>(i)] != 0.0)
      throw ArgumentError(std::string(what) + " has nonzero components beyond dimension " +
                          std::to_string(d));
}

double segment_distance(const Vec& p, const Vec& a, const Vec& b) {
  const Vec ab = b - a;
  const double len2 = dot(ab, ab);
  double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return norm(p - (a + t * ab));
}

// Closest point on triangle abc to p (Ericson, Real-Time Collision Detection 5.1.5).
Vec closest_on_triangle(const Vec& p, const Vec& a, const Vec& b, const Vec& c) {
  const Vec ab = b - a, ac = c - a, ap = p - a;
  const double d1 = dot(ab, ap), d2 = dot(ac, ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;
  const Vec bp = p - b;
  const double d3 = dot(ab, bp), d4 = dot(ac, bp);
  if (d3 >= 0.0 && d4 <= d3) return b;
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;
  const Vec cp = p - c;
  const double d5 = dot(ab, cp), d6 = dot(ac, cp);
  if (d6 >= 0.0 && d5 <= d6) return c;
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  const double denom = 1.0 / (va + vb + vc);
  return a + (vb * denom) * ab + (vc * denom) * ac;
}

}  // namespace

// ---------------------------------------------------------------------------
// Cone

Cone Cone::full_sphere(int d) {
  require_dim(d);
  return Cone(d, unit(d - 1), kPi, true);
}

Cone Cone::cap(int d, const Vec& axis, double aperture) {
  require_dim(d);
  require_trailing_zero(d, axis, "cone axis");
  if (!(aperture > 0.0) || aperture > kPi / 2 + 1e-15)
    throw ArgumentError("cone aperture must lie in (0, pi/2]");
  return Cone(d, normalized(axis), std::min(aperture, kPi / 2), false);
}

bool Cone::contains(const Vec& z) const {
  const double nz = norm(z);
  if (!(nz > 0.0)) throw DomainError("cone membership of the zero vector");
  if (full_) return true;
  return dot(z, axis_) / nz >= std::cos(aperture_) - 1e-12;
}

double Cone::area() const {
  if (full_) return sphere_area(d_);
  switch (d_) {
    case 1: return 1.0;
    case 2: return 2.0 * aperture_;
    default: return 2.0 * kPi * (1.0 - std::cos(aperture_));
  }
}

std::array<Vec, 3> frame_around(const Vec& axis) {
  const Vec a = normalized(axis);
  // Prefer a helper inside the plane of a when a is a 2-D vector so that the
  // first tangent also stays in that plane.
  Vec t1;
  if (a[2] == 0.0) {
    t1 = {-a[1], a[0], 0.0};
  } else {
    const Vec helper = std::abs(a[0]) < 0.9 ? unit(0) : unit(1);
    t1 = normalized(cross(helper, a));
  }
  const Vec t2 = cross(a, t1);
  return {t1, t2, a};
}

std::vector<SpherePoint> sphere_quadrature(const Cone& cone, int n_points) {
  if (n_points < 8) throw ArgumentError("sphere quadrature needs at least 8 points");
  const int d = cone.dim();
  std::vector<SpherePoint> pts;
  if (d == 1) {
    if (cone.is_full_sphere()) {
      pts.push_back({unit(0), 1.0});
      pts.push_back({-1.0 * unit(0), 1.0});
    } else {
      pts.push_back({cone.axis(), 1.0});
    }
    return pts;
  }
  const auto frame = frame_around(cone.axis());
  const double a = cone.is_full_sphere() ? kPi : cone.aperture();
  const double w = cone.area() / n_points;
  pts.reserve(static_cast<std::size_t>(n_points));
  if (d == 2) {
    for (int k = 0; k < n_points; ++k) {
      const double phi = -a + (k + 0.5) * (2.0 * a / n_points);
      pts.push_back({std::cos(phi) * frame[2] + std::sin(phi) * frame[0], w});
    }
    return pts;
  }
  const double span = 1.0 - std::cos(a);
  for (int k = 0; k < n_points; ++k) {
    const double ct = 1.0 - span * (k + 0.5) / n_points;
    const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
    const double phi = k * kGoldenAngle;
    const Vec v = (st * std::cos(phi)) * frame[0] + (st * std::sin(phi)) * frame[1] + ct * frame[2];
    pts.push_back({v, w});
  }
  return pts;
}

double sector_min_constant(const Cone& cone, double p, int n_probe) {
  if (!(p > 0.0)) throw ArgumentError("sector_min_constant requires p > 0");
  const int d = cone.dim();
  const auto quad = sphere_quadrature(cone, d == 3 ? 8192 : 4096);
  const auto probes = sphere_quadrature(Cone::full_sphere(d), std::max(8, n_probe));
  double best = std::numeric_limits<double>::infinity();
  for (const auto& w : probes) {
    double s = 0.0;
    for (const auto& q : quad) s += q.weight * std::pow(std::abs(dot(w.direction, q.direction)), p);
    best = std::min(best, s);
  }
  return best;
}

// ---------------------------------------------------------------------------
// GraphFunction

GraphFunction GraphFunction::on_line(double lo, double step, std::vector<double> values) {
  if (values.size() < 2 || !(step > 0.0)) throw ArgumentError("graph table needs >= 2 points and step > 0");
  GraphFunction g;
  g.k_ = 1;
  g.lo_ = {lo, 0.0};
  g.step_ = {step, 1.0};
  g.n_ = {static_cast<int>(values.size()), 1};
  g.values_ = std::move(values);
  return g;
}

GraphFunction GraphFunction::on_plane(std::array<double, 2> lo, std::array<double, 2> step,
                                      std::array<int, 2> n, std::vector<double> values) {
  if (n[0] < 2 || n[1] < 2 || !(step[0] > 0.0) || !(step[1] > 0.0) ||
      values.size() != static_cast<std::size_t>(n[0]) * static_cast<std::size_t>(n[1]))
    throw ArgumentError("malformed planar graph table");
  GraphFunction g;
  g.k_ = 2;
  g.lo_ = lo;
  g.step_ = step;
  g.n_ = n;
  g.values_ = std::move(values);
  return g;
}

GraphFunction GraphFunction::sample(int d, double half_width, int n,
                                    const std::function<double(const Vec&)>& f) {
  if (d != 2 && d != 3) throw CapabilityError("graph patches exist for d = 2, 3");
  const double step = 2.0 * half_width / (n - 1);
  if (d == 2) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = f({-half_width + i * step, 0.0, 0.0});
    return on_line(-half_width, step, std::move(v));
  }
  std::vector<double> v(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      v[static_cast<std::size_t>(i * n + j)] = f({-half_width + i * step, -half_width + j * step, 0.0});
  return on_plane({-half_width, -half_width}, {step, step}, {n, n}, std::move(v));
}

Vec GraphFunction::vertex(int i, int j) const {
  if (k_ == 1) return {lo_[0] + i * step_[0], values_[static_cast<std::size_t>(i)], 0.0};
  return {lo_[0] + i * step_[0], lo_[1] + j * step_[1],
          values_[static_cast<std::size_t>(i * n_[1] + j)]};
}

double GraphFunction::operator()(const Vec& xp) const {
  auto locate = [&](int axis, double x, int& cell, double& frac) {
    const double t = (x - lo_[static_cast<std::size_t>(axis)]) / step_[static_cast<std::size_t>(axis)];
    cell = std::clamp(static_cast<int>(std::floor(t)), 0, n_[static_cast<std::size_t>(axis)] - 2);
    frac = t - cell;
  };
  int i = 0;
  double s = 0.0;
  locate(0, xp[0], i, s);
  if (k_ == 1) {
    const double v0 = values_[static_cast<std::size_t>(i)], v1 = values_[static_cast<std::size_t>(i + 1)];
    return v0 + s * (v1 - v0);
  }
  int j = 0;
  double t = 0.0;
  locate(1, xp[1], j, t);
  auto at = [&](int a, int b) { return values_[static_cast<std::size_t>(a * n_[1] + b)]; };
  const double v00 = at(i, j), v10 = at(i + 1, j), v01 = at(i, j + 1), v11 = at(i + 1, j + 1);
  if (s + t <= 1.0) return v00 + s * (v10 - v00) + t * (v01 - v00);
  return v11 + (1.0 - s) * (v01 - v11) + (1.0 - t) * (v10 - v11);
}

double GraphFunction::lipschitz_estimate() const {
  double L = 0.0;
  if (k_ == 1) {
    for (std::size_t i = 0; i + 1 < values_.size(); ++i)
      L = std::max(L, std::abs(values_[i + 1] - values_[i]) / step_[0]);
    return L;
  }
  auto at = [&](int a, int b) { return values_[static_cast<std::size_t>(a * n_[1] + b)]; };
  for (int i = 0; i + 1 < n_[0]; ++i)
    for (int j = 0; j + 1 < n_[1]; ++j) {
      const double g0 = (at(i + 1, j) - at(i, j)) / step_[0], g1 = (at(i, j + 1) - at(i, j)) / step_[1];
      const double h0 = (at(i + 1, j + 1) - at(i, j + 1)) / step_[0];
      const double h1 = (at(i + 1, j + 1) - at(i + 1, j)) / step_[1];
      L = std::max({L, std::hypot(g0, g1), std::hypot(h0, h1)});
    }
  return L;
}

bool GraphFunction::covers(double w) const {
  for (int a = 0; a < k_; ++a) {
    const auto ax = static_cast<std::size_t>(a);
    if (lo_[ax] > -w + 1e-12 || lo_[ax] + (n_[ax] - 1) * step_[ax] < w - 1e-12) return false;
  }
  return true;
}

double GraphFunction::distance_to_graph(const Vec& x) const {
  double best = std::numeric_limits<double>::infinity();
  if (k_ == 1) {
    for (int i = 0; i + 1 < n_[0]; ++i) {
      const double x0 = lo_[0] + i * step_[0];
      const double gap = std::max({0.0, x0 - x[0], x[0] - (x0 + step_[0])});
      if (gap >= best) continue;
      const Vec p{x[0], x[1], 0.0};
      best = std::min(best, segment_distance(p, vertex(i, 0), vertex(i + 1, 0)));
    }
    return best;
  }
  for (int i = 0; i + 1 < n_[0]; ++i) {
    const double x0 = lo_[0] + i * step_[0];
    const double g0 = std::max({0.0, x0 - x[0], x[0] - (x0 + step_[0])});
    if (g0 >= best) continue;
    for (int j = 0; j + 1 < n_[1]; ++j) {
      const double y0 = lo_[1] + j * step_[1];
      const double g1 = std::max({0.0, y0 - x[1], x[1] - (y0 + step_[1])});
      if (std::hypot(g0, g1) >= best) continue;
      const Vec a = vertex(i, j), b = vertex(i + 1, j), c = vertex(i, j + 1), e = vertex(i + 1, j + 1);
      best = std::min(best, norm(x - closest_on_triangle(x, a, b, c)));
      best = std::min(best, norm(x - closest_on_triangle(x, e, c, b)));
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Domain

Domain Domain::box(int d, const Vec& lo, const Vec& hi) {
  require_dim(d);
  require_trailing_zero(d, lo, "box lower corner");
  require_trailing_zero(d, hi, "box upper corner");
  for (int i = 0; i < d; ++i)
    if (!(lo[static_cast<std::size_t>(i)] < hi[static_cast<std::size_t>(i)]))
      throw ArgumentError("box requires lo < hi on every axis");
  Domain dom;
  dom.shape_ = Shape::box;
  dom.d_ = d;
  dom.a_ = lo;
  dom.b_ = hi;
  return dom;
}

Domain Domain::ball(int d, const Vec& center, double radius) {
  require_dim(d);
  require_trailing_zero(d, center, "ball centre");
  if (!(radius > 0.0)) throw ArgumentError("ball radius must be positive");
  Domain dom;
  dom.shape_ = Shape::ball;
  dom.d_ = d;
  dom.a_ = center;
  dom.radius_ = radius;
  return dom;
}

Domain Domain::graph_patch(GraphFunction zeta, double window_radius) {
  const int d = zeta.domain_dim() + 1;
  if (!(window_radius > 0.0)) throw ArgumentError("graph patch window radius must be positive");
  if (!zeta.covers(window_radius)) throw ArgumentError("graph table does not cover the window");
  if (std::abs(zeta(Vec{0.0, 0.0, 0.0})) > 1e-12) throw ArgumentError("graph patch requires zeta(0) = 0");
  const double L = zeta.lipschitz_estimate();
  if (L > 0.5 + 1e-12)
    throw ArgumentError("graph Lipschitz constant " + std::to_string(L) + " exceeds 1/2");
  Domain dom;
  dom.shape_ = Shape::graph_patch;
  dom.d_ = d;
  dom.radius_ = window_radius;
  dom.zeta_ = std::make_shared<const GraphFunction>(std::move(zeta));
  return dom;
}

bool Domain::contains(const Vec& x) const {
  switch (shape_) {
    case Shape::box:
      for (int i = 0; i < d_; ++i) {
        const auto a = static_cast<std::size_t>(i);
        if (!(x[a] > a_[a] && x[a] < b_[a])) return false;
      }
      return true;
    case Shape::ball: return norm(x - a_) < radius_;
    case Shape::graph_patch: {
      if (!(norm(x) < radius_)) return false;
      const auto last = static_cast<std::size_t>(d_ - 1);
      Vec xp = x;
      xp[last] = 0.0;
      return x[last] > (*zeta_)(xp);
    }
  }
  return false;
}

double Domain::distance_to_boundary(const Vec& x) const {
  if (!contains(x)) throw DomainError("point is not in the domain");
  switch (shape_) {
    case Shape::box: {
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < d_; ++i) {
        const auto a = static_cast<std::size_t>(i);
        best = std::min({best, x[a] - a_[a], b_[a] - x[a]});
      }
      return best;
    }
    case Shape::ball: return radius_ - norm(x - a_);
    case Shape::graph_patch: {
      // The window sphere and the whole tabulated graph bound the true
      // boundary distance from both sides, so their minimum is exact.
      return std::min(zeta_->distance_to_graph(x), radius_ - norm(x));
    }
  }
  return 0.0;
}

std::pair<Vec, Vec> Domain::bounding_box() const {
  switch (shape_) {
    case Shape::box: return {a_, b_};
    case Shape::ball: {
      Vec lo{}, hi{};
      for (int i = 0; i < d_; ++i) {
        const auto a = static_cast<std::size_t>(i);
        lo[a] = a_[a] - radius_;
        hi[a] = a_[a] + radius_;
      }
      return {lo, hi};
    }
    case Shape::graph_patch: {
      Vec lo{}, hi{};
      for (int i = 0; i < d_ - 1; ++i) {
        lo[static_cast<std::size_t>(i)] = -radius_;
        hi[static_cast<std::size_t>(i)] = radius_;
      }
      lo[static_cast<std::size_t>(d_ - 1)] = -0.5 * radius_;
      hi[static_cast<std::size_t>(d_ - 1)] = radius_;
      return {lo, hi};
    }
  }
  return {};
}

double Domain::inradius() const {
  switch (shape_) {
    case Shape::box: {
      double r = std::numeric_limits<double>::infinity();
      for (int i = 0; i < d_; ++i) r = std::min(r, 0.5 * (b_[static_cast<std::size_t>(i)] - a_[static_cast<std::size_t>(i)]));
      return r;
    }
    case Shape::ball: return radius_;
    case Shape::graph_patch: {
      const auto g = Grid::uniform(*this, d_ == 2 ? 96 : 32);
      double r = 0.0;
      for (std::size_t i = 0; i < g->size(); ++i) r = std::max(r, distance_to_boundary(g->node(i)));
      return r;
    }
  }
  return 0.0;
}

double Domain::volume() const {
  switch (shape_) {
    case Shape::box: {
      double v = 1.0;
      for (int i = 0; i < d_; ++i) v *= b_[static_cast<std::size_t>(i)] - a_[static_cast<std::size_t>(i)];
      return v;
    }
    case Shape::ball: return ball_volume(d_) * std::pow(radius_, d_);
    case Shape::graph_patch: {
      const auto g = Grid::uniform(*this, d_ == 2 ? 256 : 64);
      return pairwise_sum(g->weights());
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Inclusion check

InclusionReport verify_graph_inclusion(const Domain& patch, double r, std::size_t samples,
                                       std::uint64_t seed) {
  if (patch.shape() != Domain::Shape::graph_patch)
    throw ArgumentError("inclusion check applies to graph patches only");
  const double r0 = patch.window_radius() / 4.0;
  if (!(r > 0.0) || r > r0 * (1.0 + 1e-12)) throw ArgumentError("inclusion radius must lie in (0, r0]");
  const int d = patch.dim();
  const auto last = static_cast<std::size_t>(d - 1);
  const auto& zeta = patch.zeta();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  auto random_in_ball = [&](double radius) {
    for (;;) {
      Vec v{};
      for (int i = 0; i < d; ++i) v[static_cast<std::size_t>(i)] = unif(rng);
      if (norm(v) < 1.0) return radius * v;
    }
  };
  InclusionReport rep;
  rep.r = r;
  constexpr std::size_t kMaxKept = 20;

  // Omega cap B_{r/2} subset Gamma_r + (Sigma cap B_r), witnessed by
  // x = (x', zeta(x')) + (0', x_d - zeta(x')).
  for (std::size_t attempts = 0; rep.lower_samples < samples && attempts < 50 * samples; ++attempts) {
    const Vec x = random_in_ball(0.5 * r);
    if (!patch.contains(x)) continue;
    ++rep.lower_samples;
    Vec xp = x;
    xp[last] = 0.0;
    const double height = x[last] - zeta(xp);
    const bool ok = norm(xp) < r && height >= 0.0 && height < r;
    if (!ok && rep.lower_counterexamples.size() < kMaxKept) rep.lower_counterexamples.push_back(x);
  }

  // Gamma_r + (Sigma cap B_r) subset Omega cap B_{3r}.
  for (; rep.upper_samples < samples; ++rep.upper_samples) {
    Vec base{};
    for (;;) {
      Vec v{};
      for (int i = 0; i < d - 1; ++i) v[static_cast<std::size_t>(i)] = unif(rng);
      if (norm(v) < 1.0) {
        base = r * v;
        break;
      }
    }
    base[last] = zeta(base);
    Vec z{};
    for (;;) {
      z = random_in_ball(r);
      z[last] = std::abs(z[last]);
      Vec zp = z;
      zp[last] = 0.0;
      if (norm(zp) <= z[last] && z[last] > 0.0) break;
    }
    const Vec x = base + z;
    const bool ok = patch.contains(x) && norm(x) < 3.0 * r;
    if (!ok && rep.upper_counterexamples.size() < kMaxKept) rep.upper_counterexamples.push_back(x);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Grid

Grid::Grid(const Domain& domain, const Index& shape) : domain_(domain), shape_(shape) {
  const int d = domain.dim();
  const auto [lo, hi] = domain.bounding_box();
  origin_ = lo;
  for (int i = 0; i < kMaxDim; ++i) {
    const auto a = static_cast<std::size_t>(i);
    if (i < d) {
      if (shape_[a] < 1) throw ArgumentError("grid needs at least one cell per axis");
      h_[a] = (hi[a] - lo[a]) / shape_[a];
    } else {
      shape_[a] = 1;
      h_[a] = 1.0;
      origin_[a] = 0.0;
    }
  }
  const double vol = cell_volume();
  const std::size_t total = static_cast<std::size_t>(shape_[0]) * static_cast<std::size_t>(shape_[1]) *
                            static_cast<std::size_t>(shape_[2]);
  lookup_.assign(total, -1);
  constexpr int kSub = 4;
  const double half_diag = 0.5 * std::sqrt(h_[0] * h_[0] * (d > 0) + h_[1] * h_[1] * (d > 1) + h_[2] * h_[2] * (d > 2));
  std::size_t flat = 0;
  for (int i = 0; i < shape_[0]; ++i)
    for (int j = 0; j < shape_[1]; ++j)
      for (int k = 0; k < shape_[2]; ++k, ++flat) {
        const Index idx{i, j, k};
        const Vec c = lattice_point(idx);
        if (!domain.contains(c)) continue;
        double w = vol;
        if (domain.shape() != Domain::Shape::box && domain.distance_to_boundary(c) < half_diag) {
          int inside = 0, count = 0;
          const int sj = d > 1 ? kSub : 1, sk = d > 2 ? kSub : 1;
          for (int a = 0; a < kSub; ++a)
            for (int b = 0; b < sj; ++b)
              for (int e = 0; e < sk; ++e, ++count) {
                Vec q = c;
                q[0] += ((a + 0.5) / kSub - 0.5) * h_[0];
                if (d > 1) q[1] += ((b + 0.5) / kSub - 0.5) * h_[1];
                if (d > 2) q[2] += ((e + 0.5) / kSub - 0.5) * h_[2];
                inside += domain.contains(q);
              }
          w = vol * inside / count;
        }
        lookup_[flat] = static_cast<long>(nodes_.size());
        nodes_.push_back(c);
        weights_.push_back(w);
        index_.push_back(idx);
      }
}

std::shared_ptr<const Grid> Grid::uniform(const Domain& domain, int n_per_axis) {
  if (n_per_axis < 1) throw ArgumentError("n_per_axis must be positive");
  Index shape{1, 1, 1};
  for (int i = 0; i < domain.dim(); ++i) shape[static_cast<std::size_t>(i)] = n_per_axis;
  return std::shared_ptr<const Grid>(new Grid(domain, shape));
}

std::shared_ptr<const Grid> Grid::with_spacing(const Domain& domain, double h) {
  if (!(h > 0.0)) throw ArgumentError("grid spacing must be positive");
  const auto [lo, hi] = domain.bounding_box();
  Index shape{1, 1, 1};
  for (int i = 0; i < domain.dim(); ++i) {
    const auto a = static_cast<std::size_t>(i);
    shape[a] = std::max(1, static_cast<int>(std::lround((hi[a] - lo[a]) / h)));
  }
  return std::shared_ptr<const Grid>(new Grid(domain, shape));
}

double Grid::max_h() const {
  double m = 0.0;
  for (int i = 0; i < dim(); ++i) m = std::max(m, h_[static_cast<std::size_t>(i)]);
  return m;
}

double Grid::min_h() const {
  double m = std::numeric_limits<double>::infinity();
  for (int i = 0; i < dim(); ++i) m = std::min(m, h_[static_cast<std::size_t>(i)]);
  return m;
}

double Grid::cell_volume() const {
  double v = 1.0;
  for (int i = 0; i < dim(); ++i) v *= h_[static_cast<std::size_t>(i)];
  return v;
}

Vec Grid::lattice_point(const Index& idx) const {
  Vec p{};
  for (int i = 0; i < dim(); ++i) {
    const auto a = static_cast<std::size_t>(i);
    p[a] = origin_[a] + (idx[a] + 0.5) * h_[a];
  }
  return p;
}

long Grid::node_at(const Index& idx) const {
  for (int i = 0; i < kMaxDim; ++i) {
    const auto a = static_cast<std::size_t>(i);
    if (idx[a] < 0 || idx[a] >= shape_[a]) return -1;
  }
  const std::size_t flat = (static_cast<std::size_t>(idx[0]) * static_cast<std::size_t>(shape_[1]) +
                            static_cast<std::size_t>(idx[1])) * static_cast<std::size_t>(shape_[2]) +
                           static_cast<std::size_t>(idx[2]);
  return lookup_[flat];
}

std::shared_ptr<const Grid> Grid::coarsened() const {
  Index shape = shape_;
  for (int i = 0; i < dim(); ++i) {
    auto& s = shape[static_cast<std::size_t>(i)];
    if (s < 2) throw ResolutionError("grid too coarse to halve");
    s /= 2;
  }
  return std::shared_ptr<const Grid>(new Grid(domain_, shape));
}

std::uint64_t Grid::digest() const {
  Hasher h;
  h.value(static_cast<std::int64_t>(domain_.shape())).value(static_cast<std::int64_t>(dim()));
  for (int i = 0; i < kMaxDim; ++i) {
    const auto a = static_cast<std::size_t>(i);
    h.value(static_cast<std::int64_t>(shape_[a])).value(origin_[a]).value(h_[a]);
  }
  for (double w : weights_) h.value(w);
  return h.digest();
}

// ---------------------------------------------------------------------------

std::vector<char> interior_subset(const Grid& grid, double tau) {
  if (!(tau >= 0.0)) throw ArgumentError("tau must be nonnegative");
  std::vector<char> mask(grid.size(), 1);
  if (tau == 0.0) return mask;
  const auto& dom = grid.domain();
  for (std::size_t i = 0; i < grid.size(); ++i) mask[i] = dom.distance_to_boundary(grid.node(i)) > tau;
  return mask;
}

std::vector<double> interior_weights(const Grid& grid, double tau) {
  if (!(tau >= 0.0)) throw ArgumentError("tau must be nonnegative");
  if (tau == 0.0) return grid.weights();
  const auto& dom = grid.domain();
  const int d = grid.dim();
  const Vec& h = grid.h();
  std::vector<double> w(grid.size(), 0.0);
  if (dom.shape() == Domain::Shape::box) {
    for (std::size_t n = 0; n < grid.size(); ++n) {
      double frac = 1.0;
      for (int i = 0; i < d; ++i) {
        const auto a = static_cast<std::size_t>(i);
        const double c = grid.node(n)[a];
        const double lo = std::max(c - 0.5 * h[a], dom.lo()[a] + tau);
        const double hi = std::min(c + 0.5 * h[a], dom.hi()[a] - tau);
        frac *= std::max(0.0, hi - lo) / h[a];
      }
      w[n] = grid.weight(n) * frac;
    }
    return w;
  }
  constexpr int kSub = 8;
  const double half_diag = 0.5 * norm(Vec{h[0], d > 1 ? h[1] : 0.0, d > 2 ? h[2] : 0.0});
  for (std::size_t n = 0; n < grid.size(); ++n) {
    const Vec c = grid.node(n);
    const double dist = dom.distance_to_boundary(c);
    if (dist - half_diag > tau) {
      w[n] = grid.weight(n);
      continue;
    }
    if (dist + half_diag <= tau) continue;
    int inside = 0, count = 0;
    const int sj = d > 1 ? kSub : 1, sk = d > 2 ? kSub : 1;
    for (int a = 0; a < kSub; ++a)
      for (int b = 0; b < sj; ++b)
        for (int e = 0; e < sk; ++e, ++count) {
          Vec q = c;
          q[0] += ((a + 0.5) / kSub - 0.5) * h[0];
          if (d > 1) q[1] += ((b + 0.5) / kSub - 0.5) * h[1];
          if (d > 2) q[2] += ((e + 0.5) / kSub - 0.5) * h[2];
          inside += dom.contains(q) && dom.distance_to_boundary(q) > tau;
        }
    w[n] = grid.cell_volume() * inside / count;
  }
  return w;
}

std::vector<Index> ball_sector(const Cone& cone, const Grid& grid, double delta) {
  if (!(delta > 0.0)) throw ArgumentError("sector radius must be positive");
  const int d = grid.dim();
  const Vec& h = grid.h();
  Index m{0, 0, 0};
  for (int i = 0; i < d; ++i)
    m[static_cast<std::size_t>(i)] = static_cast<int>(std::floor(delta / h[static_cast<std::size_t>(i)] + 1e-9));
  std::vector<Index> out;
  for (int i = -m[0]; i <= m[0]; ++i)
    for (int j = -m[1]; j <= m[1]; ++j)
      for (int k = -m[2]; k <= m[2]; ++k) {
        if (i == 0 && j == 0 && k == 0) continue;
        const Vec z{i * h[0], d > 1 ? j * h[1] : 0.0, d > 2 ? k * h[2] : 0.0};
        if (norm(z) <= delta * (1.0 + 1e-12) && cone.contains(z)) out.push_back({i, j, k});
      }
  return out;
}

}  // namespace nlspace
