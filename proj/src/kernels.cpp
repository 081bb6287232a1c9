#include "nlspace/kernels.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cstdio>
#include <sstream>

namespace nlspace {

namespace {

// Relative tolerance handed to the double-exponential rule; the integrands
// below are power-like at the origin, where tanh-sinh converges fastest.
constexpr double kQuadTol = 1e-12;

double tanh_sinh(const std::function<double(double)>& f, double a, double b) {
  thread_local boost::math::quadrature::tanh_sinh<double> integrator;
  if (!(b > a)) return 0.0;
  return integrator.integrate(f, a, b, kQuadTol);
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Exponent e with rho(r) = r^{-e} for the pure power kinds.
double fractional_exponent(int d, double p, double s) { return d + p * (s - 1.0); }

void require_p(double p) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw ArgumentError("p >= 1 required");
}

}  // namespace

std::string to_string(KernelKind k) {
  switch (k) {
    case KernelKind::fractional: return "fractional";
    case KernelKind::log: return "log";
    case KernelKind::borderline: return "borderline";
    case KernelKind::indicator: return "indicator";
    case KernelKind::cone_restricted: return "cone_restricted";
    case KernelKind::custom_radial: return "custom_radial";
  }
  return "?";
}

std::string to_string(ConditionId c) {
  switch (c) {
    case ConditionId::radial_monotone: return "radial_monotone";
    case ConditionId::mass_ratio_limit: return "mass_ratio_limit";
    case ConditionId::cone_condition: return "cone_condition";
  }
  return "?";
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::satisfied: return "satisfied";
    case Verdict::violated: return "violated";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Construction

Kernel Kernel::fractional(int d, double p, double s, double support_radius) {
  require_dim(d);
  require_p(p);
  if (!(s > 0.0 && s < 1.0)) throw ArgumentError("fractional kernel requires s in (0, 1)");
  if (!(support_radius > 0.0)) throw ArgumentError("support radius must be positive");
  Kernel k;
  k.d_ = d;
  k.p_ = p;
  k.kind_ = KernelKind::fractional;
  k.s_ = s;
  k.support_ = support_radius;
  return k;
}

Kernel Kernel::log(int d, double p) {
  require_dim(d);
  require_p(p);
  Kernel k;
  k.d_ = d;
  k.p_ = p;
  k.kind_ = KernelKind::log;
  k.support_ = 1.0;
  return k;
}

Kernel Kernel::borderline(int d, double p, double support_radius) {
  require_dim(d);
  require_p(p);
  if (!(support_radius > 0.0) || !std::isfinite(support_radius))
    throw ArgumentError("borderline kernel needs a finite positive support radius");
  Kernel k;
  k.d_ = d;
  k.p_ = p;
  k.kind_ = KernelKind::borderline;
  k.support_ = support_radius;
  return k;
}

Kernel Kernel::indicator(int d, double p, double support_radius) {
  require_dim(d);
  require_p(p);
  if (!(support_radius > 0.0) || !std::isfinite(support_radius))
    throw ArgumentError("indicator kernel needs a finite positive support radius");
  Kernel k;
  k.d_ = d;
  k.p_ = p;
  k.kind_ = KernelKind::indicator;
  k.support_ = support_radius;
  return k;
}

Kernel Kernel::cone_restricted(const Kernel& base, const Cone& cone) {
  if (!base.is_radial()) throw ArgumentError("cone restriction needs a radial base kernel");
  if (cone.dim() != base.dim()) throw ArgumentError("cone and kernel dimensions differ");
  Kernel k;
  k.d_ = base.d_;
  k.p_ = base.p_;
  k.kind_ = KernelKind::cone_restricted;
  k.s_ = base.s_;
  k.support_ = std::min(1.0, base.support_);
  k.inner_ = base.inner_;
  k.cone_ = std::make_shared<const Cone>(cone);
  k.base_ = std::make_shared<const Kernel>(base);
  return k;
}

Kernel Kernel::custom_radial(int d, double p, std::vector<double> radii, std::vector<double> values) {
  require_dim(d);
  require_p(p);
  if (radii.size() < 2 || radii.size() != values.size())
    throw ArgumentError("tabulated kernel needs >= 2 (radius, value) pairs");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] > 0.0) || (i > 0 && !(radii[i] > radii[i - 1])))
      throw ArgumentError("tabulated radii must be positive and strictly increasing");
    if (!(values[i] >= 0.0) || !std::isfinite(values[i]))
      throw ArgumentError("tabulated kernel values must be finite and nonnegative");
  }
  if (values[0] > 0.0 && values[1] > 0.0) {
    const double slope = std::log(values[1] / values[0]) / std::log(radii[1] / radii[0]);
    if (!(slope + d > 0.0)) throw ArgumentError("tabulated kernel is not locally integrable at the origin");
  }
  Kernel k;
  k.d_ = d;
  k.p_ = p;
  k.kind_ = KernelKind::custom_radial;
  k.support_ = radii.back();
  k.radii_ = std::move(radii);
  k.values_ = std::move(values);
  return k;
}

Kernel Kernel::tabulate(int d, double p, const std::function<double(double)>& profile, double r_min,
                        double r_max, int n) {
  if (!(r_min > 0.0 && r_max > r_min) || n < 2) throw ArgumentError("bad tabulation range");
  std::vector<double> r(static_cast<std::size_t>(n)), v(static_cast<std::size_t>(n));
  const double ratio = std::log(r_max / r_min) / (n - 1);
  for (int i = 0; i < n; ++i) {
    r[static_cast<std::size_t>(i)] = (i == n - 1) ? r_max : r_min * std::exp(ratio * i);
    v[static_cast<std::size_t>(i)] = profile(r[static_cast<std::size_t>(i)]);
  }
  return custom_radial(d, p, std::move(r), std::move(v));
}

Kernel Kernel::with_inner_cutoff(double a) const {
  if (!(a >= 0.0)) throw ArgumentError("inner cutoff must be nonnegative");
  Kernel k = *this;
  k.inner_ = std::max(inner_, a);
  return k;
}

bool Kernel::singular_at_origin() const {
  if (inner_ > 0.0) return false;
  switch (kind_) {
    case KernelKind::fractional: return fractional_exponent(d_, p_, s_) > 0.0;
    case KernelKind::log: return p_ <= d_;
    case KernelKind::borderline: return p_ < d_;
    case KernelKind::indicator: return false;
    case KernelKind::cone_restricted: return base_->singular_at_origin();
    case KernelKind::custom_radial:
      return values_[0] > 0.0 && values_[1] > 0.0 && values_[1] < values_[0];
  }
  return false;
}

double Kernel::raw_profile(double r) const {
  switch (kind_) {
    case KernelKind::fractional: return std::pow(r, -fractional_exponent(d_, p_, s_));
    case KernelKind::log: return r < 1.0 ? -std::pow(r, p_ - d_) * std::log(r) : 0.0;
    case KernelKind::borderline: return std::pow(r, p_ - d_);
    case KernelKind::indicator: return 1.0;
    case KernelKind::cone_restricted: return base_->profile(r);
    case KernelKind::custom_radial: {
      const auto& R = radii_;
      const auto& V = values_;
      std::size_t i = 0;
      if (r <= R[0]) {
        if (V[0] > 0.0 && V[1] > 0.0) {
          const double beta = std::log(V[1] / V[0]) / std::log(R[1] / R[0]);
          return V[0] * std::pow(r / R[0], beta);
        }
        return V[0];
      }
      i = static_cast<std::size_t>(std::upper_bound(R.begin(), R.end(), r) - R.begin()) - 1;
      if (i + 1 >= R.size()) return V.back();
      if (V[i] > 0.0 && V[i + 1] > 0.0) {
        const double beta = std::log(V[i + 1] / V[i]) / std::log(R[i + 1] / R[i]);
        return V[i] * std::pow(r / R[i], beta);
      }
      return V[i] + (V[i + 1] - V[i]) * (r - R[i]) / (R[i + 1] - R[i]);
    }
  }
  return 0.0;
}

double Kernel::profile(double r) const {
  if (r > support_ || (inner_ > 0.0 && r <= inner_)) return 0.0;
  if (r == 0.0) {
    if (singular_at_origin()) throw DomainError("kernel singularity");
    switch (kind_) {
      case KernelKind::fractional: return fractional_exponent(d_, p_, s_) == 0.0 ? 1.0 : 0.0;
      case KernelKind::log: return 0.0;
      case KernelKind::borderline: return p_ == d_ ? 1.0 : 0.0;
      case KernelKind::indicator: return 1.0;
      case KernelKind::cone_restricted: return base_->profile(0.0);
      case KernelKind::custom_radial: return raw_profile(0.0);
    }
  }
  return raw_profile(r);
}

double Kernel::operator()(const Vec& xi) const {
  const double r = norm(xi);
  if (r == 0.0 && singular_at_origin()) throw DomainError("kernel singularity");
  if (kind_ == KernelKind::cone_restricted) {
    if (r == 0.0 || r > support_ || !cone_->contains(xi)) return 0.0;
    return base_->profile(r);
  }
  return profile(r);
}

std::string Kernel::describe() const {
  std::ostringstream os;
  os << to_string(kind_) << "(d=" << d_ << ",p=" << fmt(p_);
  if (kind_ == KernelKind::fractional) os << ",s=" << fmt(s_);
  os << ",R=" << fmt(support_);
  if (inner_ > 0.0) os << ",inner=" << fmt(inner_);
  if (kind_ == KernelKind::cone_restricted) {
    os << ",base=" << base_->describe() << ",axis=(" << fmt(cone_->axis()[0]) << ","
       << fmt(cone_->axis()[1]) << "," << fmt(cone_->axis()[2]) << "),aperture="
       << fmt(cone_->aperture()) << (cone_->is_full_sphere() ? ",full" : "");
  }
  if (kind_ == KernelKind::custom_radial) os << ",n=" << radii_.size();
  os << ")";
  return os.str();
}

std::string Kernel::hash() const {
  Hasher h;
  h.text(describe());
  for (double r : radii_) h.value(r);
  for (double v : values_) h.value(v);
  return h.hex();
}

// ---------------------------------------------------------------------------
// Integrals

double radial_moment(const Kernel& k, double a, double b) {
  const Kernel& radial = k.kind() == KernelKind::cone_restricted ? *k.base() : k;
  const int d = k.dim();
  const double p = k.p();
  const double lo = std::max({a, 0.0, k.inner_cutoff()});
  const double hi = std::min(b, k.support_radius());
  if (!(hi > lo)) return 0.0;
  switch (radial.kind()) {
    case KernelKind::fractional: {
      const double q = d - 1.0 - fractional_exponent(d, p, radial.s());
      return tanh_sinh([q](double r) { return std::pow(r, q); }, lo, hi);
    }
    case KernelKind::log: {
      const double top = std::min(hi, 1.0);
      return tanh_sinh([p](double r) { return -std::pow(r, p - 1.0) * std::log(r); }, lo, top);
    }
    case KernelKind::borderline:
      return tanh_sinh([p](double r) { return std::pow(r, p - 1.0); }, lo, hi);
    case KernelKind::indicator:
      return tanh_sinh([d](double r) { return std::pow(r, d - 1.0); }, lo, hi);
    case KernelKind::custom_radial: {
      // Exact segment-wise integration of the interpolant.
      const auto& R = radial.table_radii();
      const auto& V = radial.table_values();
      auto power_piece = [d](double v0, double r0, double beta, double x, double y) {
        const double e = beta + d;
        if (std::abs(e) < 1e-14) return v0 * std::pow(r0, d) * std::log(y / x);
        return v0 * std::pow(r0, d) * (std::pow(y / r0, e) - std::pow(x / r0, e)) / e;
      };
      auto linear_piece = [d](double v0, double v1, double r0, double r1, double x, double y) {
        using boost::math::quadrature::gauss;
        return gauss<double, 8>::integrate(
            [&](double r) { return (v0 + (v1 - v0) * (r - r0) / (r1 - r0)) * std::pow(r, d - 1.0); }, x, y);
      };
      double total = 0.0;
      if (lo < R[0]) {
        const double y = std::min(hi, R[0]);
        if (V[0] > 0.0 && V[1] > 0.0) {
          const double beta = std::log(V[1] / V[0]) / std::log(R[1] / R[0]);
          total += lo > 0.0 ? power_piece(V[0], R[0], beta, lo, y)
                            : V[0] * std::pow(R[0], d) * std::pow(y / R[0], beta + d) / (beta + d);
        } else {
          total += V[0] * (std::pow(y, d) - std::pow(lo, d)) / d;
        }
      }
      for (std::size_t i = 0; i + 1 < R.size(); ++i) {
        const double x = std::max(lo, R[i]), y = std::min(hi, R[i + 1]);
        if (!(y > x)) continue;
        if (V[i] > 0.0 && V[i + 1] > 0.0) {
          const double beta = std::log(V[i + 1] / V[i]) / std::log(R[i + 1] / R[i]);
          total += power_piece(V[i], R[i], beta, x, y);
        } else {
          total += linear_piece(V[i], V[i + 1], R[i], R[i + 1], x, y);
        }
      }
      return total;
    }
    case KernelKind::cone_restricted: break;
  }
  throw CapabilityError("radial moment of a nested cone-restricted kernel");
}

double ball_mass(const Kernel& k, double delta) {
  if (!(delta > 0.0)) throw ArgumentError("delta must be positive");
  if (k.kind() == KernelKind::cone_restricted) return k.cone()->area() * radial_moment(k, 0.0, delta);
  return sphere_area(k.dim()) * radial_moment(k, 0.0, delta);
}

double l1_norm(const Kernel& k) {
  if (!std::isfinite(k.support_radius())) throw CapabilityError("kernel with unbounded support is not in L1");
  return ball_mass(k, k.support_radius());
}

double rho_theta0(const Kernel& k, double theta0, double r, const Vec& v) {
  if (!(theta0 > 0.0 && theta0 < 1.0)) throw ArgumentError("theta0 must lie in (0, 1)");
  if (!(r > 0.0)) throw ArgumentError("rho_theta0 needs r > 0");
  const double step = -std::log(theta0) / (kThetaGridPoints - 1);
  double best = std::numeric_limits<double>::infinity();
  for (int j = 0; j < kThetaGridPoints; ++j) {
    const double theta = (j == kThetaGridPoints - 1) ? 1.0 : theta0 * std::exp(step * j);
    best = std::min(best, k((theta * r) * v) * std::pow(theta, -k.p()));
  }
  return best;
}

double cone_mass_ratio(const Kernel& k, double theta0, const Cone& cone, double delta) {
  if (!(delta > 0.0)) throw ArgumentError("delta must be positive");
  const int d = k.dim();
  const Vec v0 = cone.axis();
  const double floor_r = delta * 1e-40;
  const double denom = tanh_sinh(
      [&](double r) {
        if (r < floor_r) return 0.0;
        const double val = rho_theta0(k, theta0, r, v0) * std::pow(r, d - 1.0);
        return std::isfinite(val) ? val : 0.0;
      },
      0.0, delta);
  if (!(denom > 0.0)) throw DegenerateError("degenerate kernel: rho_theta0 vanishes on (0, delta) along the cone axis");
  return std::pow(delta, k.p()) / denom;
}

double mass_ratio(const Kernel& k, double delta) {
  const double m = ball_mass(k, delta);
  if (!(m > 0.0)) throw DegenerateError("degenerate kernel: zero mass on B_delta");
  return std::pow(delta, k.p()) / m;
}

std::vector<double> dyadic_deltas(int first, int last) {
  if (last < first) throw ArgumentError("empty dyadic range");
  std::vector<double> out;
  for (int j = first; j <= last; ++j) out.push_back(std::ldexp(1.0, -j));
  return out;
}

std::vector<double> default_deltas() { return dyadic_deltas(1, 40); }

double fit_log_slope(const std::vector<std::pair<double, double>>& xy) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (const auto& [x, y] : xy) {
    if (!(x > 0.0 && y > 0.0) || !std::isfinite(y)) continue;
    const double lx = std::log(x), ly = std::log(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 2) return 0.0;
  const double den = n * sxx - sx * sx;
  return den != 0.0 ? (n * sxy - sx * sy) / den : 0.0;
}

namespace {

void validate_geometric(const std::vector<double>& deltas) {
  if (deltas.size() < 4) throw ArgumentError("delta sequence needs at least 4 entries");
  if (!(deltas[0] > 0.0)) throw ArgumentError("deltas must be positive");
  const double q = deltas[1] / deltas[0];
  if (!(q > 0.0 && q < 1.0)) throw ArgumentError("delta sequence must decrease geometrically");
  for (std::size_t i = 1; i < deltas.size(); ++i)
    if (std::abs(deltas[i] / deltas[i - 1] - q) > 1e-9 * q)
      throw ArgumentError("delta sequence is not geometric");
}

Verdict limit_verdict(double slope, double last_ratio, const ConditionTolerances& tol) {
  if (slope > tol.slope_tol && last_ratio < tol.ratio_tol) return Verdict::satisfied;
  if (slope < -tol.slope_tol) return Verdict::violated;
  return Verdict::inconclusive;
}

std::vector<Vec> probe_directions(int d) {
  std::vector<Vec> dirs;
  for (int i = 0; i < d; ++i) {
    dirs.push_back(unit(i));
    dirs.push_back(-1.0 * unit(i));
  }
  if (d == 2) {
    dirs.push_back(normalized({1.0, 1.0, 0.0}));
    dirs.push_back(normalized({1.0, -1.0, 0.0}));
  }
  if (d == 3) {
    dirs.push_back(normalized({1.0, 1.0, 1.0}));
    dirs.push_back(normalized({1.0, -1.0, 0.5}));
    dirs.push_back(normalized({-0.3, 0.4, -1.0}));
  }
  return dirs;
}

bool rel_differs(double a, double b, double rel_tol) {
  const double scale = std::max(std::abs(a), std::abs(b));
  if (scale == 0.0) return false;
  if (!std::isfinite(scale)) return a != b;
  return std::abs(a - b) > rel_tol * scale;
}

}  // namespace

KernelConditionReport check_radial_monotone(const Kernel& k, const std::vector<double>& probe_radii,
                                            const ConditionTolerances& tol) {
  if (probe_radii.empty()) throw ArgumentError("probe radius list is empty");
  for (std::size_t i = 0; i < probe_radii.size(); ++i)
    if (!(probe_radii[i] > 0.0) || (i > 0 && !(probe_radii[i] > probe_radii[i - 1])))
      throw ArgumentError("probe radii must be positive and strictly increasing");
  KernelConditionReport rep;
  rep.condition_id = ConditionId::radial_monotone;
  rep.verdict = Verdict::satisfied;
  const auto dirs = probe_directions(k.dim());
  const double p = k.p();
  for (std::size_t i = 0; i < probe_radii.size(); ++i) {
    const double r = probe_radii[i];
    const double ref = k(r * dirs[0]);
    for (std::size_t j = 1; j < dirs.size(); ++j)
      if (rel_differs(k(r * dirs[j]), ref, tol.rel_tol) && rep.verdict == Verdict::satisfied) {
        rep.verdict = Verdict::violated;
        rep.note = "not radial: rho differs between directions at r = " + fmt(r);
      }
    if (i > 0 && rep.verdict == Verdict::satisfied) {
      const double rp = probe_radii[i - 1];
      for (const auto& v : dirs) {
        const double prev = std::pow(rp, -p) * k(rp * v);
        const double cur = std::pow(r, -p) * k(r * v);
        if (cur > prev * (1.0 + tol.rel_tol)) {
          rep.verdict = Verdict::violated;
          rep.note = "r^-p rho(r) increases between r = " + fmt(rp) + " and r = " + fmt(r);
          break;
        }
      }
    }
  }
  for (auto it = probe_radii.rbegin(); it != probe_radii.rend(); ++it)
    rep.samples.emplace_back(*it, std::pow(*it, -p) * k(*it * dirs[0]));
  rep.fitted_log_slope = fit_log_slope(rep.samples);
  return rep;
}

KernelConditionReport check_mass_ratio_limit(const Kernel& k, const std::vector<double>& deltas,
                                             const ConditionTolerances& tol) {
  validate_geometric(deltas);
  KernelConditionReport rep;
  rep.condition_id = ConditionId::mass_ratio_limit;
  for (double delta : deltas) rep.samples.emplace_back(delta, mass_ratio(k, delta));
  rep.fitted_log_slope = fit_log_slope(rep.samples);
  rep.verdict = limit_verdict(rep.fitted_log_slope, rep.samples.back().second, tol);
  if (rep.verdict == Verdict::inconclusive)
    rep.note = "ratio does not vanish at the tested scales; the limit is not decided numerically";
  return rep;
}

KernelConditionReport check_cone_condition(const Kernel& k, double theta0, const Cone& cone,
                                           const std::vector<double>& deltas,
                                           const ConditionTolerances& tol) {
  if (cone.dim() != k.dim()) throw ArgumentError("cone and kernel dimensions differ");
  if (!(theta0 > 0.0 && theta0 < 1.0)) throw ArgumentError("theta0 must lie in (0, 1)");
  validate_geometric(deltas);
  KernelConditionReport rep;
  rep.condition_id = ConditionId::cone_condition;
  rep.verdict = Verdict::satisfied;

  // Direction independence of rho_theta0 over sampled v in Lambda.
  auto dirs = sphere_quadrature(cone, 16);
  const Vec v0 = cone.axis();
  bool independent = true;
  for (std::size_t i = 0; i < deltas.size() && independent; ++i) {
    const double r = deltas[i];
    const double ref = rho_theta0(k, theta0, r, v0);
    for (const auto& q : dirs)
      if (rel_differs(rho_theta0(k, theta0, r, q.direction), ref, tol.rel_tol)) {
        independent = false;
        rep.note = "rho_theta0 depends on the direction within the cone at r = " + fmt(r);
        break;
      }
  }

  bool any_positive = false, any_zero = false;
  for (double delta : deltas) {
    try {
      rep.samples.emplace_back(delta, cone_mass_ratio(k, theta0, cone, delta));
      any_positive = true;
    } catch (const DegenerateError&) {
      any_zero = true;
    }
  }
  if (!any_positive) throw DegenerateError("degenerate kernel: rho_theta0 vanishes along the cone axis");
  rep.fitted_log_slope = fit_log_slope(rep.samples);
  rep.verdict = limit_verdict(rep.fitted_log_slope, rep.samples.back().second, tol);
  if (any_zero) {
    rep.verdict = Verdict::violated;
    rep.note = "rho_theta0 vanishes near the origin along the axis; the ratio is infinite there";
  }
  if (!independent) rep.verdict = Verdict::violated;
  if (rep.verdict == Verdict::inconclusive && rep.note.empty())
    rep.note = "ratio does not vanish at the tested scales; the limit is not decided numerically";
  return rep;
}

}  // namespace nlspace
