#pragma once

// Interaction kernels rho, the cone-infimum kernel rho_theta0 and numerical
// checkers for the three kernel admissibility conditions:
//   radial_monotone   rho radial with |xi|^-p rho(xi) nonincreasing,
//   mass_ratio_limit  delta^p / int_{B_delta} rho -> 0,
//   cone_condition    rho_theta0 direction-independent on a cone with
//                     delta^p / int_0^delta rho_theta0(r v0) r^{d-1} dr -> 0.

#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "nlspace/common.hpp"
#include "nlspace/geometry.hpp"

namespace nlspace {

enum class KernelKind { fractional, log, borderline, indicator, cone_restricted, custom_radial };

std::string to_string(KernelKind k);

class Kernel {
 public:
  static constexpr double kUnbounded = std::numeric_limits<double>::infinity();

  /// |xi|^{-(d + p(s-1))}, s in (0, 1).
  static Kernel fractional(int d, double p, double s, double support_radius = kUnbounded);
  /// -|xi|^{p-d} ln|xi| on the unit ball.
  static Kernel log(int d, double p);
  /// |xi|^{p-d} on B_R (the case left open by the mass-ratio condition).
  static Kernel borderline(int d, double p, double support_radius = 1.0);
  /// chi_{B_R}.
  static Kernel indicator(int d, double p, double support_radius = 1.0);
  /// base(xi) chi_{B_1^Lambda}(xi) for a radial base kernel.
  static Kernel cone_restricted(const Kernel& base, const Cone& cone);
  /// Radial profile tabulated at increasing radii, interpolated linearly in
  /// log-log space (linearly where a value is zero). Below the first radius
  /// the first segment's power law is extended; beyond the last radius the
  /// kernel vanishes.
  static Kernel custom_radial(int d, double p, std::vector<double> radii, std::vector<double> values);
  /// Tabulates profile(r) at n log-spaced radii in [r_min, r_max].
  static Kernel tabulate(int d, double p, const std::function<double(double)>& profile, double r_min,
                         double r_max, int n);

  /// Copy that vanishes for |xi| <= a (truncated kernel sequences).
  Kernel with_inner_cutoff(double a) const;

  int dim() const { return d_; }
  double p() const { return p_; }
  KernelKind kind() const { return kind_; }
  double s() const { return s_; }
  double support_radius() const { return support_; }
  double inner_cutoff() const { return inner_; }
  bool is_radial() const { return kind_ != KernelKind::cone_restricted; }
  bool singular_at_origin() const;
  const Cone* cone() const { return cone_.get(); }
  const Kernel* base() const { return base_.get(); }
  const std::vector<double>& table_radii() const { return radii_; }
  const std::vector<double>& table_values() const { return values_; }

  /// rho(xi). Returns 0 outside the support; DomainError("kernel
  /// singularity") at xi = 0 for kinds singular at the origin.
  double operator()(const Vec& xi) const;
  /// Radial profile r -> rho(r v) for radial kinds (the base profile for
  /// cone-restricted kernels, without the cone factor).
  double profile(double r) const;

  std::string describe() const;
  std::string hash() const;

 private:
  Kernel() = default;
  double raw_profile(double r) const;

  int d_ = 1;
  double p_ = 1.0;
  KernelKind kind_ = KernelKind::indicator;
  double s_ = 0.0;
  double support_ = 1.0;
  double inner_ = 0.0;
  std::shared_ptr<const Cone> cone_;
  std::shared_ptr<const Kernel> base_;
  std::vector<double> radii_;
  std::vector<double> values_;
};

/// Grid points of the theta infimum in rho_theta0.
inline constexpr int kThetaGridPoints = 64;

/// inf over theta in [theta0, 1] of rho(theta r v) theta^{-p}, taken over a
/// geometric grid of kThetaGridPoints values including both endpoints.
double rho_theta0(const Kernel& k, double theta0, double r, const Vec& v);

/// int_a^b profile(r) r^{d-1} dr for a radial profile (adaptive, splits at
/// the origin singularity; exact for tabulated kernels).
double radial_moment(const Kernel& k, double a, double b);

/// int_{B_delta} rho.
double ball_mass(const Kernel& k, double delta);

/// ||rho||_{L^1(R^d)}; CapabilityError for kernels with unbounded support.
double l1_norm(const Kernel& k);

// ---------------------------------------------------------------------------
// Admissibility checks.

enum class ConditionId { radial_monotone, mass_ratio_limit, cone_condition };
enum class Verdict { satisfied, violated, inconclusive };

std::string to_string(ConditionId c);
std::string to_string(Verdict v);

struct ConditionTolerances {
  double slope_tol = 0.05;
  double ratio_tol = 1e-3;
  double rel_tol = 1e-6;
};

struct KernelConditionReport {
  ConditionId condition_id = ConditionId::mass_ratio_limit;
  /// (delta, ratio) pairs, strictly decreasing in delta. For radial_monotone
  /// the pairs are (r, r^{-p} rho(r e1)).
  std::vector<std::pair<double, double>> samples;
  double fitted_log_slope = 0.0;
  Verdict verdict = Verdict::inconclusive;
  std::string note;
};

/// delta^p / int_{B_delta} rho. DegenerateError when the mass vanishes.
double mass_ratio(const Kernel& k, double delta);

/// Geometric sequence 2^{-first}, ..., 2^{-last}.
std::vector<double> dyadic_deltas(int first, int last);
/// The sequence used when none is given: 2^{-1} ... 2^{-40}.
std::vector<double> default_deltas();

KernelConditionReport check_radial_monotone(const Kernel& k, const std::vector<double>& probe_radii,
                                            const ConditionTolerances& tol = {});
KernelConditionReport check_mass_ratio_limit(const Kernel& k, const std::vector<double>& deltas,
                                             const ConditionTolerances& tol = {});
KernelConditionReport check_cone_condition(const Kernel& k, double theta0, const Cone& cone,
                                           const std::vector<double>& deltas,
                                           const ConditionTolerances& tol = {});

/// delta^p / int_0^delta rho_theta0(s v0) s^{d-1} ds, the quantity whose
/// vanishing is the cone condition and which scales the certified gap bound.
double cone_mass_ratio(const Kernel& k, double theta0, const Cone& cone, double delta);

/// Least-squares slope of log(y) against log(x).
double fit_log_slope(const std::vector<std::pair<double, double>>& xy);

}  // namespace nlspace
