#pragma once

// Experiment-level procedures: the one-dimensional difference lemma, near
// boundary mass control, Poincare-Korn constants, kernel-sequence and
// compactness harnesses.

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nlspace/nonlocal.hpp"

namespace nlspace {

// ---------------------------------------------------------------------------
// One-dimensional lemma:
//   int_0^delta |g|^p <= C delta^p int_0^{2 delta} |g(x+t) - g(x)|^p / t^p dx
//                        + 2^{p-1} int_delta^{3 delta} |g|^p,   C = 2^{2p-1}.

struct PonceReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double constant = 0.0;
  bool holds = false;
};

inline constexpr double kPonceQuadTol = 1e-2;

/// g sampled at x_i = i * spacing, i = 0 .. M with M * spacing >= 3 delta,
/// interpolated linearly. Requires at least 64 samples per delta.
PonceReport ponce_1d_check(const std::vector<double>& g, double spacing, double delta, double t, double p);
PonceReport ponce_1d_check(const std::function<double(double)>& g, double delta, double t, double p,
                           int samples_per_delta = 256);

// ---------------------------------------------------------------------------

struct BoundaryMassReport {
  double r = 0.0;
  double epsilon0 = 0.0;
  double lhs = 0.0;            ///< int_Omega |u|^p
  double interior_term = 0.0;  ///< int_{Omega_{eps0 r}} |u|^p
  double C1 = 0.0;             ///< |Omega| / |Omega_{eps0 r}|
  double seminorm = 0.0;
  double seminorm_term = 0.0;  ///< r^p / int_{B_r} rho * seminorm
  std::optional<double> implied_C2;
  /// int_{Omega \ Omega_{2 eps0 r}} |u|^p and, when u vanishes on
  /// Omega_{r/2}, the constant it implies in the sharper collar bound.
  double collar_term = 0.0;
  bool vanishes_on_inner = false;
  std::optional<double> implied_collar_C;
};

inline constexpr double kDefaultEpsilon0 = 1.0 / 16.0;

/// r0 used when none is given: a quarter of the inradius (window/4 for
/// graph patches).
double default_r0(const Domain& dom);

/// CapabilityError for non-radial kernels; ArgumentError unless
/// r in (0, r0) and 0 < epsilon0 <= 1/8.
BoundaryMassReport boundary_mass_check(const VectorField& u, const Kernel& k, double r,
                                       double epsilon0 = kDefaultEpsilon0, double p = 2.0,
                                       std::optional<double> r0 = std::nullopt);

// ---------------------------------------------------------------------------

enum class PoincareMethod { dense_eigen, inverse_iteration, rayleigh_descent };
std::string to_string(PoincareMethod m);

struct PoincareEstimate {
  double constant = 0.0;
  std::string minimizer_hash;
  double grid_h = 0.0;
  PoincareMethod method = PoincareMethod::dense_eigen;
  /// |C - C_coarse| / C against the next-coarser grid; NaN when not computed.
  double refinement_drift = 0.0;
  bool lower_bound = false;  ///< true for the general-p descent
  int restarts = 0;
  std::string subspace;
  std::vector<double> minimizer;  ///< node-major values of the extremal field
};

struct PoincareOptions {
  bool refine = true;     ///< also solve on the coarsened grid
  int restarts = 10;      ///< general p
  int iterations = 400;   ///< general p, per restart
  std::uint64_t seed = 0;
  std::size_t dense_limit = 4096;  ///< largest N d assembled densely

  bool operator==(const PoincareOptions&) const = default;
};

/// Best C in int |u|^p <= C |u|^p_S over V. DegenerateError when the
/// seminorm has a (numerically) vanishing direction in V.
PoincareEstimate poincare_constant(const SubspaceSpec& spec, const Kernel& k, double p,
                                   const PoincareOptions& opt = {});

/// Dense seminorm quadratic form (p = 2): |u|^2_S = u^T K u, u node-major.
std::vector<double> seminorm_quadratic_form(const Grid& grid, const Kernel& k);

// ---------------------------------------------------------------------------

enum class KernelFamily { mollified, truncated, rescaled_delta };
std::string to_string(KernelFamily f);
KernelFamily kernel_family_from_string(const std::string& s);

/// rho_n: rho convolved with a width-1/n bump (tabulated), rho chi_{|xi| > 1/n},
/// or rho plus a spike of mass 1/n on B_{1/n}. The tabulated families need
/// rho of bounded support.
Kernel kernel_family_member(KernelFamily family, const Kernel& rho, int n);

enum class CompactnessVerdict { no_obstruction, concentration_detected, oscillation_detected, hypothesis_violated };
std::string to_string(CompactnessVerdict v);

struct CompactnessThresholds {
  double gap_fraction = 0.05;
  double mass_fraction = 0.05;
  double seminorm_growth = 1e3;

  bool operator==(const CompactnessThresholds&) const = default;
};

struct CompactnessReport {
  std::string sequence_id;
  std::vector<int> n_values;
  std::vector<double> seminorms;  ///< per n
  std::vector<double> lp_norms;   ///< int |u_n|^p per n
  double sup_seminorm = 0.0;
  double sup_lp = 0.0;
  std::vector<std::pair<double, double>> gap_curve;            ///< (delta, sup_n gap)
  std::vector<std::pair<double, double>> boundary_mass_curve;  ///< (tau, sup_n mass fraction in Omega \ Omega_tau)
  std::vector<std::pair<double, double>> bound_curve;          ///< (delta, mass ratio of the limit / certified base)
  double boundary_mass_limit = 0.0;  ///< extrapolation of the mass curve to tau = 0
  /// compactness_probe only: gap[n][delta] / (base(delta) seminorm_n).
  std::vector<std::vector<double>> normalized_gaps;
  double envelope_constant = 0.0;
  bool envelope_holds = false;
  double envelope_growth = 0.0;
  CompactnessVerdict verdict = CompactnessVerdict::no_obstruction;
  std::string note;
};

/// Field sequence and the cone/mollifier setup for the harnesses.
struct SequenceSource {
  std::string id;
  std::function<VectorField(int)> member;
};

SequenceSource sequence_source(const SequenceSpec& spec, GridPtr grid);

struct ExperimentOptions {
  std::vector<int> n_values{1, 2, 4, 8};
  std::vector<double> deltas;  ///< empty: resolvable dyadic deltas
  std::vector<double> taus;    ///< empty: dyadic taus in [h, inradius)
  CompactnessThresholds thresholds{};
};

/// Seminorms with rho_n, gaps with the full-sphere mollifier and boundary
/// mass curves. The verdict is hypothesis_violated when the seminorms grow
/// by more than the growth threshold.
CompactnessReport kernel_sequence_experiment(KernelFamily family, const Kernel& rho, const SequenceSource& fields,
                                             double p, const GridPtr& grid, const ExperimentOptions& opt = {});

/// Certified-bound probe for a fixed kernel and cone. The verdict is
/// hypothesis_violated when the kernel fails the cone condition.
CompactnessReport compactness_probe(const SequenceSource& fields, const Kernel& k, double p, const GridPtr& grid,
                                    const Cone& cone, double theta0 = 0.5, const ExperimentOptions& opt = {});

}  // namespace nlspace
