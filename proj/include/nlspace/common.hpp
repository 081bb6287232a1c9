#pragma once

// Shared vocabulary for the nonlocal-space library: points, error types,
// deterministic reductions and a small static-chunk parallel loop.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nlspace {

inline constexpr int kMaxDim = 3;

/// A point or vector in R^d, d <= 3. Unused trailing components are zero.
using Vec = std::array<double, kMaxDim>;

inline Vec operator+(const Vec& a, const Vec& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec operator-(const Vec& a, const Vec& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec operator*(double s, const Vec& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const Vec& a, const Vec& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }
inline Vec unit(int axis) {
  Vec e{0.0, 0.0, 0.0};
  e[static_cast<std::size_t>(axis)] = 1.0;
  return e;
}
Vec normalized(const Vec& a);

// ---------------------------------------------------------------------------
// Errors. The CLI maps these onto exit codes (see tools/).

/// Evaluation outside an operation's domain: kernel singularity, x == y,
/// points outside the domain, zero direction vectors.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};
/// Malformed or out-of-range arguments.
struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
/// Mollifier or quadrature resolution too coarse for the request.
struct ResolutionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
/// Numerical degeneracy: vanishing kernel mass, singular Gram or Q matrix,
/// vanishing smallest eigenvalue.
struct DegenerateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
/// Request outside what the implementation supports (d > 3, non-radial
/// kernel where a radial one is required, missing field expression).
struct CapabilityError : std::logic_error {
  using std::logic_error::logic_error;
};
/// An experiment's mathematical hypotheses fail on the supplied data.
struct HypothesisViolated : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_dim(int d);

/// Surface measure of the unit sphere S^{d-1} (counting measure for d = 1).
double sphere_area(int d);
/// Lebesgue measure of the unit ball in R^d.
double ball_volume(int d);

// ---------------------------------------------------------------------------
// Deterministic reductions and parallel loops.

/// Pairwise (tree) summation. The reduction order depends only on the length
/// of the input, so results are reproducible bit-for-bit.
double pairwise_sum(std::span<const double> values);

void set_thread_count(unsigned n);
unsigned thread_count();

/// Runs body(i) for i in [0, n) on thread_count() workers using contiguous
/// static chunks. body must only write to per-index output slots.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

// ---------------------------------------------------------------------------
// Content hashing (FNV-1a 64) for report provenance.

class Hasher {
 public:
  Hasher& bytes(const void* data, std::size_t n);
  Hasher& value(double x) { return bytes(&x, sizeof x); }
  Hasher& value(std::int64_t x) { return bytes(&x, sizeof x); }
  Hasher& text(std::string_view s) { return bytes(s.data(), s.size()); }
  std::uint64_t digest() const { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace nlspace
