#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hyperco/common.hpp"

// Primitives of the Lorentz model of hyperbolic space with curvature -c:
// the upper sheet of the hyperboloid <x,x>_L = -1/c in R^(d+1), where
// <x,y>_L = <x_space, y_space> - x_time * y_time.
//
// Everything is templated on the scalar type so the same formulas serve both
// plain double evaluation and reverse-mode differentiation (ad::Var).

namespace hyperco {

struct Curvature {
  double c = 1.0;

  Curvature() = default;
  explicit Curvature(double value) : c(value) {
    if (!(std::isfinite(c) && c > 0.0))
      throw std::invalid_argument("Curvature: c must be finite and positive");
  }

  double sqrt_c() const { return std::sqrt(c); }
};

template <typename Scalar>
struct LorentzPoint {
  std::vector<Scalar> space;  // spatial coordinates
  Scalar time{};              // distinguished last (axis) coordinate

  int dim() const { return static_cast<int>(space.size()); }
};

// Tangent vector at the base point o = [0, 1/sqrt(c)]. Tangency at o forces
// the ambient time component to zero, so only the spatial part is stored; the
// induced Lorentzian norm equals the Euclidean norm of `space`.
template <typename Scalar>
struct TangentAtOrigin {
  std::vector<Scalar> space;

  int dim() const { return static_cast<int>(space.size()); }
};

using LorentzPointD = LorentzPoint<double>;
using TangentAtOriginD = TangentAtOrigin<double>;

inline LorentzPointD origin_point(int dim, Curvature cv) {
  if (dim < 1) throw std::invalid_argument("origin_point: dim must be >= 1");
  return LorentzPointD{std::vector<double>(static_cast<std::size_t>(dim), 0.0),
                       1.0 / cv.sqrt_c()};
}

// Lorentzian inner product of ambient (d+1)-vectors, time coordinate last.
template <typename Scalar>
Scalar lorentz_inner(std::span<const Scalar> x, std::span<const Scalar> y) {
  if (x.size() != y.size())
    throw std::invalid_argument("lorentz_inner: dimension mismatch");
  if (x.size() < 2)
    throw std::invalid_argument("lorentz_inner: ambient dimension must be >= 2");
  const std::size_t n = x.size();
  Scalar acc = x[0] * y[0];
  for (std::size_t i = 1; i + 1 < n; ++i) acc += x[i] * y[i];
  acc -= x[n - 1] * y[n - 1];
  return acc;
}

template <typename Scalar>
Scalar lorentz_inner(const LorentzPoint<Scalar>& x, const LorentzPoint<Scalar>& y) {
  if (x.dim() != y.dim())
    throw std::invalid_argument("lorentz_inner: dimension mismatch");
  if (x.dim() < 1) throw std::invalid_argument("lorentz_inner: empty point");
  Scalar acc = x.space[0] * y.space[0];
  for (std::size_t i = 1; i < x.space.size(); ++i) acc += x.space[i] * y.space[i];
  acc -= x.time * y.time;
  return acc;
}

template <typename Scalar>
double closure_residual(const LorentzPoint<Scalar>& x, Curvature cv) {
  double acc = 0.0;
  for (const Scalar& s : x.space) {
    const double v = value_of(s);
    acc += v * v;
  }
  const double t = value_of(x.time);
  return std::abs(cv.c * (acc - t * t) + 1.0);
}

inline constexpr double kPointTolerance = 1e-6;

// On-sheet check. The tolerance scales with c*time^2 because the constraint
// residual of a point stored in doubles is quantized at ~c*time^2*2^-53; an
// absolute tolerance would reject exactly-constructed points far from the
// origin.
template <typename Scalar>
bool is_on_hyperboloid(const LorentzPoint<Scalar>& x, Curvature cv,
                       double tol = kPointTolerance) {
  const double t = value_of(x.time);
  if (!std::isfinite(t) || t <= 0.0) return false;
  for (const Scalar& s : x.space)
    if (!std::isfinite(value_of(s))) return false;
  const double scale = std::max(1.0, cv.c * t * t);
  return closure_residual(x, cv) <= tol * scale;
}

template <typename Scalar>
void require_valid_point(const LorentzPoint<Scalar>& x, Curvature cv,
                         const char* where) {
  if (!is_on_hyperboloid(x, cv))
    throw std::domain_error(std::string(where) + ": point violates the hyperboloid invariant");
}

namespace detail {

template <typename Scalar>
Scalar squared_norm(std::span<const Scalar> v) {
  if (v.empty()) throw std::invalid_argument("squared_norm: empty vector");
  Scalar acc = v[0] * v[0];
  for (std::size_t i = 1; i < v.size(); ++i) acc += v[i] * v[i];
  return acc;
}

template <typename Scalar>
void require_finite(std::span<const Scalar> v, const char* where) {
  for (const Scalar& s : v)
    if (!std::isfinite(value_of(s)))
      throw std::invalid_argument(std::string(where) + ": non-finite input");
}

}  // namespace detail

// Completes a spatial vector to the hyperboloid: time = sqrt(1/c + |space|^2).
template <typename Scalar>
LorentzPoint<Scalar> lift_spatial(std::vector<Scalar> space, Curvature cv) {
  using std::sqrt;
  detail::require_finite(std::span<const Scalar>(space), "lift_spatial");
  Scalar n2 = detail::squared_norm(std::span<const Scalar>(space));
  Scalar time = sqrt(n2 + 1.0 / cv.c);
  return LorentzPoint<Scalar>{std::move(space), std::move(time)};
}

// Below this tangent norm the exponential map uses the series limit
// cosh(z) -> 1 + z^2/2, sinh(z)/z -> 1 + z^2/6 (z = sqrt(c)|v|), which avoids
// 0/0 at v = 0 and keeps the truncation error under ~1e-24.
inline constexpr double kExpSeriesThreshold = 1e-6;

// exp_o(v) = cosh(z) o + (sinh(z)/z) v. Maps exp(0) to o exactly and
// preserves radial distance: d(o, exp(v)) = |v|.
template <typename Scalar>
LorentzPoint<Scalar> exp_map_origin(const TangentAtOrigin<Scalar>& v, Curvature cv) {
  using std::cosh;
  using std::sinh;
  using std::sqrt;
  detail::require_finite(std::span<const Scalar>(v.space), "exp_map_origin");
  if (v.dim() < 1) throw std::invalid_argument("exp_map_origin: empty tangent");
  const double sc = cv.sqrt_c();

  Scalar n2 = detail::squared_norm(std::span<const Scalar>(v.space));
  LorentzPoint<Scalar> out;
  out.space.reserve(v.space.size());
  if (value_of(n2) < kExpSeriesThreshold * kExpSeriesThreshold) {
    Scalar coef = n2 * (cv.c / 6.0) + 1.0;
    for (const Scalar& s : v.space) out.space.push_back(s * coef);
    out.time = (n2 * (cv.c / 2.0) + 1.0) * (1.0 / sc);
  } else {
    Scalar z = sqrt(n2) * sc;
    Scalar coef = sinh(z) / z;
    for (const Scalar& s : v.space) out.space.push_back(s * coef);
    out.time = cosh(z) * (1.0 / sc);
  }
  return out;
}

// Inverse of exp_map_origin. The radius is recovered through asinh of the
// spatial norm, which stays accurate near the origin where
// acosh(time*sqrt(c)) has already lost the information.
template <typename Scalar>
TangentAtOrigin<Scalar> log_map_origin(const LorentzPoint<Scalar>& x, Curvature cv) {
  using std::asinh;
  using std::sqrt;
  require_valid_point(x, cv, "log_map_origin");
  const double sc = cv.sqrt_c();
  Scalar n2 = detail::squared_norm(std::span<const Scalar>(x.space));
  TangentAtOrigin<Scalar> out;
  out.space.reserve(x.space.size());
  if (value_of(n2) == 0.0) {
    for (const Scalar& s : x.space) out.space.push_back(s * 0.0);
    return out;
  }
  Scalar snorm = sqrt(n2);
  Scalar radius = asinh(snorm * sc) * (1.0 / sc);
  Scalar coef = radius / snorm;
  for (const Scalar& s : x.space) out.space.push_back(s * coef);
  return out;
}

// Geodesic distance (1/sqrt(c)) acosh(-c <x,y>_L); the acosh argument is
// clamped to >= 1 against rounding. Symmetric by construction, d(x,x) = 0.
template <typename Scalar>
Scalar geodesic_distance(const LorentzPoint<Scalar>& x, const LorentzPoint<Scalar>& y,
                         Curvature cv) {
  require_valid_point(x, cv, "geodesic_distance");
  require_valid_point(y, cv, "geodesic_distance");
  Scalar u = lorentz_inner(x, y) * (-cv.c);
  return acosh_clamped(u) * (1.0 / cv.sqrt_c());
}

// Distance from the origin, (1/sqrt(c)) acosh(sqrt(c) * time).
template <typename Scalar>
Scalar radial_distance(const LorentzPoint<Scalar>& x, Curvature cv) {
  require_valid_point(x, cv, "radial_distance");
  const double sc = cv.sqrt_c();
  return acosh_clamped(x.time * sc) * (1.0 / sc);
}

// Point at parameter t in [0,1] on the geodesic from o to `target`:
// exp_o(t log_o(target)). t=0 gives o exactly, t=1 recovers the target up to
// rounding, and the radius scales linearly in t.
template <typename Scalar>
LorentzPoint<Scalar> geodesic_point_from_origin(const LorentzPoint<Scalar>& target,
                                                double t, Curvature cv) {
  if (!(t >= 0.0 && t <= 1.0))
    throw std::domain_error("geodesic_point_from_origin: t must lie in [0, 1]");
  TangentAtOrigin<Scalar> v = log_map_origin(target, cv);
  for (Scalar& s : v.space) s = s * t;
  return exp_map_origin(v, cv);
}

}  // namespace hyperco
