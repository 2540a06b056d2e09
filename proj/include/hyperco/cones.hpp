#pragma once

#include <cmath>
#include <stdexcept>

#include "hyperco/manifold.hpp"

// Entailment cones: every point x (except the origin) owns a cone opening
// away from the origin with half-aperture asin(2K / (sqrt(c) |x_space|)).
// A point y lies inside the cone of x when the exterior angle
// ext(x,y) = pi - angle(o, x, y) does not exceed the aperture.

namespace hyperco {

struct ConeConfig {
  double k = 0.1;  // angular-extent constant of the aperture
  Curvature curvature{};

  ConeConfig() = default;
  ConeConfig(double k_value, Curvature cv) : k(k_value), curvature(cv) {
    if (!(std::isfinite(k) && k > 0.0))
      throw std::invalid_argument("ConeConfig: K must be finite and positive");
  }
};

// A pair is degenerate (coincident points) when |(c<x,y>)^2 - 1| falls below
// this; the public entry points signal it instead of returning NaN.
inline constexpr double kConeDegeneracyTol = 1e-12;

namespace detail {

template <typename Scalar>
Scalar spatial_norm(const LorentzPoint<Scalar>& x) {
  using std::sqrt;
  return sqrt(squared_norm(std::span<const Scalar>(x.space)));
}

template <typename Scalar>
void require_apex(const LorentzPoint<Scalar>& x) {
  double n2 = 0.0;
  for (const Scalar& s : x.space) {
    const double v = value_of(s);
    n2 += v * v;
  }
  if (n2 <= 0.0)
    throw std::domain_error("entailment cone: degenerate apex at the origin");
}

template <typename Scalar>
double pair_degeneracy(const LorentzPoint<Scalar>& x, const LorentzPoint<Scalar>& y,
                       Curvature cv) {
  double inner = 0.0;
  for (std::size_t i = 0; i < x.space.size(); ++i)
    inner += value_of(x.space[i]) * value_of(y.space[i]);
  inner -= value_of(x.time) * value_of(y.time);
  const double u = cv.c * inner;
  return std::abs(u * u - 1.0);
}

}  // namespace detail

// Half-aperture asin(min(1, 2K / (sqrt(c) |x_space|))). Points with
// |x_space| <= 2K/sqrt(c) sit in the clamp region and get the maximal
// aperture pi/2; beyond it the aperture strictly shrinks with radius.
template <typename Scalar>
Scalar half_aperture(const LorentzPoint<Scalar>& x, const ConeConfig& cfg) {
  require_valid_point(x, cfg.curvature, "half_aperture");
  detail::require_apex(x);
  Scalar snorm = detail::spatial_norm(x);
  return asin_clamped((2.0 * cfg.k / cfg.curvature.sqrt_c()) / snorm);
}

// Exterior angle
//   acos( (y_t + x_t c<x,y>) / (|x_space| sqrt((c<x,y>)^2 - 1)) ),
// with the square-root argument clamped to >= 0 and cushioned by 1e-15 so a
// nearly-coincident pair stays finite, and the acos argument clamped to
// [-1, 1]. Does not test for coincidence; callers that must reject it use
// exterior_angle instead.
template <typename Scalar>
Scalar exterior_angle_guarded(const LorentzPoint<Scalar>& x, const LorentzPoint<Scalar>& y,
                              const ConeConfig& cfg) {
  using std::sqrt;
  detail::require_apex(x);
  const double c = cfg.curvature.c;
  Scalar u = lorentz_inner(x, y) * c;
  Scalar num = y.time + x.time * u;
  Scalar q = clamp_min(u * u - 1.0, 0.0) + 1e-15;
  Scalar denom = detail::spatial_norm(x) * sqrt(q);
  return acos_clamped(num / denom);
}

template <typename Scalar>
Scalar exterior_angle(const LorentzPoint<Scalar>& x, const LorentzPoint<Scalar>& y,
                      const ConeConfig& cfg) {
  require_valid_point(x, cfg.curvature, "exterior_angle");
  require_valid_point(y, cfg.curvature, "exterior_angle");
  detail::require_apex(x);
  if (detail::pair_degeneracy(x, y, cfg.curvature) <= kConeDegeneracyTol)
    throw std::domain_error("exterior_angle: coincident or degenerate pair");
  return exterior_angle_guarded(x, y, cfg);
}

// Hinge violation max(0, ext(x,y) - aper(x)); zero iff y lies inside or on
// the cone boundary of x.
template <typename Scalar>
Scalar cone_violation(const LorentzPoint<Scalar>& x, const LorentzPoint<Scalar>& y,
                      const ConeConfig& cfg) {
  Scalar ext = exterior_angle(x, y, cfg);
  Scalar aper = half_aperture(x, cfg);
  return clamp_min(ext - aper, 0.0);
}

// Loss-path variant: a coincident apex/member pair contributes exactly zero
// instead of signalling. This is what makes rows whose "subset" equals the
// full tag set (singleton sets) trivially satisfied during training.
template <typename Scalar>
Scalar cone_violation_guarded(const LorentzPoint<Scalar>& x, const LorentzPoint<Scalar>& y,
                              const ConeConfig& cfg) {
  detail::require_apex(x);
  if (detail::pair_degeneracy(x, y, cfg.curvature) <= kConeDegeneracyTol)
    return make_like(x.time, 0.0);
  Scalar ext = exterior_angle_guarded(x, y, cfg);
  Scalar aper = half_aperture(x, cfg);
  return clamp_min(ext - aper, 0.0);
}

inline bool cone_contains(const LorentzPointD& x, const LorentzPointD& y,
                          const ConeConfig& cfg) {
  return cone_violation(x, y, cfg) == 0.0;
}

}  // namespace hyperco
