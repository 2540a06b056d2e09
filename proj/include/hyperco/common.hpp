#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace hyperco {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unreadable or malformed input data (CLI exit code 2).
struct DataError : Error {
  using Error::Error;
};

// Structurally broken artifacts: bad magic, truncation, schema violations (CLI exit code 2).
struct FormatError : DataError {
  using DataError::DataError;
};

// Non-finite loss during optimization (CLI exit code 3).
struct DivergenceError : Error {
  using Error::Error;
};

// Scalar helpers shared by the plain-double and autodiff instantiations of the
// geometry templates. The clamped inverse trig/hyperbolic functions treat the
// clamped region as constant, so their derivative there is zero.
inline double value_of(double x) { return x; }

inline double clamp_min(double x, double lo) { return x < lo ? lo : x; }
inline double clamp_max(double x, double hi) { return x > hi ? hi : x; }

inline double acosh_clamped(double u) { return u <= 1.0 ? 0.0 : std::acosh(u); }

inline double asin_clamped(double u) {
  if (u >= 1.0) return std::asin(1.0);
  if (u <= -1.0) return std::asin(-1.0);
  return std::asin(u);
}

inline double acos_clamped(double u) {
  if (u >= 1.0) return 0.0;
  if (u <= -1.0) return std::acos(-1.0);
  return std::acos(u);
}

// Constant with the same scalar type as `exemplar`; the autodiff overload
// creates a fresh leaf on the exemplar's tape.
inline double make_like(double /*exemplar*/, double v) { return v; }

}  // namespace hyperco
