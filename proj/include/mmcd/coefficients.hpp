#pragma once

#include <cmath>
#include <stdexcept>

#include "mmcd/common.hpp"

// Model-space distortion coefficients sigma, tau and the diameter bound
// d_max. These are the comparison functions of the constant-curvature model
// spaces: sine ratios for positive curvature, sinh ratios for negative,
// and the flat limit t in between. Every degenerate branch is handled
// explicitly; past the conjugate point the value is +infinity.

namespace mmcd {

// Extended real in [0, +inf].
struct ExtReal {
  double value = 0.0;
  bool infinite = false;

  static ExtReal inf() { return ExtReal{0.0, true}; }
  static ExtReal of(double v) { return ExtReal{v, false}; }

  bool is_inf() const { return infinite; }

  // Finite value; throws on the infinite branch.
  double finite() const {
    if (infinite) throw std::logic_error("ExtReal: value is infinite");
    return value;
  }
};

struct CurvatureDimension {
  double K = 0.0;
  double N = 1.0;
};

// All branch comparisons share one absolute tolerance so the case split
// behaves reproducibly near its boundaries.
struct CoeffConfig {
  double branch_tol = 1e-12;
};

namespace detail {

// sinh(t*b)/sinh(b), stable for large b where sinh overflows.
inline double sinh_ratio(double t, double b) {
  if (b < 30.0) return std::sinh(t * b) / std::sinh(b);
  return std::exp((t - 1.0) * b) * (-std::expm1(-2.0 * t * b)) /
         (-std::expm1(-2.0 * b));
}

}  // namespace detail

// sigma_{K,N}^{(t)}(theta):
//   +inf                                   if K theta^2 >= N pi^2
//   sin(t theta sqrt(K/N)) / sin(theta sqrt(K/N))   if 0 < K theta^2 < N pi^2
//   t                                      if K theta^2 = 0
//   sinh(t theta sqrt(-K/N)) / sinh(theta sqrt(-K/N)) if K theta^2 < 0, N > 0
// The case K theta^2 < 0 with N = 0 is rejected: it is inconsistent with the
// N >= 0 domain of the remaining cases.
inline ExtReal sigma(double t, double K, double N, double theta,
                     const CoeffConfig& cfg = {}) {
  if (!(t >= 0.0 && t <= 1.0))
    throw std::domain_error("sigma: t must lie in [0,1]");
  if (!(theta >= 0.0)) throw std::domain_error("sigma: theta must be >= 0");
  if (!(N >= 0.0)) throw std::domain_error("sigma: N must be >= 0");

  const double q = K * theta * theta;
  if (q < 0.0 && N == 0.0)
    throw std::domain_error("sigma: branch K*theta^2 < 0 with N = 0 is undefined");

  // Removable singularity at K theta^2 = 0: the ratio tends to t.
  if (q == 0.0 || (N > 0.0 && std::abs(q) / N < cfg.branch_tol))
    return ExtReal::of(t);

  if (q > 0.0) {
    if (q >= N * kPi * kPi) return ExtReal::inf();
    const double a = theta * std::sqrt(K / N);
    return ExtReal::of(std::sin(t * a) / std::sin(a));
  }
  const double b = theta * std::sqrt(-K / N);
  return ExtReal::of(detail::sinh_ratio(t, b));
}

// tau_{K,N}^{(t)}(theta) = t^{1/N} sigma_{K,N-1}^{(t)}(theta)^{1-1/N} for
// N > 1, with the conventions inf^{1-1/N} = inf and 0 * inf = 0 (t = 0).
// For N = 1: t if K <= 0, +inf if K > 0.
inline ExtReal tau(double t, double K, double N, double theta,
                   const CoeffConfig& cfg = {}) {
  if (!(t >= 0.0 && t <= 1.0))
    throw std::domain_error("tau: t must lie in [0,1]");
  if (!(theta >= 0.0)) throw std::domain_error("tau: theta must be >= 0");
  if (!(N >= 1.0)) throw std::domain_error("tau: N must be >= 1");

  if (std::abs(N - 1.0) <= cfg.branch_tol)
    return K <= 0.0 ? ExtReal::of(t) : ExtReal::inf();

  const ExtReal s = sigma(t, K, N - 1.0, theta, cfg);
  if (s.is_inf()) return t == 0.0 ? ExtReal::of(0.0) : ExtReal::inf();
  return ExtReal::of(std::pow(t, 1.0 / N) * std::pow(s.value, 1.0 - 1.0 / N));
}

// Diameter bound of the (K,N) model space: pi / sqrt(K/N) for K > 0 and
// finite N, +inf otherwise.
inline ExtReal d_max(double K, double N) {
  if (K > 0.0 && std::isfinite(N)) return ExtReal::of(kPi / std::sqrt(K / N));
  return ExtReal::inf();
}

}  // namespace mmcd
