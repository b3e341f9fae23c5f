#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "mmcd/common.hpp"

// Measures on finite point sets and sampled densities on needles, the
// absolutely-continuous / singular split, and the Renyi entropy
// S_N(mu|m) = -int rho^{-1/N} dmu, where rho is the density of the
// absolutely continuous part of mu with respect to m.

namespace mmcd {

// Weighted atoms over the points of a host space, stored densely: w[i] is
// the mass at point i.
struct DiscreteMeasure {
  std::vector<double> w;

  DiscreteMeasure() = default;
  explicit DiscreteMeasure(std::vector<double> weights) : w(std::move(weights)) {}

  static DiscreteMeasure zero(std::size_t n) {
    return DiscreteMeasure(std::vector<double>(n, 0.0));
  }
  static DiscreteMeasure dirac(std::size_t n, std::size_t at, double mass = 1.0) {
    DiscreteMeasure m = zero(n);
    m.w.at(at) = mass;
    return m;
  }
  static DiscreteMeasure uniform(std::size_t n) {
    return DiscreteMeasure(std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  std::size_t size() const { return w.size(); }
  double total() const { return neumaier_sum(w); }
  bool is_probability(double tol = 1e-12) const {
    for (double x : w)
      if (x < 0.0) return false;
    return std::abs(total() - 1.0) <= tol;
  }
  std::vector<int> support() const {
    std::vector<int> s;
    for (std::size_t i = 0; i < w.size(); ++i)
      if (w[i] > 0.0) s.push_back(static_cast<int>(i));
    return s;
  }
};

struct AcDecomposition {
  std::vector<double> density;   // rho = dmu/dm where m > 0, else 0
  DiscreteMeasure singular;      // mass of mu on {m = 0}
};

// Pointwise Radon-Nikodym split mu = rho * m + singular. Exact on finite
// spaces, no mollification.
inline AcDecomposition ac_decompose(const DiscreteMeasure& mu,
                                    const DiscreteMeasure& m) {
  if (mu.size() != m.size())
    throw std::invalid_argument("ac_decompose: measures live on different spaces");
  AcDecomposition out;
  out.density.assign(mu.size(), 0.0);
  out.singular = DiscreteMeasure::zero(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (m.w[i] > 0.0)
      out.density[i] = mu.w[i] / m.w[i];
    else
      out.singular.w[i] = mu.w[i];
  }
  return out;
}

// S_{N'}(mu|m) = -sum_{m>0} rho^{1-1/N'} m. The singular part contributes
// zero, as does rho = 0.
inline double renyi_entropy(const DiscreteMeasure& mu, const DiscreteMeasure& m,
                            double Nprime) {
  if (!(Nprime > 1.0)) throw std::domain_error("renyi_entropy: N' must be > 1");
  if (mu.size() != m.size())
    throw std::invalid_argument("renyi_entropy: measures live on different spaces");
  KahanSum acc;
  const double e = 1.0 - 1.0 / Nprime;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (m.w[i] <= 0.0) continue;
    const double rho = mu.w[i] / m.w[i];
    if (rho > 0.0) acc.add(std::pow(rho, e) * m.w[i]);
  }
  return -acc.value();
}

// Nonnegative samples on the uniform grid {0, step, ..., L} of an interval.
// Values between nodes are the linear interpolant (the continuous
// representative); the mass convention is the trapezoid rule, i.e. node
// weights (step/2, step, ..., step, step/2).
struct DensityOnNeedle {
  double step = 0.0;
  std::vector<double> values;

  std::size_t nodes() const { return values.size(); }
  double length() const {
    return values.size() < 2 ? 0.0 : step * static_cast<double>(values.size() - 1);
  }
  bool valid() const {
    if (!(step > 0.0) || values.size() < 2) return false;
    for (double v : values)
      if (!(v >= 0.0)) return false;
    return true;
  }
  double node_x(std::size_t i) const { return step * static_cast<double>(i); }

  double value_at(double x) const {
    const double L = length();
    if (x <= 0.0) return values.front();
    if (x >= L) return values.back();
    const double s = x / step;
    std::size_t i = static_cast<std::size_t>(s);
    if (i >= values.size() - 1) i = values.size() - 2;
    const double f = s - static_cast<double>(i);
    return (1.0 - f) * values[i] + f * values[i + 1];
  }

  double mass() const {
    if (values.size() < 2) return 0.0;
    KahanSum acc;
    acc.add(0.5 * step * values.front());
    for (std::size_t i = 1; i + 1 < values.size(); ++i) acc.add(step * values[i]);
    acc.add(0.5 * step * values.back());
    return acc.value();
  }

  // Trapezoid node weight (the Voronoi cell length of node i in [0,L]).
  double cell(std::size_t i) const {
    return (i == 0 || i + 1 == values.size()) ? 0.5 * step : step;
  }
};

// Uniform partition of [0,L] targeting the requested step: the actual step
// divides L exactly.
template <class F>
DensityOnNeedle sample_on_grid(double L, double requested_step, F&& f) {
  if (!(L > 0.0) || !(requested_step > 0.0))
    throw std::invalid_argument("sample_on_grid: L and step must be positive");
  std::size_t n = static_cast<std::size_t>(std::lround(L / requested_step)) + 1;
  if (n < 2) n = 2;
  DensityOnNeedle d;
  d.step = L / static_cast<double>(n - 1);
  d.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) d.values[i] = f(d.node_x(i));
  return d;
}

// Renyi entropy of mu = rho * (h dx) against the needle measure h dx:
// trapezoidal quadrature of -int rho^{1-1/N'} h dx. rho is the density of
// mu relative to the needle measure, sampled on the same grid as h.
inline double renyi_entropy(const DensityOnNeedle& rho, const DensityOnNeedle& h,
                            double Nprime) {
  if (!(Nprime > 1.0)) throw std::domain_error("renyi_entropy: N' must be > 1");
  if (rho.values.size() != h.values.size() ||
      std::abs(rho.step - h.step) > 1e-12 * (h.step + 1.0))
    throw std::invalid_argument("renyi_entropy: densities live on different grids");
  KahanSum acc;
  const double e = 1.0 - 1.0 / Nprime;
  for (std::size_t i = 0; i < h.values.size(); ++i) {
    if (rho.values[i] <= 0.0 || h.values[i] <= 0.0) continue;
    acc.add(std::pow(rho.values[i], e) * h.values[i] * h.cell(i));
  }
  return -acc.value();
}

}  // namespace mmcd
