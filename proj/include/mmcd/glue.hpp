#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmcd/cd_verify.hpp"
#include "mmcd/disintegration.hpp"
#include "mmcd/rays.hpp"
#include "mmcd/transport.hpp"

// The constructive direction: one-dimensional geodesics on each needle via
// the monotone rearrangement, the pointwise density inequality along them,
// and the glued plan nu = sum_alpha q0(alpha) nu_alpha, which is an exact
// W_1-geodesic between the original marginals.

namespace mmcd {

namespace detail {

// Cumulative mass of the piecewise-linear density f (sampled at nodes) on
// [0, node_k]; trapezoid-consistent.
inline std::vector<double> cdf_at_nodes(const DensityOnNeedle& f) {
  std::vector<double> F(f.values.size(), 0.0);
  KahanSum acc;
  for (std::size_t i = 1; i < f.values.size(); ++i) {
    acc.add(0.5 * f.step * (f.values[i - 1] + f.values[i]));
    F[i] = acc.value();
  }
  return F;
}

// Inverse CDF for a piecewise-linear density: quadratic solve per cell.
inline double cdf_inverse(const DensityOnNeedle& f, const std::vector<double>& F, double m) {
  const std::size_t n = f.values.size();
  if (m <= 0.0) return 0.0;
  if (m >= F.back()) return f.length();
  std::size_t lo = 0, hi = n - 1;
  while (lo + 1 < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (F[mid] <= m)
      lo = mid;
    else
      hi = mid;
  }
  const double rem = m - F[lo];
  const double f0 = f.values[lo], f1 = f.values[lo + 1];
  const double slope = (f1 - f0) / f.step;
  double s;
  if (std::abs(slope) < 1e-13 * (std::abs(f0) + std::abs(f1) + 1.0)) {
    s = f0 > 0.0 ? rem / f0 : 0.0;
  } else {
    const double disc = f0 * f0 + 2.0 * slope * rem;
    s = (-f0 + std::sqrt(std::max(disc, 0.0))) / slope;
  }
  s = std::clamp(s, 0.0, f.step);
  return f.node_x(lo) + s;
}

}  // namespace detail

// Monotone interpolation between two densities on one needle. Positions are
// stored per quantile boundary; interpolant densities (relative to h) are
// binned back onto the needle grid for each sampled t.
struct NeedlePlan {
  Needle needle;
  int quantiles = 512;
  std::vector<double> s0, s1;  // quantile boundary positions (size quantiles+1)
  std::vector<double> t_samples;
  std::vector<DensityOnNeedle> rho_t;  // interpolant densities relative to h
  DensityOnNeedle rho0, rho1;          // the inputs (relative to h)

  double boundary_at(std::size_t b, double t) const {
    return (1.0 - t) * s0[b] + t * s1[b];
  }
};

namespace detail {

// Bins quantile segments (each carrying mass 1/quantiles, uniform on its
// interval) onto the trapezoid cells of the needle grid and divides by
// cell length and h. Total needle mass of the result is exactly the number
// of segments / quantiles.
inline DensityOnNeedle bin_quantiles_to_density(const Needle& needle,
                                                const std::vector<double>& sb) {
  const DensityOnNeedle& h = needle.h;
  const std::size_t n = h.values.size();
  const std::size_t nq = sb.size() - 1;
  const double dq = 1.0 / static_cast<double>(nq);
  std::vector<double> cell_mass(n, 0.0);
  const double half = 0.5 * h.step;
  auto cell_of = [&](double x) -> std::size_t {
    if (x <= half) return 0;
    const std::size_t c = static_cast<std::size_t>((x + half) / h.step);
    return std::min(c, n - 1);
  };
  auto cell_hi = [&](std::size_t c) {
    return c + 1 == n ? h.length() : h.node_x(c) + half;
  };
  for (std::size_t k = 0; k < nq; ++k) {
    double a = sb[k], b = sb[k + 1];
    if (b < a) std::swap(a, b);
    const double w = b - a;
    std::size_t c = cell_of(a);
    if (w <= 0.0) {
      cell_mass[c] += dq;
      continue;
    }
    double pos = a;
    while (pos < b) {
      const double top = std::min(b, cell_hi(c));
      cell_mass[c] += dq * (top - pos) / w;
      if (top >= b || c + 1 >= n) break;
      pos = top;
      ++c;
    }
  }
  DensityOnNeedle rho;
  rho.step = h.step;
  rho.values.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double cell = h.cell(i);
    if (h.values[i] > 0.0) rho.values[i] = cell_mass[i] / (cell * h.values[i]);
  }
  return rho;
}

}  // namespace detail

// Builds the monotone (quantile) coupling between mu0 = rho0 h dx and
// mu1 = rho1 h dx and the displacement interpolants along it. Both inputs
// are densities relative to the needle measure and must carry needle-mass 1
// within mass_tol.
inline NeedlePlan needle_geodesic(const Needle& needle, const DensityOnNeedle& rho0,
                                  const DensityOnNeedle& rho1,
                                  std::vector<double> t_samples = {}, int quantiles = 512,
                                  double mass_tol = 1e-8) {
  if (!needle.valid()) throw std::invalid_argument("needle_geodesic: invalid needle");
  if (rho0.values.size() != needle.h.values.size() ||
      rho1.values.size() != needle.h.values.size())
    throw std::invalid_argument("needle_geodesic: density grids do not match the needle");
  if (t_samples.empty()) t_samples = {0.0, 0.25, 0.5, 0.75, 1.0};

  NeedlePlan plan;
  plan.needle = needle;
  plan.quantiles = quantiles;
  plan.t_samples = t_samples;
  plan.rho0 = rho0;
  plan.rho1 = rho1;

  DensityOnNeedle f0, f1;  // Lebesgue densities rho * h
  f0.step = f1.step = needle.h.step;
  f0.values.resize(needle.h.values.size());
  f1.values.resize(needle.h.values.size());
  for (std::size_t i = 0; i < needle.h.values.size(); ++i) {
    f0.values[i] = rho0.values[i] * needle.h.values[i];
    f1.values[i] = rho1.values[i] * needle.h.values[i];
  }
  const double m0 = f0.mass(), m1 = f1.mass();
  if (std::abs(m0 - 1.0) > mass_tol || std::abs(m1 - 1.0) > mass_tol)
    throw std::invalid_argument("needle_geodesic: inputs are not probability densities");

  std::vector<double> F0 = detail::cdf_at_nodes(f0);
  std::vector<double> F1 = detail::cdf_at_nodes(f1);

  plan.s0.resize(static_cast<std::size_t>(quantiles) + 1);
  plan.s1.resize(static_cast<std::size_t>(quantiles) + 1);
  for (int b = 0; b <= quantiles; ++b) {
    const double q = static_cast<double>(b) / static_cast<double>(quantiles);
    plan.s0[static_cast<std::size_t>(b)] = detail::cdf_inverse(f0, F0, q * F0.back());
    plan.s1[static_cast<std::size_t>(b)] = detail::cdf_inverse(f1, F1, q * F1.back());
  }

  for (double t : t_samples) {
    std::vector<double> sb(plan.s0.size());
    for (std::size_t b = 0; b < sb.size(); ++b) sb[b] = plan.boundary_at(b, t);
    plan.rho_t.push_back(detail::bin_quantiles_to_density(needle, sb));
  }
  return plan;
}

// Pointwise density inequality along the needle plan at sampled quantiles:
//   rho_t^{-1/N'}(g_t) >= tau^{(1-t)}_{K,N'}(d) rho_0^{-1/N'}(g_0)
//                       + tau^{(t)}_{K,N'}(d) rho_1^{-1/N'}(g_1)
// with d = |g_1 - g_0| and the densities taken in change-of-variables form
// on the quantile grid (self-consistent with the monotone map).
inline CheckReport needle_plan_pointwise_check(const NeedlePlan& plan, double K, double N,
                                               std::vector<double> nprime_samples = {},
                                               double tol = 1e-5) {
  CheckReport rep;
  rep.check = "needle-plan-pointwise";
  rep.tolerance = tol;
  if (nprime_samples.empty()) nprime_samples = detail::default_nprimes(N);
  const DensityOnNeedle& h = plan.needle.h;
  const std::size_t nq = plan.s0.size() - 1;

  auto cov_density = [&](double lo, double hi, double mid) {
    const double width = hi - lo;
    const double hv = h.value_at(mid);
    if (width <= 0.0 || hv <= 0.0) return -1.0;  // degenerate segment
    return 1.0 / (static_cast<double>(nq) * width * hv);
  };

  for (std::size_t k = 0; k < nq; ++k) {
    const double g0 = 0.5 * (plan.s0[k] + plan.s0[k + 1]);
    const double g1 = 0.5 * (plan.s1[k] + plan.s1[k + 1]);
    const double d = std::abs(g1 - g0);
    const double r0 = cov_density(plan.s0[k], plan.s0[k + 1], g0);
    const double r1 = cov_density(plan.s1[k], plan.s1[k + 1], g1);
    if (r0 <= 0.0 || r1 <= 0.0) {
      rep.note("zero-density quantile segment " + std::to_string(k));
      continue;
    }
    for (double t : plan.t_samples) {
      if (!(t >= 0.0 && t <= 1.0)) continue;
      const double lo = (1.0 - t) * plan.s0[k] + t * plan.s1[k];
      const double hi = (1.0 - t) * plan.s0[k + 1] + t * plan.s1[k + 1];
      const double gt = 0.5 * (lo + hi);
      const double rt = cov_density(std::min(lo, hi), std::max(lo, hi), gt);
      if (rt <= 0.0) {
        rep.note("zero-density interpolated segment " + std::to_string(k));
        continue;
      }
      for (double Np : nprime_samples) {
        const ExtReal t0 = tau(1.0 - t, K, Np, d);
        const ExtReal t1 = tau(t, K, Np, d);
        Witness w;
        w.label = "pointwise-density";
        w.params = {{"quantile", (static_cast<double>(k) + 0.5) / static_cast<double>(nq)},
                    {"t", t},
                    {"Nprime", Np}};
        if (t0.is_inf() || t1.is_inf()) {
          rep.add_infinite_violation(std::move(w));
          continue;
        }
        const double lhs = std::pow(rt, -1.0 / Np);
        const double rhs = t0.value * std::pow(r0, -1.0 / Np) + t1.value * std::pow(r1, -1.0 / Np);
        rep.add_constraint(lhs - rhs, std::move(w));
      }
    }
  }
  return rep;
}

// A glued dynamic plan together with everything produced on the way.
struct GluedPlan {
  DynamicPlan plan;
  std::vector<int> chain_ray;  // ray index per plan entry, -1 for static mass off T_u^b
  std::vector<double> potential;
  Coupling endpoint;
  double w1 = 0.0;
  TransportStructure structure;
  RayDecomposition decomposition;
  TransportMarginals marginals;
};

namespace detail {

struct RayAtom {
  std::size_t pos;  // position in ray member order
  double mass;
};

// Monotone (quantile) pairing of two atom lists sorted by ray parameter.
inline std::vector<std::tuple<std::size_t, std::size_t, double>> monotone_pairs(
    std::vector<RayAtom> a, std::vector<RayAtom> b) {
  std::vector<std::tuple<std::size_t, std::size_t, double>> out;
  std::size_t i = 0, j = 0;
  double r0 = a.empty() ? 0.0 : a[0].mass;
  double r1 = b.empty() ? 0.0 : b[0].mass;
  while (i < a.size() && j < b.size()) {
    const double m = std::min(r0, r1);
    if (m > 0.0) out.emplace_back(a[i].pos, b[j].pos, m);
    r0 -= m;
    r1 -= m;
    if (r0 <= 0.0) {
      ++i;
      if (i < a.size()) r0 = a[i].mass;
    }
    if (r1 <= 0.0) {
      ++j;
      if (j < b.size()) r1 = b[j].mass;
    }
  }
  return out;
}

}  // namespace detail

// Glues per-ray monotone geodesics into one dynamic plan:
//  - u (given or computed from the dual LP) certifies optimality,
//  - mass off the non-branched transport set must coincide in mu0 and mu1
//    and is left in place as static chains,
//  - on each ray the marginals are coupled by the monotone rearrangement
//    and every coupled pair becomes a constant-speed chain through the
//    ray's registered members.
inline GluedPlan glue_geodesics(const FiniteMMSpace& space, const DiscreteMeasure& mu0,
                                const DiscreteMeasure& mu1,
                                const std::vector<double>* u_given = nullptr,
                                double gamma_tol = -1.0) {
  const std::size_t n = static_cast<std::size_t>(space.n());
  if (mu0.size() != n || mu1.size() != n)
    throw std::invalid_argument("glue_geodesics: marginals do not match the space");

  GluedPlan out;
  out.w1 = wasserstein_p(space, mu0, mu1, 1.0).value;

  if (u_given != nullptr) {
    out.potential = *u_given;
    if (!is_one_lipschitz(out.potential, space, 1e-9).ok)
      throw std::invalid_argument("glue_geodesics: supplied u is not 1-Lipschitz");
    KahanSum acc;
    for (std::size_t i = 0; i < n; ++i)
      acc.add(out.potential[i] * (mu0.w[i] - mu1.w[i]));
    if (std::abs(acc.value() - out.w1) > 1e-9 * std::max(1.0, out.w1))
      throw std::invalid_argument(
          "glue_geodesics: supplied u is not a Kantorovich potential for (mu0, mu1)");
  } else {
    out.potential = kantorovich_potential(space, mu0, mu1);
  }

  out.structure = build_gamma(space, out.potential, gamma_tol);
  branching_sets(out.structure, space);
  out.decomposition = decompose_rays(out.structure, space, out.potential);

  // Split the marginals at the non-branched transport set.
  DiscreteMeasure mu0_tb = DiscreteMeasure::zero(n), mu1_tb = DiscreteMeasure::zero(n);
  for (std::size_t x = 0; x < n; ++x) {
    if (out.decomposition.f[x] >= 0) {
      mu0_tb.w[x] = mu0.w[x];
      mu1_tb.w[x] = mu1.w[x];
    } else {
      if (std::abs(mu0.w[x] - mu1.w[x]) > 1e-12)
        throw structural_error(
            "glue_geodesics: moving mass at point " + space.ids[x] +
            " outside the non-branched transport set");
      if (mu0.w[x] > 0.0) {
        out.plan.entries.push_back({GeodesicChain::static_at(static_cast<int>(x)), mu0.w[x]});
        out.chain_ray.push_back(-1);
      }
    }
  }

  const double moving = mu0_tb.total();
  if (moving > 0.0) {
    // The restricted coupling certifies that transport stays inside rays.
    Coupling restricted = wasserstein_p(space, mu0_tb, mu1_tb, 1.0).coupling;
    out.marginals = disintegrate_transport_marginals(mu0_tb, mu1_tb, out.decomposition,
                                                     restricted.entries);

    for (std::size_t r = 0; r < out.marginals.ray.size(); ++r) {
      const Ray& ray =
          out.decomposition.rays[static_cast<std::size_t>(out.marginals.ray[r])];
      std::vector<detail::RayAtom> a, b;
      for (std::size_t k = 0; k < ray.members.size(); ++k) {
        const double w0 = mu0_tb.w[static_cast<std::size_t>(ray.members[k])];
        const double w1m = mu1_tb.w[static_cast<std::size_t>(ray.members[k])];
        if (w0 > 0.0) a.push_back({k, w0});
        if (w1m > 0.0) b.push_back({k, w1m});
      }
      for (const auto& [k0, k1, mass] : detail::monotone_pairs(std::move(a), std::move(b))) {
        GeodesicChain chain;
        if (k0 == k1) {
          chain = GeodesicChain::static_at(ray.members[k0]);
        } else {
          const double len = std::abs(ray.params[k1] - ray.params[k0]);
          const std::ptrdiff_t dir = k1 > k0 ? 1 : -1;
          for (std::ptrdiff_t k = static_cast<std::ptrdiff_t>(k0);; k += dir) {
            chain.nodes.push_back(ray.members[static_cast<std::size_t>(k)]);
            chain.times.push_back(
                std::abs(ray.params[static_cast<std::size_t>(k)] - ray.params[k0]) / len);
            if (k == static_cast<std::ptrdiff_t>(k1)) break;
          }
          chain.times.front() = 0.0;
          chain.times.back() = 1.0;
        }
        out.plan.entries.push_back({std::move(chain), mass});
        out.chain_ray.push_back(out.marginals.ray[r]);
      }
    }
  }

  out.endpoint = out.plan.endpoint_coupling();
  const double plan_cost = out.plan.cost(space, 1.0);
  if (std::abs(plan_cost - out.w1) > 1e-9 * std::max(1.0, out.w1))
    throw std::runtime_error("glue_geodesics: glued plan cost " + std::to_string(plan_cost) +
                             " does not realize W_1 = " + std::to_string(out.w1));
  return out;
}

// W_1(mu_t, mu_s) = |t-s| W_1(mu_0, mu_1) at all sampled parameter pairs.
inline CheckReport w1_geodesic_check(const FiniteMMSpace& space, const DynamicPlan& plan,
                                     std::vector<double> t_samples = {}, double tol = 1e-8) {
  CheckReport rep;
  rep.check = "w1-geodesic";
  rep.tolerance = tol;
  if (t_samples.empty()) t_samples = {0.0, 0.25, 0.5, 0.75, 1.0};
  std::sort(t_samples.begin(), t_samples.end());
  const std::size_t n = static_cast<std::size_t>(space.n());
  const DiscreteMeasure m0 = interpolate_at(plan, 0.0, n);
  const DiscreteMeasure m1 = interpolate_at(plan, 1.0, n);
  const double w1 = wasserstein_p(space, m0, m1, 1.0).value;
  for (std::size_t i = 0; i < t_samples.size(); ++i)
    for (std::size_t j = i + 1; j < t_samples.size(); ++j) {
      const double s = t_samples[i], t = t_samples[j];
      const DiscreteMeasure ms = interpolate_at(plan, s, n);
      const DiscreteMeasure mt = interpolate_at(plan, t, n);
      const double v = wasserstein_p(space, ms, mt, 1.0).value;
      Witness w;
      w.label = "w1-linearity";
      w.params = {{"s", s}, {"t", t}, {"w1", v}, {"expected", (t - s) * w1}};
      rep.add_constraint(-std::abs(v - (t - s) * w1), std::move(w));
    }
  return rep;
}

// Executable form of the gluing direction: the glued plan must satisfy the
// entropy convexity inequality whenever every needle passed its 1D check.
inline CheckReport verify_glued_cd1(const FiniteMMSpace& space, const GluedPlan& glued,
                                    const DiscreteMeasure& mu0, const DiscreteMeasure& mu1,
                                    double K, double N, std::vector<double> t_samples = {},
                                    std::vector<double> nprime_samples = {},
                                    double tol = 1e-9) {
  CheckReport rep = cd1_entropy_check(space, glued.plan, mu0, mu1, K, N,
                                      std::move(t_samples), std::move(nprime_samples), tol);
  rep.check = "glued-cd1";
  return rep;
}

}  // namespace mmcd
