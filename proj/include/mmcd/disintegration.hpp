#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "mmcd/rays.hpp"
#include "mmcd/transport.hpp"

// Disintegration of a measure along a ray decomposition: a quotient measure
// q on the representatives and conditional probability measures m_alpha,
// each concentrated on its ray, with m restricted to T_u^b equal to
// int m_alpha q(dalpha). Rays of zero quotient mass are dropped.

namespace mmcd {

struct Disintegration {
  std::vector<int> ray;                      // indices into decomposition.rays, q > 0 only
  std::vector<double> q;                     // quotient masses, aligned with `ray`
  std::vector<DiscreteMeasure> conditional;  // probability measures, dense over the space

  DiscreteMeasure reconstruct(std::size_t n) const {
    DiscreteMeasure out = DiscreteMeasure::zero(n);
    for (std::size_t r = 0; r < ray.size(); ++r)
      for (std::size_t i = 0; i < n; ++i)
        if (conditional[r].w[i] != 0.0) out.w[i] += q[r] * conditional[r].w[i];
    return out;
  }

  int position_of_ray(int ray_index) const {
    for (std::size_t r = 0; r < ray.size(); ++r)
      if (ray[r] == ray_index) return static_cast<int>(r);
    return -1;
  }
};

// q(alpha) = m(f^{-1}(alpha)); conditional(alpha) = m restricted to the ray,
// normalized by q(alpha).
inline Disintegration disintegrate(const DiscreteMeasure& m, const RayDecomposition& dec) {
  Disintegration out;
  const std::size_t n = m.size();
  for (std::size_t r = 0; r < dec.rays.size(); ++r) {
    KahanSum acc;
    for (int x : dec.rays[r].members) acc.add(m.w[static_cast<std::size_t>(x)]);
    const double qr = acc.value();
    if (qr <= 0.0) continue;
    DiscreteMeasure cond = DiscreteMeasure::zero(n);
    for (int x : dec.rays[r].members)
      cond.w[static_cast<std::size_t>(x)] = m.w[static_cast<std::size_t>(x)] / qr;
    out.ray.push_back(static_cast<int>(r));
    out.q.push_back(qr);
    out.conditional.push_back(std::move(cond));
  }
  return out;
}

// Disintegration of a transport pair (mu0, mu1) whose coupling lives in
// Gamma_u: the quotient marginals q0 = f#(mu0) and q1 = f#(mu1) must agree
// ray by ray, and every moving coupling pair must stay inside one ray.
struct TransportMarginals {
  std::vector<int> ray;  // indices into decomposition.rays with q0 > 0
  std::vector<double> q0, q1;
  std::vector<DiscreteMeasure> mu0_cond, mu1_cond;  // normalized per-ray marginals
};

inline TransportMarginals disintegrate_transport_marginals(
    const DiscreteMeasure& mu0, const DiscreteMeasure& mu1, const RayDecomposition& dec,
    const std::vector<CouplingEntry>& coupling_support, double tol = 1e-10) {
  const std::size_t n = mu0.size();
  if (mu1.size() != n)
    throw std::invalid_argument("disintegrate_transport_marginals: size mismatch");

  for (std::size_t x = 0; x < n; ++x)
    if (dec.f[x] < 0 && (mu0.w[x] > tol || mu1.w[x] > tol))
      throw structural_error(
          "disintegrate_transport_marginals: marginal mass outside the non-branched "
          "transport set");

  for (const auto& e : coupling_support) {
    if (e.mass <= 0.0 || e.x == e.y) continue;
    const int ra = dec.ray_of(e.x), rb = dec.ray_of(e.y);
    if (ra < 0 || rb < 0 || ra != rb) {
      std::ostringstream os;
      os << "disintegrate_transport_marginals: coupling pair (" << e.x << "," << e.y
         << ") crosses rays";
      throw structural_error(os.str(), ra, rb);
    }
  }

  std::vector<double> q0(dec.rays.size(), 0.0), q1(dec.rays.size(), 0.0);
  for (std::size_t r = 0; r < dec.rays.size(); ++r) {
    KahanSum a0, a1;
    for (int x : dec.rays[r].members) {
      a0.add(mu0.w[static_cast<std::size_t>(x)]);
      a1.add(mu1.w[static_cast<std::size_t>(x)]);
    }
    q0[r] = a0.value();
    q1[r] = a1.value();
    if (std::abs(q0[r] - q1[r]) > tol) {
      std::ostringstream os;
      os << "disintegrate_transport_marginals: quotient marginals differ on ray "
         << dec.rays[r].representative << " (q0=" << q0[r] << ", q1=" << q1[r] << ")";
      throw structural_error(os.str(), static_cast<int>(r), static_cast<int>(r));
    }
  }

  TransportMarginals out;
  for (std::size_t r = 0; r < dec.rays.size(); ++r) {
    if (q0[r] <= 0.0) continue;
    DiscreteMeasure c0 = DiscreteMeasure::zero(n), c1 = DiscreteMeasure::zero(n);
    for (int x : dec.rays[r].members) {
      c0.w[static_cast<std::size_t>(x)] = mu0.w[static_cast<std::size_t>(x)] / q0[r];
      c1.w[static_cast<std::size_t>(x)] = mu1.w[static_cast<std::size_t>(x)] / q1[r];
    }
    out.ray.push_back(static_cast<int>(r));
    out.q0.push_back(q0[r]);
    out.q1.push_back(q1[r]);
    out.mu0_cond.push_back(std::move(c0));
    out.mu1_cond.push_back(std::move(c1));
  }
  return out;
}

}  // namespace mmcd
