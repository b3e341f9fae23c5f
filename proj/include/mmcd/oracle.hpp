#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include "mmcd/coefficients.hpp"
#include "mmcd/metric_space.hpp"
#include "mmcd/transport.hpp"

// Independent brute-force references, used by the test suite and behind an
// explicit --oracle flag, never silently substituted for the main path:
//  - exact optimal transport in rational arithmetic (successive shortest
//    augmenting paths, a different algorithm than the main-path simplex),
//  - distortion coefficients at 50 decimal digits,
//  - finite-difference concavity defects on needles.

namespace mmcd {

struct OracleConfig {
  int max_points = 8;   // caps |supp mu0| x |supp mu1| at max_points^2
  int digits = 50;      // informational; evaluation uses cpp_bin_float_50
  double fd_step = -1;  // <0: use the needle grid step
};

namespace oracle_detail {

using rational = boost::multiprecision::cpp_rational;
using hp = boost::multiprecision::cpp_bin_float_50;

// Exact min-cost transport by successive shortest augmenting paths with
// Bellman-Ford labels, all in rational arithmetic. Supplies, demands and
// costs are dyadic rationals (exact images of the doubles), so the optimum
// is exact for the given inputs.
inline rational min_cost_transport(const std::vector<rational>& supply,
                                   const std::vector<rational>& demand,
                                   const std::vector<rational>& cost) {
  const std::size_t ns = supply.size(), nd = demand.size();
  std::vector<rational> rem_s = supply, rem_d = demand;
  std::vector<std::vector<rational>> flow(ns, std::vector<rational>(nd, 0));

  auto any_positive = [](const std::vector<rational>& v) {
    for (const auto& x : v)
      if (x > 0) return true;
    return false;
  };

  while (any_positive(rem_s)) {
    // Shortest path over residual arcs from any unsatisfied source to any
    // unsatisfied sink. Nodes: sources 0..ns-1, sinks ns..ns+nd-1.
    const std::size_t nn = ns + nd;
    std::vector<rational> dist(nn, 0);
    std::vector<char> reach(nn, 0);
    std::vector<int> prev(nn, -1);
    for (std::size_t i = 0; i < ns; ++i)
      if (rem_s[i] > 0) reach[i] = 1;

    for (std::size_t pass = 0; pass < nn; ++pass) {
      bool changed = false;
      for (std::size_t i = 0; i < ns; ++i)
        for (std::size_t j = 0; j < nd; ++j) {
          const rational& c = cost[i * nd + j];
          // forward arc i -> sink j
          if (reach[i]) {
            const rational cand = dist[i] + c;
            if (!reach[ns + j] || cand < dist[ns + j]) {
              reach[ns + j] = 1;
              dist[ns + j] = cand;
              prev[ns + j] = static_cast<int>(i);
              changed = true;
            }
          }
          // residual arc sink j -> source i (only with positive flow)
          if (reach[ns + j] && flow[i][j] > 0) {
            const rational cand = dist[ns + j] - c;
            if (!reach[i] || cand < dist[i]) {
              reach[i] = 1;
              dist[i] = cand;
              prev[i] = static_cast<int>(ns + j);
              changed = true;
            }
          }
        }
      if (!changed) break;
    }

    // Lowest-index reachable unsatisfied sink with minimal distance.
    int best = -1;
    for (std::size_t j = 0; j < nd; ++j)
      if (rem_d[j] > 0 && reach[ns + j])
        if (best < 0 || dist[ns + j] < dist[static_cast<std::size_t>(best)])
          best = static_cast<int>(ns + j);
    if (best < 0) throw std::runtime_error("brute_force_ot: infeasible instance");

    // Bottleneck along the path.
    rational bottleneck = rem_d[static_cast<std::size_t>(best) - ns];
    for (int v = best; prev[static_cast<std::size_t>(v)] != -1;) {
      const int p = prev[static_cast<std::size_t>(v)];
      if (v >= static_cast<int>(ns)) {
        // arc p -> v is forward: unlimited capacity
      } else {
        const std::size_t j = static_cast<std::size_t>(p) - ns;
        bottleneck = std::min(bottleneck, flow[static_cast<std::size_t>(v)][j]);
      }
      v = p;
    }
    int head = best;
    while (prev[static_cast<std::size_t>(head)] != -1) head = prev[static_cast<std::size_t>(head)];
    bottleneck = std::min(bottleneck, rem_s[static_cast<std::size_t>(head)]);
    if (bottleneck <= 0) throw std::runtime_error("brute_force_ot: zero augmentation");

    for (int v = best; prev[static_cast<std::size_t>(v)] != -1;) {
      const int p = prev[static_cast<std::size_t>(v)];
      if (v >= static_cast<int>(ns))
        flow[static_cast<std::size_t>(p)][static_cast<std::size_t>(v) - ns] += bottleneck;
      else
        flow[static_cast<std::size_t>(v)][static_cast<std::size_t>(p) - ns] -= bottleneck;
      v = p;
    }
    rem_s[static_cast<std::size_t>(head)] -= bottleneck;
    rem_d[static_cast<std::size_t>(best) - ns] -= bottleneck;
  }

  rational total = 0;
  for (std::size_t i = 0; i < ns; ++i)
    for (std::size_t j = 0; j < nd; ++j) total += flow[i][j] * cost[i * nd + j];
  return total;
}

}  // namespace oracle_detail

// Exact optimum of int d^p dpi over couplings; returns the W_p value
// (p-th root taken in double precision). Costs are the exact rational
// images of the same double costs the main path uses.
inline double brute_force_ot(const FiniteMMSpace& space, const DiscreteMeasure& mu0,
                             const DiscreteMeasure& mu1, double p,
                             const OracleConfig& cfg = {}) {
  using oracle_detail::rational;
  const std::vector<int> s0 = mu0.support();
  const std::vector<int> s1 = mu1.support();
  if (s0.empty() || s1.empty())
    throw std::invalid_argument("brute_force_ot: empty marginal support");
  if (s0.size() * s1.size() >
      static_cast<std::size_t>(cfg.max_points) * static_cast<std::size_t>(cfg.max_points))
    throw std::runtime_error("brute_force_ot: instance exceeds the oracle size cap");

  const double t0 = mu0.total(), t1 = mu1.total();
  std::vector<rational> a, b;
  for (int i : s0) a.emplace_back(mu0.w[static_cast<std::size_t>(i)]);
  // Scale demands so rational totals match exactly.
  rational ra = 0, rb = 0;
  for (const auto& x : a) ra += x;
  for (int j : s1) b.emplace_back(mu1.w[static_cast<std::size_t>(j)]);
  for (const auto& x : b) rb += x;
  if (rb == 0) throw std::invalid_argument("brute_force_ot: zero demand");
  if (std::abs(t0 - t1) > 1e-9 * std::max(1.0, std::max(t0, t1)))
    throw std::invalid_argument("brute_force_ot: marginal masses differ beyond tolerance");
  for (auto& x : b) x = x * ra / rb;

  std::vector<rational> cost(s0.size() * s1.size());
  for (std::size_t i = 0; i < s0.size(); ++i)
    for (std::size_t j = 0; j < s1.size(); ++j) {
      const double dd = space.d(s0[i], s1[j]);
      cost[i * s1.size() + j] =
          rational(p == 1.0 ? dd : (p == 2.0 ? dd * dd : std::pow(dd, p)));
    }

  const rational opt = oracle_detail::min_cost_transport(a, b, cost);
  const double obj = static_cast<double>(opt);
  return p == 1.0 ? obj : (p == 2.0 ? std::sqrt(obj) : std::pow(obj, 1.0 / p));
}

struct HpCoefficients {
  bool sigma_inf = false;
  double sigma = 0.0;
  bool tau_inf = false;
  double tau = 0.0;
};

// Distortion coefficients evaluated at 50 decimal digits straight from the
// case split, with no double-precision shortcuts. Inputs convert exactly.
inline HpCoefficients hp_sigma_tau(double t, double K, double N, double theta) {
  using oracle_detail::hp;
  if (!(t >= 0.0 && t <= 1.0)) throw std::domain_error("hp_sigma_tau: t must lie in [0,1]");
  if (!(theta >= 0.0)) throw std::domain_error("hp_sigma_tau: theta must be >= 0");
  if (!(N >= 1.0)) throw std::domain_error("hp_sigma_tau: N must be >= 1");
  const hp pi_hp = acos(hp(-1));

  auto sigma_hp = [&](const hp& tt, const hp& KK, const hp& NN,
                      const hp& th) -> std::pair<bool, hp> {
    const hp q = KK * th * th;
    if (q < 0 && NN == 0)
      throw std::domain_error("hp_sigma_tau: branch K*theta^2 < 0 with N = 0 is undefined");
    if (q == 0) return {false, tt};
    if (q > 0) {
      if (q >= NN * pi_hp * pi_hp) return {true, hp(0)};
      const hp a = th * sqrt(KK / NN);
      return {false, sin(tt * a) / sin(a)};
    }
    const hp bexp = th * sqrt(-KK / NN);
    return {false, sinh(tt * bexp) / sinh(bexp)};
  };

  HpCoefficients out;
  const hp tt(t), KK(K), NN(N), th(theta);
  const auto [s_inf, s_val] = sigma_hp(tt, KK, NN, th);
  out.sigma_inf = s_inf;
  if (!s_inf) out.sigma = static_cast<double>(s_val);

  if (N == 1.0) {
    out.tau_inf = K > 0.0;
    if (!out.tau_inf) out.tau = t;
  } else {
    const auto [sm_inf, sm_val] = sigma_hp(tt, KK, NN - 1, th);
    if (sm_inf) {
      if (t == 0.0) {
        out.tau = 0.0;
      } else {
        out.tau_inf = true;
      }
    } else {
      out.tau = static_cast<double>(pow(tt, 1 / NN) * pow(sm_val, 1 - 1 / NN));
    }
  }
  return out;
}

struct ConcavityDefect {
  double max_defect = -std::numeric_limits<double>::infinity();
  double argmax_x = 0.0;
};

// max over interior nodes of (h^{1/(N-1)})'' + K/(N-1) h^{1/(N-1)} by
// central second differences; a positive defect beyond ~10 step^2 flags a
// violation of the 1D curvature inequality. fd_step > grid step widens the
// stencil to the nearest node multiple; fd_step <= 0 uses the grid step.
inline ConcavityDefect fd_concavity_defect(const Needle& needle, double K, double N,
                                           double fd_step = -1.0) {
  if (!(N > 1.0)) throw std::domain_error("fd_concavity_defect: N must be > 1");
  const DensityOnNeedle& h = needle.h;
  if (h.values.size() < 3)
    throw std::invalid_argument("fd_concavity_defect: needs at least 3 grid nodes");
  std::size_t stride = 1;
  if (fd_step > h.step)
    stride = std::min<std::size_t>(static_cast<std::size_t>(std::lround(fd_step / h.step)),
                                   (h.values.size() - 1) / 2);
  const double dx = h.step * static_cast<double>(stride);
  const double e = 1.0 / (N - 1.0);
  std::vector<double> g(h.values.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = std::pow(h.values[i], e);
  ConcavityDefect out;
  for (std::size_t i = stride; i + stride < g.size(); ++i) {
    const double defect =
        (g[i + stride] - 2.0 * g[i] + g[i - stride]) / (dx * dx) + K / (N - 1.0) * g[i];
    if (defect > out.max_defect) {
      out.max_defect = defect;
      out.argmax_x = h.node_x(i);
    }
  }
  return out;
}

}  // namespace mmcd
