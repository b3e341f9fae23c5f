#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmcd/metric_space.hpp"

// Discrete optimal transport with cost d^p: exact couplings via a dense
// transportation simplex, Kantorovich potentials for p = 1 from the dual,
// d-cyclical monotonicity certificates, and evaluation-map pushforwards of
// dynamic plans.

namespace mmcd {

struct CouplingEntry {
  int x = 0, y = 0;
  double mass = 0.0;
};

struct Coupling {
  std::vector<CouplingEntry> entries;

  double cost(const FiniteMMSpace& space, double p) const {
    KahanSum acc;
    for (const auto& e : entries) acc.add(std::pow(space.d(e.x, e.y), p) * e.mass);
    return acc.value();
  }
  DiscreteMeasure marginal_first(std::size_t n) const {
    DiscreteMeasure m = DiscreteMeasure::zero(n);
    for (const auto& e : entries) m.w[static_cast<std::size_t>(e.x)] += e.mass;
    return m;
  }
  DiscreteMeasure marginal_second(std::size_t n) const {
    DiscreteMeasure m = DiscreteMeasure::zero(n);
    for (const auto& e : entries) m.w[static_cast<std::size_t>(e.y)] += e.mass;
    return m;
  }
};

// Weighted collection of constant-speed chains. (e_t)-pushforwards recover
// the interpolating measures.
struct DynamicPlanEntry {
  GeodesicChain chain;
  double mass = 0.0;
};

struct DynamicPlan {
  std::vector<DynamicPlanEntry> entries;

  double total_mass() const {
    KahanSum acc;
    for (const auto& e : entries) acc.add(e.mass);
    return acc.value();
  }
  // sum mass * d(gamma_0, gamma_1)^p
  double cost(const FiniteMMSpace& space, double p = 1.0) const {
    KahanSum acc;
    for (const auto& e : entries)
      acc.add(std::pow(space.d(e.chain.start(), e.chain.end()), p) * e.mass);
    return acc.value();
  }
  Coupling endpoint_coupling() const {
    Coupling c;
    for (const auto& e : entries)
      c.entries.push_back({e.chain.start(), e.chain.end(), e.mass});
    return c;
  }
};

namespace detail {

struct TransportSolution {
  std::vector<double> flow;  // ns x nd, row-major
  std::vector<double> alpha, beta;
  double cost = 0.0;
  long iterations = 0;
};

// Dense transportation simplex. Northwest-corner start, MODI pricing,
// Bland-style lowest-index entering and leaving rules so the pivot sequence
// is deterministic and finite.
inline TransportSolution transport_simplex(const std::vector<double>& supply,
                                           const std::vector<double>& demand,
                                           const std::vector<double>& cost) {
  const int ns = static_cast<int>(supply.size());
  const int nd = static_cast<int>(demand.size());
  if (ns == 0 || nd == 0)
    throw std::invalid_argument("transport_simplex: empty marginal");
  if (cost.size() != static_cast<std::size_t>(ns) * nd)
    throw std::invalid_argument("transport_simplex: cost matrix size mismatch");

  auto at = [nd](int i, int j) { return static_cast<std::size_t>(i) * nd + j; };

  TransportSolution out;
  out.flow.assign(static_cast<std::size_t>(ns) * nd, 0.0);
  std::vector<char> basic(static_cast<std::size_t>(ns) * nd, 0);

  // Northwest corner initial basis: ns + nd - 1 basic cells.
  {
    std::vector<double> ra = supply, rb = demand;
    int i = 0, j = 0;
    while (i < ns && j < nd) {
      const double x = std::min(ra[static_cast<std::size_t>(i)], rb[static_cast<std::size_t>(j)]);
      out.flow[at(i, j)] = x;
      basic[at(i, j)] = 1;
      ra[static_cast<std::size_t>(i)] -= x;
      rb[static_cast<std::size_t>(j)] -= x;
      if (i == ns - 1 && j == nd - 1) break;
      if (ra[static_cast<std::size_t>(i)] <= rb[static_cast<std::size_t>(j)] && i < ns - 1) {
        ++i;
      } else if (j < nd - 1) {
        ++j;
      } else {
        ++i;
      }
    }
  }

  double cost_scale = 1.0;
  for (double c : cost) cost_scale = std::max(cost_scale, std::abs(c));
  const double tol = 1e-12 * cost_scale;

  out.alpha.assign(static_cast<std::size_t>(ns), 0.0);
  out.beta.assign(static_cast<std::size_t>(nd), 0.0);

  std::vector<std::vector<int>> row_basics(static_cast<std::size_t>(ns));
  std::vector<std::vector<int>> col_basics(static_cast<std::size_t>(nd));
  const long max_iter = 200000;

  for (long iter = 0;; ++iter) {
    if (iter > max_iter)
      throw std::runtime_error("transport_simplex: pivot limit exceeded");
    out.iterations = iter;

    for (auto& v : row_basics) v.clear();
    for (auto& v : col_basics) v.clear();
    for (int i = 0; i < ns; ++i)
      for (int j = 0; j < nd; ++j)
        if (basic[at(i, j)]) {
          row_basics[static_cast<std::size_t>(i)].push_back(j);
          col_basics[static_cast<std::size_t>(j)].push_back(i);
        }

    // Duals from the basis tree: alpha_i + beta_j = c_ij on basic cells.
    {
      std::vector<char> row_done(static_cast<std::size_t>(ns), 0);
      std::vector<char> col_done(static_cast<std::size_t>(nd), 0);
      std::vector<int> stack;  // rows as i, cols as ns + j
      for (int r = 0; r < ns; ++r) {
        if (row_done[static_cast<std::size_t>(r)]) continue;
        out.alpha[static_cast<std::size_t>(r)] = 0.0;
        row_done[static_cast<std::size_t>(r)] = 1;
        stack.push_back(r);
        while (!stack.empty()) {
          const int v = stack.back();
          stack.pop_back();
          if (v < ns) {
            for (int j : row_basics[static_cast<std::size_t>(v)])
              if (!col_done[static_cast<std::size_t>(j)]) {
                out.beta[static_cast<std::size_t>(j)] =
                    cost[at(v, j)] - out.alpha[static_cast<std::size_t>(v)];
                col_done[static_cast<std::size_t>(j)] = 1;
                stack.push_back(ns + j);
              }
          } else {
            const int j = v - ns;
            for (int i : col_basics[static_cast<std::size_t>(j)])
              if (!row_done[static_cast<std::size_t>(i)]) {
                out.alpha[static_cast<std::size_t>(i)] =
                    cost[at(i, j)] - out.beta[static_cast<std::size_t>(j)];
                row_done[static_cast<std::size_t>(i)] = 1;
                stack.push_back(i);
              }
          }
        }
      }
    }

    // Entering cell: first (row-major) nonbasic cell with negative reduced cost.
    int ei = -1, ej = -1;
    for (int i = 0; i < ns && ei < 0; ++i)
      for (int j = 0; j < nd; ++j) {
        if (basic[at(i, j)]) continue;
        const double red = cost[at(i, j)] - out.alpha[static_cast<std::size_t>(i)] -
                           out.beta[static_cast<std::size_t>(j)];
        if (red < -tol) {
          ei = i;
          ej = j;
          break;
        }
      }
    if (ei < 0) break;  // optimal

    // Unique tree path from row ei to column ej; cells along it alternate
    // signs starting with '-' on the first edge (it shares row ei).
    std::vector<int> parent_edge_i(static_cast<std::size_t>(ns + nd), -1);
    std::vector<int> parent_edge_j(static_cast<std::size_t>(ns + nd), -1);
    std::vector<int> parent(static_cast<std::size_t>(ns + nd), -2);
    std::vector<int> queue;
    queue.push_back(ei);
    parent[static_cast<std::size_t>(ei)] = -1;
    for (std::size_t qh = 0; qh < queue.size(); ++qh) {
      const int v = queue[qh];
      if (v == ns + ej) break;
      if (v < ns) {
        for (int j : row_basics[static_cast<std::size_t>(v)]) {
          if (parent[static_cast<std::size_t>(ns + j)] != -2) continue;
          parent[static_cast<std::size_t>(ns + j)] = v;
          parent_edge_i[static_cast<std::size_t>(ns + j)] = v;
          parent_edge_j[static_cast<std::size_t>(ns + j)] = j;
          queue.push_back(ns + j);
        }
      } else {
        const int j = v - ns;
        for (int i : col_basics[static_cast<std::size_t>(j)]) {
          if (parent[static_cast<std::size_t>(i)] != -2) continue;
          parent[static_cast<std::size_t>(i)] = v;
          parent_edge_i[static_cast<std::size_t>(i)] = i;
          parent_edge_j[static_cast<std::size_t>(i)] = j;
          queue.push_back(i);
        }
      }
    }
    if (parent[static_cast<std::size_t>(ns + ej)] == -2)
      throw std::runtime_error("transport_simplex: basis is not a spanning tree");

    std::vector<std::pair<int, int>> path;  // from the ej side back to ei
    for (int v = ns + ej; parent[static_cast<std::size_t>(v)] != -1;
         v = parent[static_cast<std::size_t>(v)])
      path.emplace_back(parent_edge_i[static_cast<std::size_t>(v)],
                        parent_edge_j[static_cast<std::size_t>(v)]);
    std::reverse(path.begin(), path.end());  // now starts at the edge touching ei

    // Ratio test over the '-' cells (even positions along the path);
    // ties resolve to the lexicographically smallest cell.
    double theta = std::numeric_limits<double>::infinity();
    int li = -1, lj = -1;
    for (std::size_t k = 0; k < path.size(); k += 2) {
      const double f = out.flow[at(path[k].first, path[k].second)];
      const bool better =
          li < 0 || f < theta ||
          (f == theta && (path[k].first < li || (path[k].first == li && path[k].second < lj)));
      if (better) {
        theta = f;
        li = path[k].first;
        lj = path[k].second;
      }
    }
    if (li < 0) throw std::runtime_error("transport_simplex: unbounded pivot");

    out.flow[at(ei, ej)] += theta;
    for (std::size_t k = 0; k < path.size(); ++k) {
      if (k % 2 == 0)
        out.flow[at(path[k].first, path[k].second)] -= theta;
      else
        out.flow[at(path[k].first, path[k].second)] += theta;
    }
    basic[at(ei, ej)] = 1;
    basic[at(li, lj)] = 0;
    out.flow[at(li, lj)] = 0.0;
  }

  KahanSum acc;
  for (int i = 0; i < ns; ++i)
    for (int j = 0; j < nd; ++j)
      if (out.flow[at(i, j)] != 0.0) acc.add(out.flow[at(i, j)] * cost[at(i, j)]);
  out.cost = acc.value();
  return out;
}

struct OTSolve {
  std::vector<int> supp0, supp1;
  TransportSolution sol;
  double objective = 0.0;  // LP optimum for cost d^p
  double value = 0.0;      // objective^(1/p)
};

inline OTSolve solve_ot(const FiniteMMSpace& space, const DiscreteMeasure& mu0,
                        const DiscreteMeasure& mu1, double p,
                        double balance_tol = 1e-9) {
  if (!(p >= 1.0)) throw std::domain_error("wasserstein_p: p must be >= 1");
  if (mu0.size() != static_cast<std::size_t>(space.n()) || mu0.size() != mu1.size())
    throw std::invalid_argument("wasserstein_p: measures do not match the space");
  const double t0 = mu0.total(), t1 = mu1.total();
  if (std::abs(t0 - t1) > balance_tol * std::max(1.0, std::max(t0, t1)))
    throw std::invalid_argument("wasserstein_p: marginal masses differ beyond tolerance");

  OTSolve out;
  out.supp0 = mu0.support();
  out.supp1 = mu1.support();
  if (out.supp0.empty() || out.supp1.empty())
    throw std::invalid_argument("wasserstein_p: empty marginal support");

  std::vector<double> a, b;
  a.reserve(out.supp0.size());
  b.reserve(out.supp1.size());
  for (int i : out.supp0) a.push_back(mu0.w[static_cast<std::size_t>(i)]);
  const double scale = t0 / t1;
  for (int j : out.supp1) b.push_back(mu1.w[static_cast<std::size_t>(j)] * scale);

  std::vector<double> cost(out.supp0.size() * out.supp1.size());
  for (std::size_t i = 0; i < out.supp0.size(); ++i)
    for (std::size_t j = 0; j < out.supp1.size(); ++j) {
      const double dd = space.d(out.supp0[i], out.supp1[j]);
      cost[i * out.supp1.size() + j] =
          p == 1.0 ? dd : (p == 2.0 ? dd * dd : std::pow(dd, p));
    }

  out.sol = transport_simplex(a, b, cost);
  out.objective = out.sol.cost;
  out.value = p == 1.0 ? out.objective
                       : (p == 2.0 ? std::sqrt(out.objective)
                                   : std::pow(out.objective, 1.0 / p));
  return out;
}

}  // namespace detail

struct OTResult {
  double value = 0.0;      // W_p
  double objective = 0.0;  // LP optimum of int d^p dpi
  Coupling coupling;
};

// Exact optimum of the finite transportation LP with cost d^p; returns the
// p-th root of the LP objective and one optimal vertex coupling.
inline OTResult wasserstein_p(const FiniteMMSpace& space, const DiscreteMeasure& mu0,
                              const DiscreteMeasure& mu1, double p) {
  OTResult out;
  if (mu0.w == mu1.w) {  // identical marginals: the diagonal coupling is optimal
    for (std::size_t i = 0; i < mu0.size(); ++i)
      if (mu0.w[i] > 0.0)
        out.coupling.entries.push_back({static_cast<int>(i), static_cast<int>(i), mu0.w[i]});
    out.value = out.objective = 0.0;
    return out;
  }
  detail::OTSolve s = detail::solve_ot(space, mu0, mu1, p);
  out.value = s.value;
  out.objective = s.objective;
  const std::size_t nd = s.supp1.size();
  // Pivot arithmetic can leave O(eps)-sized flows in basic cells; they are
  // numerical zeros, not transport.
  const double flow_tol = 1e-14 * std::max(1.0, mu0.total());
  for (std::size_t i = 0; i < s.supp0.size(); ++i)
    for (std::size_t j = 0; j < nd; ++j) {
      const double f = s.sol.flow[i * nd + j];
      if (f > flow_tol) out.coupling.entries.push_back({s.supp0[i], s.supp1[j], f});
    }
  return out;
}

// Kantorovich potential for the p = 1 problem: a 1-Lipschitz u with
// int u dmu0 - int u dmu1 = W_1(mu0, mu1), extracted from the dual of the
// transportation LP as u(z) = min_j (d(z, y_j) - beta_j) over the support of
// mu1, then normalized to u = 0 at the lowest-index support point of mu1.
inline std::vector<double> kantorovich_potential(const FiniteMMSpace& space,
                                                 const DiscreteMeasure& mu0,
                                                 const DiscreteMeasure& mu1,
                                                 double gap_tol = 1e-9) {
  const int n = space.n();
  if (mu0.w == mu1.w) return std::vector<double>(static_cast<std::size_t>(n), 0.0);

  detail::OTSolve s = detail::solve_ot(space, mu0, mu1, 1.0);
  std::vector<double> u(static_cast<std::size_t>(n), 0.0);
  for (int z = 0; z < n; ++z) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < s.supp1.size(); ++j)
      best = std::min(best, space.d(z, s.supp1[j]) - s.sol.beta[j]);
    u[static_cast<std::size_t>(z)] = best;
  }
  const double shift = u[static_cast<std::size_t>(s.supp1.front())];
  for (double& v : u) v -= shift;

  // The potential must certify the optimum: zero duality gap and 1-Lipschitz.
  KahanSum acc;
  for (int i = 0; i < n; ++i)
    acc.add(u[static_cast<std::size_t>(i)] *
            (mu0.w[static_cast<std::size_t>(i)] - mu1.w[static_cast<std::size_t>(i)]));
  const double gap = std::abs(acc.value() - s.value);
  if (gap > gap_tol * std::max(1.0, s.value))
    throw std::runtime_error("kantorovich_potential: duality gap " + std::to_string(gap));
  if (!is_one_lipschitz(u, space, gap_tol).ok)
    throw std::runtime_error("kantorovich_potential: extracted potential is not 1-Lipschitz");
  return u;
}

// Cyclical monotonicity of a support set with respect to cost d^p:
// for every cycle (x_1,y_1),...,(x_k,y_k) of length k <= max_cycle,
// sum c(x_i, y_i) <= sum c(x_i, y_{i+1}).
inline bool is_cyclically_monotone(const std::vector<std::pair<int, int>>& support,
                                   const FiniteMMSpace& space, int max_cycle,
                                   double p = 1.0, double tol = 1e-9) {
  if (max_cycle < 2) throw std::domain_error("is_cyclically_monotone: max_cycle must be >= 2");
  const int s = static_cast<int>(support.size());
  auto c = [&](int x, int y) {
    const double dd = space.d(x, y);
    return p == 1.0 ? dd : (p == 2.0 ? dd * dd : std::pow(dd, p));
  };
  const int kmax = std::min(max_cycle, s);
  std::vector<int> comb;
  for (int k = 2; k <= kmax; ++k) {
    comb.assign(static_cast<std::size_t>(k), 0);
    std::iota(comb.begin(), comb.end(), 0);
    while (true) {
      // All cyclic orders of this k-subset, first element pinned.
      std::vector<int> perm(comb.begin() + 1, comb.end());
      std::sort(perm.begin(), perm.end());
      do {
        double base = c(support[static_cast<std::size_t>(comb[0])].first,
                        support[static_cast<std::size_t>(comb[0])].second);
        std::vector<int> order;
        order.push_back(comb[0]);
        for (int e : perm) {
          base += c(support[static_cast<std::size_t>(e)].first,
                    support[static_cast<std::size_t>(e)].second);
          order.push_back(e);
        }
        double alt = 0.0;
        for (int i = 0; i < k; ++i)
          alt += c(support[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])].first,
                   support[static_cast<std::size_t>(order[static_cast<std::size_t>((i + 1) % k)])]
                       .second);
        if (base > alt + tol * (1.0 + std::abs(base))) return false;
      } while (std::next_permutation(perm.begin(), perm.end()));

      // next k-combination
      int i = k - 1;
      while (i >= 0 && comb[static_cast<std::size_t>(i)] == s - k + i) --i;
      if (i < 0) break;
      ++comb[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < k; ++j)
        comb[static_cast<std::size_t>(j)] = comb[static_cast<std::size_t>(j - 1)] + 1;
    }
  }
  return true;
}

// (e_t)-pushforward using registered chain times only: t snaps to the
// nearest registered parameter within snap_tol, otherwise this is an error.
inline DiscreteMeasure pushforward_at(const DynamicPlan& plan, double t,
                                      const FiniteMMSpace& space,
                                      double snap_tol = 1e-9) {
  DiscreteMeasure out = DiscreteMeasure::zero(static_cast<std::size_t>(space.n()));
  for (const auto& e : plan.entries) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t k = 0; k < e.chain.times.size(); ++k) {
      const double dv = std::abs(e.chain.times[k] - t);
      if (dv < best) {
        best = dv;
        arg = k;
      }
    }
    if (best > snap_tol)
      throw std::domain_error("pushforward_at: no registered node near requested time");
    out.w[static_cast<std::size_t>(e.chain.nodes[arg])] += e.mass;
  }
  return out;
}

// (e_t)-pushforward at arbitrary t in [0,1]: between registered nodes the
// chain's mass is split between the two bracketing nodes in proportion to
// the position along the segment. The split preserves the 1D mean along the
// chain, which is what makes glued plans exact W_1-geodesics on finite
// spaces.
inline DiscreteMeasure interpolate_at(const DynamicPlan& plan, double t, std::size_t n) {
  if (!(t >= 0.0 && t <= 1.0))
    throw std::domain_error("interpolate_at: t must lie in [0,1]");
  DiscreteMeasure out = DiscreteMeasure::zero(n);
  for (const auto& e : plan.entries) {
    const auto& tm = e.chain.times;
    if (e.chain.nodes.empty()) throw std::invalid_argument("interpolate_at: empty chain");
    if (e.chain.nodes.size() == 1) {  // static mass
      out.w[static_cast<std::size_t>(e.chain.nodes.front())] += e.mass;
      continue;
    }
    std::size_t k = 0;
    while (k + 2 < tm.size() && tm[k + 1] <= t) ++k;
    const double t0 = tm[k], t1 = tm[k + 1];
    double f = t1 > t0 ? (t - t0) / (t1 - t0) : 0.0;
    f = std::clamp(f, 0.0, 1.0);
    if (f > 0.0 && f < 1.0) {
      out.w[static_cast<std::size_t>(e.chain.nodes[k])] += (1.0 - f) * e.mass;
      out.w[static_cast<std::size_t>(e.chain.nodes[k + 1])] += f * e.mass;
    } else {
      out.w[static_cast<std::size_t>(e.chain.nodes[f >= 1.0 ? k + 1 : k])] += e.mass;
    }
  }
  return out;
}

}  // namespace mmcd
