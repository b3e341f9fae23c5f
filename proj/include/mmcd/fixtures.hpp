#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmcd/metric_space.hpp"
#include "mmcd/transport.hpp"

// Canonical desk instances: path graphs, grids (uniform and
// trapezoid-weighted), the tripod, model needles, discretized needles as
// line spaces, contraction plans, and seeded random transport pairs.

namespace mmcd {

namespace fixtures {

inline void euclidean_distances(FiniteMMSpace& space) {
  space.allocate_distances();
  for (int i = 0; i < space.n(); ++i)
    for (int j = 0; j < space.n(); ++j)
      space.set_distance(
          i, j,
          std::hypot(space.xy[static_cast<std::size_t>(i)][0] -
                         space.xy[static_cast<std::size_t>(j)][0],
                     space.xy[static_cast<std::size_t>(i)][1] -
                         space.xy[static_cast<std::size_t>(j)][1]));
}

inline FiniteMMSpace path_graph(int n, double spacing = 1.0) {
  FiniteMMSpace space;
  for (int i = 0; i < n; ++i) {
    space.ids.push_back("p" + std::to_string(i));
    space.xy.push_back({spacing * i, 0.0});
  }
  euclidean_distances(space);
  space.ref = DiscreteMeasure::uniform(static_cast<std::size_t>(n));
  GeodesicChain line;
  for (int i = 0; i < n; ++i) {
    line.nodes.push_back(i);
    line.times.push_back(static_cast<double>(i) / static_cast<double>(n - 1));
  }
  space.geodesics.push_back(std::move(line));
  return space;
}

// Trapezoid weights over k evenly spaced atoms: proportional to the Voronoi
// cell lengths (1/2, 1, ..., 1, 1/2), so the carried 1D density is constant.
inline std::vector<double> trapezoid_weights(int k) {
  std::vector<double> w(static_cast<std::size_t>(k), 1.0);
  w.front() = 0.5;
  w.back() = 0.5;
  const double total = static_cast<double>(k - 1);
  for (double& v : w) v /= total;
  return w;
}

// rows x cols grid with Euclidean distances, row/column chains registered.
// row_profile: per-column weights within a row (summing to 1); rows share
// total mass equally unless row_mass is given.
inline FiniteMMSpace grid(int rows, int cols, const std::vector<double>& row_profile,
                          double spacing = 1.0,
                          const std::vector<double>& row_mass = {}) {
  if (static_cast<int>(row_profile.size()) != cols)
    throw std::invalid_argument("grid: row_profile length must equal cols");
  FiniteMMSpace space;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      space.ids.push_back("r" + std::to_string(r) + "c" + std::to_string(c));
      space.xy.push_back({spacing * c, spacing * r});
    }
  euclidean_distances(space);
  space.ref = DiscreteMeasure::zero(space.ids.size());
  for (int r = 0; r < rows; ++r) {
    const double share =
        row_mass.empty() ? 1.0 / static_cast<double>(rows) : row_mass[static_cast<std::size_t>(r)];
    for (int c = 0; c < cols; ++c)
      space.ref.w[static_cast<std::size_t>(r * cols + c)] =
          share * row_profile[static_cast<std::size_t>(c)];
  }
  auto chain_of = [&](std::vector<int> nodes) {
    GeodesicChain g;
    g.nodes = std::move(nodes);
    const double len = space.d(g.nodes.front(), g.nodes.back());
    for (int v : g.nodes) g.times.push_back(space.d(g.nodes.front(), v) / len);
    return g;
  };
  for (int r = 0; r < rows; ++r) {
    std::vector<int> nodes;
    for (int c = 0; c < cols; ++c) nodes.push_back(r * cols + c);
    space.geodesics.push_back(chain_of(std::move(nodes)));
  }
  for (int c = 0; c < cols; ++c) {
    std::vector<int> nodes;
    for (int r = 0; r < rows; ++r) nodes.push_back(r * cols + c);
    space.geodesics.push_back(chain_of(std::move(nodes)));
  }
  return space;
}

inline FiniteMMSpace grid_uniform(int rows, int cols, double spacing = 1.0) {
  return grid(rows, cols,
              std::vector<double>(static_cast<std::size_t>(cols),
                                  1.0 / static_cast<double>(cols)),
              spacing);
}

// Row weights proportional to Voronoi cells: every row-needle has constant
// density, so the grid passes the 1D curvature check at K = 0.
inline FiniteMMSpace grid_trapezoid(int rows, int cols, double spacing = 1.0) {
  return grid(rows, cols, trapezoid_weights(cols), spacing);
}

// 5x5 trapezoid grid with one row re-weighted to dip in the middle: that
// row's needle density fails CD(0, N) with the dip as witness.
inline FiniteMMSpace grid_corrupted(int corrupt_row = 2) {
  const int rows = 5, cols = 5;
  FiniteMMSpace space = grid_trapezoid(rows, cols);
  const std::vector<double> dip = {0.22, 0.22, 0.12, 0.22, 0.22};
  for (int c = 0; c < cols; ++c)
    space.ref.w[static_cast<std::size_t>(corrupt_row * cols + c)] =
        dip[static_cast<std::size_t>(c)] / static_cast<double>(rows);
  return space;
}

// Center c and three leaves at distance 1, path metric (leaf-leaf = 2).
inline FiniteMMSpace tripod() {
  FiniteMMSpace space;
  space.ids = {"c", "l1", "l2", "l3"};
  space.allocate_distances();
  for (int leaf = 1; leaf <= 3; ++leaf) {
    space.set_distance(0, leaf, 1.0);
    space.set_distance(leaf, 0, 1.0);
  }
  for (int a = 1; a <= 3; ++a)
    for (int b = 1; b <= 3; ++b)
      if (a != b) space.set_distance(a, b, 2.0);
  space.ref = DiscreteMeasure::uniform(4);
  for (int leaf = 1; leaf <= 3; ++leaf)
    space.geodesics.push_back(GeodesicChain{{0, leaf}, {0.0, 1.0}});
  return space;
}

inline Needle constant_needle(double L, double value = 1.0, double step = -1.0) {
  Needle n;
  n.h = sample_on_grid(L, step > 0 ? step : 1e-3 * L, [&](double) { return value; });
  return n;
}

// h = sin^{N-1}(x sqrt(K/(N-1))) on [0, pi sqrt((N-1)/K)]: the equality
// case of the 1D curvature inequality for K > 0.
inline Needle sine_needle(double K, double N, double step = -1.0) {
  if (!(K > 0.0) || !(N > 1.0))
    throw std::invalid_argument("sine_needle: requires K > 0 and N > 1");
  const double lam = std::sqrt(K / (N - 1.0));
  const double L = kPi / lam;
  Needle n;
  n.h = sample_on_grid(L, step > 0 ? step : 1e-3 * L, [&](double x) {
    const double s = std::sin(std::min(lam * x, kPi));
    return s <= 1e-12 ? 0.0 : std::pow(s, N - 1.0);
  });
  return n;
}

// h = sinh^{N-1}(x sqrt(-K/(N-1))): the equality case for K < 0.
inline Needle sinh_needle(double K, double N, double L, double step = -1.0) {
  if (!(K < 0.0) || !(N > 1.0))
    throw std::invalid_argument("sinh_needle: requires K < 0 and N > 1");
  const double lam = std::sqrt(-K / (N - 1.0));
  Needle n;
  n.h = sample_on_grid(L, step > 0 ? step : 1e-3 * L,
                       [&](double x) { return std::pow(std::sinh(lam * x), N - 1.0); });
  return n;
}

// h = exp(x^2): strictly convex h^{1/(N-1)} for N = 2, the canonical
// violation at K = 0.
inline Needle expsq_needle(double L = 1.0, double step = -1.0) {
  Needle n;
  n.h = sample_on_grid(L, step > 0 ? step : 1e-3 * L,
                       [&](double x) { return std::exp(x * x); });
  return n;
}

// Discretizes a needle into a line space: atoms at the grid nodes of a
// coarsened grid, masses = trapezoid cell masses of h (normalized), metric
// |x - y|, the full line registered as one chain.
inline FiniteMMSpace line_space_from_needle(const Needle& needle, int atoms) {
  if (atoms < 2) throw std::invalid_argument("line_space_from_needle: need >= 2 atoms");
  const double L = needle.length();
  FiniteMMSpace space;
  std::vector<double> pos(static_cast<std::size_t>(atoms));
  for (int i = 0; i < atoms; ++i) {
    pos[static_cast<std::size_t>(i)] =
        L * static_cast<double>(i) / static_cast<double>(atoms - 1);
    space.ids.push_back("p" + std::to_string(i));
    space.xy.push_back({pos[static_cast<std::size_t>(i)], 0.0});
  }
  euclidean_distances(space);
  const double cell = L / static_cast<double>(atoms - 1);
  space.ref = DiscreteMeasure::zero(static_cast<std::size_t>(atoms));
  for (int i = 0; i < atoms; ++i) {
    const double width = (i == 0 || i == atoms - 1) ? 0.5 * cell : cell;
    space.ref.w[static_cast<std::size_t>(i)] =
        needle.h.value_at(pos[static_cast<std::size_t>(i)]) * width;
  }
  const double total = space.ref.total();
  if (!(total > 0.0)) throw std::invalid_argument("line_space_from_needle: zero mass");
  for (double& w : space.ref.w) w /= total;
  GeodesicChain line;
  for (int i = 0; i < atoms; ++i) {
    line.nodes.push_back(i);
    line.times.push_back(pos[static_cast<std::size_t>(i)] / L);
  }
  space.geodesics.push_back(std::move(line));
  return space;
}

// Contraction plan mu0 -> delta_{x0} along a line space: every source atom
// travels through the intermediate atoms between it and x0. Requires the
// metric to be additive along the node order (a line).
inline DynamicPlan contraction_plan(const FiniteMMSpace& space, const DiscreteMeasure& mu0,
                                    int x0) {
  DynamicPlan plan;
  for (int x = 0; x < space.n(); ++x) {
    const double mass = mu0.w[static_cast<std::size_t>(x)];
    if (mass <= 0.0) continue;
    if (x == x0) {
      plan.entries.push_back({GeodesicChain::static_at(x), mass});
      continue;
    }
    GeodesicChain chain;
    const double len = space.d(x, x0);
    const int dir = x0 > x ? 1 : -1;
    for (int k = x;; k += dir) {
      const double a = space.d(x, k), b = space.d(k, x0);
      if (std::abs(a + b - len) > 1e-9 * (1.0 + len))
        throw std::invalid_argument("contraction_plan: space is not a line between atoms");
      chain.nodes.push_back(k);
      chain.times.push_back(a / len);
      if (k == x0) break;
    }
    chain.times.front() = 0.0;
    chain.times.back() = 1.0;
    plan.entries.push_back({std::move(chain), mass});
  }
  return plan;
}

// A seeded random pair (mu0, mu1) on a grid whose optimal transport moves
// mass only rightward inside rows (u = -x is then a Kantorovich potential):
// per row, a random upper-triangular coupling matrix over column pairs is
// drawn and its marginals are taken.
inline std::pair<DiscreteMeasure, DiscreteMeasure> random_rightward_pair(int rows, int cols,
                                                                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  DiscreteMeasure mu0 = DiscreteMeasure::zero(static_cast<std::size_t>(rows * cols));
  DiscreteMeasure mu1 = DiscreteMeasure::zero(static_cast<std::size_t>(rows * cols));
  double total = 0.0;
  for (int r = 0; r < rows; ++r)
    for (int i = 0; i < cols; ++i)
      for (int j = i; j < cols; ++j) {
        const double m = 0.05 + 0.95 * uniform01(rng);
        mu0.w[static_cast<std::size_t>(r * cols + i)] += m;
        mu1.w[static_cast<std::size_t>(r * cols + j)] += m;
        total += m;
      }
  for (auto& v : mu0.w) v /= total;
  for (auto& v : mu1.w) v /= total;
  return {std::move(mu0), std::move(mu1)};
}

// Random probability measure with full support on n points.
template <class Rng>
DiscreteMeasure random_measure(std::size_t n, Rng& rng, double lo = 0.2, double hi = 2.0) {
  DiscreteMeasure m = DiscreteMeasure::zero(n);
  for (auto& v : m.w) v = uniform_in(rng, lo, hi);
  const double total = m.total();
  for (auto& v : m.w) v /= total;
  return m;
}

}  // namespace fixtures

}  // namespace mmcd
