#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmcd/measures.hpp"

// The two space models: finite metric measure spaces with registered
// geodesic chains, and one-dimensional needles ([0,L], |.|, h dx).
// Geodesics are registered data, not searched: finite metric spaces
// generally lack midpoints, so the toolkit verifies chains instead of
// solving for them.

namespace mmcd {

// A sampled constant-speed geodesic: nodes[k] is the point visited at
// parameter times[k], with times[0] = 0 and times.back() = 1.
struct GeodesicChain {
  std::vector<int> nodes;
  std::vector<double> times;

  static GeodesicChain static_at(int x) { return GeodesicChain{{x, x}, {0.0, 1.0}}; }
  int start() const { return nodes.front(); }
  int end() const { return nodes.back(); }
};

struct FiniteMMSpace {
  std::vector<std::string> ids;
  std::vector<std::array<double, 2>> xy;  // empty when coordinates are absent
  DiscreteMeasure ref;
  std::vector<GeodesicChain> geodesics;

  int n() const { return static_cast<int>(ids.size()); }
  bool has_xy() const { return !xy.empty(); }

  double d(int i, int j) const { return dist_[static_cast<std::size_t>(i) * ids.size() + j]; }
  void set_distance(int i, int j, double v) {
    dist_[static_cast<std::size_t>(i) * ids.size() + j] = v;
  }
  void allocate_distances() { dist_.assign(ids.size() * ids.size(), 0.0); }
  const std::vector<double>& distances() const { return dist_; }
  void set_distances(std::vector<double> row_major) {
    if (row_major.size() != ids.size() * ids.size())
      throw std::invalid_argument("set_distances: matrix size does not match point count");
    dist_ = std::move(row_major);
  }

  double diameter() const {
    double m = 0.0;
    for (double v : dist_) m = std::max(m, v);
    return m;
  }

  int index_of(const std::string& id) const {
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (ids[i] == id) return static_cast<int>(i);
    return -1;
  }

 private:
  std::vector<double> dist_;
};

// A needle is the one-dimensional metric measure space
// ([0,L], |.|, h dx) carried by a transport ray.
struct Needle {
  DensityOnNeedle h;
  double length() const { return h.length(); }
  bool valid() const { return h.valid(); }
};

struct SpaceValidation {
  std::vector<std::string> problems;
  bool ok() const { return problems.empty(); }
};

// Checks d(gamma_s, gamma_t) = |s-t| d(gamma_0, gamma_1) for every pair of
// registered parameters.
inline bool check_constant_speed(const GeodesicChain& chain, const FiniteMMSpace& space,
                                 double tol) {
  const std::size_t k = chain.nodes.size();
  if (k < 2 || chain.times.size() != k) return false;
  if (std::abs(chain.times.front()) > tol || std::abs(chain.times.back() - 1.0) > tol)
    return false;
  for (int node : chain.nodes)
    if (node < 0 || node >= space.n())
      throw std::out_of_range("check_constant_speed: unknown point id in chain");
  for (std::size_t i = 1; i < k; ++i)
    if (chain.times[i] < chain.times[i - 1] - tol) return false;
  const double len = space.d(chain.nodes.front(), chain.nodes.back());
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) {
      const double want = (chain.times[j] - chain.times[i]) * len;
      if (std::abs(space.d(chain.nodes[i], chain.nodes[j]) - want) > tol) return false;
    }
  return true;
}

// Lists every violated axiom with the offending indices; an empty report
// means the space is valid.
inline SpaceValidation validate_space(const FiniteMMSpace& space, double tol = 1e-9,
                                      double mass_tol = 1e-12) {
  SpaceValidation rep;
  auto fail = [&rep](const std::string& s) { rep.problems.push_back(s); };
  const int n = space.n();
  if (n == 0) {
    fail("space has no points");
    return rep;
  }
  if (space.distances().size() != static_cast<std::size_t>(n) * n) {
    fail("distance matrix size does not match point count");
    return rep;
  }
  std::ostringstream os;
  for (int i = 0; i < n; ++i) {
    if (std::abs(space.d(i, i)) > tol) {
      os.str("");
      os << "nonzero diagonal at " << space.ids[i];
      fail(os.str());
    }
    for (int j = 0; j < n; ++j) {
      if (space.d(i, j) < 0.0) {
        os.str("");
        os << "negative distance at (" << space.ids[i] << "," << space.ids[j] << ")";
        fail(os.str());
      }
      if (i != j && space.d(i, j) <= tol) {
        os.str("");
        os << "distinct points at zero distance (" << space.ids[i] << "," << space.ids[j]
           << ")";
        fail(os.str());
      }
      if (std::abs(space.d(i, j) - space.d(j, i)) > tol) {
        os.str("");
        os << "asymmetry at (" << space.ids[i] << "," << space.ids[j] << ")";
        fail(os.str());
      }
    }
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        if (space.d(i, k) > space.d(i, j) + space.d(j, k) + tol) {
          os.str("");
          os << "triangle inequality fails at (" << space.ids[i] << "," << space.ids[j]
             << "," << space.ids[k] << ")";
          fail(os.str());
        }
  if (space.ref.size() != static_cast<std::size_t>(n)) {
    fail("reference measure size does not match point count");
  } else {
    if (std::abs(space.ref.total() - 1.0) > mass_tol)
      fail("reference measure total mass differs from 1");
    for (int i = 0; i < n; ++i)
      if (!(space.ref.w[i] > 0.0)) {
        os.str("");
        os << "reference measure does not charge point " << space.ids[i];
        fail(os.str());
      }
  }
  for (std::size_t c = 0; c < space.geodesics.size(); ++c)
    if (!check_constant_speed(space.geodesics[c], space, tol)) {
      os.str("");
      os << "registered geodesic " << c << " is not constant speed";
      fail(os.str());
    }
  return rep;
}

struct LipschitzReport {
  bool ok = true;
  std::vector<std::pair<int, int>> violations;
};

// |u(x) - u(y)| <= d(x,y) + tol for every pair.
inline LipschitzReport is_one_lipschitz(const std::vector<double>& u,
                                        const FiniteMMSpace& space, double tol = 1e-9) {
  if (u.size() != static_cast<std::size_t>(space.n()))
    throw std::invalid_argument("is_one_lipschitz: u is not total on the point set");
  LipschitzReport rep;
  for (int i = 0; i < space.n(); ++i)
    for (int j = i + 1; j < space.n(); ++j)
      if (std::abs(u[i] - u[j]) > space.d(i, j) + tol) {
        rep.ok = false;
        rep.violations.emplace_back(i, j);
      }
  return rep;
}

// A set of chains is non-branching if no two of them agree (in position, at
// common registered times) on an initial interval [0, tbar], tbar in (0,1),
// and then differ at a later common time.
inline bool is_nonbranching_set(const std::vector<GeodesicChain>& chains,
                                const FiniteMMSpace& space, double tol,
                                double time_tol = 1e-9) {
  const std::size_t m = chains.size();
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b) {
      const GeodesicChain& A = chains[a];
      const GeodesicChain& B = chains[b];
      // Matched registered times of the two chains.
      std::vector<std::pair<int, int>> common;
      std::size_t i = 0, j = 0;
      while (i < A.times.size() && j < B.times.size()) {
        const double ta = A.times[i], tb = B.times[j];
        if (std::abs(ta - tb) <= time_tol) {
          common.emplace_back(static_cast<int>(i), static_cast<int>(j));
          ++i;
          ++j;
        } else if (ta < tb) {
          ++i;
        } else {
          ++j;
        }
      }
      bool agreed_inside = false;  // agreement at some common time in (0,1)
      bool diverged = false;
      for (const auto& [ia, ib] : common) {
        const double t = A.times[static_cast<std::size_t>(ia)];
        const bool same = space.d(A.nodes[static_cast<std::size_t>(ia)],
                                  B.nodes[static_cast<std::size_t>(ib)]) <= tol;
        if (same && diverged) continue;
        if (same) {
          if (t > time_tol && t < 1.0 - time_tol) agreed_inside = true;
        } else if (t > time_tol) {
          diverged = true;
          if (agreed_inside) return false;
        }
      }
    }
  return true;
}

}  // namespace mmcd
