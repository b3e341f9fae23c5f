#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmcd/metric_space.hpp"

// The L^1 transport structure of a 1-Lipschitz function u:
//   Gamma_u = {(x,y) : u(x) - u(y) = d(x,y)}
//   R_u = Gamma_u U Gamma_u^{-1},  T_u = P_1(R_u \ diagonal)
//   A_{+,u}, A_{-,u} = forward / backward branching points
//   T_u^b = T_u \ (A_+ U A_-),  R_u^b = R_u restricted to T_u^b
// R_u^b is an equivalence relation on T_u^b; its classes are the transport
// rays, along which u is affine with slope -1 in arc length.

namespace mmcd {

// Raised when transport data contradicts the ray structure (cross-ray
// pairs, mismatched quotient masses, a relation that fails transitivity).
class structural_error : public std::runtime_error {
 public:
  explicit structural_error(const std::string& what, int ray_a = -1, int ray_b = -1)
      : std::runtime_error(what), ray_a(ray_a), ray_b(ray_b) {}
  int ray_a = -1;
  int ray_b = -1;
};

struct TransportStructure {
  int n = 0;
  double tol = 0.0;
  std::vector<char> gamma_mat;  // row-major: (x,y) in Gamma_u
  std::vector<char> in_T, in_Aplus, in_Aminus, in_Tb;
  bool branching_computed = false;

  bool gamma(int x, int y) const {
    return gamma_mat[static_cast<std::size_t>(x) * n + y] != 0;
  }
  bool gamma_inv(int x, int y) const { return gamma(y, x); }
  bool R(int x, int y) const { return gamma(x, y) || gamma(y, x); }
  bool Rb(int x, int y) const {
    return in_Tb[static_cast<std::size_t>(x)] && in_Tb[static_cast<std::size_t>(y)] && R(x, y);
  }

  std::vector<int> points_in(const std::vector<char>& mask) const {
    std::vector<int> out;
    for (int i = 0; i < n; ++i)
      if (mask[static_cast<std::size_t>(i)]) out.push_back(i);
    return out;
  }
  std::vector<int> transport_set() const { return points_in(in_T); }
  std::vector<int> nonbranched_set() const { return points_in(in_Tb); }
};

// Populates Gamma_u, R_u and T_u. tol < 0 selects the default
// 1e-9 * diam(X); one tolerance governs all ray logic downstream.
inline TransportStructure build_gamma(const FiniteMMSpace& space,
                                      const std::vector<double>& u, double tol = -1.0) {
  const int n = space.n();
  if (u.size() != static_cast<std::size_t>(n))
    throw std::invalid_argument("build_gamma: u is not total on the point set");
  if (tol < 0.0) tol = 1e-9 * std::max(space.diameter(), 1e-30);
  const LipschitzReport lip = is_one_lipschitz(u, space, tol);
  if (!lip.ok) {
    std::ostringstream os;
    os << "build_gamma: u is not 1-Lipschitz; first violation ("
       << space.ids[static_cast<std::size_t>(lip.violations.front().first)] << ","
       << space.ids[static_cast<std::size_t>(lip.violations.front().second)] << ")";
    throw std::invalid_argument(os.str());
  }

  TransportStructure s;
  s.n = n;
  s.tol = tol;
  s.gamma_mat.assign(static_cast<std::size_t>(n) * n, 0);
  s.in_T.assign(static_cast<std::size_t>(n), 0);
  s.in_Aplus.assign(static_cast<std::size_t>(n), 0);
  s.in_Aminus.assign(static_cast<std::size_t>(n), 0);
  s.in_Tb.assign(static_cast<std::size_t>(n), 0);
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y)
      if (std::abs(u[static_cast<std::size_t>(x)] - u[static_cast<std::size_t>(y)] -
                   space.d(x, y)) <= tol)
        s.gamma_mat[static_cast<std::size_t>(x) * n + y] = 1;
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y)
      if (x != y && s.R(x, y)) {
        s.in_T[static_cast<std::size_t>(x)] = 1;
        break;
      }
  return s;
}

// Branching points by exhaustive triple enumeration:
//   A_+ = {x in T_u : exists z,w in Gamma_u(x) with (z,w) not in R_u}
// and symmetrically for A_- with Gamma_u^{-1}(x).
inline void branching_sets(TransportStructure& s, const FiniteMMSpace& space) {
  (void)space;
  const int n = s.n;
  for (int x = 0; x < n; ++x) {
    if (!s.in_T[static_cast<std::size_t>(x)]) continue;
    for (int z = 0; z < n && !s.in_Aplus[static_cast<std::size_t>(x)]; ++z) {
      if (!s.gamma(x, z)) continue;
      for (int w = 0; w < n; ++w) {
        if (w == z || !s.gamma(x, w)) continue;
        if (!s.R(z, w)) {
          s.in_Aplus[static_cast<std::size_t>(x)] = 1;
          break;
        }
      }
    }
    for (int z = 0; z < n && !s.in_Aminus[static_cast<std::size_t>(x)]; ++z) {
      if (!s.gamma(z, x)) continue;
      for (int w = 0; w < n; ++w) {
        if (w == z || !s.gamma(w, x)) continue;
        if (!s.R(z, w)) {
          s.in_Aminus[static_cast<std::size_t>(x)] = 1;
          break;
        }
      }
    }
  }
  for (int x = 0; x < n; ++x)
    s.in_Tb[static_cast<std::size_t>(x)] =
        s.in_T[static_cast<std::size_t>(x)] && !s.in_Aplus[static_cast<std::size_t>(x)] &&
        !s.in_Aminus[static_cast<std::size_t>(x)];
  s.branching_computed = true;
}

inline double branching_mass(const TransportStructure& s, const DiscreteMeasure& m) {
  KahanSum acc;
  for (int i = 0; i < s.n; ++i)
    if (s.in_Aplus[static_cast<std::size_t>(i)] || s.in_Aminus[static_cast<std::size_t>(i)])
      acc.add(m.w[static_cast<std::size_t>(i)]);
  return acc.value();
}

// One R_u^b-equivalence class: members ordered by decreasing u, the
// representative is the u-maximal member, and params[k] = d(rep, member_k)
// realizes the arc-length parametrization (the ray map g(alpha, .)).
struct Ray {
  int representative = -1;
  std::vector<int> members;
  std::vector<double> params;
  double length() const { return params.empty() ? 0.0 : params.back(); }
};

struct RayDecomposition {
  std::vector<Ray> rays;
  std::vector<int> f;  // quotient map: point -> ray index, -1 off T_u^b
  double tol = 0.0;

  int ray_of(int x) const { return f[static_cast<std::size_t>(x)]; }
};

// Partitions T_u^b into R_u^b-classes and orders each class into a ray.
// Violations of transitivity or of the slope -1 / isometry identities are
// data errors: they signal a misconfigured tolerance, not a recoverable
// condition.
inline RayDecomposition decompose_rays(const TransportStructure& s,
                                       const FiniteMMSpace& space,
                                       const std::vector<double>& u) {
  if (!s.branching_computed)
    throw std::logic_error("decompose_rays: branching sets not computed");
  const int n = s.n;
  RayDecomposition dec;
  dec.tol = s.tol;
  dec.f.assign(static_cast<std::size_t>(n), -1);

  // Union-find over R_u^b.
  std::vector<int> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  std::vector<int> rank(static_cast<std::size_t>(n), 0);
  auto find = [&](int a) {
    while (parent[static_cast<std::size_t>(a)] != a) {
      parent[static_cast<std::size_t>(a)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
      a = parent[static_cast<std::size_t>(a)];
    }
    return a;
  };
  auto unite = [&](int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank[static_cast<std::size_t>(a)] < rank[static_cast<std::size_t>(b)]) std::swap(a, b);
    parent[static_cast<std::size_t>(b)] = a;
    if (rank[static_cast<std::size_t>(a)] == rank[static_cast<std::size_t>(b)])
      ++rank[static_cast<std::size_t>(a)];
  };
  for (int x = 0; x < n; ++x)
    for (int y = x + 1; y < n; ++y)
      if (s.Rb(x, y)) unite(x, y);

  std::vector<std::vector<int>> classes(static_cast<std::size_t>(n));
  for (int x = 0; x < n; ++x)
    if (s.in_Tb[static_cast<std::size_t>(x)])
      classes[static_cast<std::size_t>(find(x))].push_back(x);

  for (int root = 0; root < n; ++root) {
    auto& cls = classes[static_cast<std::size_t>(root)];
    if (cls.empty()) continue;
    // The relation must be transitive on the class.
    for (std::size_t i = 0; i < cls.size(); ++i)
      for (std::size_t j = i + 1; j < cls.size(); ++j)
        if (!s.Rb(cls[i], cls[j]))
          throw structural_error(
              "decompose_rays: R_u^b is not an equivalence relation on T_u^b "
              "(tolerance misconfiguration?)");

    Ray ray;
    ray.members = cls;
    std::sort(ray.members.begin(), ray.members.end(), [&](int a, int b) {
      const double ua = u[static_cast<std::size_t>(a)], ub = u[static_cast<std::size_t>(b)];
      if (ua != ub) return ua > ub;
      return a < b;
    });
    ray.representative = ray.members.front();
    ray.params.resize(ray.members.size());
    for (std::size_t k = 0; k < ray.members.size(); ++k)
      ray.params[k] = space.d(ray.representative, ray.members[k]);

    // u affine with slope -1 in arc length, and the parametrization is an
    // isometry onto its image.
    const double pair_tol = 10.0 * s.tol;
    for (std::size_t i = 0; i < ray.members.size(); ++i) {
      const double du =
          u[static_cast<std::size_t>(ray.representative)] -
          u[static_cast<std::size_t>(ray.members[i])];
      if (std::abs(du - ray.params[i]) > pair_tol)
        throw structural_error("decompose_rays: u is not affine with slope -1 along a ray");
      for (std::size_t j = i + 1; j < ray.members.size(); ++j)
        if (std::abs(space.d(ray.members[i], ray.members[j]) -
                     (ray.params[j] - ray.params[i])) > pair_tol)
          throw structural_error("decompose_rays: ray parametrization is not an isometry");
    }

    dec.rays.push_back(std::move(ray));
  }

  std::sort(dec.rays.begin(), dec.rays.end(),
            [](const Ray& a, const Ray& b) { return a.representative < b.representative; });
  for (std::size_t r = 0; r < dec.rays.size(); ++r)
    for (int x : dec.rays[r].members) dec.f[static_cast<std::size_t>(x)] = static_cast<int>(r);
  return dec;
}

// Checks that no ray can be extended by another point of T_u^b while
// staying comparable in Gamma_u. With full equivalence classes this is
// automatic; it is still asserted because it is exactly the maximality
// requirement on transport rays.
inline bool ray_is_maximal(const Ray& ray, const RayDecomposition& dec,
                           const TransportStructure& s) {
  const int head = ray.members.front();
  const int tail = ray.members.back();
  for (int z = 0; z < s.n; ++z) {
    if (!s.in_Tb[static_cast<std::size_t>(z)] || dec.ray_of(z) == dec.ray_of(head)) continue;
    if (s.gamma(z, head) || s.gamma(tail, z)) return false;
  }
  return true;
}

// Reconstructs the needle (X_alpha, |.|, h dx) carried by a ray: each
// member's mass is spread uniformly over its Voronoi cell of the parameter
// list, and the resulting piecewise-constant density is sampled on a
// uniform grid. step < 0 selects the default 1e-3 * length.
inline Needle ray_to_needle(const Ray& ray, const DiscreteMeasure& mass_on_space,
                            double step = -1.0) {
  const std::size_t k = ray.members.size();
  if (k < 2) throw std::invalid_argument("ray_to_needle: degenerate single-point ray");
  const double L = ray.params.back();
  if (!(L > 0.0)) throw std::invalid_argument("ray_to_needle: zero-length ray");
  if (step < 0.0) step = 1e-3 * L;

  std::vector<double> boundary(k + 1);
  boundary[0] = 0.0;
  for (std::size_t i = 1; i < k; ++i) boundary[i] = 0.5 * (ray.params[i - 1] + ray.params[i]);
  boundary[k] = L;

  std::vector<double> cell_density(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double w = mass_on_space.w[static_cast<std::size_t>(ray.members[i])];
    if (w < 0.0) throw std::invalid_argument("ray_to_needle: negative mass");
    cell_density[i] = w / (boundary[i + 1] - boundary[i]);
  }

  Needle needle;
  needle.h = sample_on_grid(L, step, [&](double x) {
    const auto it = std::upper_bound(boundary.begin() + 1, boundary.end() - 1, x);
    const std::size_t c = static_cast<std::size_t>(it - (boundary.begin() + 1));
    return cell_density[c];
  });
  return needle;
}

}  // namespace mmcd
