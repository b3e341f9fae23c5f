#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "mmcd/coefficients.hpp"
#include "mmcd/disintegration.hpp"
#include "mmcd/measures.hpp"
#include "mmcd/rays.hpp"
#include "mmcd/transport.hpp"

// Curvature-dimension checks. Every check reports margins: for an
// inequality LHS >= RHS the margin of a sampled constraint is LHS - RHS,
// so a report passes iff its worst margin stays above -tolerance. A
// constraint whose right-hand side is +infinity against positive mass is an
// immediate failure (infinite margin deficit).

namespace mmcd {

struct Witness {
  std::string label;
  double margin = 0.0;
  bool infinite = false;  // infinitely violated constraint
  std::vector<std::pair<std::string, double>> params;
  std::string ray;  // offending ray representative, when applicable
};

class CheckReport {
 public:
  std::string check;
  double tolerance = 0.0;
  std::vector<std::string> notes;

  void add_constraint(double margin, Witness w) {
    ++constraints_;
    if (margin < worst_) worst_ = margin;
    w.margin = margin;
    keep(std::move(w));
  }
  void add_infinite_violation(Witness w) {
    ++constraints_;
    infinite_violation_ = true;
    w.infinite = true;
    w.margin = -std::numeric_limits<double>::infinity();
    keep(std::move(w));
  }
  void merge(const CheckReport& sub) {
    constraints_ += sub.constraints_;
    infinite_violation_ = infinite_violation_ || sub.infinite_violation_;
    if (sub.worst_ < worst_) worst_ = sub.worst_;
    for (const auto& w : sub.witnesses_) keep(w);
    notes.insert(notes.end(), sub.notes.begin(), sub.notes.end());
  }
  void note(std::string s) { notes.push_back(std::move(s)); }
  // Labels every kept witness lacking a ray with the given ray id.
  void tag_ray(const std::string& ray_id) {
    for (auto& w : witnesses_)
      if (w.ray.empty()) w.ray = ray_id;
  }

  bool passed() const { return !infinite_violation_ && worst_ >= -tolerance; }
  // min over sampled constraints of LHS - RHS; +inf when nothing was sampled
  double worst_margin() const { return worst_; }
  bool infinitely_violated() const { return infinite_violation_; }
  long constraints() const { return constraints_; }
  const std::vector<Witness>& witnesses() const { return witnesses_; }

 private:
  static constexpr std::size_t kWitnessCap = 8;
  void keep(Witness w) {
    witnesses_.push_back(std::move(w));
    std::stable_sort(witnesses_.begin(), witnesses_.end(), [](const Witness& a, const Witness& b) {
      if (a.infinite != b.infinite) return a.infinite;
      return a.margin < b.margin;
    });
    if (witnesses_.size() > kWitnessCap) witnesses_.resize(kWitnessCap);
  }
  long constraints_ = 0;
  double worst_ = std::numeric_limits<double>::infinity();
  bool infinite_violation_ = false;
  std::vector<Witness> witnesses_;
};

struct NeedleSampling {
  int r_samples = 48;        // grid nodes entering the (R0, R1) pairs
  int t_samples_per_pair = 7;
};

namespace detail {

inline std::vector<std::size_t> spread_indices(std::size_t n, int want) {
  std::vector<std::size_t> idx;
  if (n == 0) return idx;
  const std::size_t m = std::min<std::size_t>(static_cast<std::size_t>(std::max(want, 2)), n);
  for (std::size_t k = 0; k < m; ++k)
    idx.push_back((k * (n - 1)) / (m - 1 == 0 ? 1 : m - 1));
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  return idx;
}

inline std::vector<double> default_nprimes(double N) {
  return {N, N + 1.0, 2.0 * N, 10.0 * N};
}

}  // namespace detail

// 1D CD(K,N) of a needle, in two equivalent forms:
//  (a) sigma-concavity of g = h^{1/(N-1)} over sampled (R0, R1, t) windows
//      with R0, R1 and R_t = (1-t)R0 + tR1 all on grid nodes, so the
//      equality case of the model densities is reproduced to rounding;
//  (b) the distributional inequality g'' + K/(N-1) g <= 0 via central
//      second differences on interior nodes.
// tol < 0 selects 1e-6 + 10 step^2 (discrete budget + quadrature budget).
inline CheckReport needle_cd_check(const Needle& needle, double K, double N,
                                   NeedleSampling sampling = {}, double tol = -1.0) {
  if (!(N > 1.0))
    throw std::domain_error("needle_cd_check: the 1D condition requires N > 1");
  if (!needle.valid()) throw std::invalid_argument("needle_cd_check: invalid needle");
  const DensityOnNeedle& h = needle.h;
  const double step = h.step;

  CheckReport rep;
  rep.check = "needle-cd";
  rep.tolerance = tol < 0.0 ? 1e-6 + 10.0 * step * step : tol;

  const std::size_t n = h.values.size();
  std::vector<double> g(n);
  const double e = 1.0 / (N - 1.0);
  for (std::size_t i = 0; i < n; ++i) g[i] = std::pow(h.values[i], e);

  const auto idx = detail::spread_indices(n, sampling.r_samples);
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      const std::size_t i = idx[a], j = idx[b];
      const std::size_t span = j - i;
      if (span < 2) continue;
      const double theta = static_cast<double>(span) * step;
      // interior node fractions t = k/span keep R_t on the grid
      std::vector<std::size_t> ks;
      if (span - 1 <= static_cast<std::size_t>(sampling.t_samples_per_pair)) {
        for (std::size_t k = 1; k < span; ++k) ks.push_back(k);
      } else {
        for (int q = 0; q < sampling.t_samples_per_pair; ++q)
          ks.push_back(1 + (static_cast<std::size_t>(q) * (span - 2)) /
                               static_cast<std::size_t>(sampling.t_samples_per_pair - 1));
        ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
      }
      for (std::size_t k : ks) {
        const double t = static_cast<double>(k) / static_cast<double>(span);
        const ExtReal s0 = sigma(1.0 - t, K, N - 1.0, theta);
        const ExtReal s1 = sigma(t, K, N - 1.0, theta);
        Witness w;
        w.label = "sigma-concavity";
        w.params = {{"R0", h.node_x(i)}, {"R1", h.node_x(j)}, {"t", t}};
        double rhs = 0.0;
        bool inf_violated = false;
        if (s0.is_inf()) {
          if (g[i] > 0.0) inf_violated = true;
        } else {
          rhs += s0.value * g[i];
        }
        if (s1.is_inf()) {
          if (g[j] > 0.0) inf_violated = true;
        } else {
          rhs += s1.value * g[j];
        }
        if (inf_violated) {
          rep.add_infinite_violation(std::move(w));
          continue;
        }
        rep.add_constraint(g[i + k] - rhs, std::move(w));
      }
    }
  }

  // Second-difference form on all interior nodes.
  const double kn = K / (N - 1.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double defect = (g[i + 1] - 2.0 * g[i] + g[i - 1]) / (step * step) + kn * g[i];
    Witness w;
    w.label = "concavity-ode";
    w.params = {{"x", h.node_x(i)}};
    rep.add_constraint(-defect, std::move(w));
  }
  return rep;
}

// Measure-contraction inequality along a plan transporting mu0 to a Dirac
// mass at x0: for sampled t in [0,1) and N' >= N,
//   int rho_t^{-1/N'} dmu_t >= int tau_{K,N'}^{(1-t)}(d(x,x0)) rho_0^{-1/N'} dmu0.
// The left side is evaluated on the absolutely continuous part of mu_t.
inline CheckReport mcp_check(const FiniteMMSpace& space, double K, double N,
                             const DiscreteMeasure& mu0, int x0, const DynamicPlan& plan,
                             std::vector<double> t_samples = {},
                             std::vector<double> nprime_samples = {}, double tol = 1e-9) {
  CheckReport rep;
  rep.check = "mcp";
  rep.tolerance = tol;
  if (t_samples.empty()) t_samples = {0.0, 0.125, 0.25, 0.5, 0.75, 0.875};
  if (nprime_samples.empty()) nprime_samples = detail::default_nprimes(N);

  const std::size_t n = static_cast<std::size_t>(space.n());
  const DiscreteMeasure start = interpolate_at(plan, 0.0, n);
  const DiscreteMeasure end = interpolate_at(plan, 1.0, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(start.w[i] - mu0.w[i]) > 1e-9)
      throw std::invalid_argument("mcp_check: plan does not start at mu0");
    if (end.w[i] > 1e-9 && static_cast<int>(i) != x0)
      throw std::invalid_argument("mcp_check: plan does not contract to x0");
  }
  const AcDecomposition a0 = ac_decompose(mu0, space.ref);
  if (a0.singular.total() > 1e-12)
    throw std::invalid_argument("mcp_check: mu0 is not absolutely continuous");

  for (double t : t_samples) {
    if (!(t >= 0.0 && t < 1.0)) continue;
    const DiscreteMeasure mu_t = interpolate_at(plan, t, n);
    const AcDecomposition at = ac_decompose(mu_t, space.ref);
    for (double Np : nprime_samples) {
      KahanSum lhs;
      for (std::size_t i = 0; i < n; ++i)
        if (at.density[i] > 0.0 && space.ref.w[i] > 0.0)
          lhs.add(std::pow(at.density[i], 1.0 - 1.0 / Np) * space.ref.w[i]);

      KahanSum rhs;
      bool infinite = false;
      double witness_d = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (mu0.w[i] <= 0.0) continue;
        const ExtReal tv = tau(1.0 - t, K, Np, space.d(static_cast<int>(i), x0));
        if (tv.is_inf()) {
          infinite = true;
          witness_d = space.d(static_cast<int>(i), x0);
          break;
        }
        rhs.add(tv.value * std::pow(a0.density[i], -1.0 / Np) * mu0.w[i]);
      }
      Witness w;
      w.label = "mcp";
      w.params = {{"t", t}, {"Nprime", Np}};
      if (infinite) {
        w.params.emplace_back("d", witness_d);
        rep.add_infinite_violation(std::move(w));
      } else {
        rep.add_constraint(lhs.value() - rhs.value(), std::move(w));
      }
    }
  }
  return rep;
}

// Raised when a plan handed to a CD check is not W_p-optimal.
class plan_not_optimal : public std::runtime_error {
 public:
  plan_not_optimal(const std::string& what, double gap)
      : std::runtime_error(what), gap(gap) {}
  double gap = 0.0;
};

namespace detail {

// Shared core of the entropy convexity checks: margins of
//   -S_{N'}(mu_t | m) >= sum_pairs mass [tau^{(1-t)} rho0^{-1/N'} + tau^{(t)} rho1^{-1/N'}]
// where the pair set is either plan chains or coupling entries.
struct PairTerm {
  int x = 0, y = 0;
  double dist = 0.0;
  double mass = 0.0;
};

inline void entropy_convexity_margins(CheckReport& rep, const FiniteMMSpace& space,
                                      const DynamicPlan& plan,
                                      const std::vector<PairTerm>& pairs,
                                      const std::vector<double>& rho0,
                                      const std::vector<double>& rho1, double K,
                                      const std::vector<double>& t_samples,
                                      const std::vector<double>& nprime_samples) {
  const std::size_t n = static_cast<std::size_t>(space.n());
  for (double t : t_samples) {
    if (!(t >= 0.0 && t <= 1.0)) continue;
    const DiscreteMeasure mu_t = interpolate_at(plan, t, n);
    const AcDecomposition at = ac_decompose(mu_t, space.ref);
    if (at.singular.total() > 1e-12) {
      Witness w;
      w.label = "absolute-continuity";
      w.params = {{"t", t}, {"singular_mass", at.singular.total()}};
      rep.add_infinite_violation(std::move(w));
      rep.note("mu_t has singular mass at t=" + std::to_string(t));
      continue;
    }
    for (double Np : nprime_samples) {
      KahanSum lhs;  // -S_{N'}(mu_t | m)
      for (std::size_t i = 0; i < n; ++i)
        if (at.density[i] > 0.0 && space.ref.w[i] > 0.0)
          lhs.add(std::pow(at.density[i], 1.0 - 1.0 / Np) * space.ref.w[i]);

      KahanSum rhs;
      bool infinite = false;
      double wit_d = 0.0;
      for (const auto& pr : pairs) {
        if (pr.mass <= 0.0) continue;
        const ExtReal t0 = tau(1.0 - t, K, Np, pr.dist);
        const ExtReal t1 = tau(t, K, Np, pr.dist);
        if (t0.is_inf() || t1.is_inf()) {
          infinite = true;
          wit_d = pr.dist;
          break;
        }
        rhs.add(pr.mass * (t0.value * std::pow(rho0[static_cast<std::size_t>(pr.x)], -1.0 / Np) +
                           t1.value * std::pow(rho1[static_cast<std::size_t>(pr.y)], -1.0 / Np)));
      }
      Witness w;
      w.label = "entropy-convexity";
      w.params = {{"t", t}, {"Nprime", Np}};
      if (infinite) {
        w.params.emplace_back("d", wit_d);
        rep.add_infinite_violation(std::move(w));
      } else {
        rep.add_constraint(lhs.value() - rhs.value(), std::move(w));
      }
    }
  }
}

inline void require_endpoints(const DynamicPlan& plan, const DiscreteMeasure& mu0,
                              const DiscreteMeasure& mu1, std::size_t n, const char* who) {
  const DiscreteMeasure p0 = interpolate_at(plan, 0.0, n);
  const DiscreteMeasure p1 = interpolate_at(plan, 1.0, n);
  for (std::size_t i = 0; i < n; ++i)
    if (std::abs(p0.w[i] - mu0.w[i]) > 1e-9 || std::abs(p1.w[i] - mu1.w[i]) > 1e-9)
      throw std::invalid_argument(std::string(who) + ": plan endpoints do not match marginals");
}

inline std::vector<double> require_ac(const DiscreteMeasure& mu, const FiniteMMSpace& space,
                                      const char* who) {
  const AcDecomposition a = ac_decompose(mu, space.ref);
  if (a.singular.total() > 1e-12)
    throw std::invalid_argument(std::string(who) +
                                ": marginal is not absolutely continuous w.r.t. m");
  return a.density;
}

}  // namespace detail

// Entropy convexity along a W_1-optimal dynamic plan concentrated on
// constant-speed chains (the displacement convexity inequality with tau
// coefficients integrated against the plan). Rejects plans whose transport
// cost exceeds W_1(mu0, mu1) beyond w1_tol.
inline CheckReport cd1_entropy_check(const FiniteMMSpace& space, const DynamicPlan& plan,
                                     const DiscreteMeasure& mu0, const DiscreteMeasure& mu1,
                                     double K, double N, std::vector<double> t_samples = {},
                                     std::vector<double> nprime_samples = {},
                                     double tol = 1e-9, double w1_tol = 1e-8) {
  CheckReport rep;
  rep.check = "cd1-entropy";
  rep.tolerance = tol;
  if (t_samples.empty()) t_samples = {0.0, 0.25, 0.5, 0.75, 1.0};
  if (nprime_samples.empty()) nprime_samples = detail::default_nprimes(N);

  const std::size_t n = static_cast<std::size_t>(space.n());
  detail::require_endpoints(plan, mu0, mu1, n, "cd1_entropy_check");
  const std::vector<double> rho0 = detail::require_ac(mu0, space, "cd1_entropy_check");
  const std::vector<double> rho1 = detail::require_ac(mu1, space, "cd1_entropy_check");

  const double w1 = wasserstein_p(space, mu0, mu1, 1.0).value;
  const double plan_cost = plan.cost(space, 1.0);
  const double gap = plan_cost - w1;
  if (std::abs(gap) > w1_tol * std::max(1.0, w1))
    throw plan_not_optimal("cd1_entropy_check: plan cost exceeds W_1 by " + std::to_string(gap),
                           gap);

  for (const auto& e : plan.entries)
    if (!check_constant_speed(e.chain, space, 1e-7))
      throw std::invalid_argument("cd1_entropy_check: plan chain is not constant speed");

  std::vector<detail::PairTerm> pairs;
  pairs.reserve(plan.entries.size());
  for (const auto& e : plan.entries)
    pairs.push_back({e.chain.start(), e.chain.end(),
                     space.d(e.chain.start(), e.chain.end()), e.mass});
  detail::entropy_convexity_margins(rep, space, plan, pairs, rho0, rho1, K, t_samples,
                                    nprime_samples);
  return rep;
}

// Entropy convexity along a W_2-geodesic against an optimal d^2 coupling.
inline CheckReport cd2_check(const FiniteMMSpace& space, const Coupling& coupling,
                             const DynamicPlan& plan, const DiscreteMeasure& mu0,
                             const DiscreteMeasure& mu1, double K, double N,
                             std::vector<double> t_samples = {},
                             std::vector<double> nprime_samples = {}, double tol = 1e-9,
                             double opt_tol = 1e-9) {
  CheckReport rep;
  rep.check = "cd2";
  rep.tolerance = tol;
  if (t_samples.empty()) t_samples = {0.0, 0.25, 0.5, 0.75, 1.0};
  if (nprime_samples.empty()) nprime_samples = detail::default_nprimes(N);

  const std::size_t n = static_cast<std::size_t>(space.n());
  detail::require_endpoints(plan, mu0, mu1, n, "cd2_check");
  const std::vector<double> rho0 = detail::require_ac(mu0, space, "cd2_check");
  const std::vector<double> rho1 = detail::require_ac(mu1, space, "cd2_check");

  const double lp = wasserstein_p(space, mu0, mu1, 2.0).objective;
  const double cc = coupling.cost(space, 2.0);
  if (std::abs(cc - lp) > opt_tol * std::max(1.0, lp))
    throw plan_not_optimal("cd2_check: coupling is not d^2-optimal (excess " +
                               std::to_string(cc - lp) + ")",
                           cc - lp);

  // Plan consistency: endpoint pushforward of the plan equals the coupling.
  {
    std::vector<double> pc(n * n, 0.0), cp(n * n, 0.0);
    for (const auto& e : plan.entries)
      pc[static_cast<std::size_t>(e.chain.start()) * n + e.chain.end()] += e.mass;
    for (const auto& e : coupling.entries)
      cp[static_cast<std::size_t>(e.x) * n + e.y] += e.mass;
    for (std::size_t i = 0; i < pc.size(); ++i)
      if (std::abs(pc[i] - cp[i]) > 1e-10)
        throw std::invalid_argument("cd2_check: plan endpoints do not realize the coupling");
  }

  std::vector<detail::PairTerm> pairs;
  for (const auto& e : coupling.entries)
    pairs.push_back({e.x, e.y, space.d(e.x, e.y), e.mass});
  detail::entropy_convexity_margins(rep, space, plan, pairs, rho0, rho1, K, t_samples,
                                    nprime_samples);
  return rep;
}

// Everything cd1_condition_check computes on the way to its verdict, kept
// for downstream use (gluing, reporting, plots).
struct Cd1ConditionResult {
  CheckReport report;
  TransportStructure structure;
  RayDecomposition decomposition;
  Disintegration disintegration;
  std::vector<std::pair<int, Needle>> needles;  // (ray index, needle)
};

// The full 1-Lipschitz localization condition for a single potential u:
//  (1) the disintegration of m over the rays reconstructs m on T_u^b,
//  (2) every ray is a maximal transport ray (u affine with slope -1), and
//  (3) every needle with positive quotient mass satisfies 1D CD(K,N).
inline Cd1ConditionResult cd1_condition_check(const FiniteMMSpace& space,
                                              const std::vector<double>& u, double K, double N,
                                              double needle_step = -1.0,
                                              NeedleSampling sampling = {}, double tol = -1.0,
                                              double gamma_tol = -1.0) {
  Cd1ConditionResult out;
  CheckReport& rep = out.report;
  rep.check = "cd1-condition";
  rep.tolerance = tol < 0.0 ? 1e-6 : tol;

  const LipschitzReport lip = is_one_lipschitz(u, space, 1e-9);
  if (!lip.ok) throw std::invalid_argument("cd1_condition_check: u is not 1-Lipschitz");

  out.structure = build_gamma(space, u, gamma_tol);
  branching_sets(out.structure, space);
  const std::vector<int> T = out.structure.transport_set();
  if (T.empty()) {
    rep.note("no transport set: condition holds vacuously");
    return out;
  }
  out.decomposition = decompose_rays(out.structure, space, u);
  out.disintegration = disintegrate(space.ref, out.decomposition);

  const double bmass = branching_mass(out.structure, space.ref);
  rep.note("branching mass = " + std::to_string(bmass));

  // (1) reconstruction of m on T_u^b
  const std::size_t n = static_cast<std::size_t>(space.n());
  const DiscreteMeasure rec = out.disintegration.reconstruct(n);
  double rec_err = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (out.decomposition.f[i] >= 0)
      rec_err = std::max(rec_err, std::abs(rec.w[i] - space.ref.w[i]));
  {
    Witness w;
    w.label = "disintegration-reconstruction";
    rep.add_constraint(-rec_err, std::move(w));
  }
  for (std::size_t r = 0; r < out.disintegration.ray.size(); ++r) {
    Witness w;
    w.label = "conditional-normalization";
    w.ray = space.ids[static_cast<std::size_t>(
        out.decomposition.rays[static_cast<std::size_t>(out.disintegration.ray[r])]
            .representative)];
    rep.add_constraint(-std::abs(out.disintegration.conditional[r].total() - 1.0), std::move(w));
  }

  // (2) + (3) per ray
  for (std::size_t r = 0; r < out.disintegration.ray.size(); ++r) {
    const int ray_index = out.disintegration.ray[r];
    const Ray& ray = out.decomposition.rays[static_cast<std::size_t>(ray_index)];
    const std::string ray_id = space.ids[static_cast<std::size_t>(ray.representative)];

    if (ray.members.size() < 2) {
      Witness w;
      w.label = "degenerate-ray";
      w.ray = ray_id;
      rep.add_infinite_violation(std::move(w));
      rep.note("ray " + ray_id + " is a single point with positive quotient mass");
      continue;
    }
    if (!ray_is_maximal(ray, out.decomposition, out.structure)) {
      Witness w;
      w.label = "ray-maximality";
      w.ray = ray_id;
      rep.add_infinite_violation(std::move(w));
      continue;
    }
    // slope -1 affinity along the ray (in arc length)
    double dev = 0.0;
    for (std::size_t i = 0; i < ray.members.size(); ++i)
      for (std::size_t j = i + 1; j < ray.members.size(); ++j) {
        dev = std::max(dev, std::abs((u[static_cast<std::size_t>(ray.members[i])] -
                                      u[static_cast<std::size_t>(ray.members[j])]) -
                                     (ray.params[j] - ray.params[i])));
        dev = std::max(dev, std::abs(space.d(ray.members[i], ray.members[j]) -
                                     (ray.params[j] - ray.params[i])));
      }
    {
      Witness w;
      w.label = "transport-ray-affinity";
      w.ray = ray_id;
      rep.add_constraint(-dev, std::move(w));
    }

    Needle needle = ray_to_needle(ray, out.disintegration.conditional[r], needle_step);
    CheckReport sub = needle_cd_check(needle, K, N, sampling, tol);
    sub.tag_ray(ray_id);
    rep.tolerance = std::max(rep.tolerance, sub.tolerance);  // includes the 10 step^2 budget
    rep.merge(sub);
    out.needles.emplace_back(ray_index, std::move(needle));
  }
  return out;
}

// The localized comparison inequality over a family of needles Q-bar:
//   (L_t)^{1/N} sup h^{1/N}(R_t)
//     >= (L_0)^{1/N} tau^{(1-t)}_{K,N}(R1-R0) inf h^{1/N}(R0)
//      + (L_1)^{1/N} tau^{(t)}_{K,N}(R1-R0) inf h^{1/N}(R1)
// with R_t, L_t the linear interpolations. The window must satisfy
// [R0, R1+L1] inside the domain of every selected needle.
inline CheckReport firstclaim_check(const std::vector<const Needle*>& selected,
                                    const std::vector<std::string>& labels, double K, double N,
                                    double R0, double R1, double L0, double L1,
                                    std::vector<double> t_samples = {}, double tol = 1e-6) {
  CheckReport rep;
  rep.check = "firstclaim";
  rep.tolerance = tol;
  if (selected.empty()) throw std::invalid_argument("firstclaim_check: empty needle family");
  if (!(R0 < R1)) throw std::domain_error("firstclaim_check: requires R0 < R1");
  if (!(L0 > 0.0 && L1 > 0.0)) throw std::domain_error("firstclaim_check: L0, L1 must be > 0");
  double min_len = std::numeric_limits<double>::infinity();
  for (const Needle* nd : selected) min_len = std::min(min_len, nd->length());
  if (R0 < -1e-12 || R1 + L1 > min_len + 1e-12)
    throw std::domain_error("firstclaim_check: window [R0, R1+L1] leaves a needle domain");
  if (t_samples.empty()) t_samples = {0.0, 0.25, 0.5, 0.75, 1.0};

  const double theta = R1 - R0;
  const double eN = 1.0 / N;
  auto sup_inf_at = [&](double x) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    std::size_t arg_hi = 0;
    for (std::size_t i = 0; i < selected.size(); ++i) {
      const double v = std::pow(selected[i]->h.value_at(x), eN);
      lo = std::min(lo, v);
      if (v > hi) {
        hi = v;
        arg_hi = i;
      }
    }
    return std::tuple<double, double, std::size_t>(lo, hi, arg_hi);
  };
  const auto [inf0, sup0, a0] = sup_inf_at(R0);
  const auto [inf1, sup1, a1] = sup_inf_at(R1);
  (void)sup0;
  (void)sup1;
  (void)a0;
  (void)a1;

  for (double t : t_samples) {
    if (!(t >= 0.0 && t <= 1.0)) continue;
    const double Rt = (1.0 - t) * R0 + t * R1;
    const double Lt = (1.0 - t) * L0 + t * L1;
    const auto [inft, supt, at] = sup_inf_at(Rt);
    (void)inft;

    const ExtReal tau0 = tau(1.0 - t, K, N, theta);
    const ExtReal tau1 = tau(t, K, N, theta);
    Witness w;
    w.label = "firstclaim";
    w.params = {{"R0", R0}, {"R1", R1}, {"L0", L0}, {"L1", L1}, {"t", t}};
    if (selected.size() == 1 && !labels.empty()) w.ray = labels.front();

    double rhs = 0.0;
    bool infinite = false;
    if (tau0.is_inf()) {
      if (inf0 > 0.0) infinite = true;
    } else {
      rhs += std::pow(L0, eN) * tau0.value * inf0;
    }
    if (tau1.is_inf()) {
      if (inf1 > 0.0) infinite = true;
    } else {
      rhs += std::pow(L1, eN) * tau1.value * inf1;
    }
    if (infinite) {
      rep.add_infinite_violation(std::move(w));
      continue;
    }
    const double lhs = std::pow(Lt, eN) * supt;
    if (!labels.empty() && selected.size() > 1) w.ray = labels[at];
    rep.add_constraint(lhs - rhs, std::move(w));
  }
  return rep;
}

// Numerical form of the substitution that turns the L-weighted inequality
// into the sigma-concavity inequality: with
//   L0 = sigma^{(1-t)}_{K,N-1}(theta) h0^{1/(N-1)} / (1-t)
//   L1 = sigma^{(t)}_{K,N-1}(theta) h1^{1/(N-1)} / t
// the two tau-terms collapse to the sigma-terms and L_t collapses to their
// sum. Returns the worst relative deviation across the three identities;
// also reports whether the two inequality margins agree in sign.
struct SubstitutionSample {
  double h0 = 1.0, h1 = 1.0, ht = 1.0;
  double t = 0.5, theta = 1.0, K = 0.0, N = 2.0;
};

struct SubstitutionIdentity {
  double max_rel_gap = 0.0;
  double margin_weighted = 0.0;  // L-form margin
  double margin_sigma = 0.0;     // sigma-concavity margin
  bool signs_agree = true;
};

inline SubstitutionIdentity substitution_identity(const SubstitutionSample& s) {
  if (!(s.t > 0.0 && s.t < 1.0))
    throw std::domain_error("substitution_identity: t must lie in (0,1)");
  if (!(s.N > 1.0)) throw std::domain_error("substitution_identity: N must be > 1");
  const double em1 = 1.0 / (s.N - 1.0);
  const double eN = 1.0 / s.N;
  const double A = sigma(1.0 - s.t, s.K, s.N - 1.0, s.theta).finite() * std::pow(s.h0, em1);
  const double B = sigma(s.t, s.K, s.N - 1.0, s.theta).finite() * std::pow(s.h1, em1);
  const double L0 = A / (1.0 - s.t);
  const double L1 = B / s.t;
  const double Lt = (1.0 - s.t) * L0 + s.t * L1;

  const double term0 =
      std::pow(L0, eN) * tau(1.0 - s.t, s.K, s.N, s.theta).finite() * std::pow(s.h0, eN);
  const double term1 = std::pow(L1, eN) * tau(s.t, s.K, s.N, s.theta).finite() * std::pow(s.h1, eN);

  SubstitutionIdentity out;
  auto rel = [](double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
  };
  out.max_rel_gap = std::max({rel(term0, A), rel(term1, B), rel(Lt, A + B)});
  out.margin_weighted = std::pow(Lt, eN) * std::pow(s.ht, eN) - (term0 + term1);
  out.margin_sigma = std::pow(s.ht, em1) - (A + B);
  const double noise = 1e-12 * (1.0 + std::abs(out.margin_sigma));
  if (std::abs(out.margin_sigma) > noise && std::abs(out.margin_weighted) > noise)
    out.signs_agree = (out.margin_sigma > 0.0) == (out.margin_weighted > 0.0);
  return out;
}

}  // namespace mmcd
