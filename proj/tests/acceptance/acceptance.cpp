// Acceptance suite: one test case per criterion, each printing a PASS/FAIL
// line. Tolerances are pinned here, in code.

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "mmcd/io.hpp"
#include "mmcd/mmcd.hpp"
#include "mmcd/oracle.hpp"

using namespace mmcd;

namespace {

struct CriterionLine {
  int index;
  std::string text;
  bool ok = true;
  ~CriterionLine() {
    std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", index, text.c_str());
    std::fflush(stdout);
  }
};

std::vector<double> minus_x(const FiniteMMSpace& space) {
  std::vector<double> u(static_cast<std::size_t>(space.n()));
  for (int i = 0; i < space.n(); ++i)
    u[static_cast<std::size_t>(i)] = -space.xy[static_cast<std::size_t>(i)][0];
  return u;
}

}  // namespace

TEST_CASE("criterion 1: coefficient correctness against the 50-digit oracle",
          "[acceptance]") {
  CriterionLine line{1, "sigma/tau match the high-precision oracle to 1e-12 relative"};
  long checked = 0;
  double worst_rel = 0.0;
  bool branches_ok = true;

  const std::vector<double> ts = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  const std::vector<double> Ks = {-4.0, -1.0, 0.0, 1.0, 4.0};
  const std::vector<double> Ns = {1.0, 2.0, 3.5, 5.0, 10.0};
  std::vector<double> thetas;
  for (int k = 0; k < 50; ++k) thetas.push_back(3.0 * kPi * k / 49.0);

  auto rel = [](double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
  };

  for (double t : ts)
    for (double K : Ks)
      for (double N : Ns)
        for (double theta : thetas) {
          const ExtReal s = sigma(t, K, N, theta);
          const ExtReal tv = tau(t, K, N, theta);

          // exact case-split behavior of the main path
          const double q = K * theta * theta;
          if (q >= N * kPi * kPi) branches_ok = branches_ok && s.is_inf();
          if (q == 0.0) branches_ok = branches_ok && !s.is_inf() && s.value == t;
          if (N == 1.0)
            branches_ok = branches_ok &&
                          (K <= 0.0 ? (!tv.is_inf() && tv.value == t) : tv.is_inf());

          // stay off the sliver around the conjugate-point boundary: just
          // below it the sine ratio is ill-conditioned in doubles, and on
          // the boundary itself the working-precision case split may
          // classify a rounded input differently than 50-digit arithmetic
          if (K > 0.0) {
            const double ratio_s = K * theta * theta / (N * kPi * kPi);
            const double ratio_t = N > 1.0 ? K * theta * theta / ((N - 1.0) * kPi * kPi) : 0.0;
            if ((ratio_s > 0.985 && ratio_s < 1.015) || (ratio_t > 0.985 && ratio_t < 1.015))
              continue;
          }
          const HpCoefficients hp = hp_sigma_tau(t, K, N, theta);
          ++checked;
          if (s.is_inf() != hp.sigma_inf || tv.is_inf() != hp.tau_inf) {
            branches_ok = false;
            continue;
          }
          if (!s.is_inf() && std::abs(s.value) > 1e-300 && std::abs(hp.sigma) > 1e-300)
            worst_rel = std::max(worst_rel, rel(s.value, hp.sigma));
          if (!tv.is_inf() && std::abs(tv.value) > 1e-300 && std::abs(hp.tau) > 1e-300)
            worst_rel = std::max(worst_rel, rel(tv.value, hp.tau));
        }

  INFO("grid points checked: " << checked << ", worst relative error " << worst_rel);
  line.ok = checked >= 10000 && worst_rel <= 1e-12 && branches_ok;
  CHECK(checked >= 10000);
  CHECK(worst_rel <= 1e-12);
  CHECK(branches_ok);
}

TEST_CASE("criterion 2: model-space saturation and violation", "[acceptance]") {
  CriterionLine line{2, "sine/sinh needles saturate, exp(x^2) fails with witness"};
  bool ok = true;
  const double step = 1e-3;
  const double band = 10.0 * step * step;

  for (const auto& [K, N] : std::vector<std::pair<double, double>>{{1, 2}, {1, 3}, {2, 5}}) {
    const Needle n = fixtures::sine_needle(K, N, step);
    const CheckReport rep = needle_cd_check(n, K, N);
    INFO("sine K=" << K << " N=" << N << " worst=" << rep.worst_margin());
    CHECK(rep.passed());
    CHECK(std::abs(rep.worst_margin()) <= 10.0 * n.h.step * n.h.step);
    ok = ok && rep.passed() && std::abs(rep.worst_margin()) <= 10.0 * n.h.step * n.h.step;
  }
  {
    const Needle n = fixtures::sinh_needle(-1.0, 2.0, 2.0, step);
    const CheckReport rep = needle_cd_check(n, -1.0, 2.0);
    CHECK(rep.passed());
    CHECK(std::abs(rep.worst_margin()) <= band);
    ok = ok && rep.passed() && std::abs(rep.worst_margin()) <= band;
  }
  {
    const Needle n = fixtures::expsq_needle(1.0, step);
    const CheckReport rep = needle_cd_check(n, 0.0, 2.0);
    CHECK_FALSE(rep.passed());
    bool located = false;
    for (const auto& w : rep.witnesses())
      for (const auto& [k, v] : w.params)
        if ((k == "x" || k == "R0") && v >= 0.0 && v <= 1.0) located = true;
    CHECK(located);
    ok = ok && !rep.passed() && located;
  }
  line.ok = ok;
}

TEST_CASE("criterion 3: transport exactness, duality, monotonicity", "[acceptance]") {
  CriterionLine line{3, "LP matches the rational oracle; duality gap and cycles certified"};
  std::mt19937_64 rng(314159);
  bool ok = true;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 4 + static_cast<int>(rng() % 3);
    FiniteMMSpace space;
    for (int i = 0; i < n; ++i) {
      space.ids.push_back("q" + std::to_string(i));
      space.xy.push_back({uniform_in(rng, 0.0, 3.0), uniform_in(rng, 0.0, 3.0)});
    }
    fixtures::euclidean_distances(space);
    space.ref = DiscreteMeasure::uniform(static_cast<std::size_t>(n));

    DiscreteMeasure mu0 = DiscreteMeasure::zero(static_cast<std::size_t>(n));
    DiscreteMeasure mu1 = DiscreteMeasure::zero(static_cast<std::size_t>(n));
    const int s0 = 1 + static_cast<int>(rng() % 6), s1 = 1 + static_cast<int>(rng() % 6);
    for (int k = 0; k < s0; ++k) mu0.w[rng() % n] += uniform_in(rng, 0.1, 1.0);
    for (int k = 0; k < s1; ++k) mu1.w[rng() % n] += uniform_in(rng, 0.1, 1.0);
    const double t0 = mu0.total(), t1 = mu1.total();
    for (auto& v : mu0.w) v /= t0;
    for (auto& v : mu1.w) v /= t1;

    const double p = (trial % 2 == 0) ? 1.0 : 2.0;
    const OTResult r = wasserstein_p(space, mu0, mu1, p);
    const double oracle = brute_force_ot(space, mu0, mu1, p);
    ok = ok && std::abs(r.value - oracle) <= 1e-9;
    CHECK(std::abs(r.value - oracle) <= 1e-9);

    if (p == 1.0) {
      const auto u = kantorovich_potential(space, mu0, mu1);
      KahanSum acc;
      for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i)
        acc.add(u[i] * (mu0.w[i] - mu1.w[i]));
      const double gap = std::abs(acc.value() - r.value);
      ok = ok && gap <= 1e-9;
      CHECK(gap <= 1e-9);
    }
    std::vector<std::pair<int, int>> supp;
    for (const auto& e : r.coupling.entries) supp.emplace_back(e.x, e.y);
    const bool cm = is_cyclically_monotone(supp, space, 4, p);
    ok = ok && cm;
    CHECK(cm);
  }
  line.ok = ok;
}

TEST_CASE("criterion 4: ray machinery on grids and the tripod", "[acceptance]") {
  CriterionLine line{4, "rows recovered, no branching, exact disintegration; tripod branches"};
  bool ok = true;
  for (int size : {3, 5}) {
    const FiniteMMSpace grid = fixtures::grid_uniform(size, size);
    const std::vector<double> u = minus_x(grid);
    TransportStructure s = build_gamma(grid, u);
    branching_sets(s, grid);
    ok = ok && s.points_in(s.in_Aplus).empty() && s.points_in(s.in_Aminus).empty();
    CHECK(s.points_in(s.in_Aplus).empty());
    CHECK(s.points_in(s.in_Aminus).empty());

    const RayDecomposition dec = decompose_rays(s, grid, u);
    ok = ok && static_cast<int>(dec.rays.size()) == size;
    REQUIRE(static_cast<int>(dec.rays.size()) == size);
    for (int r = 0; r < size; ++r) {
      std::vector<int> row;
      for (int c = 0; c < size; ++c) row.push_back(r * size + c);
      ok = ok && dec.rays[static_cast<std::size_t>(r)].members == row;
      CHECK(dec.rays[static_cast<std::size_t>(r)].members == row);
    }

    const Disintegration dis = disintegrate(grid.ref, dec);
    const DiscreteMeasure rec = dis.reconstruct(static_cast<std::size_t>(size * size));
    for (std::size_t i = 0; i < rec.size(); ++i) {
      ok = ok && std::abs(rec.w[i] - grid.ref.w[i]) <= 1e-14;
      CHECK(std::abs(rec.w[i] - grid.ref.w[i]) <= 1e-14);
    }
    for (std::size_t r = 0; r < dis.ray.size(); ++r)
      for (int x : dec.rays[static_cast<std::size_t>(dis.ray[r])].members) {
        const double c = dis.conditional[r].w[static_cast<std::size_t>(x)];
        ok = ok && std::abs(c - 1.0 / size) <= 1e-12;
        CHECK(std::abs(c - 1.0 / size) <= 1e-12);
      }
  }
  {
    const FiniteMMSpace tri = fixtures::tripod();
    std::vector<double> u(4);
    for (int i = 0; i < 4; ++i) u[static_cast<std::size_t>(i)] = -tri.d(i, 1);
    TransportStructure s = build_gamma(tri, u);
    branching_sets(s, tri);
    ok = ok && s.in_Aplus[0];
    CHECK(s.in_Aplus[0]);  // the center, by triple enumeration
  }
  line.ok = ok;
}

TEST_CASE("criterion 5: glued plans are entropy-convex W_1 geodesics", "[acceptance]") {
  CriterionLine line{5, "glued plans: exact marginals, W_1 linearity, entropy convexity"};
  bool ok = true;
  int pair_index = 0;
  for (int size : {3, 5}) {
    const FiniteMMSpace grid = fixtures::grid_trapezoid(size, size);
    const std::vector<double> u = minus_x(grid);
    const Cd1ConditionResult cond = cd1_condition_check(grid, u, 0.0, 2.0);
    ok = ok && cond.report.passed();
    REQUIRE(cond.report.passed());

    for (int k = 0; k < 10; ++k, ++pair_index) {
      auto [mu0, mu1] = fixtures::random_rightward_pair(size, size, 271828 + pair_index);
      const GluedPlan glued = glue_geodesics(grid, mu0, mu1, &u);
      const std::size_t n = static_cast<std::size_t>(grid.n());

      // (i) exact marginals
      const DiscreteMeasure p0 = interpolate_at(glued.plan, 0.0, n);
      const DiscreteMeasure p1 = interpolate_at(glued.plan, 1.0, n);
      for (std::size_t i = 0; i < n; ++i) {
        ok = ok && std::abs(p0.w[i] - mu0.w[i]) <= 1e-14 &&
             std::abs(p1.w[i] - mu1.w[i]) <= 1e-14;
        CHECK(std::abs(p0.w[i] - mu0.w[i]) <= 1e-14);
        CHECK(std::abs(p1.w[i] - mu1.w[i]) <= 1e-14);
      }

      // (ii) W_1(mu_t, mu_s) = |t-s| W_1(mu_0, mu_1) within 1e-8
      const CheckReport w1rep =
          w1_geodesic_check(grid, glued.plan, {0.0, 0.25, 0.5, 0.75, 1.0}, 1e-8);
      ok = ok && w1rep.passed();
      CHECK(w1rep.passed());

      // (iii) entropy convexity at N' in {2,3,4,20} with margin >= -1e-6
      const CheckReport ent = cd1_entropy_check(grid, glued.plan, mu0, mu1, 0.0, 2.0,
                                                {0.0, 0.25, 0.5, 0.75, 1.0},
                                                {2.0, 3.0, 4.0, 20.0}, 1e-6);
      ok = ok && ent.passed() && ent.worst_margin() >= -1e-6;
      CHECK(ent.passed());
      CHECK(ent.worst_margin() >= -1e-6);
    }
  }
  line.ok = ok;
}

TEST_CASE("criterion 6: localized comparison inequality and substitution identity",
          "[acceptance]") {
  CriterionLine line{6, "firstclaim windows pass; substitution collapses; corrupted ray named"};
  bool ok = true;
  std::mt19937_64 rng(161803);

  // 100 random admissible windows over the decomposed grid fixtures
  for (int size : {3, 5}) {
    const FiniteMMSpace grid = fixtures::grid_trapezoid(size, size);
    const std::vector<double> u = minus_x(grid);
    TransportStructure s = build_gamma(grid, u);
    branching_sets(s, grid);
    const RayDecomposition dec = decompose_rays(s, grid, u);
    const Disintegration dis = disintegrate(grid.ref, dec);
    std::vector<Needle> needles;
    std::vector<std::string> labels;
    for (std::size_t r = 0; r < dis.ray.size(); ++r) {
      const Ray& ray = dec.rays[static_cast<std::size_t>(dis.ray[r])];
      needles.push_back(ray_to_needle(ray, dis.conditional[r], 1e-3));
      labels.push_back(grid.ids[static_cast<std::size_t>(ray.representative)]);
      REQUIRE(needle_cd_check(needles.back(), 0.0, 2.0).passed());
    }
    std::vector<const Needle*> sel;
    for (const auto& nd : needles) sel.push_back(&nd);
    const double L = needles.front().length();
    for (int w = 0; w < 50; ++w) {
      const double R0 = uniform_in(rng, 0.0, 0.4 * L);
      const double R1 = uniform_in(rng, R0 + 0.05 * L, 0.7 * L);
      const double L1 = uniform_in(rng, 0.05, 1.0) * (L - R1);
      const double L0 = uniform_in(rng, 0.05, 1.0) * L;
      const CheckReport rep =
          firstclaim_check(sel, labels, 0.0, 2.0, R0, R1, L0, L1, {0.0, 0.25, 0.5, 0.75, 1.0});
      ok = ok && rep.passed();
      CHECK(rep.passed());
    }
  }

  // substitution identity on 100 random samples to 1e-10
  for (int trial = 0; trial < 100; ++trial) {
    SubstitutionSample smp;
    smp.h0 = uniform_in(rng, 0.1, 3.0);
    smp.h1 = uniform_in(rng, 0.1, 3.0);
    smp.ht = uniform_in(rng, 0.1, 3.0);
    smp.t = uniform_in(rng, 0.05, 0.95);
    smp.theta = uniform_in(rng, 0.1, 1.5);
    smp.K = uniform_in(rng, -2.0, 2.0);
    smp.N = uniform_in(rng, 1.5, 6.0);
    if (sigma(smp.t, smp.K, smp.N - 1.0, smp.theta).is_inf()) continue;
    const SubstitutionIdentity id = substitution_identity(smp);
    ok = ok && id.max_rel_gap <= 1e-10 && id.signs_agree;
    CHECK(id.max_rel_gap <= 1e-10);
    CHECK(id.signs_agree);
  }

  // the corrupted fixture fails both checks with the same witness ray
  {
    const FiniteMMSpace bad = fixtures::grid_corrupted();
    const std::vector<double> u = minus_x(bad);
    const Cd1ConditionResult cond = cd1_condition_check(bad, u, 0.0, 2.0);
    REQUIRE_FALSE(cond.report.passed());
    const std::string witness = cond.report.witnesses().front().ray;

    TransportStructure s = build_gamma(bad, u);
    branching_sets(s, bad);
    const RayDecomposition dec = decompose_rays(s, bad, u);
    const Disintegration dis = disintegrate(bad.ref, dec);
    std::string firstclaim_witness;
    for (std::size_t r = 0; r < dis.ray.size(); ++r) {
      const Ray& ray = dec.rays[static_cast<std::size_t>(dis.ray[r])];
      const Needle nd = ray_to_needle(ray, dis.conditional[r], 1e-3);
      const std::string label = bad.ids[static_cast<std::size_t>(ray.representative)];
      // substitution-style window centered on the midpoint of the ray
      const double h1 = nd.h.value_at(1.0), h3 = nd.h.value_at(3.0);
      const CheckReport rep = firstclaim_check({&nd}, {label}, 0.0, 2.0, 1.0, 3.0,
                                               h1, h3, {0.5});
      if (!rep.passed()) firstclaim_witness = label;
    }
    ok = ok && !firstclaim_witness.empty() && firstclaim_witness == witness;
    CHECK(firstclaim_witness == witness);
  }
  line.ok = ok;
}

TEST_CASE("criterion 7: measure contraction along needles", "[acceptance]") {
  CriterionLine line{7, "constant-needle contraction passes at K=0; infinite RHS at K=1"};
  bool ok = true;
  {
    const Needle cn = fixtures::constant_needle(1.0, 1.0, 1e-3);
    const FiniteMMSpace linesp = fixtures::line_space_from_needle(cn, 101);
    const DynamicPlan plan = fixtures::contraction_plan(linesp, linesp.ref, 0);
    const CheckReport rep =
        mcp_check(linesp, 0.0, 2.0, linesp.ref, 0, plan, {}, {2.0, 5.0}, 1e-6);
    ok = ok && rep.passed() && rep.worst_margin() >= -1e-6;
    CHECK(rep.passed());
    CHECK(rep.worst_margin() >= -1e-6);
  }
  {
    const Needle longn = fixtures::constant_needle(2.0 * kPi, 1.0, 1e-2);
    const FiniteMMSpace linesp = fixtures::line_space_from_needle(longn, 101);
    const DynamicPlan plan = fixtures::contraction_plan(linesp, linesp.ref, 0);
    const CheckReport rep = mcp_check(linesp, 1.0, 2.0, linesp.ref, 0, plan, {}, {2.0});
    ok = ok && !rep.passed() && rep.infinitely_violated();
    CHECK_FALSE(rep.passed());
    CHECK(rep.infinitely_violated());
  }
  line.ok = ok;
}

TEST_CASE("criterion 8: CLI determinism", "[acceptance]") {
  CriterionLine line{8, "every CLI subcommand is byte-identical across reruns"};
  namespace fs = std::filesystem;
  const std::string cli = MMCD_CLI_PATH;
  const std::string fix = MMCD_FIXTURE_DIR;
  const fs::path outdir = fs::temp_directory_path() / "mmcd_acceptance_cli";
  fs::create_directories(outdir);

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"coeffs", "coeffs --t 0.37 --K 0 --N 5 --theta 2 --oracle"},
      {"coeffs2", "coeffs --t 0.5 --K 2 --N 2 --theta 1.5707963267948966"},
      {"entropy", "entropy --space " + fix + "/grid3.json --mu " + fix +
                      "/mu0_grid3.json --nprime 3"},
      {"wasserstein", "wasserstein --space " + fix + "/grid3.json --mu0 " + fix +
                          "/mu0_grid3.json --mu1 " + fix + "/mu1_grid3.json --p 1 --oracle"},
      {"potential", "potential --space " + fix + "/grid3.json --mu0 " + fix +
                        "/mu0_grid3.json --mu1 " + fix + "/mu1_grid3.json"},
      {"decompose", "decompose --space " + fix + "/grid5.json --u -x"},
      {"check-needle", "check-needle --model sine --K 1 --N 3"},
      {"check-needle2", "check-needle --needle " + fix + "/sinh_Km1_N2.json --K -1 --N 2"},
      {"check-mcp", "check-mcp --model constant --length 1 --K 0 --N 2 --atoms 51"},
      {"check-cd1", "check-cd1 --space " + fix + "/grid3_cd.json --mu0 " + fix +
                        "/mu0_grid3.json --mu1 " + fix + "/mu1_grid3.json --u -x --K 0 --N 2"},
      {"check-cd1u", "check-cd1u --space " + fix + "/grid3_cd.json --u -x --K 0 --N 2"},
      {"check-firstclaim", "check-firstclaim --space " + fix +
                               "/grid3_cd.json --u -x --K 0 --N 2 --windows 10 --seed 7"},
      {"glue", "glue --space " + fix + "/grid3_cd.json --mu0 " + fix +
                   "/mu0_grid3.json --mu1 " + fix + "/mu1_grid3.json --u -x"},
      {"report", "report --space " + fix + "/tripod.json"},
      {"report2", "report --space " + fix + "/grid3_cd.json --u -x --K 0 --N 2"},
  };

  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };

  bool ok = true;
  for (const auto& [name, args] : commands) {
    const fs::path o1 = outdir / (name + ".1.json");
    const fs::path o2 = outdir / (name + ".2.json");
    const std::string c1 = cli + " --out " + o1.string() + " " + args;
    const std::string c2 = cli + " --out " + o2.string() + " " + args;
    const int r1 = std::system(c1.c_str());
    const int r2 = std::system(c2.c_str());
    INFO("command: " << args);
    CHECK(WIFEXITED(r1));
    CHECK(WEXITSTATUS(r1) == 0);
    CHECK(WEXITSTATUS(r2) == 0);
    const std::string b1 = slurp(o1), b2 = slurp(o2);
    CHECK_FALSE(b1.empty());
    CHECK(b1 == b2);
    ok = ok && WEXITSTATUS(r1) == 0 && WEXITSTATUS(r2) == 0 && !b1.empty() && b1 == b2;
  }
  line.ok = ok;
}
