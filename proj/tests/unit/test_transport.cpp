#include <random>

#include <catch2/catch_amalgamated.hpp>

#include "mmcd/fixtures.hpp"
#include "mmcd/oracle.hpp"
#include "mmcd/transport.hpp"

using namespace mmcd;

namespace {

FiniteMMSpace random_euclidean_space(std::mt19937_64& rng, int n) {
  FiniteMMSpace space;
  for (int i = 0; i < n; ++i) {
    space.ids.push_back("q" + std::to_string(i));
    space.xy.push_back({uniform_in(rng, 0.0, 4.0), uniform_in(rng, 0.0, 4.0)});
  }
  fixtures::euclidean_distances(space);
  space.ref = DiscreteMeasure::uniform(static_cast<std::size_t>(n));
  return space;
}

DiscreteMeasure random_prob(std::mt19937_64& rng, std::size_t n, std::size_t support) {
  DiscreteMeasure m = DiscreteMeasure::zero(n);
  for (std::size_t k = 0; k < support; ++k)
    m.w[rng() % n] += uniform_in(rng, 0.1, 1.0);
  const double t = m.total();
  for (auto& v : m.w) v /= t;
  return m;
}

}  // namespace

TEST_CASE("wasserstein_p: base cases", "[transport]") {
  const FiniteMMSpace line = fixtures::path_graph(3);
  SECTION("identical marginals: zero with the diagonal coupling") {
    const DiscreteMeasure m = DiscreteMeasure::uniform(3);
    const OTResult r = wasserstein_p(line, m, m, 2.0);
    CHECK(r.value == 0.0);
    for (const auto& e : r.coupling.entries) CHECK(e.x == e.y);
  }
  SECTION("two diracs: the distance") {
    const OTResult r = wasserstein_p(line, DiscreteMeasure::dirac(3, 0),
                                     DiscreteMeasure::dirac(3, 2), 1.0);
    CHECK_THAT(r.value, Catch::Matchers::WithinAbs(2.0, 1e-14));
    REQUIRE(r.coupling.entries.size() == 1);
    CHECK(r.coupling.entries[0].x == 0);
    CHECK(r.coupling.entries[0].y == 2);
  }
  SECTION("3-point line shift: value 1, certified by the oracle") {
    const DiscreteMeasure mu0({0.5, 0.5, 0.0}), mu1({0.0, 0.5, 0.5});
    const OTResult r = wasserstein_p(line, mu0, mu1, 1.0);
    CHECK_THAT(r.value, Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THAT(brute_force_ot(line, mu0, mu1, 1.0), Catch::Matchers::WithinAbs(1.0, 1e-15));
  }
  SECTION("mass mismatch rejected") {
    CHECK_THROWS_AS(
        wasserstein_p(line, DiscreteMeasure({1.0, 0.0, 0.0}), DiscreteMeasure({0.4, 0.0, 0.0}), 1.0),
        std::invalid_argument);
  }
}

TEST_CASE("coupling marginals match the inputs", "[transport][property]") {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 30; ++trial) {
    const FiniteMMSpace space = random_euclidean_space(rng, 6);
    const DiscreteMeasure mu0 = random_prob(rng, 6, 4), mu1 = random_prob(rng, 6, 4);
    const OTResult r = wasserstein_p(space, mu0, mu1, trial % 2 ? 1.0 : 2.0);
    const DiscreteMeasure m0 = r.coupling.marginal_first(6), m1 = r.coupling.marginal_second(6);
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK_THAT(m0.w[i], Catch::Matchers::WithinAbs(mu0.w[i], 1e-10));
      CHECK_THAT(m1.w[i], Catch::Matchers::WithinAbs(mu1.w[i], 1e-10));
    }
  }
}

TEST_CASE("kantorovich_potential: certified dual solutions", "[transport]") {
  const FiniteMMSpace line = fixtures::path_graph(3);
  SECTION("two diracs") {
    const auto u = kantorovich_potential(line, DiscreteMeasure::dirac(3, 0),
                                         DiscreteMeasure::dirac(3, 2));
    CHECK_THAT(u[0] - u[2], Catch::Matchers::WithinAbs(2.0, 1e-12));
    CHECK(u[2] == 0.0);  // normalized at the lowest-index support point of mu1
  }
  SECTION("identical marginals: u = 0 works") {
    const auto u = kantorovich_potential(line, DiscreteMeasure::uniform(3),
                                         DiscreteMeasure::uniform(3));
    for (double v : u) CHECK(v == 0.0);
  }
  SECTION("3-point line shift: (1, 0, -1) after normalization") {
    const auto u =
        kantorovich_potential(line, DiscreteMeasure({0.5, 0.5, 0.0}),
                              DiscreteMeasure({0.0, 0.5, 0.5}));
    CHECK_THAT(u[0], Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THAT(u[1], Catch::Matchers::WithinAbs(0.0, 1e-12));
    CHECK_THAT(u[2], Catch::Matchers::WithinAbs(-1.0, 1e-12));
  }
}

TEST_CASE("primal-dual consistency on random instances", "[transport][property]") {
  std::mt19937_64 rng(202);
  for (int trial = 0; trial < 40; ++trial) {
    const FiniteMMSpace space = random_euclidean_space(rng, 5 + static_cast<int>(rng() % 3));
    const std::size_t n = static_cast<std::size_t>(space.n());
    const DiscreteMeasure mu0 = random_prob(rng, n, 3), mu1 = random_prob(rng, n, 3);
    const double w1 = wasserstein_p(space, mu0, mu1, 1.0).value;
    const auto u = kantorovich_potential(space, mu0, mu1);
    CHECK(is_one_lipschitz(u, space, 1e-9).ok);
    KahanSum acc;
    for (std::size_t i = 0; i < n; ++i) acc.add(u[i] * (mu0.w[i] - mu1.w[i]));
    CHECK_THAT(acc.value(), Catch::Matchers::WithinAbs(w1, 1e-9));
  }
}

TEST_CASE("is_cyclically_monotone", "[transport]") {
  const FiniteMMSpace line = fixtures::path_graph(3);
  SECTION("identity support") {
    CHECK(is_cyclically_monotone({{0, 0}, {1, 1}, {2, 2}}, line, 4));
  }
  SECTION("crossing pair on the line has equal cost, hence monotone") {
    // {(0 -> 2), (1 -> 1)}: 2 + 0 vs 1 + 1
    CHECK(is_cyclically_monotone({{0, 2}, {1, 1}}, line, 2));
  }
  SECTION("a genuinely crossing support fails") {
    // {(0 -> 2), (2 -> 0)}: 4 vs 0
    CHECK_FALSE(is_cyclically_monotone({{0, 2}, {2, 0}}, line, 2));
  }
  SECTION("saturation sets of 1-Lipschitz potentials are d-cyclically monotone") {
    std::mt19937_64 rng(808);
    for (int trial = 0; trial < 10; ++trial) {
      const FiniteMMSpace space = random_euclidean_space(rng, 5);
      std::vector<double> u(5);
      const int anchor = static_cast<int>(rng() % 5);
      for (int i = 0; i < 5; ++i) u[static_cast<std::size_t>(i)] = -space.d(i, anchor);
      std::vector<std::pair<int, int>> supp;
      for (int x = 0; x < 5; ++x)
        for (int y = 0; y < 5; ++y)
          if (std::abs(u[static_cast<std::size_t>(x)] - u[static_cast<std::size_t>(y)] -
                       space.d(x, y)) <= 1e-9)
            supp.emplace_back(x, y);
      CHECK(is_cyclically_monotone(supp, space, 4));
    }
  }
  SECTION("optimal couplings are d^p-cyclically monotone") {
    std::mt19937_64 rng(303);
    for (int trial = 0; trial < 20; ++trial) {
      const FiniteMMSpace space = random_euclidean_space(rng, 6);
      const DiscreteMeasure mu0 = random_prob(rng, 6, 4), mu1 = random_prob(rng, 6, 4);
      const double p = trial % 2 ? 1.0 : 2.0;
      const OTResult r = wasserstein_p(space, mu0, mu1, p);
      std::vector<std::pair<int, int>> supp;
      for (const auto& e : r.coupling.entries) supp.emplace_back(e.x, e.y);
      CHECK(is_cyclically_monotone(supp, space, 4, p));
    }
  }
}

TEST_CASE("monotone coupling on a line is W_p-optimal for every p",
          "[transport][property]") {
  // Quantile pairing on a common geodesic: its cost matches the LP optimum.
  std::mt19937_64 rng(404);
  const FiniteMMSpace line = fixtures::path_graph(6);
  for (int trial = 0; trial < 15; ++trial) {
    const DiscreteMeasure mu0 = random_prob(rng, 6, 4), mu1 = random_prob(rng, 6, 4);
    for (double p : {1.0, 2.0, 3.0}) {
      // quantile pairing by NW-corner on sorted atoms
      std::vector<std::pair<int, double>> a, b;
      for (int i = 0; i < 6; ++i) {
        if (mu0.w[static_cast<std::size_t>(i)] > 0)
          a.emplace_back(i, mu0.w[static_cast<std::size_t>(i)]);
        if (mu1.w[static_cast<std::size_t>(i)] > 0)
          b.emplace_back(i, mu1.w[static_cast<std::size_t>(i)]);
      }
      KahanSum cost;
      std::size_t i = 0, j = 0;
      double r0 = a[0].second, r1 = b[0].second;
      while (i < a.size() && j < b.size()) {
        const double m = std::min(r0, r1);
        cost.add(m * std::pow(line.d(a[i].first, b[j].first), p));
        r0 -= m;
        r1 -= m;
        if (r0 <= 0 && ++i < a.size()) r0 = a[i].second;
        if (r1 <= 0 && ++j < b.size()) r1 = b[j].second;
      }
      const double lp = wasserstein_p(line, mu0, mu1, p).objective;
      CHECK_THAT(cost.value(), Catch::Matchers::WithinAbs(lp, 1e-9));
    }
  }
}

TEST_CASE("W_p is a metric on desk instances", "[transport][property]") {
  std::mt19937_64 rng(505);
  for (int trial = 0; trial < 10; ++trial) {
    const FiniteMMSpace space = random_euclidean_space(rng, 5);
    const DiscreteMeasure a = random_prob(rng, 5, 3), b = random_prob(rng, 5, 3),
                          c = random_prob(rng, 5, 3);
    for (double p : {1.0, 2.0}) {
      const double ab = wasserstein_p(space, a, b, p).value;
      const double ba = wasserstein_p(space, b, a, p).value;
      const double bc = wasserstein_p(space, b, c, p).value;
      const double ac = wasserstein_p(space, a, c, p).value;
      CHECK_THAT(ab, Catch::Matchers::WithinAbs(ba, 1e-8));
      CHECK(ac <= ab + bc + 1e-8);
    }
  }
}

TEST_CASE("pushforward_at and interpolate_at", "[transport]") {
  const FiniteMMSpace line = fixtures::path_graph(3);
  DynamicPlan plan;
  plan.entries.push_back({GeodesicChain{{0, 1, 2}, {0.0, 0.5, 1.0}}, 0.6});
  plan.entries.push_back({GeodesicChain{{1, 2}, {0.0, 1.0}}, 0.4});

  const DiscreteMeasure at0 = pushforward_at(plan, 0.0, line);
  CHECK(at0.w == std::vector<double>{0.6, 0.4, 0.0});
  const DiscreteMeasure at1 = pushforward_at(plan, 1.0, line);
  CHECK(at1.w == std::vector<double>{0.0, 0.0, 1.0});
  // t = 0.5 is registered on the first chain only
  DynamicPlan single;
  single.entries.push_back(plan.entries[0]);
  const DiscreteMeasure mid = pushforward_at(single, 0.5, line);
  CHECK_THAT(mid.w[1], Catch::Matchers::WithinAbs(0.6, 1e-15));
  CHECK_THROWS_AS(pushforward_at(plan, 0.5, line), std::domain_error);
  CHECK_THROWS_AS(pushforward_at(single, 0.25, line), std::domain_error);

  // interpolate_at splits between bracketing nodes
  const DiscreteMeasure q = interpolate_at(plan, 0.25, 3);
  CHECK_THAT(q.w[0], Catch::Matchers::WithinAbs(0.3, 1e-15));   // half of chain 1's mass
  CHECK_THAT(q.w[1], Catch::Matchers::WithinAbs(0.6, 1e-15));   // 0.3 + 0.75*0.4 = 0.6
  CHECK_THAT(q.w[2], Catch::Matchers::WithinAbs(0.1, 1e-15));
}
