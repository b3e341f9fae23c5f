#include <catch2/catch_amalgamated.hpp>

#include "mmcd/fixtures.hpp"
#include "mmcd/io.hpp"

using namespace mmcd;

namespace {

nlohmann::json reparse(const jsonout::Node& node) {
  return nlohmann::json::parse(jsonout::dump(node));
}

}  // namespace

TEST_CASE("space round-trip is the identity", "[io]") {
  const FiniteMMSpace space = fixtures::grid_trapezoid(3, 3);
  const FiniteMMSpace back = space_from_json(reparse(space_to_node(space)));
  REQUIRE(back.n() == space.n());
  CHECK(back.ids == space.ids);
  for (int i = 0; i < space.n(); ++i)
    for (int j = 0; j < space.n(); ++j) CHECK(back.d(i, j) == space.d(i, j));
  CHECK(back.ref.w == space.ref.w);
  REQUIRE(back.geodesics.size() == space.geodesics.size());
  for (std::size_t g = 0; g < space.geodesics.size(); ++g) {
    CHECK(back.geodesics[g].nodes == space.geodesics[g].nodes);
    CHECK(back.geodesics[g].times == space.geodesics[g].times);
  }
}

TEST_CASE("measure, needle and plan round-trips", "[io]") {
  const DiscreteMeasure m({0.125, 0.5, 0.375});
  CHECK(measure_from_json(reparse(measure_to_node(m))).w == m.w);

  const Needle n = fixtures::sine_needle(1.0, 3.0, 1e-2);
  const Needle back = needle_from_json(reparse(needle_to_node(n)));
  CHECK(back.h.values == n.h.values);
  CHECK_THAT(back.h.step, Catch::Matchers::WithinRel(n.h.step, 1e-15));

  const FiniteMMSpace line = fixtures::path_graph(3);
  DynamicPlan plan;
  plan.entries.push_back({GeodesicChain{{0, 1, 2}, {0.0, 0.5, 1.0}}, 0.75});
  plan.entries.push_back({GeodesicChain::static_at(1), 0.25});
  const DynamicPlan pback = plan_from_json(reparse(plan_to_node(plan, line)), line);
  REQUIRE(pback.entries.size() == 2);
  CHECK(pback.entries[0].chain.nodes == plan.entries[0].chain.nodes);
  CHECK(pback.entries[0].mass == plan.entries[0].mass);

  // a single-node chain in a plan file is shorthand for mass left in place
  const auto j = nlohmann::json::parse(
      R"({"chains": [{"nodes": ["p1"], "times": [0.0], "mass": 1.0}]})");
  const DynamicPlan stat = plan_from_json(j, line);
  REQUIRE(stat.entries.size() == 1);
  CHECK(stat.entries[0].chain.nodes == std::vector<int>{1, 1});
  CHECK(interpolate_at(stat, 0.5, 3).w[1] == 1.0);
}

TEST_CASE("metric generators", "[io]") {
  SECTION("grid") {
    const auto j = nlohmann::json::parse(R"({"dist": {"metric":"grid","rows":2,"cols":3}})");
    const FiniteMMSpace g = space_from_json(j);
    CHECK(g.n() == 6);
    CHECK(g.ids[0] == "r0c0");
    CHECK_THAT(g.d(0, 5), Catch::Matchers::WithinRel(std::sqrt(5.0), 1e-15));
    CHECK(validate_space(g).ok());  // defaults to the uniform measure
  }
  SECTION("path_graph") {
    const auto j =
        nlohmann::json::parse(R"({"dist": {"metric":"path_graph","n":4,"spacing":0.5}})");
    const FiniteMMSpace g = space_from_json(j);
    CHECK(g.n() == 4);
    CHECK(g.d(0, 3) == 1.5);
  }
  SECTION("explicit matrix must be square and match points") {
    const auto j = nlohmann::json::parse(
        R"({"points":[{"id":"a"},{"id":"b"}], "dist": [[0,1]]})");
    CHECK_THROWS(space_from_json(j));
  }
}

TEST_CASE("model needles from JSON", "[io]") {
  const Needle sine = needle_from_json(
      nlohmann::json::parse(R"({"model":"sine","K":1.0,"N":3.0,"grid_step":0.001})"));
  CHECK_THAT(sine.length(), Catch::Matchers::WithinRel(kPi * std::sqrt(2.0), 1e-12));
  CHECK(sine.h.values.front() == 0.0);
  CHECK(sine.h.values.back() == 0.0);

  const Needle c = needle_from_json(
      nlohmann::json::parse(R"({"model":"constant","length":2.0,"value":0.5})"));
  CHECK(c.length() == 2.0);
  CHECK(c.h.values.front() == 0.5);

  CHECK_THROWS(needle_from_json(nlohmann::json::parse(R"({"model":"sine","K":-1,"N":3})")));
}

TEST_CASE("potential specs", "[io]") {
  const FiniteMMSpace grid = fixtures::grid_uniform(2, 2);
  const auto ux = u_from_spec(grid, "-x");
  CHECK(ux == std::vector<double>{0.0, -1.0, 0.0, -1.0});
  const auto uy = u_from_spec(grid, "y");
  CHECK(uy == std::vector<double>{0.0, 0.0, 1.0, 1.0});
  const auto ud = u_from_spec(grid, "d:r0c0");
  CHECK(ud[0] == 0.0);
  CHECK(ud[3] == grid.d(3, 0));
  CHECK_THROWS(u_from_spec(grid, "d:nosuch"));
}

TEST_CASE("deterministic writer formats", "[io]") {
  jsonout::Node obj = jsonout::Node::object();
  obj.set("zeta", jsonout::Node::of(0.5));
  obj.set("alpha", jsonout::Node::of(true));
  obj.set("inf", jsonout::Node::of(std::numeric_limits<double>::infinity()));
  const std::string text = jsonout::dump(obj);
  // keys sorted, infinities quoted
  CHECK(text.find("\"alpha\"") < text.find("\"inf\""));
  CHECK(text.find("\"inf\": \"inf\"") != std::string::npos);
  CHECK(text.find("0.5") != std::string::npos);

  // 17 significant digits round-trip doubles exactly
  const double v = 0.1 + 0.2;
  const double back = nlohmann::json::parse(jsonout::format_double(v)).get<double>();
  CHECK(back == v);
}

TEST_CASE("shipped fixture files parse, validate, and match the builders", "[io]") {
#ifdef MMCD_FIXTURE_DIR
  const std::string dir = MMCD_FIXTURE_DIR;
  for (const char* name : {"path4.json", "grid3.json", "grid3_cd.json", "grid5.json",
                           "grid5_cd.json", "grid5_bad.json", "tripod.json"}) {
    const FiniteMMSpace space = space_from_json(load_json_file(dir + "/" + name));
    INFO(name);
    CHECK(validate_space(space).ok());
  }
  const FiniteMMSpace g3 = space_from_json(load_json_file(dir + "/grid3_cd.json"));
  const FiniteMMSpace built = fixtures::grid_trapezoid(3, 3);
  REQUIRE(g3.n() == built.n());
  CHECK(g3.ids == built.ids);
  for (std::size_t i = 0; i < 9; ++i)
    CHECK_THAT(g3.ref.w[i], Catch::Matchers::WithinAbs(built.ref.w[i], 1e-15));
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j)
      CHECK_THAT(g3.d(i, j), Catch::Matchers::WithinAbs(built.d(i, j), 1e-15));

  const FiniteMMSpace tri = space_from_json(load_json_file(dir + "/tripod.json"));
  const FiniteMMSpace tri_built = fixtures::tripod();
  CHECK(tri.ids == tri_built.ids);
  CHECK(tri.distances() == tri_built.distances());

  // measure fixtures pair with the grid and keep row masses balanced
  const DiscreteMeasure mu0 = measure_from_json(load_json_file(dir + "/mu0_grid3.json"));
  const DiscreteMeasure mu1 = measure_from_json(load_json_file(dir + "/mu1_grid3.json"));
  REQUIRE(mu0.size() == 9);
  CHECK(mu0.is_probability(1e-12));
  CHECK(mu1.is_probability(1e-12));
  for (int r = 0; r < 3; ++r) {
    double a = 0, b = 0;
    for (int c = 0; c < 3; ++c) {
      a += mu0.w[static_cast<std::size_t>(3 * r + c)];
      b += mu1.w[static_cast<std::size_t>(3 * r + c)];
    }
    CHECK_THAT(a, Catch::Matchers::WithinAbs(b, 1e-15));
  }
#endif
}

TEST_CASE("malformed JSON reports the byte position", "[io]") {
  try {
    const nlohmann::json j = nlohmann::json::parse(std::string("{\"a\": [1, 2,,]}"));
    FAIL("expected parse error, got " << j.dump());
  } catch (const nlohmann::json::parse_error& e) {
    CHECK(e.byte > 0);
  }
}
