// Command-line front end: every operation of the toolkit behind one binary
// with stable JSON formats. Exit codes: 0 = computation done / check passed,
// 1 = check failed (report still emitted), 2 = usage or input error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mmcd/io.hpp"
#include "mmcd/mmcd.hpp"
#include "mmcd/oracle.hpp"

namespace {

using mmcd::jsonout::Node;

struct GlobalOpts {
  double tol = -1.0;
  double grid_step = -1.0;
  std::string t_samples;
  std::string nprime_samples;
  std::uint64_t seed = 1;
  bool oracle = false;
  std::string out;
  std::string svg;
};

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

void emit(const GlobalOpts& g, const Node& doc) {
  const std::string text = mmcd::jsonout::dump(doc);
  if (g.out.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(g.out, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open output file: " + g.out);
    f << text;
  }
}

Node ext_to_node(const mmcd::ExtReal& v) {
  return v.is_inf() ? Node::of(std::numeric_limits<double>::infinity()) : Node::of(v.value);
}

mmcd::FiniteMMSpace load_space(const std::string& path, bool validate = true) {
  mmcd::FiniteMMSpace space = mmcd::space_from_json(mmcd::load_json_file(path));
  if (validate) {
    const mmcd::SpaceValidation v = mmcd::validate_space(space);
    if (!v.ok()) {
      std::string msg = "space file " + path + " fails validation:";
      for (const auto& p : v.problems) msg += "\n  " + p;
      throw std::runtime_error(msg);
    }
  }
  return space;
}

mmcd::DiscreteMeasure load_measure(const std::string& path, const mmcd::FiniteMMSpace& space) {
  mmcd::DiscreteMeasure m = mmcd::measure_from_json(mmcd::load_json_file(path));
  if (m.size() != static_cast<std::size_t>(space.n()))
    throw std::runtime_error("measure file " + path + " does not match the space");
  return m;
}

mmcd::Needle needle_from_cli(const std::string& needle_file, const std::string& model, double K,
                             double N, double length, double step) {
  if (!needle_file.empty()) return mmcd::needle_from_json(mmcd::load_json_file(needle_file));
  nlohmann::json j;
  j["model"] = model;
  j["K"] = K;
  j["N"] = N;
  if (length > 0) j["length"] = length;
  if (step > 0) j["grid_step"] = step;
  return mmcd::needle_from_json(j);
}

void write_svg_if_requested(const GlobalOpts& g, const mmcd::Needle& needle, double K, double N) {
  if (g.svg.empty()) return;
  std::ofstream f(g.svg, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open svg file: " + g.svg);
  f << mmcd::needle_svg(needle, K, N);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"curvature-dimension checks on finite metric measure spaces"};
  app.require_subcommand(1);
  GlobalOpts g;
  app.add_option("--tol", g.tol, "check tolerance override");
  app.add_option("--grid", g.grid_step, "needle grid step override");
  app.add_option("--t-samples", g.t_samples, "comma-separated interpolation times");
  app.add_option("--nprime-samples", g.nprime_samples, "comma-separated N' values");
  app.add_option("--seed", g.seed, "seed for sampled checks");
  app.add_flag("--oracle", g.oracle, "also run the brute-force / high-precision oracle");
  app.add_option("--out", g.out, "write the JSON report here instead of stdout");
  app.add_option("--svg", g.svg, "write a density/defect SVG plot here");

  // ---- coeffs
  auto* c_coeffs = app.add_subcommand("coeffs", "distortion coefficients sigma, tau, d_max");
  double co_t = 0.5, co_K = 0.0, co_N = 2.0, co_theta = 1.0;
  c_coeffs->add_option("--t", co_t)->required();
  c_coeffs->add_option("--K", co_K)->required();
  c_coeffs->add_option("--N", co_N)->required();
  c_coeffs->add_option("--theta", co_theta)->required();

  // ---- entropy
  auto* c_entropy = app.add_subcommand("entropy", "Renyi entropy S_N'(mu | m)");
  std::string en_space, en_mu;
  double en_np = 2.0;
  c_entropy->add_option("--space", en_space)->required();
  c_entropy->add_option("--mu", en_mu)->required();
  c_entropy->add_option("--nprime", en_np)->required();

  // ---- wasserstein
  auto* c_w = app.add_subcommand("wasserstein", "W_p distance and optimal coupling");
  std::string w_space, w_mu0, w_mu1;
  double w_p = 1.0;
  c_w->add_option("--space", w_space)->required();
  c_w->add_option("--mu0", w_mu0)->required();
  c_w->add_option("--mu1", w_mu1)->required();
  c_w->add_option("--p", w_p);

  // ---- potential
  auto* c_pot = app.add_subcommand("potential", "Kantorovich potential for cost d");
  std::string p_space, p_mu0, p_mu1;
  c_pot->add_option("--space", p_space)->required();
  c_pot->add_option("--mu0", p_mu0)->required();
  c_pot->add_option("--mu1", p_mu1)->required();

  // ---- decompose
  auto* c_dec = app.add_subcommand("decompose", "transport rays of a 1-Lipschitz potential");
  std::string d_space, d_u;
  c_dec->add_option("--space", d_space)->required();
  c_dec->add_option("--u", d_u)->required();

  // ---- check-needle
  auto* c_needle = app.add_subcommand("check-needle", "1D curvature check of a needle");
  std::string n_file, n_model;
  double n_K = 0.0, n_N = 2.0, n_length = -1.0;
  c_needle->add_option("--needle", n_file);
  c_needle->add_option("--model", n_model);
  c_needle->add_option("--K", n_K)->required();
  c_needle->add_option("--N", n_N)->required();
  c_needle->add_option("--length", n_length);

  // ---- check-mcp
  auto* c_mcp = app.add_subcommand("check-mcp", "measure-contraction check along a plan");
  std::string m_space, m_plan, m_mu0, m_x0, m_file, m_model;
  double m_K = 0.0, m_N = 2.0, m_length = -1.0;
  int m_atoms = 101;
  c_mcp->add_option("--space", m_space);
  c_mcp->add_option("--plan", m_plan);
  c_mcp->add_option("--mu0", m_mu0);
  c_mcp->add_option("--x0", m_x0);
  c_mcp->add_option("--needle", m_file);
  c_mcp->add_option("--model", m_model);
  c_mcp->add_option("--atoms", m_atoms);
  c_mcp->add_option("--length", m_length);
  c_mcp->add_option("--K", m_K)->required();
  c_mcp->add_option("--N", m_N)->required();

  // ---- check-cd1
  auto* c_cd1 = app.add_subcommand("check-cd1", "entropy convexity along a W_1 plan");
  std::string e_space, e_mu0, e_mu1, e_u, e_plan;
  double e_K = 0.0, e_N = 2.0;
  c_cd1->add_option("--space", e_space)->required();
  c_cd1->add_option("--mu0", e_mu0)->required();
  c_cd1->add_option("--mu1", e_mu1)->required();
  c_cd1->add_option("--u", e_u);
  c_cd1->add_option("--plan", e_plan);
  c_cd1->add_option("--K", e_K)->required();
  c_cd1->add_option("--N", e_N)->required();

  // ---- check-cd1u
  auto* c_cd1u = app.add_subcommand("check-cd1u", "localization condition for one potential");
  std::string q_space, q_u;
  double q_K = 0.0, q_N = 2.0;
  c_cd1u->add_option("--space", q_space)->required();
  c_cd1u->add_option("--u", q_u)->required();
  c_cd1u->add_option("--K", q_K)->required();
  c_cd1u->add_option("--N", q_N)->required();

  // ---- check-firstclaim
  auto* c_fc = app.add_subcommand("check-firstclaim", "localized comparison inequality");
  std::string f_space, f_u;
  double f_K = 0.0, f_N = 2.0, f_R0 = -1.0, f_R1 = -1.0, f_L0 = -1.0, f_L1 = -1.0;
  int f_windows = 20;
  c_fc->add_option("--space", f_space)->required();
  c_fc->add_option("--u", f_u)->required();
  c_fc->add_option("--K", f_K)->required();
  c_fc->add_option("--N", f_N)->required();
  c_fc->add_option("--windows", f_windows);
  c_fc->add_option("--R0", f_R0);
  c_fc->add_option("--R1", f_R1);
  c_fc->add_option("--L0", f_L0);
  c_fc->add_option("--L1", f_L1);

  // ---- glue
  auto* c_glue = app.add_subcommand("glue", "glued W_1-geodesic between two marginals");
  std::string g_space, g_mu0, g_mu1, g_u;
  c_glue->add_option("--space", g_space)->required();
  c_glue->add_option("--mu0", g_mu0)->required();
  c_glue->add_option("--mu1", g_mu1)->required();
  c_glue->add_option("--u", g_u);

  // ---- report
  auto* c_rep = app.add_subcommand("report", "validation plus optional localization check");
  std::string r_space, r_u;
  double r_K = 0.0, r_N = 2.0;
  c_rep->add_option("--space", r_space)->required();
  c_rep->add_option("--u", r_u);
  c_rep->add_option("--K", r_K);
  c_rep->add_option("--N", r_N);

  // global flags remain usable after the subcommand name
  for (CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; }))
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    std::vector<double> ts = parse_list(g.t_samples);
    std::vector<double> nps = parse_list(g.nprime_samples);

    if (*c_coeffs) {
      Node doc = Node::object();
      doc.set("t", Node::of(co_t));
      doc.set("K", Node::of(co_K));
      doc.set("N", Node::of(co_N));
      doc.set("theta", Node::of(co_theta));
      doc.set("sigma", ext_to_node(mmcd::sigma(co_t, co_K, co_N, co_theta)));
      doc.set("tau", ext_to_node(mmcd::tau(co_t, co_K, std::max(co_N, 1.0), co_theta)));
      doc.set("d_max", ext_to_node(mmcd::d_max(co_K, co_N)));
      if (g.oracle) {
        const auto hp = mmcd::hp_sigma_tau(co_t, co_K, std::max(co_N, 1.0), co_theta);
        doc.set("oracle_sigma", hp.sigma_inf
                                    ? Node::of(std::numeric_limits<double>::infinity())
                                    : Node::of(hp.sigma));
        doc.set("oracle_tau", hp.tau_inf ? Node::of(std::numeric_limits<double>::infinity())
                                         : Node::of(hp.tau));
      }
      emit(g, doc);
      return 0;
    }

    if (*c_entropy) {
      const mmcd::FiniteMMSpace space = load_space(en_space);
      const mmcd::DiscreteMeasure mu = load_measure(en_mu, space);
      Node doc = Node::object();
      doc.set("nprime", Node::of(en_np));
      doc.set("value", Node::of(mmcd::renyi_entropy(mu, space.ref, en_np)));
      emit(g, doc);
      return 0;
    }

    if (*c_w) {
      const mmcd::FiniteMMSpace space = load_space(w_space);
      const mmcd::DiscreteMeasure mu0 = load_measure(w_mu0, space);
      const mmcd::DiscreteMeasure mu1 = load_measure(w_mu1, space);
      const mmcd::OTResult r = mmcd::wasserstein_p(space, mu0, mu1, w_p);
      Node doc = Node::object();
      doc.set("p", Node::of(w_p));
      doc.set("value", Node::of(r.value));
      doc.set("objective", Node::of(r.objective));
      doc.set("coupling", mmcd::coupling_to_node(r.coupling, space));
      if (g.oracle)
        doc.set("oracle_value", Node::of(mmcd::brute_force_ot(space, mu0, mu1, w_p)));
      emit(g, doc);
      return 0;
    }

    if (*c_pot) {
      const mmcd::FiniteMMSpace space = load_space(p_space);
      const mmcd::DiscreteMeasure mu0 = load_measure(p_mu0, space);
      const mmcd::DiscreteMeasure mu1 = load_measure(p_mu1, space);
      const std::vector<double> u = mmcd::kantorovich_potential(space, mu0, mu1);
      const double w1 = mmcd::wasserstein_p(space, mu0, mu1, 1.0).value;
      mmcd::KahanSum acc;
      for (int i = 0; i < space.n(); ++i)
        acc.add(u[static_cast<std::size_t>(i)] *
                (mu0.w[static_cast<std::size_t>(i)] - mu1.w[static_cast<std::size_t>(i)]));
      Node doc = Node::object();
      Node uv = Node::object();
      for (int i = 0; i < space.n(); ++i)
        uv.set(space.ids[static_cast<std::size_t>(i)], Node::of(u[static_cast<std::size_t>(i)]));
      doc.set("u", std::move(uv));
      doc.set("w1", Node::of(w1));
      doc.set("duality_gap", Node::of(acc.value() - w1));
      emit(g, doc);
      return 0;
    }

    if (*c_dec) {
      const mmcd::FiniteMMSpace space = load_space(d_space);
      const std::vector<double> u = mmcd::u_from_spec(space, d_u);
      mmcd::TransportStructure s = mmcd::build_gamma(space, u);
      mmcd::branching_sets(s, space);
      const mmcd::RayDecomposition dec = mmcd::decompose_rays(s, space, u);
      const mmcd::Disintegration dis = mmcd::disintegrate(space.ref, dec);
      Node doc = Node::object();
      doc.set("structure", mmcd::structure_to_node(s, space));
      doc.set("decomposition", mmcd::decomposition_to_node(dec, &dis, space));
      doc.set("branching_mass", Node::of(mmcd::branching_mass(s, space.ref)));
      emit(g, doc);
      return 0;
    }

    if (*c_needle) {
      if (n_file.empty() == n_model.empty())
        throw std::runtime_error("check-needle: give exactly one of --needle / --model");
      const mmcd::Needle needle =
          needle_from_cli(n_file, n_model, n_K, n_N, n_length, g.grid_step);
      const mmcd::CheckReport rep =
          mmcd::needle_cd_check(needle, n_K, n_N, {}, g.tol);
      write_svg_if_requested(g, needle, n_K, n_N);
      Node doc = mmcd::report_to_node(rep);
      doc.set("length", Node::of(needle.length()));
      doc.set("grid_step", Node::of(needle.h.step));
      emit(g, doc);
      return rep.passed() ? 0 : 1;
    }

    if (*c_mcp) {
      mmcd::FiniteMMSpace space;
      mmcd::DiscreteMeasure mu0;
      mmcd::DynamicPlan plan;
      int x0 = 0;
      if (!m_file.empty() || !m_model.empty()) {
        const mmcd::Needle needle =
            needle_from_cli(m_file, m_model, m_K, m_N, m_length, g.grid_step);
        space = mmcd::fixtures::line_space_from_needle(needle, m_atoms);
        mu0 = m_mu0.empty() ? space.ref : load_measure(m_mu0, space);
        x0 = m_x0.empty() ? 0 : space.index_of(m_x0);
        plan = mmcd::fixtures::contraction_plan(space, mu0, x0);
      } else {
        if (m_space.empty() || m_plan.empty() || m_x0.empty())
          throw std::runtime_error("check-mcp: need --space, --plan and --x0 (or --model/--needle)");
        space = load_space(m_space);
        mu0 = m_mu0.empty() ? space.ref : load_measure(m_mu0, space);
        x0 = space.index_of(m_x0);
        plan = mmcd::plan_from_json(mmcd::load_json_file(m_plan), space);
      }
      if (x0 < 0) throw std::runtime_error("check-mcp: unknown --x0 point id");
      const mmcd::CheckReport rep = mmcd::mcp_check(space, m_K, m_N, mu0, x0, plan, ts, nps,
                                                    g.tol < 0 ? 1e-9 : g.tol);
      emit(g, mmcd::report_to_node(rep));
      return rep.passed() ? 0 : 1;
    }

    if (*c_cd1) {
      const mmcd::FiniteMMSpace space = load_space(e_space);
      const mmcd::DiscreteMeasure mu0 = load_measure(e_mu0, space);
      const mmcd::DiscreteMeasure mu1 = load_measure(e_mu1, space);
      mmcd::DynamicPlan plan;
      if (!e_plan.empty()) {
        plan = mmcd::plan_from_json(mmcd::load_json_file(e_plan), space);
      } else {
        std::optional<std::vector<double>> u;
        if (!e_u.empty()) u = mmcd::u_from_spec(space, e_u);
        plan = mmcd::glue_geodesics(space, mu0, mu1, u ? &*u : nullptr).plan;
      }
      const mmcd::CheckReport rep = mmcd::cd1_entropy_check(space, plan, mu0, mu1, e_K, e_N, ts,
                                                            nps, g.tol < 0 ? 1e-9 : g.tol);
      emit(g, mmcd::report_to_node(rep));
      return rep.passed() ? 0 : 1;
    }

    if (*c_cd1u) {
      const mmcd::FiniteMMSpace space = load_space(q_space);
      const std::vector<double> u = mmcd::u_from_spec(space, q_u);
      mmcd::Cd1ConditionResult res =
          mmcd::cd1_condition_check(space, u, q_K, q_N, g.grid_step, {}, g.tol);
      Node doc = mmcd::report_to_node(res.report);
      const mmcd::Disintegration dis = res.decomposition.rays.empty()
                                           ? mmcd::Disintegration{}
                                           : res.disintegration;
      doc.set("decomposition", mmcd::decomposition_to_node(res.decomposition, &dis, space));
      if (!g.svg.empty() && !res.needles.empty())
        write_svg_if_requested(g, res.needles.front().second, q_K, q_N);
      emit(g, doc);
      return res.report.passed() ? 0 : 1;
    }

    if (*c_fc) {
      const mmcd::FiniteMMSpace space = load_space(f_space);
      const std::vector<double> u = mmcd::u_from_spec(space, f_u);
      mmcd::TransportStructure s = mmcd::build_gamma(space, u);
      mmcd::branching_sets(s, space);
      const mmcd::RayDecomposition dec = mmcd::decompose_rays(s, space, u);
      const mmcd::Disintegration dis = mmcd::disintegrate(space.ref, dec);
      std::vector<mmcd::Needle> needles;
      std::vector<std::string> labels;
      for (std::size_t r = 0; r < dis.ray.size(); ++r) {
        const mmcd::Ray& ray = dec.rays[static_cast<std::size_t>(dis.ray[r])];
        if (ray.members.size() < 2) continue;
        needles.push_back(mmcd::ray_to_needle(ray, dis.conditional[r], g.grid_step));
        labels.push_back(space.ids[static_cast<std::size_t>(ray.representative)]);
      }
      if (needles.empty()) throw std::runtime_error("check-firstclaim: no usable rays");
      std::vector<const mmcd::Needle*> all;
      for (const auto& nd : needles) all.push_back(&nd);
      double min_len = needles.front().length();
      for (const auto& nd : needles) min_len = std::min(min_len, nd.length());

      mmcd::CheckReport combined;
      combined.check = "firstclaim";
      combined.tolerance = g.tol < 0 ? 1e-6 : g.tol;
      if (f_R0 >= 0.0) {
        const mmcd::CheckReport rep = mmcd::firstclaim_check(
            all, labels, f_K, f_N, f_R0, f_R1, f_L0, f_L1, ts, combined.tolerance);
        combined.merge(rep);
      } else {
        std::mt19937_64 rng(g.seed);
        for (int wdx = 0; wdx < f_windows; ++wdx) {
          const double R0 = mmcd::uniform_in(rng, 0.0, 0.45 * min_len);
          const double R1 = mmcd::uniform_in(rng, R0 + 0.05 * min_len, 0.7 * min_len);
          const double L1 = mmcd::uniform_in(rng, 0.05, 1.0) * (min_len - R1);
          const double L0 = mmcd::uniform_in(rng, 0.05, 1.0) * min_len;
          const bool singleton = (wdx % 2 == 1) && all.size() > 1;
          if (singleton) {
            const std::size_t pick = static_cast<std::size_t>(rng() % all.size());
            const std::vector<const mmcd::Needle*> one{all[pick]};
            const std::vector<std::string> lone{labels[pick]};
            combined.merge(
                mmcd::firstclaim_check(one, lone, f_K, f_N, R0, R1, L0, L1, ts,
                                       combined.tolerance));
          } else {
            combined.merge(mmcd::firstclaim_check(all, labels, f_K, f_N, R0, R1, L0, L1, ts,
                                                  combined.tolerance));
          }
        }
      }
      emit(g, mmcd::report_to_node(combined));
      return combined.passed() ? 0 : 1;
    }

    if (*c_glue) {
      const mmcd::FiniteMMSpace space = load_space(g_space);
      const mmcd::DiscreteMeasure mu0 = load_measure(g_mu0, space);
      const mmcd::DiscreteMeasure mu1 = load_measure(g_mu1, space);
      std::optional<std::vector<double>> u;
      if (!g_u.empty()) u = mmcd::u_from_spec(space, g_u);
      const mmcd::GluedPlan glued = mmcd::glue_geodesics(space, mu0, mu1, u ? &*u : nullptr);
      const mmcd::CheckReport w1rep =
          mmcd::w1_geodesic_check(space, glued.plan, ts, g.tol < 0 ? 1e-8 : g.tol);
      Node doc = Node::object();
      doc.set("plan", mmcd::plan_to_node(glued.plan, space));
      doc.set("w1", Node::of(glued.w1));
      doc.set("w1_geodesic", mmcd::report_to_node(w1rep));
      Node un = Node::object();
      for (int i = 0; i < space.n(); ++i)
        un.set(space.ids[static_cast<std::size_t>(i)],
               Node::of(glued.potential[static_cast<std::size_t>(i)]));
      doc.set("potential", std::move(un));
      emit(g, doc);
      return w1rep.passed() ? 0 : 1;
    }

    if (*c_rep) {
      const mmcd::FiniteMMSpace space = load_space(r_space, /*validate=*/false);
      const mmcd::SpaceValidation v = mmcd::validate_space(space);
      Node doc = Node::object();
      Node problems = Node::array();
      for (const auto& p : v.problems) problems.push(Node::of(p));
      doc.set("validation", std::move(problems));
      doc.set("valid", Node::of(v.ok()));
      bool ok = v.ok();
      if (!r_u.empty() && v.ok()) {
        const std::vector<double> u = mmcd::u_from_spec(space, r_u);
        if (c_rep->count("--K") == 0 || c_rep->count("--N") == 0)
          throw std::runtime_error("report: --u requires --K and --N");
        mmcd::Cd1ConditionResult res =
            mmcd::cd1_condition_check(space, u, r_K, r_N, g.grid_step, {}, g.tol);
        doc.set("cd1_condition", mmcd::report_to_node(res.report));
        doc.set("decomposition",
                mmcd::decomposition_to_node(res.decomposition, &res.disintegration, space));
        ok = ok && res.report.passed();
      }
      emit(g, doc);
      return ok ? 0 : 1;
    }

    throw std::runtime_error("no subcommand selected");
  } catch (const nlohmann::json::parse_error& e) {
    std::fprintf(stderr, "input error: malformed JSON at byte %zu: %s\n",
                 static_cast<std::size_t>(e.byte), e.what());
    return 2;
  } catch (const mmcd::plan_not_optimal& e) {
    std::fprintf(stderr, "check rejected: %s\n", e.what());
    return 1;
  } catch (const mmcd::structural_error& e) {
    std::fprintf(stderr, "structural error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
