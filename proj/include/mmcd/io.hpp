#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmcd/cd_verify.hpp"
#include "mmcd/disintegration.hpp"
#include "mmcd/glue.hpp"
#include "mmcd/metric_space.hpp"
#include "mmcd/rays.hpp"
#include "mmcd/transport.hpp"

// File formats and report emission. Parsing uses nlohmann::json (its parse
// errors carry byte positions). Emission goes through a small tree writer
// of our own: keys sorted, floats at 17 significant digits, infinities as
// the strings "inf"/"-inf" — identical inputs produce byte-identical
// reports.

namespace mmcd {

namespace jsonout {

struct Node {
  enum class Kind { Object, Array, String, Number, Integer, Boolean, Null } kind = Kind::Null;
  std::vector<std::pair<std::string, Node>> members;
  std::vector<Node> items;
  std::string str;
  double num = 0.0;
  long long inum = 0;
  bool flag = false;

  static Node object() {
    Node n;
    n.kind = Kind::Object;
    return n;
  }
  static Node array() {
    Node n;
    n.kind = Kind::Array;
    return n;
  }
  static Node of(const std::string& s) {
    Node n;
    n.kind = Kind::String;
    n.str = s;
    return n;
  }
  static Node of(double v) {
    Node n;
    n.kind = Kind::Number;
    n.num = v;
    return n;
  }
  static Node of(long long v) {
    Node n;
    n.kind = Kind::Integer;
    n.inum = v;
    return n;
  }
  static Node of(bool v) {
    Node n;
    n.kind = Kind::Boolean;
    n.flag = v;
    return n;
  }

  Node& set(const std::string& key, Node v) {
    members.emplace_back(key, std::move(v));
    return *this;
  }
  Node& push(Node v) {
    items.push_back(std::move(v));
    return *this;
  }
};

inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "\"inf\"" : "\"-inf\"";
  if (std::isnan(v)) return "\"nan\"";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void escape_into(std::string& out, const std::string& s) {
  out += '"';
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  out += '"';
}

inline void dump_into(std::string& out, const Node& n, int depth) {
  const std::string pad(static_cast<std::size_t>(depth) * 2, ' ');
  const std::string pad1(static_cast<std::size_t>(depth + 1) * 2, ' ');
  switch (n.kind) {
    case Node::Kind::Null: out += "null"; break;
    case Node::Kind::Boolean: out += n.flag ? "true" : "false"; break;
    case Node::Kind::Integer: out += std::to_string(n.inum); break;
    case Node::Kind::Number: out += format_double(n.num); break;
    case Node::Kind::String: escape_into(out, n.str); break;
    case Node::Kind::Array: {
      if (n.items.empty()) {
        out += "[]";
        break;
      }
      out += "[\n";
      for (std::size_t i = 0; i < n.items.size(); ++i) {
        out += pad1;
        dump_into(out, n.items[i], depth + 1);
        if (i + 1 < n.items.size()) out += ',';
        out += '\n';
      }
      out += pad + "]";
      break;
    }
    case Node::Kind::Object: {
      if (n.members.empty()) {
        out += "{}";
        break;
      }
      auto sorted = n.members;
      std::stable_sort(sorted.begin(), sorted.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      out += "{\n";
      for (std::size_t i = 0; i < sorted.size(); ++i) {
        out += pad1;
        escape_into(out, sorted[i].first);
        out += ": ";
        dump_into(out, sorted[i].second, depth + 1);
        if (i + 1 < sorted.size()) out += ',';
        out += '\n';
      }
      out += pad + "}";
      break;
    }
  }
}

inline std::string dump(const Node& n) {
  std::string out;
  dump_into(out, n, 0);
  out += '\n';
  return out;
}

}  // namespace jsonout

// ---------------------------------------------------------------------------
// Parsing

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  return nlohmann::json::parse(in);  // parse_error carries the byte position
}

inline DiscreteMeasure measure_from_json(const nlohmann::json& j) {
  const nlohmann::json* arr = &j;
  if (j.is_object()) {
    if (!j.contains("weights"))
      throw std::runtime_error("measure: expected an array or {\"weights\": [...]}");
    arr = &j.at("weights");
  }
  if (!arr->is_array()) throw std::runtime_error("measure: weights must be an array");
  DiscreteMeasure m;
  for (const auto& v : *arr) m.w.push_back(v.get<double>());
  return m;
}

inline GeodesicChain chain_from_json(const nlohmann::json& j, const FiniteMMSpace& space) {
  GeodesicChain c;
  for (const auto& v : j.at("nodes")) {
    int idx;
    if (v.is_string()) {
      idx = space.index_of(v.get<std::string>());
      if (idx < 0) throw std::runtime_error("chain: unknown point id " + v.get<std::string>());
    } else {
      idx = v.get<int>();
      if (idx < 0 || idx >= space.n()) throw std::runtime_error("chain: node index out of range");
    }
    c.nodes.push_back(idx);
  }
  for (const auto& v : j.at("times")) c.times.push_back(v.get<double>());
  if (c.nodes.size() != c.times.size())
    throw std::runtime_error("chain: nodes and times differ in length");
  return c;
}

inline FiniteMMSpace space_from_json(const nlohmann::json& j) {
  FiniteMMSpace space;
  const nlohmann::json& dist = j.at("dist");

  if (dist.is_object()) {
    const std::string metric = dist.at("metric").get<std::string>();
    const double spacing = dist.value("spacing", 1.0);
    if (metric == "path_graph") {
      const int n = dist.at("n").get<int>();
      for (int i = 0; i < n; ++i) {
        space.ids.push_back("p" + std::to_string(i));
        space.xy.push_back({spacing * i, 0.0});
      }
    } else if (metric == "grid") {
      const int rows = dist.at("rows").get<int>();
      const int cols = dist.at("cols").get<int>();
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
          space.ids.push_back("r" + std::to_string(r) + "c" + std::to_string(c));
          space.xy.push_back({spacing * c, spacing * r});
        }
    } else if (metric == "euclidean") {
      // points with coordinates are required below
    } else {
      throw std::runtime_error("space: unknown metric generator '" + metric + "'");
    }
  }

  if (j.contains("points")) {
    if (!space.ids.empty()) throw std::runtime_error("space: points given twice");
    for (const auto& p : j.at("points")) {
      space.ids.push_back(p.at("id").get<std::string>());
      if (p.contains("xy"))
        space.xy.push_back({p.at("xy").at(0).get<double>(), p.at("xy").at(1).get<double>()});
    }
    if (!space.xy.empty() && space.xy.size() != space.ids.size())
      throw std::runtime_error("space: some points have coordinates and some do not");
  }
  if (space.ids.empty()) throw std::runtime_error("space: no points");
  const std::size_t n = space.ids.size();

  space.allocate_distances();
  if (dist.is_array()) {
    if (dist.size() != n) throw std::runtime_error("space: dist matrix has wrong row count");
    for (std::size_t i = 0; i < n; ++i) {
      if (dist.at(i).size() != n)
        throw std::runtime_error("space: dist matrix has wrong column count");
      for (std::size_t k = 0; k < n; ++k)
        space.set_distance(static_cast<int>(i), static_cast<int>(k),
                           dist.at(i).at(k).get<double>());
    }
  } else {
    if (space.xy.size() != n)
      throw std::runtime_error("space: metric generator requires coordinates");
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < n; ++k)
        space.set_distance(static_cast<int>(i), static_cast<int>(k),
                           std::hypot(space.xy[i][0] - space.xy[k][0],
                                      space.xy[i][1] - space.xy[k][1]));
  }

  if (j.contains("measure"))
    space.ref = measure_from_json(j.at("measure"));
  else
    space.ref = DiscreteMeasure::uniform(n);
  if (space.ref.size() != n) throw std::runtime_error("space: measure has wrong length");

  if (j.contains("geodesics"))
    for (const auto& g : j.at("geodesics")) space.geodesics.push_back(chain_from_json(g, space));
  return space;
}

inline Needle needle_from_json(const nlohmann::json& j) {
  Needle needle;
  if (j.contains("model")) {
    const std::string model = j.at("model").get<std::string>();
    const double step = j.value("grid_step", -1.0);
    if (model == "sine") {
      const double K = j.at("K").get<double>();
      const double N = j.at("N").get<double>();
      if (!(K > 0.0) || !(N > 1.0))
        throw std::runtime_error("needle: sine model requires K > 0 and N > 1");
      const double lam = std::sqrt(K / (N - 1.0));
      const double L = kPi / lam;
      needle.h = sample_on_grid(L, step > 0 ? step : 1e-3 * L, [&](double x) {
        const double s = std::sin(std::min(lam * x, kPi));
        return s <= 1e-12 ? 0.0 : std::pow(s, N - 1.0);
      });
    } else if (model == "sinh") {
      const double K = j.at("K").get<double>();
      const double N = j.at("N").get<double>();
      const double L = j.value("length", 2.0);
      if (!(K < 0.0) || !(N > 1.0))
        throw std::runtime_error("needle: sinh model requires K < 0 and N > 1");
      const double lam = std::sqrt(-K / (N - 1.0));
      needle.h = sample_on_grid(L, step > 0 ? step : 1e-3 * L, [&](double x) {
        return std::pow(std::sinh(lam * x), N - 1.0);
      });
    } else if (model == "constant") {
      const double L = j.value("length", 1.0);
      const double value = j.value("value", 1.0);
      needle.h = sample_on_grid(L, step > 0 ? step : 1e-3 * L,
                                [&](double) { return value; });
    } else {
      throw std::runtime_error("needle: unknown model '" + model + "'");
    }
    return needle;
  }
  const double L = j.at("length").get<double>();
  const double step = j.at("grid_step").get<double>();
  needle.h.values.clear();
  for (const auto& v : j.at("density")) needle.h.values.push_back(v.get<double>());
  if (needle.h.values.size() < 2) throw std::runtime_error("needle: need at least 2 samples");
  needle.h.step = L / static_cast<double>(needle.h.values.size() - 1);
  if (std::abs(needle.h.step - step) > 1e-9 * (1.0 + step))
    throw std::runtime_error("needle: grid_step does not match length and sample count");
  if (!needle.valid()) throw std::runtime_error("needle: invalid density");
  return needle;
}

// Potentials: "x", "-x", "y", "-y", "d:<id>", "-d:<id>", or a file with
// {"values": [...]} / {"<id>": value, ...}.
inline std::vector<double> u_from_spec(const FiniteMMSpace& space, const std::string& spec) {
  const std::size_t n = space.ids.size();
  std::vector<double> u(n, 0.0);
  auto coord = [&](int axis, double sign) {
    if (!space.has_xy())
      throw std::runtime_error("potential: space has no coordinates for '" + spec + "'");
    for (std::size_t i = 0; i < n; ++i)
      u[i] = sign * space.xy[i][static_cast<std::size_t>(axis)];
    return u;
  };
  if (spec == "x") return coord(0, 1.0);
  if (spec == "-x") return coord(0, -1.0);
  if (spec == "y") return coord(1, 1.0);
  if (spec == "-y") return coord(1, -1.0);
  if (spec.rfind("d:", 0) == 0 || spec.rfind("-d:", 0) == 0) {
    const bool neg = spec[0] == '-';
    const std::string id = spec.substr(neg ? 3 : 2);
    const int at = space.index_of(id);
    if (at < 0) throw std::runtime_error("potential: unknown point id " + id);
    for (std::size_t i = 0; i < n; ++i)
      u[i] = (neg ? -1.0 : 1.0) * space.d(static_cast<int>(i), at);
    return u;
  }
  const nlohmann::json j = load_json_file(spec);
  if (j.is_object() && j.contains("values")) {
    std::size_t i = 0;
    for (const auto& v : j.at("values")) {
      if (i >= n) throw std::runtime_error("potential: too many values");
      u[i++] = v.get<double>();
    }
    if (i != n) throw std::runtime_error("potential: too few values");
    return u;
  }
  if (j.is_object()) {
    for (const auto& [key, v] : j.items()) {
      const int at = space.index_of(key);
      if (at < 0) throw std::runtime_error("potential: unknown point id " + key);
      u[static_cast<std::size_t>(at)] = v.get<double>();
    }
    return u;
  }
  throw std::runtime_error("potential: unrecognized file format");
}

inline DynamicPlan plan_from_json(const nlohmann::json& j, const FiniteMMSpace& space) {
  DynamicPlan plan;
  for (const auto& e : j.at("chains")) {
    DynamicPlanEntry entry;
    entry.chain = chain_from_json(e, space);
    if (entry.chain.nodes.empty()) throw std::runtime_error("plan: chain without nodes");
    if (entry.chain.nodes.size() == 1)  // shorthand for mass left in place
      entry.chain = GeodesicChain::static_at(entry.chain.nodes.front());
    entry.mass = e.at("mass").get<double>();
    plan.entries.push_back(std::move(entry));
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Emission

inline jsonout::Node measure_to_node(const DiscreteMeasure& m) {
  jsonout::Node arr = jsonout::Node::array();
  for (double v : m.w) arr.push(jsonout::Node::of(v));
  jsonout::Node obj = jsonout::Node::object();
  obj.set("weights", std::move(arr));
  return obj;
}

inline jsonout::Node space_to_node(const FiniteMMSpace& space) {
  jsonout::Node obj = jsonout::Node::object();
  jsonout::Node pts = jsonout::Node::array();
  for (std::size_t i = 0; i < space.ids.size(); ++i) {
    jsonout::Node p = jsonout::Node::object();
    p.set("id", jsonout::Node::of(space.ids[i]));
    if (space.has_xy()) {
      jsonout::Node xy = jsonout::Node::array();
      xy.push(jsonout::Node::of(space.xy[i][0]));
      xy.push(jsonout::Node::of(space.xy[i][1]));
      p.set("xy", std::move(xy));
    }
    pts.push(std::move(p));
  }
  obj.set("points", std::move(pts));
  jsonout::Node dist = jsonout::Node::array();
  for (int i = 0; i < space.n(); ++i) {
    jsonout::Node row = jsonout::Node::array();
    for (int k = 0; k < space.n(); ++k) row.push(jsonout::Node::of(space.d(i, k)));
    dist.push(std::move(row));
  }
  obj.set("dist", std::move(dist));
  jsonout::Node meas = jsonout::Node::array();
  for (double v : space.ref.w) meas.push(jsonout::Node::of(v));
  obj.set("measure", std::move(meas));
  jsonout::Node geos = jsonout::Node::array();
  for (const auto& g : space.geodesics) {
    jsonout::Node gn = jsonout::Node::object();
    jsonout::Node nodes = jsonout::Node::array();
    for (int v : g.nodes)
      nodes.push(jsonout::Node::of(space.ids[static_cast<std::size_t>(v)]));
    jsonout::Node times = jsonout::Node::array();
    for (double v : g.times) times.push(jsonout::Node::of(v));
    gn.set("nodes", std::move(nodes));
    gn.set("times", std::move(times));
    geos.push(std::move(gn));
  }
  obj.set("geodesics", std::move(geos));
  return obj;
}

inline jsonout::Node needle_to_node(const Needle& needle) {
  jsonout::Node obj = jsonout::Node::object();
  obj.set("length", jsonout::Node::of(needle.length()));
  obj.set("grid_step", jsonout::Node::of(needle.h.step));
  jsonout::Node vals = jsonout::Node::array();
  for (double v : needle.h.values) vals.push(jsonout::Node::of(v));
  obj.set("density", std::move(vals));
  return obj;
}

inline jsonout::Node chain_to_node(const GeodesicChain& chain, const FiniteMMSpace& space) {
  jsonout::Node gn = jsonout::Node::object();
  jsonout::Node nodes = jsonout::Node::array();
  for (int v : chain.nodes) nodes.push(jsonout::Node::of(space.ids[static_cast<std::size_t>(v)]));
  jsonout::Node times = jsonout::Node::array();
  for (double v : chain.times) times.push(jsonout::Node::of(v));
  gn.set("nodes", std::move(nodes));
  gn.set("times", std::move(times));
  return gn;
}

inline jsonout::Node plan_to_node(const DynamicPlan& plan, const FiniteMMSpace& space) {
  jsonout::Node obj = jsonout::Node::object();
  jsonout::Node chains = jsonout::Node::array();
  for (const auto& e : plan.entries) {
    jsonout::Node c = chain_to_node(e.chain, space);
    c.set("mass", jsonout::Node::of(e.mass));
    chains.push(std::move(c));
  }
  obj.set("chains", std::move(chains));
  return obj;
}

inline jsonout::Node coupling_to_node(const Coupling& c, const FiniteMMSpace& space) {
  jsonout::Node arr = jsonout::Node::array();
  for (const auto& e : c.entries) {
    jsonout::Node en = jsonout::Node::object();
    en.set("x", jsonout::Node::of(space.ids[static_cast<std::size_t>(e.x)]));
    en.set("y", jsonout::Node::of(space.ids[static_cast<std::size_t>(e.y)]));
    en.set("mass", jsonout::Node::of(e.mass));
    arr.push(std::move(en));
  }
  return arr;
}

inline jsonout::Node decomposition_to_node(const RayDecomposition& dec,
                                           const Disintegration* dis,
                                           const FiniteMMSpace& space) {
  jsonout::Node obj = jsonout::Node::object();
  jsonout::Node rays = jsonout::Node::array();
  for (std::size_t r = 0; r < dec.rays.size(); ++r) {
    const Ray& ray = dec.rays[r];
    jsonout::Node rn = jsonout::Node::object();
    rn.set("id", jsonout::Node::of(space.ids[static_cast<std::size_t>(ray.representative)]));
    jsonout::Node mem = jsonout::Node::array();
    for (int x : ray.members) mem.push(jsonout::Node::of(space.ids[static_cast<std::size_t>(x)]));
    rn.set("members", std::move(mem));
    jsonout::Node par = jsonout::Node::array();
    for (double t : ray.params) par.push(jsonout::Node::of(t));
    rn.set("params", std::move(par));
    if (dis != nullptr) {
      const int pos = dis->position_of_ray(static_cast<int>(r));
      if (pos >= 0) {
        rn.set("q", jsonout::Node::of(dis->q[static_cast<std::size_t>(pos)]));
        jsonout::Node cm = jsonout::Node::array();
        for (int x : ray.members)
          cm.push(jsonout::Node::of(
              dis->conditional[static_cast<std::size_t>(pos)].w[static_cast<std::size_t>(x)]));
        rn.set("conditional", std::move(cm));
      }
    }
    rays.push(std::move(rn));
  }
  obj.set("rays", std::move(rays));
  jsonout::Node fmap = jsonout::Node::object();
  for (std::size_t x = 0; x < dec.f.size(); ++x)
    if (dec.f[x] >= 0)
      fmap.set(space.ids[x],
               jsonout::Node::of(space.ids[static_cast<std::size_t>(
                   dec.rays[static_cast<std::size_t>(dec.f[x])].representative)]));
  obj.set("f", std::move(fmap));
  return obj;
}

inline jsonout::Node structure_to_node(const TransportStructure& s, const FiniteMMSpace& space) {
  jsonout::Node obj = jsonout::Node::object();
  auto mask_to_array = [&](const std::vector<char>& mask) {
    jsonout::Node arr = jsonout::Node::array();
    for (int i = 0; i < s.n; ++i)
      if (mask[static_cast<std::size_t>(i)])
        arr.push(jsonout::Node::of(space.ids[static_cast<std::size_t>(i)]));
    return arr;
  };
  obj.set("transport_set", mask_to_array(s.in_T));
  obj.set("A_plus", mask_to_array(s.in_Aplus));
  obj.set("A_minus", mask_to_array(s.in_Aminus));
  obj.set("nonbranched_set", mask_to_array(s.in_Tb));
  return obj;
}

inline jsonout::Node report_to_node(const CheckReport& rep) {
  jsonout::Node obj = jsonout::Node::object();
  obj.set("check", jsonout::Node::of(rep.check));
  obj.set("passed", jsonout::Node::of(rep.passed()));
  obj.set("worst_margin", jsonout::Node::of(rep.infinitely_violated()
                                                ? -std::numeric_limits<double>::infinity()
                                                : rep.worst_margin()));
  obj.set("tolerance", jsonout::Node::of(rep.tolerance));
  obj.set("constraints", jsonout::Node::of(static_cast<long long>(rep.constraints())));
  jsonout::Node wits = jsonout::Node::array();
  for (const auto& w : rep.witnesses()) {
    jsonout::Node wn = jsonout::Node::object();
    wn.set("label", jsonout::Node::of(w.label));
    wn.set("margin", jsonout::Node::of(w.margin));
    jsonout::Node params = jsonout::Node::object();
    for (const auto& [k, v] : w.params) params.set(k, jsonout::Node::of(v));
    wn.set("params", std::move(params));
    if (!w.ray.empty()) wn.set("ray", jsonout::Node::of(w.ray));
    wits.push(std::move(wn));
  }
  obj.set("witnesses", std::move(wits));
  jsonout::Node notes = jsonout::Node::array();
  for (const auto& s : rep.notes) notes.push(jsonout::Node::of(s));
  obj.set("notes", std::move(notes));
  return obj;
}

// Minimal SVG with the needle density and its concavity defect.
inline std::string needle_svg(const Needle& needle, double K, double N) {
  const DensityOnNeedle& h = needle.h;
  const double W = 640.0, H = 360.0, margin = 40.0;
  double hmax = 1e-12;
  for (double v : h.values) hmax = std::max(hmax, v);
  const double e = 1.0 / (N - 1.0);
  std::vector<double> defect(h.values.size(), 0.0);
  double dmax = 1e-12;
  for (std::size_t i = 1; i + 1 < h.values.size(); ++i) {
    const double g0 = std::pow(h.values[i - 1], e), g1 = std::pow(h.values[i], e),
                 g2 = std::pow(h.values[i + 1], e);
    defect[i] = (g2 - 2.0 * g1 + g0) / (h.step * h.step) + K / (N - 1.0) * g1;
    dmax = std::max(dmax, std::abs(defect[i]));
  }
  auto xpix = [&](std::size_t i) {
    return margin + (W - 2 * margin) * static_cast<double>(i) /
                        static_cast<double>(h.values.size() - 1);
  };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  char buf[64];
  auto poly = [&](const char* color, auto value, double scale, double base) {
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
    for (std::size_t i = 0; i < h.values.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", xpix(i), base - scale * value(i));
      os << buf;
    }
    os << "\"/>\n";
  };
  poly("black", [&](std::size_t i) { return h.values[i]; }, (H / 2 - margin) / hmax, H / 2.0);
  poly("red", [&](std::size_t i) { return defect[i]; }, (H / 4 - 10) / dmax, 3.0 * H / 4.0);
  os << "<text x=\"" << margin << "\" y=\"20\" font-size=\"12\">density h (black), "
     << "concavity defect (red)</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace mmcd
