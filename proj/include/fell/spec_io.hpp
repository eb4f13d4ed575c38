#pragma once

// Spec-file interchange: a single JSON document holding groupoid/action/
// bundle/demi-equivalence sections plus an optional equivalence section
// (constructed or expected bundle with its left structure). Complex numbers
// are [re, im] pairs; tensors are flat row-major over (left-in, right-in,
// out); all indices 0-based. Output is byte-stable: fixed key order and the
// library's shortest-round-trip float formatting.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "fell/equivalence.hpp"
#include "fell/fixtures.hpp"

namespace fell {

using Json = nlohmann::ordered_json;

/// Malformed input file (missing keys, wrong shapes): exit code 2 territory,
/// as opposed to mathematical failures which are reported.
struct SpecError : std::runtime_error {
  explicit SpecError(const std::string& what) : std::runtime_error(what) {}
};

struct BundleSpecFile {
  double tolerance = kDefaultTol;
  uint64_t seed = 0;
  std::optional<FiniteGroupoid> groupoid;
  std::optional<PrincipalAction> action;
  std::optional<FellBundle> bundle;
  std::optional<DemiEquivalence> demi;
  std::optional<EquivalenceData> equivalence;
};

// ---------------------------------------------------------------------------
// Writers
// ---------------------------------------------------------------------------

inline Json complex_array(const std::vector<Complex>& data) {
  Json out = Json::array();
  for (const Complex& c : data) out.push_back({c.real(), c.imag()});
  return out;
}

inline Json tensor_to_json(const Tensor3& t) {
  return Json{{"d1", t.d1}, {"d2", t.d2}, {"d3", t.d3}, {"data", complex_array(t.a)}};
}

inline Json matrix_to_json(const Matrix& m) {
  std::vector<Complex> flat;
  flat.reserve(m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", complex_array(flat)}};
}

inline Json groupoid_to_json(const FiniteGroupoid& g) {
  return Json{{"units", g.n_units}, {"arrows", g.n_arrows}, {"src", g.src},
              {"rng", g.rng},       {"inv", g.inv},         {"unit_embed", g.unit_embed},
              {"comp", g.comp}};
}

inline Json action_to_json(const PrincipalAction& a) {
  return Json{{"points", a.n_points}, {"sigma", a.sigma}, {"act", a.act}};
}

inline Json bundle_to_json(const FellBundle& fb) {
  Json unit_blocks = Json::array();
  for (const auto& alg : fb.unit_algebras) unit_blocks.push_back(alg.blocks);
  Json mult = Json::array();
  for (const auto& [key, t] : fb.mult) {
    Json entry = tensor_to_json(t);
    entry["left"] = key.first;
    entry["right"] = key.second;
    mult.push_back(std::move(entry));
  }
  Json invol = Json::array();
  for (size_t h = 0; h < fb.invol.size(); ++h) {
    Json entry = matrix_to_json(fb.invol[h]);
    entry["arrow"] = static_cast<int>(h);
    invol.push_back(std::move(entry));
  }
  return Json{{"unit_blocks", std::move(unit_blocks)},
              {"fibre_dims", fb.fibre_dims},
              {"mult", std::move(mult)},
              {"invol", std::move(invol)}};
}

inline Json demi_to_json(const DemiEquivalence& d) {
  Json ract = Json::array();
  for (const auto& [key, t] : d.ract_tensors) {
    Json entry = tensor_to_json(t);
    entry["point"] = key.first;
    entry["arrow"] = key.second;
    ract.push_back(std::move(entry));
  }
  Json rip = Json::array();
  for (const auto& [key, t] : d.rip_tensors) {
    Json entry = tensor_to_json(t);
    entry["point1"] = key.first;
    entry["point2"] = key.second;
    rip.push_back(std::move(entry));
  }
  return Json{{"fibre_dims", d.fibre_dims}, {"ract", std::move(ract)}, {"rip", std::move(rip)}};
}

inline Json equivalence_to_json(const EquivalenceData& e) {
  Json li = Json::array();
  for (const auto& [key, t] : e.left_inner) {
    Json entry = tensor_to_json(t);
    entry["point1"] = key.first;
    entry["point2"] = key.second;
    li.push_back(std::move(entry));
  }
  Json la = Json::array();
  for (const auto& [key, t] : e.left_act) {
    Json entry = tensor_to_json(t);
    entry["arrow"] = key.first;
    entry["point"] = key.second;
    la.push_back(std::move(entry));
  }
  return Json{{"groupoid", groupoid_to_json(e.bundle.base)},
              {"fell_bundle", bundle_to_json(e.bundle)},
              {"leoq", e.leoq_tab},
              {"lact_point", e.lact_point},
              {"left_inner", std::move(li)},
              {"left_act", std::move(la)}};
}

inline Json spec_to_json(const BundleSpecFile& f) {
  Json out;
  out["format"] = "fellspec-1";
  out["tolerance"] = f.tolerance;
  out["seed"] = f.seed;
  if (f.groupoid) out["groupoid"] = groupoid_to_json(*f.groupoid);
  if (f.action) out["action"] = action_to_json(*f.action);
  if (f.bundle) out["fell_bundle"] = bundle_to_json(*f.bundle);
  if (f.demi) out["demi_equivalence"] = demi_to_json(*f.demi);
  if (f.equivalence) out["equivalence"] = equivalence_to_json(*f.equivalence);
  return out;
}

inline std::string spec_to_string(const BundleSpecFile& f) { return spec_to_json(f).dump(1); }

// ---------------------------------------------------------------------------
// Readers
// ---------------------------------------------------------------------------

inline std::vector<Complex> complex_array_from(const Json& j, size_t expected,
                                               const std::string& where) {
  if (!j.is_array() || j.size() != expected)
    throw SpecError(where + ": complex array of length " + std::to_string(expected) +
                    " expected");
  std::vector<Complex> out;
  out.reserve(expected);
  for (const auto& c : j) {
    if (!c.is_array() || c.size() != 2 || !c[0].is_number() || !c[1].is_number())
      throw SpecError(where + ": complex entries must be [re, im]");
    out.emplace_back(c[0].get<double>(), c[1].get<double>());
  }
  return out;
}

inline Tensor3 tensor_from_json(const Json& j, int d1, int d2, int d3,
                                const std::string& where) {
  for (const char* key : {"d1", "d2", "d3", "data"})
    if (!j.contains(key)) throw SpecError(where + ": missing key " + key);
  if (j["d1"] != d1 || j["d2"] != d2 || j["d3"] != d3)
    throw SpecError(where + ": tensor shape mismatch");
  Tensor3 t(d1, d2, d3);
  t.a = complex_array_from(j["data"], t.a.size(), where);
  return t;
}

inline Matrix matrix_from_json(const Json& j, int rows, int cols, const std::string& where) {
  for (const char* key : {"rows", "cols", "data"})
    if (!j.contains(key)) throw SpecError(where + ": missing key " + key);
  if (j["rows"] != rows || j["cols"] != cols)
    throw SpecError(where + ": matrix shape mismatch");
  auto flat = complex_array_from(j["data"], static_cast<size_t>(rows) * cols, where);
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = flat[static_cast<size_t>(r) * cols + c];
  return m;
}

template <typename T>
std::vector<T> int_vector_from(const Json& j, const std::string& where) {
  if (!j.is_array()) throw SpecError(where + ": array expected");
  std::vector<T> out;
  for (const auto& v : j) {
    if (!v.is_number_integer()) throw SpecError(where + ": integer entries expected");
    out.push_back(v.get<T>());
  }
  return out;
}

inline FiniteGroupoid groupoid_from_json(const Json& j) {
  for (const char* key : {"units", "arrows", "src", "rng", "inv", "unit_embed", "comp"})
    if (!j.contains(key)) throw SpecError(std::string("groupoid: missing key ") + key);
  FiniteGroupoid g;
  g.n_units = j["units"].get<int>();
  g.n_arrows = j["arrows"].get<int>();
  g.src = int_vector_from<int>(j["src"], "groupoid.src");
  g.rng = int_vector_from<int>(j["rng"], "groupoid.rng");
  g.inv = int_vector_from<int>(j["inv"], "groupoid.inv");
  g.unit_embed = int_vector_from<int>(j["unit_embed"], "groupoid.unit_embed");
  if (!j["comp"].is_array() || j["comp"].size() != static_cast<size_t>(g.n_arrows))
    throw SpecError("groupoid.comp: one row per arrow required");
  for (const auto& row : j["comp"]) {
    g.comp.push_back(int_vector_from<int>(row, "groupoid.comp"));
    if (static_cast<int>(g.comp.back().size()) != g.n_arrows)
      throw SpecError("groupoid.comp: row length mismatch");
  }
  if (static_cast<int>(g.src.size()) != g.n_arrows ||
      static_cast<int>(g.rng.size()) != g.n_arrows ||
      static_cast<int>(g.inv.size()) != g.n_arrows ||
      static_cast<int>(g.unit_embed.size()) != g.n_units)
    throw SpecError("groupoid: table sizes inconsistent");
  return g;
}

inline PrincipalAction action_from_json(const Json& j) {
  for (const char* key : {"points", "sigma", "act"})
    if (!j.contains(key)) throw SpecError(std::string("action: missing key ") + key);
  PrincipalAction a;
  a.n_points = j["points"].get<int>();
  a.sigma = int_vector_from<int>(j["sigma"], "action.sigma");
  if (static_cast<int>(a.sigma.size()) != a.n_points)
    throw SpecError("action.sigma: size mismatch");
  if (!j["act"].is_array() || j["act"].size() != static_cast<size_t>(a.n_points))
    throw SpecError("action.act: one row per point required");
  for (const auto& row : j["act"]) a.act.push_back(int_vector_from<int>(row, "action.act"));
  return a;
}

inline FellBundle bundle_from_json(const Json& j, const FiniteGroupoid& base) {
  for (const char* key : {"unit_blocks", "fibre_dims", "mult", "invol"})
    if (!j.contains(key)) throw SpecError(std::string("fell_bundle: missing key ") + key);
  FellBundle fb;
  fb.base = base;
  if (!j["unit_blocks"].is_array() ||
      j["unit_blocks"].size() != static_cast<size_t>(base.n_units))
    throw SpecError("fell_bundle.unit_blocks: one block list per unit required");
  for (const auto& blocks : j["unit_blocks"]) {
    BlockAlgebra alg{int_vector_from<int>(blocks, "fell_bundle.unit_blocks")};
    for (int b : alg.blocks)
      if (b <= 0) throw SpecError("fell_bundle.unit_blocks: positive block sizes required");
    fb.unit_algebras.push_back(std::move(alg));
  }
  fb.fibre_dims = int_vector_from<int>(j["fibre_dims"], "fell_bundle.fibre_dims");
  if (static_cast<int>(fb.fibre_dims.size()) != base.n_arrows)
    throw SpecError("fell_bundle.fibre_dims: one dimension per arrow required");
  for (const auto& entry : j["mult"]) {
    if (!entry.contains("left") || !entry.contains("right"))
      throw SpecError("fell_bundle.mult: entries need left/right arrows");
    int a = entry["left"].get<int>(), b = entry["right"].get<int>();
    if (a < 0 || a >= base.n_arrows || b < 0 || b >= base.n_arrows || !base.composable(a, b))
      throw SpecError("fell_bundle.mult: pair not composable");
    fb.mult[{a, b}] = tensor_from_json(entry, fb.fibre_dims[a], fb.fibre_dims[b],
                                       fb.fibre_dims[base.comp[a][b]], "fell_bundle.mult");
  }
  fb.invol.resize(base.n_arrows);
  std::vector<char> seen(base.n_arrows, 0);
  for (const auto& entry : j["invol"]) {
    if (!entry.contains("arrow")) throw SpecError("fell_bundle.invol: entries need an arrow");
    int h = entry["arrow"].get<int>();
    if (h < 0 || h >= base.n_arrows) throw SpecError("fell_bundle.invol: arrow out of range");
    fb.invol[h] = matrix_from_json(entry, fb.fibre_dims[base.inv[h]], fb.fibre_dims[h],
                                   "fell_bundle.invol");
    seen[h] = 1;
  }
  for (int h = 0; h < base.n_arrows; ++h)
    if (!seen[h]) throw SpecError("fell_bundle.invol: missing arrow " + std::to_string(h));
  return fb;
}

inline DemiEquivalence demi_from_json(const Json& j, const FellBundle& bundle,
                                      const PrincipalAction& action) {
  for (const char* key : {"fibre_dims", "ract", "rip"})
    if (!j.contains(key)) throw SpecError(std::string("demi_equivalence: missing key ") + key);
  DemiEquivalence d;
  d.bundle = bundle;
  d.action = action;
  d.fibre_dims = int_vector_from<int>(j["fibre_dims"], "demi_equivalence.fibre_dims");
  if (static_cast<int>(d.fibre_dims.size()) != action.n_points)
    throw SpecError("demi_equivalence.fibre_dims: one dimension per point required");
  for (const auto& entry : j["ract"]) {
    if (!entry.contains("point") || !entry.contains("arrow"))
      throw SpecError("demi_equivalence.ract: entries need point/arrow");
    int x = entry["point"].get<int>(), h = entry["arrow"].get<int>();
    if (x < 0 || x >= action.n_points || h < 0 || h >= bundle.base.n_arrows ||
        action.act[x][h] < 0)
      throw SpecError("demi_equivalence.ract: pair off the fibred product");
    d.ract_tensors[{x, h}] =
        tensor_from_json(entry, d.fibre_dims[x], bundle.fibre_dims[h],
                         d.fibre_dims[action.act[x][h]], "demi_equivalence.ract");
  }
  for (const auto& entry : j["rip"]) {
    if (!entry.contains("point1") || !entry.contains("point2"))
      throw SpecError("demi_equivalence.rip: entries need point1/point2");
    int x1 = entry["point1"].get<int>(), x2 = entry["point2"].get<int>();
    if (x1 < 0 || x1 >= action.n_points || x2 < x1 || x2 >= action.n_points)
      throw SpecError("demi_equivalence.rip: canonical orientation (point1 <= point2) required");
    int k = -1;
    try {
      k = reoq(bundle.base, action, x1, x2);
    } catch (const StructuralError&) {
      throw SpecError("demi_equivalence.rip: points not in the same orbit");
    }
    d.rip_tensors[{x1, x2}] = tensor_from_json(entry, d.fibre_dims[x1], d.fibre_dims[x2],
                                               bundle.fibre_dims[k], "demi_equivalence.rip");
  }
  return d;
}

inline EquivalenceData equivalence_from_json(const Json& j, const DemiEquivalence& demi) {
  for (const char* key : {"groupoid", "fell_bundle", "leoq", "lact_point", "left_inner",
                          "left_act"})
    if (!j.contains(key)) throw SpecError(std::string("equivalence: missing key ") + key);
  EquivalenceData e;
  e.demi = demi;
  FiniteGroupoid base = groupoid_from_json(j["groupoid"]);
  e.bundle = bundle_from_json(j["fell_bundle"], base);
  const int nx = demi.points();
  if (!j["leoq"].is_array() || j["leoq"].size() != static_cast<size_t>(nx))
    throw SpecError("equivalence.leoq: one row per point required");
  for (const auto& row : j["leoq"]) e.leoq_tab.push_back(int_vector_from<int>(row, "leoq"));
  if (!j["lact_point"].is_array() ||
      j["lact_point"].size() != static_cast<size_t>(base.n_arrows))
    throw SpecError("equivalence.lact_point: one row per arrow required");
  for (const auto& row : j["lact_point"])
    e.lact_point.push_back(int_vector_from<int>(row, "lact_point"));
  for (const auto& entry : j["left_inner"]) {
    int x = entry["point1"].get<int>(), y = entry["point2"].get<int>();
    if (x < 0 || x >= nx || y < 0 || y >= nx || e.leoq_tab[x][y] < 0)
      throw SpecError("equivalence.left_inner: pair off-domain");
    e.left_inner[{x, y}] =
        tensor_from_json(entry, demi.fibre_dims[x], demi.fibre_dims[y],
                         e.bundle.fibre_dims[e.leoq_tab[x][y]], "equivalence.left_inner");
  }
  for (const auto& entry : j["left_act"]) {
    int a = entry["arrow"].get<int>(), y = entry["point"].get<int>();
    if (a < 0 || a >= base.n_arrows || y < 0 || y >= nx || e.lact_point[a][y] < 0)
      throw SpecError("equivalence.left_act: pair off-domain");
    e.left_act[{a, y}] =
        tensor_from_json(entry, e.bundle.fibre_dims[a], demi.fibre_dims[y],
                         demi.fibre_dims[e.lact_point[a][y]], "equivalence.left_act");
  }
  return e;
}

inline BundleSpecFile spec_from_json(const Json& j) {
  if (!j.is_object()) throw SpecError("top level: object expected");
  if (!j.contains("format") || j["format"] != "fellspec-1")
    throw SpecError("unknown or missing format (want fellspec-1)");
  BundleSpecFile f;
  if (j.contains("tolerance")) {
    if (!j["tolerance"].is_number()) throw SpecError("tolerance must be a number");
    f.tolerance = j["tolerance"].get<double>();
  }
  if (j.contains("seed")) f.seed = j["seed"].get<uint64_t>();
  if (j.contains("groupoid")) f.groupoid = groupoid_from_json(j["groupoid"]);
  if (j.contains("action")) {
    if (!f.groupoid) throw SpecError("action section requires a groupoid section");
    f.action = action_from_json(j["action"]);
    for (auto& row : f.action->act)
      if (static_cast<int>(row.size()) != f.groupoid->n_arrows)
        throw SpecError("action.act: one column per arrow required");
  }
  if (j.contains("fell_bundle")) {
    if (!f.groupoid) throw SpecError("fell_bundle section requires a groupoid section");
    f.bundle = bundle_from_json(j["fell_bundle"], *f.groupoid);
  }
  if (j.contains("demi_equivalence")) {
    if (!f.bundle || !f.action)
      throw SpecError("demi_equivalence requires fell_bundle and action sections");
    f.demi = demi_from_json(j["demi_equivalence"], *f.bundle, *f.action);
  }
  if (j.contains("equivalence")) {
    if (!f.demi) throw SpecError("equivalence section requires a demi_equivalence section");
    f.equivalence = equivalence_from_json(j["equivalence"], *f.demi);
  }
  return f;
}

inline BundleSpecFile load_spec_string(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& ex) {
    throw SpecError(std::string("JSON parse error: ") + ex.what());
  }
  return spec_from_json(j);
}

inline BundleSpecFile load_spec_file(const std::string& path) {
  if (path == "-") {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    return load_spec_string(ss.str());
  }
  std::ifstream in(path);
  if (!in) throw SpecError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_spec_string(ss.str());
}

inline void save_spec_file(const std::string& path, const BundleSpecFile& f) {
  std::ofstream out(path);
  if (!out) throw SpecError("cannot write " + path);
  out << spec_to_string(f) << "\n";
}

}  // namespace fell
