#pragma once

// Command implementations behind the fellcli frontend. They write to a
// caller-provided stream and return the process exit code, so tests can run
// them in-process. Exit contract: 0 pass, 1 mathematical failure, 2
// structural/schema failure.

#include <iostream>
#include <string>
#include <vector>

#include "fell/spec_io.hpp"

namespace fell::cli {

struct Options {
  double tol = kDefaultTol;
  bool tol_overridden = false;
  uint64_t seed = 0;
  bool seed_overridden = false;
  std::string report = "text";  // or "machine"
  std::string out_path;
};

inline Json report_to_json(const ValidationReport& r) {
  Json checks = Json::array();
  for (const auto& c : r.checks) {
    Json witnesses = Json::array();
    for (const auto& w : c.witnesses)
      witnesses.push_back(Json{{"indices", w.indices},
                               {"residual", w.residual},
                               {"detail", w.detail}});
    checks.push_back(Json{{"label", c.label},
                          {"pass", c.pass},
                          {"trivially_satisfied", c.trivially_satisfied},
                          {"max_residual", c.max_residual},
                          {"note", c.note},
                          {"witnesses", std::move(witnesses)}});
  }
  return Json{{"structural_errors", r.structural_errors},
              {"checks", std::move(checks)},
              {"pass", r.pass()}};
}

inline void print_report(std::ostream& os, const Options& opt, const std::string& title,
                         const ValidationReport& rep) {
  if (opt.report == "machine") {
    Json j{{"section", title}, {"report", report_to_json(rep)}};
    os << j.dump(1) << "\n";
  } else {
    os << "== " << title << "\n" << to_text(rep);
  }
}

inline int exit_code_for(const std::vector<ValidationReport>& reports) {
  for (const auto& r : reports)
    if (!r.structurally_sound()) return 2;
  for (const auto& r : reports)
    if (!r.pass()) return 1;
  return 0;
}

/// Run every validator applicable to the sections present in the file.
inline int cmd_validate(const std::string& path, const Options& opt, std::ostream& os) {
  BundleSpecFile f;
  try {
    f = load_spec_file(path);
  } catch (const SpecError& ex) {
    os << "schema error: " << ex.what() << "\n";
    return 2;
  }
  const double tol = opt.tol_overridden ? opt.tol : f.tolerance;
  std::vector<ValidationReport> reports;
  if (f.groupoid) {
    reports.push_back(validate_groupoid(*f.groupoid));
    print_report(os, opt, "groupoid", reports.back());
  }
  if (f.action && f.groupoid) {
    reports.push_back(validate_action(*f.groupoid, *f.action));
    print_report(os, opt, "action", reports.back());
  }
  if (f.bundle) {
    reports.push_back(validate_fell_bundle(*f.bundle, tol));
    print_report(os, opt, "fell_bundle", reports.back());
  }
  if (f.demi) {
    reports.push_back(validate_demi(*f.demi, tol));
    print_report(os, opt, "demi_equivalence", reports.back());
    if (reports.back().pass()) {
      reports.push_back(derived_properties_check(*f.demi, 100, tol));
      print_report(os, opt, "derived_properties", reports.back());
    }
  }
  if (f.equivalence) {
    reports.push_back(validate_fell_bundle(f.equivalence->bundle, tol));
    print_report(os, opt, "equivalence.fell_bundle", reports.back());
    reports.push_back(validate_equivalence(*f.equivalence, tol));
    print_report(os, opt, "equivalence", reports.back());
  }
  if (reports.empty()) {
    os << "schema error: no validatable sections\n";
    return 2;
  }
  return exit_code_for(reports);
}

/// Build the imprimitivity bundle of the file's demi-equivalence and write a
/// re-loadable spec file carrying the constructed equivalence.
inline int cmd_construct(const std::string& path, const Options& opt, std::ostream& os) {
  BundleSpecFile f;
  try {
    f = load_spec_file(path);
  } catch (const SpecError& ex) {
    os << "schema error: " << ex.what() << "\n";
    return 2;
  }
  if (!f.demi) {
    os << "schema error: construct needs a demi_equivalence section\n";
    return 2;
  }
  const double tol = opt.tol_overridden ? opt.tol : f.tolerance;
  ValidationReport demi_rep = validate_demi(*f.demi, tol);
  print_report(os, opt, "demi_equivalence", demi_rep);
  if (!demi_rep.pass()) return demi_rep.structurally_sound() ? 1 : 2;

  ImprimitivityBundle ib = build_imprimitivity_bundle(*f.demi, tol);
  ConvertedBundle cb = to_fell_bundle(ib, tol);
  ValidationReport bundle_rep = validate_fell_bundle(cb.fb, tol);
  print_report(os, opt, "constructed_bundle", bundle_rep);
  EquivalenceData eq = equivalence_data(ib, cb, tol);
  ValidationReport eq_rep = validate_equivalence(eq, tol);
  print_report(os, opt, "constructed_equivalence", eq_rep);

  if (!opt.out_path.empty()) {
    BundleSpecFile out = f;
    out.equivalence = eq;
    save_spec_file(opt.out_path, out);
    os << "wrote " << opt.out_path << "\n";
  }
  return exit_code_for({demi_rep, bundle_rep, eq_rep});
}

/// Compare two equivalences over the same bundle and module data.
inline int cmd_compare(const std::string& path_a, const std::string& path_b,
                       const Options& opt, std::ostream& os) {
  BundleSpecFile fa, fb;
  try {
    fa = load_spec_file(path_a);
    fb = load_spec_file(path_b);
  } catch (const SpecError& ex) {
    os << "schema error: " << ex.what() << "\n";
    return 2;
  }
  if (!fa.equivalence || !fb.equivalence) {
    os << "schema error: both files need an equivalence section\n";
    return 2;
  }
  const double tol = opt.tol_overridden ? opt.tol : std::min(fa.tolerance, fb.tolerance);
  BundleIsomorphism iso = uniqueness_iso(*fa.equivalence, *fb.equivalence, tol);
  if (opt.report == "machine") {
    Json j;
    j["base_map"] = iso.base_map;
    j["report"] = report_to_json(iso.report);
    j["max_residual"] = iso.report.max_residual();
    j["pass"] = iso.ok();
    os << j.dump(1) << "\n";
  } else {
    os << "base map:";
    for (size_t a = 0; a < iso.base_map.size(); ++a)
      os << " " << a << "->" << iso.base_map[a];
    os << "\n";
    print_report(os, opt, "uniqueness_isomorphism", iso.report);
    os << "max residual " << format_double(iso.report.max_residual()) << "\n";
  }
  if (!iso.report.structurally_sound()) return 2;
  return iso.ok() ? 0 : 1;
}

// ---------------------------------------------------------------------------
// Fixtures
// ---------------------------------------------------------------------------

struct FixtureOptions {
  std::string group = "z2";
  std::vector<int> blocks = {1};
  int n = 2;
  std::vector<int> subgroup;
  std::string action = "trivial";  // or "inner"
  bool twist = true;
};

inline int catalogue_index(const std::string& name) {
  const std::vector<std::string> names = {"point", "z2",    "z3",      "z4",       "z5",
                                          "z6",    "pair2", "z2+z2",   "z2+point", "pair2+point"};
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  throw SpecError("unknown groupoid name: " + name);
}

inline NamedFixture make_named_fixture(const std::string& name, const FixtureOptions& fo,
                                       uint64_t seed) {
  BundleProfile prof;
  prof.groupoid_index = catalogue_index(fo.group);
  prof.blocks = fo.blocks;
  prof.twist_fibres = fo.twist;
  if (name == "self") return fixture_self(random_fell_bundle(seed, prof));
  if (name == "matrix") return fixture_matrix(random_fell_bundle(seed, prof), fo.n);
  if (name == "kumjian") return fixture_kumjian(random_fell_bundle(seed, prof));
  if (name == "group") {
    FiniteGroupoid g = bundle_groupoid_catalogue()[catalogue_index(fo.group)];
    if (g.n_units != 1) throw SpecError("fixture group: --group must name a group");
    BlockAlgebra alg{fo.blocks};
    std::vector<int> sub = fo.subgroup;
    if (sub.empty()) sub.push_back(g.unit_embed[0]);
    std::vector<Matrix> alpha;
    if (fo.action == "trivial") {
      alpha.assign(g.n_arrows, Matrix::Identity(alg.dim(), alg.dim()));
    } else if (fo.action == "inner") {
      const int n = g.n_arrows;
      std::vector<Matrix> us;
      int p = 0;
      for (int nb : alg.blocks) {
        Matrix u = Matrix::Zero(nb, nb);
        for (int i = 0; i < nb; ++i) {
          double ang = 2.0 * std::numbers::pi_v<double> * ((p++) % n) / n;
          u(i, i) = Complex(std::cos(ang), std::sin(ang));
        }
        us.push_back(u);
      }
      alpha.resize(n);
      for (int k = 0; k < n; ++k) {
        std::vector<Matrix> upow;
        for (auto& u : us) {
          Matrix m = Matrix::Identity(u.rows(), u.cols());
          for (int t = 0; t < k; ++t) m = m * u;
          upow.push_back(m);
        }
        alpha[k] = ad_matrix(alg, upow);
      }
    } else {
      throw SpecError("unknown action kind: " + fo.action);
    }
    return fixture_transformation_group(g, sub, alg, alpha);
  }
  throw SpecError("unknown fixture name: " + name);
}

inline int cmd_fixture(const std::string& name, const FixtureOptions& fo, const Options& opt,
                       std::ostream& os) {
  NamedFixture f;
  try {
    f = make_named_fixture(name, fo, opt.seed);
  } catch (const SpecError& ex) {
    os << "error: " << ex.what() << "\n";
    return 2;
  } catch (const InvalidInput& ex) {
    os << "error: " << ex.what() << "\n" << to_text(ex.report);
    return 1;
  }
  const double tol = opt.tol;
  FixtureReport r = run_fixture(f, tol);
  if (opt.report == "machine") {
    Json j;
    j["fixture"] = r.name;
    j["built"] = r.built;
    j["error"] = r.error;
    j["module_fibre_dims"] = f.demi.fibre_dims;
    j["expected_fibre_dims"] = f.expected.bundle.fibre_dims;
    j["demi"] = report_to_json(r.demi_report);
    j["expected_bundle"] = report_to_json(r.expected_bundle_report);
    j["constructed_bundle"] = report_to_json(r.bundle_report);
    j["equivalence"] = report_to_json(r.equivalence_report);
    j["isomorphism"] = report_to_json(r.iso.report);
    j["max_residual"] = r.max_residual;
    j["pass"] = r.pass();
    os << j.dump(1) << "\n";
  } else {
    os << "fixture " << r.name << (r.pass() ? ": pass" : ": fail") << "\n";
    if (!r.error.empty()) os << "error: " << r.error << "\n";
    os << "module fibre dims:";
    for (int d : f.demi.fibre_dims) os << " " << d;
    os << "\nexpected bundle fibre dims:";
    for (int d : f.expected.bundle.fibre_dims) os << " " << d;
    os << "\n";
    print_report(os, opt, "demi_equivalence", r.demi_report);
    print_report(os, opt, "expected_bundle", r.expected_bundle_report);
    print_report(os, opt, "constructed_bundle", r.bundle_report);
    print_report(os, opt, "constructed_equivalence", r.equivalence_report);
    print_report(os, opt, "uniqueness_isomorphism", r.iso.report);
    os << "max residual " << format_double(r.max_residual) << "\n";
  }
  if (!opt.out_path.empty()) {
    BundleSpecFile out;
    out.tolerance = tol;
    out.seed = opt.seed;
    out.groupoid = f.demi.bundle.base;
    out.action = f.demi.action;
    out.bundle = f.demi.bundle;
    out.demi = f.demi;
    out.equivalence = f.expected;
    save_spec_file(opt.out_path, out);
    os << "wrote " << opt.out_path << "\n";
  }
  return r.pass() ? 0 : 1;
}

}  // namespace fell::cli
