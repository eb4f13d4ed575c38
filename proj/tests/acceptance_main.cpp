// Acceptance suite: one line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <vector>

#include "fell/cli.hpp"
#include "fell/fixtures.hpp"
#include "fell/spec_io.hpp"

using namespace fell;

namespace {

constexpr double kAcceptTol = 1e-8;

struct Outcome {
  bool pass = true;
  double max_residual = 0.0;
  std::string note;

  void fail(const std::string& why) {
    pass = false;
    if (note.empty()) note = why;
  }
  void residual(double r) { max_residual = std::max(max_residual, r); }
  void merge_report(const std::string& what, const ValidationReport& rep) {
    residual(rep.max_residual());
    if (!rep.pass()) fail(what + " failed:\n" + to_text(rep));
  }
};

std::vector<Matrix> inner_z4_action(const BlockAlgebra& alg) {
  std::vector<Matrix> us;
  int p = 0;
  for (int nb : alg.blocks) {
    Matrix u = Matrix::Zero(nb, nb);
    for (int i = 0; i < nb; ++i) {
      double ang = 2.0 * std::numbers::pi_v<double> * ((p++) % 4) / 4.0;
      u(i, i) = Complex(std::cos(ang), std::sin(ang));
    }
    us.push_back(u);
  }
  std::vector<Matrix> alpha(4);
  for (int k = 0; k < 4; ++k) {
    std::vector<Matrix> upow;
    for (auto& u : us) {
      Matrix m = Matrix::Identity(u.rows(), u.cols());
      for (int t = 0; t < k; ++t) m = m * u;
      upow.push_back(m);
    }
    alpha[k] = ad_matrix(alg, upow);
  }
  return alpha;
}

// --------------------------------------------------------------------------

Outcome criterion1_self() {
  Outcome out;
  const std::vector<int> groupoids = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  const std::vector<std::vector<int>> algebras = {{1}, {1, 1}, {1, 1, 1}};
  for (int t = 0; t < 25; ++t) {
    BundleProfile prof;
    prof.groupoid_index = groupoids[t % groupoids.size()];
    prof.blocks = algebras[t % algebras.size()];
    NamedFixture f = fixture_self(random_fell_bundle(1000 + t, prof));
    FixtureReport r = run_fixture(f, kDefaultTol);
    if (!r.pass()) out.fail("self fixture " + std::to_string(t) + ": " + r.error);
    out.residual(r.iso.report.max_residual());
    const AxiomCheck* gen = r.iso.report.find("OMEGA-GEN");
    if (!gen || !gen->pass || gen->max_residual >= kAcceptTol)
      out.fail("Omega does not match b1 b2^* on generators");
  }
  if (out.max_residual >= kAcceptTol) out.fail("residual above 1e-8");
  return out;
}

Outcome criterion2_matrix() {
  Outcome out;
  for (int n = 1; n <= 3; ++n) {
    BundleProfile prof;
    prof.groupoid_index = 1;  // Z/2
    prof.blocks = (n == 2) ? std::vector<int>{1, 1} : std::vector<int>{1};
    FellBundle fb = random_fell_bundle(77 + n, prof);
    NamedFixture f = fixture_matrix(fb, n);
    ImprimitivityBundle ib = build_imprimitivity_bundle(f.demi);
    FixtureReport r = run_fixture(f, kDefaultTol);
    if (!r.pass()) out.fail("matrix fixture n=" + std::to_string(n) + ": " + r.error);
    out.residual(r.iso.report.max_residual());
    // integer dimension law through the base map
    for (int g = 0; g < ib.arrows(); ++g) {
      int h = r.iso.base_map.empty() ? -1 : r.iso.base_map[g];
      if (h < 0 || ib.fibre_dim(g) != n * n * fb.fibre_dims[h])
        out.fail("fibre dimension law n^2 dim B(h) violated");
    }
    const AxiomCheck* gen = r.iso.report.find("OMEGA-GEN");
    if (!gen || !gen->pass) out.fail("Omega does not match (E_ij, b1 b2^*) on generators");
  }
  if (out.max_residual >= kAcceptTol) out.fail("residual above 1e-8");
  return out;
}

Outcome criterion3_example14() {
  Outcome out;
  FiniteGroupoid z4 = make_cyclic_group(4);
  struct Case {
    BlockAlgebra alg;
    bool inner;
  };
  const std::vector<Case> cases = {{BlockAlgebra{{1}}, false},
                                   {BlockAlgebra{{2}}, false},
                                   {BlockAlgebra{{2}}, true}};
  for (const Case& c : cases) {
    std::vector<Matrix> alpha =
        c.inner ? inner_z4_action(c.alg)
                : std::vector<Matrix>(4, Matrix::Identity(c.alg.dim(), c.alg.dim()));
    NamedFixture f = fixture_transformation_group(z4, {0, 2}, c.alg, alpha);
    FixtureReport r = run_fixture(f, kDefaultTol);
    if (!r.pass()) out.fail("example-14 case failed: " + r.error);
    out.residual(r.iso.report.max_residual());
    // base isomorphism matches [x,y^op] -> (x y^{-1}, yH) exactly
    ImprimitivityBundle ib = build_imprimitivity_bundle(f.demi);
    for (int x = 0; x < 4; ++x)
      for (int y = 0; y < 4; ++y) {
        int g = ib.gq.class_of(x, y);
        if (r.iso.base_map.empty() || r.iso.base_map[g] != f.expected.leoq_tab[x][y])
          out.fail("base isomorphism does not match (x y^{-1}, yH)");
      }
  }
  if (out.max_residual >= kAcceptTol) out.fail("residual above 1e-8");
  return out;
}

Outcome criterion4_kumjian() {
  Outcome out;
  const std::vector<FiniteGroupoid> bases = {make_pair_groupoid(2), make_cyclic_group(2),
                                             make_cyclic_group(3)};
  for (const FiniteGroupoid& h : bases) {
    NamedFixture f = fixture_kumjian(make_line_bundle(h));
    FixtureReport r = run_fixture(f, kDefaultTol);
    if (!r.pass()) out.fail("kumjian fixture failed: " + r.error);
    out.residual(r.iso.report.max_residual());
    ImprimitivityBundle ib = build_imprimitivity_bundle(f.demi);
    detail::SectionIndex ix(f.demi.bundle);
    for (int g = 0; g < ib.arrows(); ++g) {
      int hh = r.iso.base_map.empty() ? -1 : r.iso.base_map[g];
      if (hh < 0) {
        out.fail("missing base map");
        continue;
      }
      int want = ix.dim_at[h.rng[hh]] * ix.dim_at[h.src[hh]];
      if (ib.fibre_dim(g) != want) out.fail("dim A(g) != dim V(r) dim V(s)");
    }
  }
  if (out.max_residual >= kAcceptTol) out.fail("residual above 1e-8");
  return out;
}

Outcome criterion5_axiom_suites() {
  Outcome out;
  for (int t = 0; t < 100; ++t) {
    DemiProfile profile;
    const int which = t % 6;
    profile.bundle.groupoid_index = std::vector<int>{0, 1, 2, 3, 6, 8}[which];
    const bool small_base = which <= 2;
    profile.bundle.blocks = (t % 3 == 0 && small_base) ? std::vector<int>{2}
                            : (t % 3 == 1)             ? std::vector<int>{1, 1}
                                                       : std::vector<int>{1};
    profile.max_multiplicity = small_base ? 2 : 1;
    profile.extra_orbit_every = (which <= 1) ? 2 : 0;
    DemiEquivalence d = random_demi_equivalence(9000 + t, profile);

    ValidationReport demi_rep = validate_demi(d);
    out.merge_report("validate_demi[" + std::to_string(t) + "]", demi_rep);
    if (!demi_rep.pass()) continue;
    ValidationReport der = derived_properties_check(d, 40);
    out.merge_report("derived_properties[" + std::to_string(t) + "]", der);

    ImprimitivityBundle ib = build_imprimitivity_bundle(d);
    ConvertedBundle cb = to_fell_bundle(ib);
    out.merge_report("F-suite[" + std::to_string(t) + "]", validate_fell_bundle(cb.fb));
    EquivalenceData eq = equivalence_data(ib, cb);
    out.merge_report("equivalence[" + std::to_string(t) + "]", validate_equivalence(eq));
    out.merge_report("transport[" + std::to_string(t) + "]",
                     check_transport_axioms(*ib.ctx));
  }
  if (out.max_residual >= kAcceptTol) out.fail("residual above 1e-8");
  return out;
}

Outcome criterion6_norm_of_compacts() {
  Outcome out;
  std::mt19937_64 rng(606);
  for (int t = 0; t < 100; ++t) {
    BlockAlgebra alg{{1 + t % 2, 1 + (t % 5 == 0)}};
    std::vector<int> mult{1 + t % 3, 1 + t % 2};
    HilbertModule m = standard_module(alg, mult);
    HilbertModule tw = twist_module(m, random_unitary(m.dim, rng));
    auto [a, b] = norm_of_compacts_check(tw, {random_vector(tw.dim, rng)});
    double rel = std::abs(a - b) / (1.0 + std::abs(b));
    out.residual(rel);
    if (rel >= kAcceptTol) out.fail("norm_of_compacts_check disagreement at k=1");
    // corrected identity: the operator norm equals the Gram matrix norm
    for (int k = 2; k <= 3; ++k) {
      std::vector<Vector> xs;
      for (int i = 0; i < k; ++i) xs.push_back(random_vector(tw.dim, rng));
      auto [op, diag] = norm_of_compacts_check(tw, xs);
      (void)diag;
      const int n = alg.rep_dim();
      Matrix gram(k * n, k * n);
      for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
          gram.block(i * n, j * n, n, n) = tw.ip(xs[i], xs[j]).full();
      double rel2 = std::abs(op - spectral_norm(gram)) / (1.0 + op);
      out.residual(rel2);
      if (rel2 >= kAcceptTol) out.fail("Gram-matrix norm identity violated");
    }
  }
  return out;
}

DemiEquivalence permute_points(const DemiEquivalence& d, const std::vector<int>& perm) {
  DemiEquivalence out;
  out.bundle = d.bundle;
  const int nx = d.points();
  out.action.n_points = nx;
  out.action.sigma.assign(nx, -1);
  out.action.act.assign(nx, std::vector<int>(d.bundle.base.n_arrows, -1));
  out.fibre_dims.assign(nx, 0);
  for (int x = 0; x < nx; ++x) {
    out.action.sigma[perm[x]] = d.action.sigma[x];
    out.fibre_dims[perm[x]] = d.fibre_dims[x];
    for (int h = 0; h < d.bundle.base.n_arrows; ++h)
      if (d.action.act[x][h] >= 0) out.action.act[perm[x]][h] = perm[d.action.act[x][h]];
  }
  for (const auto& [key, t] : d.ract_tensors) out.ract_tensors[{perm[key.first], key.second}] = t;
  for (int x1 = 0; x1 < nx; ++x1)
    for (int x2 = 0; x2 < nx; ++x2) {
      if (perm[x2] < perm[x1]) continue;
      if (!d.same_orbit(x1, x2)) continue;
      // canonical orientation in the new labels
      const int d1 = d.fibre_dims[x1], d2 = d.fibre_dims[x2];
      Tensor3 t(d1, d2, d.bundle.fibre_dims[d.rip_arrow(x1, x2)]);
      for (int i = 0; i < d1; ++i)
        for (int j = 0; j < d2; ++j) {
          Vector v = d.rip(x1, x2, Vector::Unit(d1, i), Vector::Unit(d2, j));
          for (int c = 0; c < t.d3; ++c) t.at(i, j, c) = v[c];
        }
      out.rip_tensors[{perm[x1], perm[x2]}] = t;
    }
  return out;
}

/// Pull an equivalence over relabeled points back to the original labels.
EquivalenceData pull_back(const EquivalenceData& e, const DemiEquivalence& original,
                          const std::vector<int>& perm) {
  EquivalenceData out;
  out.demi = original;
  out.bundle = e.bundle;
  const int nx = original.points();
  out.leoq_tab.assign(nx, std::vector<int>(nx, -1));
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < nx; ++y) out.leoq_tab[x][y] = e.leoq_tab[perm[x]][perm[y]];
  out.lact_point.assign(e.bundle.base.n_arrows, std::vector<int>(nx, -1));
  std::vector<int> inv_perm(nx);
  for (int x = 0; x < nx; ++x) inv_perm[perm[x]] = x;
  for (int a = 0; a < e.bundle.base.n_arrows; ++a)
    for (int y = 0; y < nx; ++y) {
      int img = e.lact_point[a][perm[y]];
      out.lact_point[a][y] = img < 0 ? -1 : inv_perm[img];
    }
  for (const auto& [key, t] : e.left_inner)
    out.left_inner[{inv_perm[key.first], inv_perm[key.second]}] = t;
  for (const auto& [key, t] : e.left_act)
    out.left_act[{key.first, inv_perm[key.second]}] = t;
  return out;
}

Outcome criterion7_representative_independence() {
  Outcome out;
  DemiProfile profile;
  profile.bundle.groupoid_index = 1;  // Z/2
  profile.bundle.blocks = {1, 1};
  profile.max_multiplicity = 2;
  profile.extra_orbit_every = 1;  // two orbits: nontrivial pair structure
  DemiEquivalence d = random_demi_equivalence(707, profile);
  if (!validate_demi(d).pass()) {
    out.fail("base demi invalid");
    return out;
  }
  const int nx = d.points();
  std::mt19937_64 rng(717);
  std::vector<EquivalenceData> eqs;
  for (int t = 0; t < 10; ++t) {
    std::vector<int> perm(nx);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = nx - 1; i > 0; --i) std::swap(perm[i], perm[rng() % (i + 1)]);
    DemiEquivalence pd = permute_points(d, perm);
    ValidationReport rep = validate_demi(pd);
    if (!rep.pass()) {
      out.fail("permuted demi invalid:\n" + to_text(rep));
      return out;
    }
    ImprimitivityBundle ib = build_imprimitivity_bundle(pd);
    ConvertedBundle cb = to_fell_bundle(ib);
    eqs.push_back(pull_back(equivalence_data(ib, cb), d, perm));
  }
  for (size_t i = 0; i < eqs.size(); ++i)
    for (size_t j = i + 1; j < eqs.size(); ++j) {
      BundleIsomorphism iso = uniqueness_iso(eqs[i], eqs[j]);
      out.residual(iso.report.max_residual());
      if (!iso.ok())
        out.fail("permutations " + std::to_string(i) + "," + std::to_string(j) +
                 " not isomorphic:\n" + to_text(iso.report));
    }
  if (out.max_residual >= kAcceptTol) out.fail("residual above 1e-8");
  return out;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome criterion8_determinism() {
  Outcome out;
#ifndef FELL_CLI_PATH
  out.fail("FELL_CLI_PATH not defined");
  return out;
#else
  namespace fs = std::filesystem;
  fs::path tmp = fs::temp_directory_path() / "fell_accept8";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  // input file
  NamedFixture f = fixture_self(make_line_bundle(make_cyclic_group(2)));
  BundleSpecFile spec;
  spec.groupoid = f.demi.bundle.base;
  spec.action = f.demi.action;
  spec.bundle = f.demi.bundle;
  spec.demi = f.demi;
  spec.equivalence = f.expected;
  std::string in = (tmp / "in.json").string();
  save_spec_file(in, spec);

  auto run = [&](const std::string& args, const std::string& log) {
    std::string cmd = std::string(FELL_CLI_PATH) + " " + args + " > " + log + " 2>&1";
    return std::system(cmd.c_str());
  };
  struct Cmd {
    std::string args;
    std::vector<std::string> outputs;
  };
  std::vector<Cmd> cmds = {
      {"validate " + in, {}},
      {"--report machine validate " + in, {}},
      {"--out OUT construct " + in, {"OUT"}},
      {"compare " + in + " " + in, {}},
      {"--seed 5 fixture self --group z3 --blocks 1,1", {}},
  };
  for (size_t c = 0; c < cmds.size(); ++c) {
    // Identical invocations both rounds; snapshot any output file in between.
    std::string args = cmds[c].args;
    std::string outfile = (tmp / ("built_" + std::to_string(c) + ".json")).string();
    size_t pos = args.find("OUT");
    bool has_file = pos != std::string::npos;
    if (has_file) args.replace(pos, 3, outfile);
    std::vector<std::string> logs, file_contents;
    for (int round = 0; round < 2; ++round) {
      std::string log =
          (tmp / ("log_" + std::to_string(c) + "_" + std::to_string(round) + ".txt")).string();
      int rc = run(args, log);
      if (rc != 0) out.fail("command exited nonzero: " + args);
      logs.push_back(log);
      if (has_file) file_contents.push_back(slurp(outfile));
    }
    if (slurp(logs[0]) != slurp(logs[1])) out.fail("stdout differs between runs: " + args);
    if (has_file && file_contents[0] != file_contents[1])
      out.fail("output files differ between runs: " + args);
    if (slurp(logs[0]).empty()) out.fail("no output captured: " + args);
  }
  return out;
#endif
}

}  // namespace

int main() {
  struct Entry {
    const char* label;
    Outcome (*fn)();
  };
  const std::vector<Entry> criteria = {
      {"1 self-equivalence: 25 random bundles, constructed ~ input via Omega = b1 b2^*",
       criterion1_self},
      {"2 matrix amplification: n in {1,2,3}, dims n^2 dim B(h), Omega = (E_ij, b1 b2^*)",
       criterion2_matrix},
      {"3 example 14: Z/4 over {0,2}, A in {C, M2}, semidirect expected, exact base map",
       criterion3_example14},
      {"4 finite stabilization: pair2/Z2/Z3 line bundles, K(V) x| H, exact dims",
       criterion4_kumjian},
      {"5 axiom suites on 100 random demi-equivalences (F, DE, Psi, U, LIP, LA)",
       criterion5_axiom_suites},
      {"6 norm of compacts: 100 random modules, two routes agree",
       criterion6_norm_of_compacts},
      {"7 representative independence: 10 permutations pairwise isomorphic",
       criterion7_representative_independence},
      {"8 determinism: byte-identical CLI outputs", criterion8_determinism},
  };
  bool all = true;
  for (const auto& c : criteria) {
    auto start = std::chrono::steady_clock::now();
    Outcome out = c.fn();
    auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    all = all && out.pass;
    std::printf("%s  criterion %s  (max residual %.3g, %.1fs)\n", out.pass ? "PASS" : "FAIL",
                c.label, out.max_residual, secs);
    if (!out.pass) std::printf("      %s\n", out.note.c_str());
    std::fflush(stdout);
  }
  std::printf(all ? "ACCEPTANCE: all criteria pass\n" : "ACCEPTANCE: FAILURES PRESENT\n");
  return all ? 0 : 1;
}
