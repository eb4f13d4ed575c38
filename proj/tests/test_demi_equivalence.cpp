#include <catch2/catch_amalgamated.hpp>

#include "fell/demi_equivalence.hpp"

using namespace fell;

TEST_CASE("self demi-equivalence is valid") {
  SECTION("Z/2 line bundle") {
    DemiEquivalence m = self_demi_equivalence(make_line_bundle(make_cyclic_group(2)));
    ValidationReport rep = validate_demi(m);
    INFO(to_text(rep));
    CHECK(rep.pass());
  }
  SECTION("random bundle over the pair groupoid") {
    BundleProfile prof;
    prof.groupoid_index = 6;
    prof.blocks = {2};
    DemiEquivalence m = self_demi_equivalence(random_fell_bundle(17, prof));
    ValidationReport rep = validate_demi(m);
    INFO(to_text(rep));
    CHECK(rep.pass());
    ValidationReport der = derived_properties_check(m, 60);
    INFO(to_text(der));
    CHECK(der.pass());
  }
}

TEST_CASE("negated inner product fails DE6 with witness") {
  DemiEquivalence m = self_demi_equivalence(make_line_bundle(make_cyclic_group(2)));
  for (auto& [key, t] : m.rip_tensors)
    for (auto& c : t.a) c = -c;
  ValidationReport rep = validate_demi(m);
  REQUIRE_FALSE(rep.pass());
  const AxiomCheck* de6 = rep.find("DE6");
  REQUIRE(de6 != nullptr);
  CHECK_FALSE(de6->pass);
  REQUIRE_FALSE(de6->witnesses.empty());
}

TEST_CASE("corrupted action tensor fails DE14 with witness") {
  DemiEquivalence m = self_demi_equivalence(make_line_bundle(make_cyclic_group(3)));
  REQUIRE(validate_demi(m).pass());
  m.ract_tensors[{1, 2}].at(0, 0, 0) *= Complex(0.0, 1.3);
  ValidationReport der = derived_properties_check(m, 20);
  REQUIRE_FALSE(der.pass());
  const AxiomCheck* de14 = der.find("DE14");
  REQUIRE(de14 != nullptr);
  CHECK_FALSE(de14->pass);
  REQUIRE_FALSE(de14->witnesses.empty());
}

TEST_CASE("random demi-equivalences are valid and pass the derived suite") {
  for (uint64_t seed = 1; seed <= 8; ++seed) {
    DemiProfile profile;
    profile.bundle.groupoid_index = static_cast<int>(seed % 9);
    profile.bundle.blocks = (seed % 3 == 0) ? std::vector<int>{2}
                            : (seed % 3 == 1) ? std::vector<int>{1, 1}
                                              : std::vector<int>{1};
    profile.max_multiplicity = 2;
    DemiEquivalence m = random_demi_equivalence(seed, profile);
    ValidationReport rep = validate_demi(m);
    INFO("seed " << seed << "\n" << to_text(rep));
    CHECK(rep.pass());
    ValidationReport der = derived_properties_check(m, 40);
    INFO("seed " << seed << " derived\n" << to_text(der));
    CHECK(der.pass());
  }
}

TEST_CASE("DE11 and DE12 exact statements") {
  DemiProfile profile;
  profile.bundle.groupoid_index = 3;  // Z/4
  profile.bundle.blocks = {1, 1};
  DemiEquivalence m = random_demi_equivalence(5, profile);
  REQUIRE(validate_demi(m).pass());
  const FiniteGroupoid& g = m.bundle.base;
  std::mt19937_64 rng(123);
  for (int x1 = 0; x1 < m.points(); ++x1)
    for (int x2 = 0; x2 < m.points(); ++x2) {
      if (!m.same_orbit(x1, x2)) continue;
      int k = m.rip_arrow(x1, x2);
      CHECK(g.rng[k] == m.action.sigma[x1]);
      CHECK(g.src[k] == m.action.sigma[x2]);
      // DE12 exact: is_positive(||m2||^2 <m1,m1> - <m1,m2><m2,m1>)
      Vector v1 = random_vector(m.dim(x1), rng), v2 = random_vector(m.dim(x2), rng);
      Vector ip12 = m.rip(x1, x2, v1, v2);
      Vector prod = m.bundle.multiply(k, g.inv[k], ip12, m.bundle.involute(k, ip12));
      int e = g.unit_embed[m.action.sigma[x1]];
      double n2 = m.norm(x2, v2);
      AlgebraElement diff =
          m.bundle.unit_element(e, m.rip(x1, x1, v1, v1)) * Complex(n2 * n2, 0) -
          m.bundle.unit_element(e, prod);
      CHECK(is_positive(diff, 1e-9));
    }
}

TEST_CASE("module_at produces valid Hilbert modules (DE9 route)") {
  DemiProfile profile;
  profile.bundle.groupoid_index = 6;
  profile.bundle.blocks = {2};
  DemiEquivalence m = random_demi_equivalence(9, profile);
  for (int x = 0; x < m.points(); ++x) {
    HilbertModule mod = m.module_at(x);
    ValidationReport rep = validate_module(mod);
    INFO("point " << x << "\n" << to_text(rep));
    CHECK(rep.pass());
  }
}
