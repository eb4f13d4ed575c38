#pragma once

// Demi-equivalences: a Fell bundle module over a principal action, given by
// per-point fibres, right-action tensors, and bundle-valued inner products.
// Inner products are stored for one orientation per unordered pair; the other
// orientation is derived through the bundle involution.

#include <map>
#include <utility>
#include <vector>

#include "fell/fell_bundle.hpp"
#include "fell/groupoid.hpp"
#include "fell/hilbert_module.hpp"

namespace fell {

struct DemiEquivalence {
  FellBundle bundle;       // over H
  PrincipalAction action;  // (X, sigma)
  std::vector<int> fibre_dims;
  std::map<std::pair<int, int>, Tensor3> ract_tensors;  // (x,h), sigma(x)=rng(h)
  std::map<std::pair<int, int>, Tensor3> rip_tensors;   // (x1,x2), x1 <= x2, same orbit

  int points() const { return action.n_points; }
  int dim(int x) const { return fibre_dims[x]; }

  /// Arrow of H carrying <M(x1), M(x2)>.
  int rip_arrow(int x1, int x2) const { return reoq(bundle.base, action, x1, x2); }

  Vector ract(int x, int h, const Vector& m, const Vector& b) const {
    auto it = ract_tensors.find({x, h});
    if (it == ract_tensors.end()) throw StructuralError("DemiEquivalence: ract undefined");
    return it->second.apply(m, b);
  }

  /// <m1, m2> in B(reoq(x1,x2)); conjugate-linear in m1.
  Vector rip(int x1, int x2, const Vector& m1, const Vector& m2) const {
    auto it = rip_tensors.find({x1, x2});
    if (it != rip_tensors.end()) return it->second.apply_sesqui(m1, m2);
    auto swapped = rip_tensors.find({x2, x1});
    if (swapped == rip_tensors.end()) throw StructuralError("DemiEquivalence: rip undefined");
    // <m1,m2> = <m2,m1>^*
    return bundle.involute(rip_arrow(x2, x1), swapped->second.apply_sesqui(m2, m1));
  }

  /// M(x) as a standalone Hilbert module over B(sigma(x)).
  HilbertModule module_at(int x) const {
    const int u = action.sigma[x];
    const BlockAlgebra& alg = bundle.unit_algebras[u];
    HilbertModule m;
    m.algebra = &alg;
    m.dim = fibre_dims[x];
    int e = bundle.base.unit_embed[u];
    auto it = ract_tensors.find({x, e});
    if (it == ract_tensors.end()) throw StructuralError("module_at: missing unit action");
    m.action = it->second;
    m.inner = Tensor3(m.dim, m.dim, alg.dim());
    for (int i = 0; i < m.dim; ++i)
      for (int j = 0; j < m.dim; ++j) {
        Vector v = rip(x, x, Vector::Unit(m.dim, i), Vector::Unit(m.dim, j));
        for (int k = 0; k < alg.dim(); ++k) m.inner.at(i, j, k) = v[k];
      }
    return m;
  }

  double norm(int x, const Vector& m) const {
    Vector q = rip(x, x, m, m);
    return std::sqrt(operator_norm(
        bundle.unit_element(bundle.base.unit_embed[action.sigma[x]], q)));
  }

  bool same_orbit(int x1, int x2) const {
    for (int h = 0; h < bundle.base.n_arrows; ++h)
      if (action.movable(x1, h, bundle.base) && action.act[x1][h] == x2) return true;
    return false;
  }
};

// ---------------------------------------------------------------------------
// DE1..DE8 validation
// ---------------------------------------------------------------------------

inline ValidationReport validate_demi(const DemiEquivalence& m, double tol = kDefaultTol) {
  ValidationReport rep;
  const FiniteGroupoid& g = m.bundle.base;
  {
    ValidationReport b = validate_fell_bundle(m.bundle, tol);
    if (!b.pass()) {
      rep.structural("underlying Fell bundle invalid");
      rep.merge(b);
      return rep;
    }
    ValidationReport a = validate_action(g, m.action);
    if (!a.pass()) {
      rep.structural("underlying principal action invalid");
      rep.merge(a);
      return rep;
    }
  }
  const int nx = m.points();
  if (static_cast<int>(m.fibre_dims.size()) != nx)
    rep.structural("one fibre dimension per point required");
  if (!rep.structurally_sound()) return rep;
  for (int x = 0; x < nx; ++x)
    if (m.fibre_dims[x] <= 0) rep.structural("empty module fibre at point " + std::to_string(x));

  // DE1: the action tensor exists exactly on the fibred product and lands in
  // the right fibre (covering of the point action).
  for (int x = 0; x < nx; ++x)
    for (int h = 0; h < g.n_arrows; ++h) {
      auto it = m.ract_tensors.find({x, h});
      if (m.action.movable(x, h, g)) {
        if (it == m.ract_tensors.end())
          rep.record_fail("DE1", {x, h}, "missing ract tensor on domain");
        else if (it->second.d1 != m.fibre_dims[x] || it->second.d2 != m.bundle.fibre_dims[h] ||
                 it->second.d3 != m.fibre_dims[m.action.act[x][h]])
          rep.record_fail("DE1", {x, h}, "ract tensor shape mismatch");
      } else if (it != m.ract_tensors.end()) {
        rep.record_fail("DE1", {x, h}, "ract tensor off the fibred product");
      }
    }
  rep.check("DE1");
  if (!rep.find("DE1")->pass) return rep;

  // DE2: inner products cover reoq: stored for one orientation per unordered
  // same-orbit pair, with values in B(reoq(x1,x2)).
  for (int x1 = 0; x1 < nx; ++x1)
    for (int x2 = 0; x2 < nx; ++x2) {
      auto it = m.rip_tensors.find({x1, x2});
      bool canonical = m.same_orbit(x1, x2) && x1 <= x2;
      if (canonical) {
        if (it == m.rip_tensors.end()) {
          rep.record_fail("DE2", {x1, x2}, "missing rip tensor for orbit pair");
        } else {
          int h = m.rip_arrow(x1, x2);
          if (it->second.d1 != m.fibre_dims[x1] || it->second.d2 != m.fibre_dims[x2] ||
              it->second.d3 != m.bundle.fibre_dims[h])
            rep.record_fail("DE2", {x1, x2}, "rip tensor shape mismatch");
        }
      } else if (it != m.rip_tensors.end()) {
        rep.record_fail("DE2", {x1, x2},
                        x1 > x2 ? "rip stored for non-canonical orientation"
                                : "rip tensor on points in different orbits");
      }
    }
  rep.check("DE2");
  if (!rep.find("DE2")->pass) return rep;

  // DE3: fibrewise sesquilinear by the tensor representation; continuity is
  // automatic in the finite discrete model.
  rep.mark_trivial("DE3", "sesquilinear by tensor representation; continuity automatic (finite discrete)");

  // DE4: <m1, m2 . b> = <m1, m2> b on all basis triples.
  for (int x1 = 0; x1 < nx; ++x1)
    for (int x2 = 0; x2 < nx; ++x2) {
      if (!m.same_orbit(x1, x2)) continue;
      int k = m.rip_arrow(x1, x2);
      for (int h = 0; h < g.n_arrows; ++h) {
        if (!m.action.movable(x2, h, g)) continue;
        int x2h = m.action.act[x2][h];
        if (g.comp[k][h] != m.rip_arrow(x1, x2h)) {
          rep.record_fail("DE4", {x1, x2, h}, "arrow bookkeeping mismatch");
          continue;
        }
        for (int i = 0; i < m.fibre_dims[x1]; ++i)
          for (int j = 0; j < m.fibre_dims[x2]; ++j)
            for (int b = 0; b < m.bundle.fibre_dims[h]; ++b) {
              Vector ei = Vector::Unit(m.fibre_dims[x1], i);
              Vector ej = Vector::Unit(m.fibre_dims[x2], j);
              Vector eb = Vector::Unit(m.bundle.fibre_dims[h], b);
              Vector lhs = m.rip(x1, x2h, ei, m.ract(x2, h, ej, eb));
              Vector rhs = m.bundle.multiply(k, h, m.rip(x1, x2, ei, ej), eb);
              rep.record("DE4", (lhs - rhs).norm(), tol, {x1, x2, h, i, j, b});
            }
      }
    }
  rep.check("DE4");

  // DE5: adjoint symmetry. Off-diagonal orientations hold by construction;
  // the diagonal tensors must be internally consistent.
  for (int x = 0; x < nx; ++x) {
    int e = m.rip_arrow(x, x);
    for (int i = 0; i < m.fibre_dims[x]; ++i)
      for (int j = 0; j < m.fibre_dims[x]; ++j) {
        Vector ei = Vector::Unit(m.fibre_dims[x], i);
        Vector ej = Vector::Unit(m.fibre_dims[x], j);
        Vector lhs = m.bundle.involute(e, m.rip(x, x, ei, ej));
        Vector rhs = m.rip(x, x, ej, ei);
        rep.record("DE5", (lhs - rhs).norm(), tol, {x, i, j});
      }
  }
  AxiomCheck& de5 = rep.check("DE5");
  if (de5.note.empty()) de5.note = "off-diagonal orientation derived from the stored one";

  // DE6: positivity and definiteness per point, via the localized Gram.
  for (int x = 0; x < nx; ++x) {
    const BlockAlgebra& alg = m.bundle.unit_algebras[m.action.sigma[x]];
    const int d = m.fibre_dims[x], n = alg.rep_dim();
    int e = m.bundle.base.unit_embed[m.action.sigma[x]];
    Matrix gram(d * n, d * n);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        Vector v = m.rip(x, x, Vector::Unit(d, i), Vector::Unit(d, j));
        gram.block(i * n, j * n, n, n) = m.bundle.unit_element(e, v).full();
      }
    double scale = std::max(1.0, spectral_norm(gram));
    rep.record("DE6", frob(gram - gram.adjoint()) / scale, tol, {x}, "<.,.> not Hermitian");
    Eigen::VectorXd ev = hermitian_eigenvalues(gram);
    rep.record("DE6", std::max(0.0, -ev.minCoeff() / scale), tol, {x}, "<m,m> not positive");
    Matrix tr(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) tr(i, j) = gram.block(i * n, j * n, n, n).trace();
    Eigen::VectorXd tev = hermitian_eigenvalues(tr);
    if (tev.minCoeff() <= tol * std::max(1.0, tev.cwiseAbs().maxCoeff()))
      rep.record_fail("DE6", {x}, "<m,m> = 0 for some m != 0");
  }
  rep.check("DE6");

  // DE7: the module norm is defined as ||<m,m>||^{1/2}; nothing independent
  // to check in the finite model.
  rep.mark_trivial("DE7", "norm is definitional in the finite model");

  // DE8: fibrewise fullness, span{<M(x),M(x)>} = B(sigma(x)).
  for (int x = 0; x < nx; ++x) {
    const int d = m.fibre_dims[x];
    const int ad = m.bundle.unit_algebras[m.action.sigma[x]].dim();
    Matrix span(ad, d * d);
    int c = 0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        span.col(c++) = m.rip(x, x, Vector::Unit(d, i), Vector::Unit(d, j));
    if (numerical_rank(span, tol) != ad)
      rep.record_fail("DE8", {x}, "inner products do not span the unit fibre");
  }
  rep.check("DE8");
  return rep;
}

// ---------------------------------------------------------------------------
// DE9..DE16 derived-property suite (regression on the implementation)
// ---------------------------------------------------------------------------

inline ValidationReport derived_properties_check(const DemiEquivalence& m, int trials = 100,
                                                 double tol = kDefaultTol) {
  ValidationReport rep;
  const FiniteGroupoid& g = m.bundle.base;
  const int nx = m.points();
  std::mt19937_64 rng(0xde9de16ULL);

  // DE9: each M(x) is a full right Hilbert module.
  for (int x = 0; x < nx; ++x) {
    HilbertModule mod = m.module_at(x);
    ValidationReport r = validate_module(mod, tol);
    rep.record("DE9", r.max_residual(), tol, {x});
    if (!r.pass()) rep.record_fail("DE9", {x}, "module axioms fail at point");
  }
  rep.check("DE9");

  // DE10: <m1 . b^*, m2> = b <m1, m2>.
  for (int x1 = 0; x1 < nx; ++x1)
    for (int x2 = 0; x2 < nx; ++x2) {
      if (!m.same_orbit(x1, x2)) continue;
      int k = m.rip_arrow(x1, x2);
      for (int h = 0; h < g.n_arrows; ++h) {
        // b in B(h), b^* in B(h^{-1}); m1 . b^* needs sigma(x1) = s(h).
        if (g.src[h] != m.action.sigma[x1]) continue;
        int hinv = g.inv[h];
        int x1b = m.action.act[x1][hinv];
        int lhs_arrow = m.rip_arrow(x1b, x2);
        if (g.comp[h][k] != lhs_arrow) {
          rep.record_fail("DE10", {x1, x2, h}, "arrow bookkeeping mismatch");
          continue;
        }
        for (int i = 0; i < m.fibre_dims[x1]; ++i)
          for (int j = 0; j < m.fibre_dims[x2]; ++j)
            for (int b = 0; b < m.bundle.fibre_dims[h]; ++b) {
              Vector ei = Vector::Unit(m.fibre_dims[x1], i);
              Vector ej = Vector::Unit(m.fibre_dims[x2], j);
              Vector eb = Vector::Unit(m.bundle.fibre_dims[h], b);
              Vector lhs =
                  m.rip(x1b, x2, m.ract(x1, hinv, ei, m.bundle.involute(h, eb)), ej);
              Vector rhs = m.bundle.multiply(h, k, eb, m.rip(x1, x2, ei, ej));
              rep.record("DE10", (lhs - rhs).norm(), tol, {x1, x2, h, i, j, b});
            }
      }
    }
  rep.check("DE10");

  // DE11: source/range of inner products match the anchors.
  for (int x1 = 0; x1 < nx; ++x1)
    for (int x2 = 0; x2 < nx; ++x2) {
      if (!m.same_orbit(x1, x2)) continue;
      int k = m.rip_arrow(x1, x2);
      if (g.rng[k] != m.action.sigma[x1] || g.src[k] != m.action.sigma[x2])
        rep.record_fail("DE11", {x1, x2}, "reoq arrow has wrong endpoints");
    }
  rep.check("DE11");

  // DE12: Cauchy-Schwarz on random draws.
  {
    std::uniform_int_distribution<int> px(0, nx - 1);
    int done = 0, guard = 0;
    while (done < trials && guard < 50 * trials) {
      ++guard;
      int x1 = px(rng), x2 = px(rng);
      if (!m.same_orbit(x1, x2)) continue;
      ++done;
      Vector m1 = random_vector(m.fibre_dims[x1], rng);
      Vector m2 = random_vector(m.fibre_dims[x2], rng);
      int k = m.rip_arrow(x1, x2);
      Vector prod = m.bundle.multiply(k, g.inv[k], m.rip(x1, x2, m1, m2),
                                      m.bundle.involute(k, m.rip(x1, x2, m1, m2)));
      double n2 = m.norm(x2, m2);
      int e = g.unit_embed[m.action.sigma[x1]];
      AlgebraElement lhs = m.bundle.unit_element(e, m.rip(x1, x1, m1, m1)) * Complex(n2 * n2, 0);
      AlgebraElement rhs = m.bundle.unit_element(e, prod);
      if (!is_positive(lhs - rhs, tol))
        rep.record_fail("DE12", {x1, x2}, "Cauchy-Schwarz violated");
    }
  }
  rep.check("DE12");

  // DE13: fibrewise bilinearity of the action (spot check on random combos;
  // exact by the tensor representation).
  for (int t = 0; t < std::min(trials, 25); ++t) {
    std::uniform_int_distribution<int> px(0, nx - 1);
    int x = px(rng);
    std::vector<int> hs;
    for (int h = 0; h < g.n_arrows; ++h)
      if (m.action.movable(x, h, g)) hs.push_back(h);
    int h = hs[t % hs.size()];
    Vector m1 = random_vector(m.fibre_dims[x], rng), m2 = random_vector(m.fibre_dims[x], rng);
    Vector b1 = random_vector(m.bundle.fibre_dims[h], rng),
           b2 = random_vector(m.bundle.fibre_dims[h], rng);
    Complex lam(0.7, -0.3);
    double r1 = (m.ract(x, h, m1 + lam * m2, b1) -
                 (m.ract(x, h, m1, b1) + lam * m.ract(x, h, m2, b1))).norm();
    double r2 = (m.ract(x, h, m1, b1 + lam * b2) -
                 (m.ract(x, h, m1, b1) + lam * m.ract(x, h, m1, b2))).norm();
    rep.record("DE13", std::max(r1, r2), tol, {x, h});
  }
  rep.check("DE13");

  // DE14: (m . b) . b' = m . (b b') on all basis triples.
  for (int x = 0; x < nx; ++x)
    for (int h = 0; h < g.n_arrows; ++h) {
      if (!m.action.movable(x, h, g)) continue;
      int xh = m.action.act[x][h];
      for (int hp = 0; hp < g.n_arrows; ++hp) {
        if (!g.composable(h, hp)) continue;
        int hhp = g.comp[h][hp];
        for (int i = 0; i < m.fibre_dims[x]; ++i)
          for (int b = 0; b < m.bundle.fibre_dims[h]; ++b)
            for (int c = 0; c < m.bundle.fibre_dims[hp]; ++c) {
              Vector ei = Vector::Unit(m.fibre_dims[x], i);
              Vector eb = Vector::Unit(m.bundle.fibre_dims[h], b);
              Vector ec = Vector::Unit(m.bundle.fibre_dims[hp], c);
              Vector lhs = m.ract(xh, hp, m.ract(x, h, ei, eb), ec);
              Vector rhs = m.ract(x, hhp, ei, m.bundle.multiply(h, hp, eb, ec));
              rep.record("DE14", (lhs - rhs).norm(), tol, {x, h, hp, i, b, c});
            }
      }
    }
  rep.check("DE14");

  // DE15: ||m . b|| <= ||m|| ||b|| on random draws.
  for (int t = 0; t < trials; ++t) {
    std::uniform_int_distribution<int> px(0, nx - 1);
    int x = px(rng);
    std::vector<int> hs;
    for (int h = 0; h < g.n_arrows; ++h)
      if (m.action.movable(x, h, g)) hs.push_back(h);
    int h = hs[t % hs.size()];
    Vector mm = random_vector(m.fibre_dims[x], rng);
    Vector bb = random_vector(m.bundle.fibre_dims[h], rng);
    double lhs = m.norm(m.action.act[x][h], m.ract(x, h, mm, bb));
    double bound = m.norm(x, mm) * m.bundle.norm(h, bb);
    rep.record("DE15", std::max(0.0, lhs - bound) / (1.0 + bound), tol, {x, h});
  }
  rep.check("DE15");

  rep.mark_trivial("DE16", "continuity automatic (finite discrete)");

  // DSAT: M(x) . B(h) spans M(x.h) (used by the transport maps).
  for (int x = 0; x < nx; ++x)
    for (int h = 0; h < g.n_arrows; ++h) {
      if (!m.action.movable(x, h, g)) continue;
      int xh = m.action.act[x][h];
      Matrix span(m.fibre_dims[xh], m.fibre_dims[x] * m.bundle.fibre_dims[h]);
      int c = 0;
      for (int i = 0; i < m.fibre_dims[x]; ++i)
        for (int b = 0; b < m.bundle.fibre_dims[h]; ++b)
          span.col(c++) = m.ract(x, h, Vector::Unit(m.fibre_dims[x], i),
                                 Vector::Unit(m.bundle.fibre_dims[h], b));
      if (numerical_rank(span, tol) != m.fibre_dims[xh])
        rep.record_fail("DSAT", {x, h}, "action does not span the target fibre");
    }
  rep.check("DSAT");
  return rep;
}

/// The bundle as a demi-equivalence over itself: X = H by right translation,
/// M(x) = B(x), m . b by bundle multiplication, <b1, b2> = b1^* b2.
inline DemiEquivalence self_demi_equivalence(const FellBundle& fb) {
  DemiEquivalence out;
  out.bundle = fb;
  const FiniteGroupoid& g = out.bundle.base;
  out.action = translation_action(g);
  out.fibre_dims = out.bundle.fibre_dims;
  for (int x = 0; x < g.n_arrows; ++x)
    for (int h = 0; h < g.n_arrows; ++h)
      if (g.composable(x, h)) out.ract_tensors[{x, h}] = out.bundle.mult_tensor(x, h);
  for (int x1 = 0; x1 < g.n_arrows; ++x1)
    for (int x2 = x1; x2 < g.n_arrows; ++x2) {
      if (g.rng[x1] != g.rng[x2]) continue;  // orbits of translation = fibres of rng
      const int d1 = out.bundle.fibre_dims[x1], d2 = out.bundle.fibre_dims[x2];
      const int k = g.comp[g.inv[x1]][x2];
      Tensor3 t(d1, d2, out.bundle.fibre_dims[k]);
      for (int i = 0; i < d1; ++i) {
        Vector star_i = out.bundle.invol[x1].col(i);
        for (int j = 0; j < d2; ++j) {
          Vector v = out.bundle.multiply(g.inv[x1], x2, star_i, Vector::Unit(d2, j));
          for (int c = 0; c < t.d3; ++c) t.at(i, j, c) = v[c];
        }
      }
      out.rip_tensors[{x1, x2}] = t;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Generator
// ---------------------------------------------------------------------------

struct DemiProfile {
  BundleProfile bundle;
  int extra_orbit_every = 2;   // add a second orbit copy when seed hits this
  int max_multiplicity = 2;
  bool twist_fibres = true;
};

/// Random valid demi-equivalence: a random generated bundle, a free
/// orbit-sum action, and one standard module per orbit carried along the
/// orbit by the bundle's homomorphism frame. On the orbit of anchor a with
/// x = a . g_x, the fibre M(x) is V in twisted coordinates with
///    m .(x,h) b  =  v ._V  beta_{g_x}(b_canonical)
///    <m1, m2>    =  beta_{g_1^{-1}}( <v1, v2>_V )  in  B(g_1^{-1} g_2).
inline DemiEquivalence random_demi_equivalence(uint64_t seed, const DemiProfile& profile) {
  DemiEquivalence out;
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + 12345);

  GeneratedBundle gen = random_fell_bundle_with_frame(seed, profile.bundle);
  out.bundle = gen.fb;
  const FiniteGroupoid& g = out.bundle.base;

  // Base units: cover every connected component; occasionally add a copy.
  std::vector<int> component(g.n_units, -1);
  int n_comp = 0;
  for (int u = 0; u < g.n_units; ++u) {
    if (component[u] >= 0) continue;
    component[u] = n_comp;
    std::vector<int> stack{u};
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int h = 0; h < g.n_arrows; ++h) {
        if (g.src[h] == v && component[g.rng[h]] < 0) {
          component[g.rng[h]] = n_comp;
          stack.push_back(g.rng[h]);
        }
        if (g.rng[h] == v && component[g.src[h]] < 0) {
          component[g.src[h]] = n_comp;
          stack.push_back(g.src[h]);
        }
      }
    }
    ++n_comp;
  }
  std::vector<int> base_units;
  for (int c = 0; c < n_comp; ++c) {
    std::vector<int> units;
    for (int u = 0; u < g.n_units; ++u)
      if (component[u] == c) units.push_back(u);
    std::uniform_int_distribution<int> pick(0, static_cast<int>(units.size()) - 1);
    base_units.push_back(units[pick(rng)]);
    if (profile.extra_orbit_every > 0 &&
        static_cast<int>(seed % profile.extra_orbit_every) == 0)
      base_units.push_back(units[pick(rng)]);
  }
  out.action = orbit_sum_action(g, base_units);
  const int nx = out.action.n_points;

  // Orbit anchors (least point of each orbit).
  std::vector<int> anchor_of(nx, -1);
  for (int x = 0; x < nx; ++x) {
    if (anchor_of[x] >= 0) continue;
    std::vector<int> stack{x};
    anchor_of[x] = x;
    while (!stack.empty()) {
      int y = stack.back();
      stack.pop_back();
      for (int h = 0; h < g.n_arrows; ++h)
        if (out.action.movable(y, h, g)) {
          int z = out.action.act[y][h];
          if (anchor_of[z] < 0) {
            anchor_of[z] = x;
            stack.push_back(z);
          }
        }
    }
  }

  // One standard module per orbit; per-point unitary coordinate twists.
  std::map<int, HilbertModule> base_module;
  std::vector<Matrix> w(nx), w_inv(nx);
  for (int x = 0; x < nx; ++x) {
    int a = anchor_of[x];
    if (!base_module.count(a)) {
      const BlockAlgebra& alg = out.bundle.unit_algebras[out.action.sigma[a]];
      std::uniform_int_distribution<int> pick(1, profile.max_multiplicity);
      std::vector<int> mult;
      for (int b = 0; b < alg.n_blocks(); ++b) mult.push_back(pick(rng));
      base_module.emplace(a, standard_module(alg, mult));
    }
    int d = base_module.at(a).dim;
    w[x] = (profile.twist_fibres && x != a) ? random_unitary(d, rng) : Matrix::Identity(d, d);
    w_inv[x] = w[x].adjoint();
  }
  out.fibre_dims.assign(nx, 0);
  for (int x = 0; x < nx; ++x) out.fibre_dims[x] = base_module.at(anchor_of[x]).dim;

  for (int x = 0; x < nx; ++x) {
    const int a = anchor_of[x];
    const HilbertModule& v = base_module.at(a);
    const int gx = reoq(g, out.action, a, x);  // a . gx = x
    const int dv = v.dim;
    for (int h = 0; h < g.n_arrows; ++h) {
      if (!out.action.movable(x, h, g)) continue;
      const int xh = out.action.act[x][h];
      const int db = out.bundle.fibre_dims[h];
      Tensor3 t(dv, db, dv);
      for (int b = 0; b < db; ++b) {
        Vector canon = gen.beta[gx] * gen.t_bwd[h] * Vector::Unit(db, b);
        AlgebraElement eb = element_from_coords(gen.algebra, canon);
        Matrix rmat = w[xh] * v.action_matrix(eb) * w_inv[x];
        for (int i = 0; i < dv; ++i)
          for (int k = 0; k < dv; ++k) t.at(i, b, k) = rmat(k, i);
      }
      out.ract_tensors[{x, h}] = t;
    }
  }
  for (int x1 = 0; x1 < nx; ++x1)
    for (int x2 = x1; x2 < nx; ++x2) {
      if (anchor_of[x1] != anchor_of[x2]) continue;
      const int a = anchor_of[x1];
      const HilbertModule& v = base_module.at(a);
      const int g1 = reoq(g, out.action, a, x1), g2 = reoq(g, out.action, a, x2);
      const int k = g.comp[g.inv[g1]][g2];
      Tensor3 t(v.dim, v.dim, out.bundle.fibre_dims[k]);
      Matrix w1c = w_inv[x1].conjugate();
      for (int i = 0; i < v.dim; ++i)
        for (int j = 0; j < v.dim; ++j) {
          Vector ip = v.inner.apply(w1c * Vector::Unit(v.dim, i), w_inv[x2] * Vector::Unit(v.dim, j));
          Vector stored = gen.t_fwd[k] * gen.beta[g.inv[g1]] * ip;
          for (int c = 0; c < t.d3; ++c) t.at(i, j, c) = stored[c];
        }
      out.rip_tensors[{x1, x2}] = t;
    }
  return out;
}

}  // namespace fell
