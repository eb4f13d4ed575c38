#pragma once

// Closed-form example catalogue: self-equivalence, matrix amplification, the
// transformation-group example, and the finite stabilization trick. Each
// fixture pairs a demi-equivalence with an independently built expected
// bundle and the elementary-tensor formula identifying the two.

#include <string>
#include <utility>
#include <vector>

#include "fell/equivalence.hpp"
#include "fell/imprimitivity.hpp"

namespace fell {

struct NamedFixture {
  std::string name;
  DemiEquivalence demi;
  EquivalenceData expected;  // bundle + leoq + left inner (hint formula)
  std::string hint;          // elementary-tensor formula identifier
};

// ---------------------------------------------------------------------------
// Shared builders
// ---------------------------------------------------------------------------

/// Bundle with constant fibre A over `base`, multiplication a . alpha_g(b)
/// and involution a -> alpha_{g^{-1}}(a^*), for a homomorphism g -> alpha_g
/// into Aut(A) given by coordinate matrices (identity on unit arrows).
inline FellBundle action_bundle(const FiniteGroupoid& base, const BlockAlgebra& alg,
                                const std::vector<Matrix>& alpha) {
  FellBundle fb;
  fb.base = base;
  fb.unit_algebras.assign(base.n_units, alg);
  const int d = alg.dim();
  fb.fibre_dims.assign(base.n_arrows, d);
  Tensor3 am = algebra_mult_tensor(alg);
  Matrix sm = algebra_star_matrix(alg);
  for (auto [a, b] : base.composable_pairs()) {
    if (base.is_unit_arrow(a)) {
      fb.mult[{a, b}] = am;
      continue;
    }
    Tensor3 t(d, d, d);
    for (int j = 0; j < d; ++j) {
      Vector tb = alpha[a] * Vector::Unit(d, j);
      for (int i = 0; i < d; ++i) {
        Vector prod = am.apply(Vector::Unit(d, i), tb);
        for (int k = 0; k < d; ++k) t.at(i, j, k) = prod[k];
      }
    }
    fb.mult[{a, b}] = t;
  }
  fb.invol.resize(base.n_arrows);
  for (int h = 0; h < base.n_arrows; ++h)
    fb.invol[h] = base.is_unit_arrow(h) ? sm : Matrix(alpha[base.inv[h]] * sm);
  return fb;
}

/// Check that alpha is a homomorphism into *-automorphisms of the algebra.
inline ValidationReport validate_automorphism_action(const BlockAlgebra& alg,
                                                     const FiniteGroupoid& group,
                                                     const std::vector<Matrix>& alpha,
                                                     double tol = kDefaultTol) {
  ValidationReport rep;
  const int d = alg.dim();
  if (static_cast<int>(alpha.size()) != group.n_arrows) {
    rep.structural("one automorphism per group element required");
    return rep;
  }
  for (int g = 0; g < group.n_arrows; ++g)
    if (alpha[g].rows() != d || alpha[g].cols() != d)
      rep.structural("automorphism matrix shape mismatch");
  if (!rep.structurally_sound()) return rep;
  Tensor3 am = algebra_mult_tensor(alg);
  Matrix sm = algebra_star_matrix(alg);
  for (int g = 0; g < group.n_arrows; ++g) {
    if (group.is_unit_arrow(g))
      rep.record("AUT", frob(alpha[g] - Matrix::Identity(d, d)), tol, {g},
                 "alpha at the unit is not the identity");
    for (int h = 0; h < group.n_arrows; ++h)
      if (group.composable(g, h))
        rep.record("AUT", frob(alpha[g] * alpha[h] - alpha[group.comp[g][h]]), tol, {g, h},
                   "alpha is not a homomorphism");
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        Vector lhs = alpha[g] * am.apply(Vector::Unit(d, i), Vector::Unit(d, j));
        Vector rhs = am.apply(alpha[g] * Vector::Unit(d, i), alpha[g] * Vector::Unit(d, j));
        rep.record("AUT", (lhs - rhs).norm(), tol, {g, i, j}, "alpha not multiplicative");
      }
    Matrix star_conj = alpha[g] * sm - sm * alpha[g].conjugate();
    rep.record("AUT", frob(star_conj), tol, {g}, "alpha not *-preserving");
    if (numerical_rank(alpha[g], tol) != d)
      rep.record_fail("AUT", {g}, "alpha not bijective");
  }
  rep.check("AUT");
  return rep;
}

/// Operator basis of K_B(Y) pulled back from the matrix units of its block
/// presentation, so coordinates at unit fibres are canonical.
inline std::vector<Matrix> matrix_unit_operator_basis(const HilbertModule& m,
                                                      const CompactsBlockRep& rep,
                                                      double tol = kDefaultTol) {
  ModuleMapSpace space = compacts_space(m, m, tol);
  const int d = space.dim();
  if (rep.algebra.dim() != d)
    throw StructuralError("matrix_unit_operator_basis: dimension mismatch");
  Matrix r(d, d);
  for (int k = 0; k < d; ++k) r.col(k) = coords_of(rep.to_blocks(space.basis[k]));
  Matrix c = r.inverse();
  std::vector<Matrix> out;
  for (int a = 0; a < d; ++a) {
    Matrix b = Matrix::Zero(m.dim, m.dim);
    for (int k = 0; k < d; ++k) b += c(k, a) * space.basis[k];
    out.push_back(b);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Self-equivalence
// ---------------------------------------------------------------------------

inline NamedFixture fixture_self(const FellBundle& fb) {
  NamedFixture f;
  f.name = "self";
  f.hint = "[b1 (x) b2^op] -> b1 b2^*";
  f.demi = self_demi_equivalence(fb);
  EquivalenceData& e = f.expected;
  e.demi = f.demi;
  e.bundle = fb;
  const FiniteGroupoid& g = fb.base;
  const int nx = g.n_arrows;
  e.leoq_tab.assign(nx, std::vector<int>(nx, -1));
  e.lact_point.assign(g.n_arrows, std::vector<int>(nx, -1));
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < nx; ++y)
      if (g.src[x] == g.src[y]) e.leoq_tab[x][y] = g.comp[x][g.inv[y]];
  for (int a = 0; a < g.n_arrows; ++a)
    for (int y = 0; y < nx; ++y)
      if (g.composable(a, y)) e.lact_point[a][y] = g.comp[a][y];
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < nx; ++y) {
      if (e.leoq_tab[x][y] < 0) continue;
      int arrow = e.leoq_tab[x][y];
      const int dx = fb.fibre_dims[x], dy = fb.fibre_dims[y];
      Tensor3 t(dx, dy, fb.fibre_dims[arrow]);
      for (int j = 0; j < dy; ++j) {
        Vector jstar = fb.invol[y].col(j);
        for (int i = 0; i < dx; ++i) {
          Vector v = fb.multiply(x, g.inv[y], Vector::Unit(dx, i), jstar);
          for (int k = 0; k < t.d3; ++k) t.at(i, j, k) = v[k];
        }
      }
      e.left_inner[{x, y}] = t;
    }
  for (int a = 0; a < g.n_arrows; ++a)
    for (int y = 0; y < nx; ++y) {
      if (e.lact_point[a][y] < 0) continue;
      e.left_act[{a, y}] = fb.mult_tensor(a, y);
    }
  return f;
}

// ---------------------------------------------------------------------------
// Matrix amplification
// ---------------------------------------------------------------------------

namespace detail {

/// Index bookkeeping for M_n(C) (x) B(h). Natural coordinates are
/// (p,q,alpha) -> (p*n+q)*d_h + alpha; at unit arrows they are permuted to
/// the matrix-unit order of the amplified blocks {n*n_j}.
struct AmplifiedIndex {
  int n = 1;
  const FellBundle* fb = nullptr;

  int dim(int h) const { return n * n * fb->fibre_dims[h]; }

  int natural(int h, int p, int q, int alpha) const {
    return (p * n + q) * fb->fibre_dims[h] + alpha;
  }

  /// Stored index: permuted at unit arrows, natural elsewhere.
  int stored(int h, int p, int q, int alpha) const {
    if (!fb->base.is_unit_arrow(h)) return natural(h, p, q, alpha);
    const BlockAlgebra& alg = fb->unit_algebras[fb->base.src[h]];
    int aoff = 0, boff = 0;
    for (int b = 0; b < alg.n_blocks(); ++b) {
      const int nb = alg.blocks[b];
      if (alpha < aoff + nb * nb) {
        int r = (alpha - aoff) / nb, s = (alpha - aoff) % nb;
        int big = n * nb;
        return boff + (p * nb + r) * big + (q * nb + s);
      }
      aoff += nb * nb;
      boff += n * nb * n * nb;
    }
    throw StructuralError("AmplifiedIndex: algebra coordinate out of range");
  }
};

}  // namespace detail

/// M_n(C) (x) B: fibrewise matrix amplification of a bundle.
inline FellBundle amplify_bundle(const FellBundle& fb, int n) {
  FellBundle out;
  out.base = fb.base;
  detail::AmplifiedIndex ix{n, &fb};
  for (const auto& alg : fb.unit_algebras) {
    BlockAlgebra big;
    for (int nb : alg.blocks) big.blocks.push_back(n * nb);
    out.unit_algebras.push_back(big);
  }
  out.fibre_dims.resize(fb.base.n_arrows);
  for (int h = 0; h < fb.base.n_arrows; ++h) out.fibre_dims[h] = ix.dim(h);
  for (auto& [key, t] : fb.mult) {
    auto [a, b] = key;
    int ab = fb.base.comp[a][b];
    Tensor3 big(ix.dim(a), ix.dim(b), ix.dim(ab));
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < n; ++q)
        for (int s = 0; s < n; ++s)
          for (int al = 0; al < t.d1; ++al)
            for (int be = 0; be < t.d2; ++be)
              for (int ga = 0; ga < t.d3; ++ga) {
                Complex v = t.at(al, be, ga);
                if (v == Complex(0, 0)) continue;
                big.at(ix.stored(a, p, q, al), ix.stored(b, q, s, be),
                       ix.stored(ab, p, s, ga)) += v;
              }
    out.mult[{a, b}] = big;
  }
  out.invol.resize(fb.base.n_arrows);
  for (int h = 0; h < fb.base.n_arrows; ++h) {
    int hi = fb.base.inv[h];
    Matrix m = Matrix::Zero(ix.dim(hi), ix.dim(h));
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < n; ++q)
        for (int al = 0; al < fb.fibre_dims[h]; ++al)
          for (int ga = 0; ga < fb.fibre_dims[hi]; ++ga)
            m(ix.stored(hi, q, p, ga), ix.stored(h, p, q, al)) = fb.invol[h](ga, al);
    out.invol[h] = m;
  }
  return out;
}

inline NamedFixture fixture_matrix(const FellBundle& fb, int n) {
  if (n < 1) throw StructuralError("fixture_matrix: n must be >= 1");
  NamedFixture f;
  f.name = "matrix";
  f.hint = "[(e_i,b1) (x) (e_j,b2)^op] -> (E_ij, b1 b2^*)";
  const FiniteGroupoid& g = fb.base;
  const int nx = g.n_arrows;

  // Demi-equivalence: fibres C^n (x) B(x) over X = H.
  DemiEquivalence& d = f.demi;
  d.bundle = fb;
  d.action = translation_action(g);
  d.fibre_dims.resize(nx);
  auto midx = [&](int x, int i, int alpha) { return i * fb.fibre_dims[x] + alpha; };
  for (int x = 0; x < nx; ++x) d.fibre_dims[x] = n * fb.fibre_dims[x];
  for (int x = 0; x < nx; ++x)
    for (int h = 0; h < g.n_arrows; ++h) {
      if (!g.composable(x, h)) continue;
      int xh = g.comp[x][h];
      const Tensor3& bt = fb.mult_tensor(x, h);
      Tensor3 t(d.fibre_dims[x], fb.fibre_dims[h], d.fibre_dims[xh]);
      for (int i = 0; i < n; ++i)
        for (int al = 0; al < bt.d1; ++al)
          for (int be = 0; be < bt.d2; ++be)
            for (int ga = 0; ga < bt.d3; ++ga)
              t.at(midx(x, i, al), be, midx(xh, i, ga)) += bt.at(al, be, ga);
      d.ract_tensors[{x, h}] = t;
    }
  for (int x1 = 0; x1 < nx; ++x1)
    for (int x2 = x1; x2 < nx; ++x2) {
      if (g.rng[x1] != g.rng[x2]) continue;
      int k = g.comp[g.inv[x1]][x2];
      Tensor3 t(d.fibre_dims[x1], d.fibre_dims[x2], fb.fibre_dims[k]);
      for (int al = 0; al < fb.fibre_dims[x1]; ++al) {
        Vector star_al = fb.invol[x1].col(al);
        for (int be = 0; be < fb.fibre_dims[x2]; ++be) {
          Vector v = fb.multiply(g.inv[x1], x2, star_al, Vector::Unit(fb.fibre_dims[x2], be));
          for (int i = 0; i < n; ++i)
            for (int c = 0; c < t.d3; ++c)
              t.at(midx(x1, i, al), midx(x2, i, be), c) += v[c];
        }
      }
      d.rip_tensors[{x1, x2}] = t;
    }

  // Expected: M_n(C) (x) B with the standard hint formulas.
  EquivalenceData& e = f.expected;
  e.demi = d;
  e.bundle = amplify_bundle(fb, n);
  detail::AmplifiedIndex ix{n, &fb};
  e.leoq_tab.assign(nx, std::vector<int>(nx, -1));
  e.lact_point.assign(g.n_arrows, std::vector<int>(nx, -1));
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < nx; ++y)
      if (g.src[x] == g.src[y]) e.leoq_tab[x][y] = g.comp[x][g.inv[y]];
  for (int a = 0; a < g.n_arrows; ++a)
    for (int y = 0; y < nx; ++y)
      if (g.composable(a, y)) e.lact_point[a][y] = g.comp[a][y];
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < nx; ++y) {
      if (e.leoq_tab[x][y] < 0) continue;
      int arrow = e.leoq_tab[x][y];
      Tensor3 t(d.fibre_dims[x], d.fibre_dims[y], e.bundle.fibre_dims[arrow]);
      for (int al = 0; al < fb.fibre_dims[x]; ++al)
        for (int be = 0; be < fb.fibre_dims[y]; ++be) {
          Vector v = fb.multiply(x, g.inv[y], Vector::Unit(fb.fibre_dims[x], al),
                                 fb.invol[y].col(be));
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
              for (int c = 0; c < fb.fibre_dims[arrow]; ++c)
                t.at(midx(x, i, al), midx(y, j, be), ix.stored(arrow, i, j, c)) += v[c];
        }
      e.left_inner[{x, y}] = t;
    }
  for (int a = 0; a < g.n_arrows; ++a)
    for (int y = 0; y < nx; ++y) {
      if (e.lact_point[a][y] < 0) continue;
      int ay = g.comp[a][y];
      const Tensor3& bt = fb.mult_tensor(a, y);
      Tensor3 t(e.bundle.fibre_dims[a], d.fibre_dims[y], d.fibre_dims[ay]);
      for (int p = 0; p < n; ++p)
        for (int q = 0; q < n; ++q)
          for (int al = 0; al < bt.d1; ++al)
            for (int be = 0; be < bt.d2; ++be)
              for (int ga = 0; ga < bt.d3; ++ga)
                t.at(ix.stored(a, p, q, al), midx(y, q, be), midx(ay, p, ga)) +=
                    bt.at(al, be, ga);
      e.left_act[{a, y}] = t;
    }
  return f;
}

// ---------------------------------------------------------------------------
// Transformation-group example
// ---------------------------------------------------------------------------

inline NamedFixture fixture_transformation_group(const FiniteGroupoid& x_group,
                                                 const std::vector<int>& h_sub,
                                                 const BlockAlgebra& alg,
                                                 const std::vector<Matrix>& alpha,
                                                 double tol = kDefaultTol) {
  if (x_group.n_units != 1)
    throw StructuralError("fixture_transformation_group: X must be a group");
  {
    ValidationReport vg = validate_groupoid(x_group);
    if (!vg.pass()) throw InvalidInput("invalid group", std::move(vg));
    ValidationReport va = validate_automorphism_action(alg, x_group, alpha, tol);
    if (!va.pass()) throw InvalidInput("invalid automorphism action", std::move(va));
  }
  // Subgroup closure.
  {
    ValidationReport sr;
    std::vector<char> in(x_group.n_arrows, 0);
    for (int s : h_sub) {
      if (s < 0 || s >= x_group.n_arrows) sr.structural("subgroup index out of range");
      else in[s] = 1;
    }
    if (sr.structurally_sound()) {
      if (!in[x_group.unit_embed[0]]) sr.structural("subgroup misses the unit");
      for (int a : h_sub) {
        if (!in[x_group.inv[a]]) sr.structural("subgroup not closed under inverse");
        for (int b : h_sub)
          if (!in[x_group.comp[a][b]]) sr.structural("subgroup not closed under product");
      }
    }
    if (!sr.structurally_sound()) throw InvalidInput("invalid subgroup", std::move(sr));
  }

  const int d = alg.dim();
  const int nx = x_group.n_arrows;
  Tensor3 am = algebra_mult_tensor(alg);
  Matrix sm = algebra_star_matrix(alg);

  // H as a groupoid of its own, with alpha restricted.
  FiniteGroupoid sub;
  std::vector<int> to_group = h_sub;
  std::sort(to_group.begin(), to_group.end());
  std::vector<int> to_sub(x_group.n_arrows, -1);
  for (size_t i = 0; i < to_group.size(); ++i) to_sub[to_group[i]] = static_cast<int>(i);
  sub.n_units = 1;
  sub.n_arrows = static_cast<int>(to_group.size());
  sub.src.assign(sub.n_arrows, 0);
  sub.rng.assign(sub.n_arrows, 0);
  sub.unit_embed = {to_sub[x_group.unit_embed[0]]};
  sub.inv.resize(sub.n_arrows);
  sub.comp.assign(sub.n_arrows, std::vector<int>(sub.n_arrows, -1));
  for (int i = 0; i < sub.n_arrows; ++i) {
    sub.inv[i] = to_sub[x_group.inv[to_group[i]]];
    for (int j = 0; j < sub.n_arrows; ++j)
      sub.comp[i][j] = to_sub[x_group.comp[to_group[i]][to_group[j]]];
  }
  std::vector<Matrix> sub_alpha;
  for (int i = 0; i < sub.n_arrows; ++i) sub_alpha.push_back(alpha[to_group[i]]);

  NamedFixture f;
  f.name = "transformation_group";
  f.hint = "(m,x) (x) (n,y)^op -> m alpha_{x y^{-1}}(n)^* at (x y^{-1}, yH)";

  DemiEquivalence& dm = f.demi;
  dm.bundle = action_bundle(sub, alg, sub_alpha);
  dm.action.n_points = nx;
  dm.action.sigma.assign(nx, 0);
  dm.action.act.assign(nx, std::vector<int>(sub.n_arrows, -1));
  for (int x = 0; x < nx; ++x)
    for (int i = 0; i < sub.n_arrows; ++i)
      dm.action.act[x][i] = x_group.comp[x][to_group[i]];
  dm.fibre_dims.assign(nx, d);
  for (int x = 0; x < nx; ++x)
    for (int i = 0; i < sub.n_arrows; ++i) {
      // (m,x) . (b,h) = (m alpha_x(b), xh)
      Tensor3 t(d, d, d);
      for (int b = 0; b < d; ++b) {
        Vector tb = alpha[x] * Vector::Unit(d, b);
        for (int mcoord = 0; mcoord < d; ++mcoord) {
          Vector prod = am.apply(Vector::Unit(d, mcoord), tb);
          for (int k = 0; k < d; ++k) t.at(mcoord, b, k) = prod[k];
        }
      }
      dm.ract_tensors[{x, i}] = t;
    }
  // Orbits are cosets xH; <(m,x),(n,y)> = (alpha_{x^{-1}}(m^* n), x^{-1} y).
  auto same_coset = [&](int x, int y) { return to_sub[x_group.comp[x_group.inv[x]][y]] >= 0; };
  for (int x1 = 0; x1 < nx; ++x1)
    for (int x2 = x1; x2 < nx; ++x2) {
      if (!same_coset(x1, x2)) continue;
      Tensor3 t(d, d, d);
      for (int i = 0; i < d; ++i) {
        Vector star_i = sm.col(i);
        for (int j = 0; j < d; ++j) {
          Vector v = alpha[x_group.inv[x1]] * am.apply(star_i, Vector::Unit(d, j));
          for (int k = 0; k < d; ++k) t.at(i, j, k) = v[k];
        }
      }
      dm.rip_tensors[{x1, x2}] = t;
    }

  // Expected: the transformation groupoid X |x X/H with the constant bundle.
  std::vector<int> coset_of(nx, -1);
  std::vector<int> coset_rep;
  for (int x = 0; x < nx; ++x) {
    if (coset_of[x] >= 0) continue;
    int c = static_cast<int>(coset_rep.size());
    for (int y = 0; y < nx; ++y)
      if (same_coset(x, y)) coset_of[y] = c;
    coset_rep.push_back(x);
  }
  const int ncos = static_cast<int>(coset_rep.size());
  FiniteGroupoid tg;
  tg.n_units = ncos;
  tg.n_arrows = nx * ncos;
  auto aidx = [&](int x, int c) { return x * ncos + c; };
  tg.src.resize(tg.n_arrows);
  tg.rng.resize(tg.n_arrows);
  tg.inv.resize(tg.n_arrows);
  tg.unit_embed.resize(ncos);
  tg.comp.assign(tg.n_arrows, std::vector<int>(tg.n_arrows, -1));
  auto x_on_coset = [&](int x, int c) { return coset_of[x_group.comp[x][coset_rep[c]]]; };
  for (int x = 0; x < nx; ++x)
    for (int c = 0; c < ncos; ++c) {
      tg.src[aidx(x, c)] = c;
      tg.rng[aidx(x, c)] = x_on_coset(x, c);
      tg.inv[aidx(x, c)] = aidx(x_group.inv[x], x_on_coset(x, c));
    }
  for (int c = 0; c < ncos; ++c) tg.unit_embed[c] = aidx(x_group.unit_embed[0], c);
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < nx; ++y)
      for (int c = 0; c < ncos; ++c)
        tg.comp[aidx(x, x_on_coset(y, c))][aidx(y, c)] = aidx(x_group.comp[x][y], c);
  std::vector<Matrix> tg_alpha(tg.n_arrows);
  for (int x = 0; x < nx; ++x)
    for (int c = 0; c < ncos; ++c) tg_alpha[aidx(x, c)] = alpha[x];

  EquivalenceData& e = f.expected;
  e.demi = dm;
  e.bundle = action_bundle(tg, alg, tg_alpha);
  e.leoq_tab.assign(nx, std::vector<int>(nx, -1));
  e.lact_point.assign(tg.n_arrows, std::vector<int>(nx, -1));
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < nx; ++y)
      e.leoq_tab[x][y] = aidx(x_group.comp[x][x_group.inv[y]], coset_of[y]);
  for (int a = 0; a < tg.n_arrows; ++a)
    for (int y = 0; y < nx; ++y) {
      int z = a / ncos, c = a % ncos;
      if (coset_of[y] != c) continue;
      e.lact_point[a][y] = x_group.comp[z][y];
    }
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < nx; ++y) {
      // <(m,x),(n,y)>_A = (m alpha_{x y^{-1}}(n^*), (x y^{-1}, yH))
      int z = x_group.comp[x][x_group.inv[y]];
      Tensor3 t(d, d, d);
      for (int j = 0; j < d; ++j) {
        Vector tn = alpha[z] * sm.col(j);
        for (int i = 0; i < d; ++i) {
          Vector v = am.apply(Vector::Unit(d, i), tn);
          for (int k = 0; k < d; ++k) t.at(i, j, k) = v[k];
        }
      }
      e.left_inner[{x, y}] = t;
    }
  for (int a = 0; a < tg.n_arrows; ++a)
    for (int y = 0; y < nx; ++y) {
      if (e.lact_point[a][y] < 0) continue;
      int z = a / ncos;
      // (a at (z,c)) |> (m at y) = a alpha_z(m) at z y
      Tensor3 t(d, d, d);
      for (int j = 0; j < d; ++j) {
        Vector tm = alpha[z] * Vector::Unit(d, j);
        for (int k = 0; k < d; ++k) {
          Vector v = am.apply(Vector::Unit(d, k), tm);
          for (int c = 0; c < d; ++c) t.at(k, j, c) = v[c];
        }
      }
      e.left_act[{a, y}] = t;
    }
  return f;
}

// ---------------------------------------------------------------------------
// Finite stabilization
// ---------------------------------------------------------------------------

namespace detail {

/// Section-space bookkeeping for V(u) = (+)_{l in Hu} B(l), Hu = s^{-1}(u).
struct SectionIndex {
  const FellBundle* fb = nullptr;
  std::vector<std::vector<int>> arrows_at;  // per unit: s^{-1}(u), ascending
  std::vector<std::vector<int>> offset_at;  // running offsets
  std::vector<int> dim_at;                  // per unit

  explicit SectionIndex(const FellBundle& bundle) : fb(&bundle) {
    const FiniteGroupoid& g = bundle.base;
    arrows_at.resize(g.n_units);
    offset_at.resize(g.n_units);
    dim_at.assign(g.n_units, 0);
    for (int u = 0; u < g.n_units; ++u) {
      for (int l = 0; l < g.n_arrows; ++l)
        if (g.src[l] == u) {
          arrows_at[u].push_back(l);
          offset_at[u].push_back(dim_at[u]);
          dim_at[u] += bundle.fibre_dims[l];
        }
    }
  }

  int offset(int u, int arrow) const {
    for (size_t i = 0; i < arrows_at[u].size(); ++i)
      if (arrows_at[u][i] == arrow) return offset_at[u][i];
    throw StructuralError("SectionIndex: arrow not in the fibre");
  }
};

}  // namespace detail

/// V(u) as a Hilbert module over B(u).
inline HilbertModule kumjian_module(const FellBundle& fb, const detail::SectionIndex& ix,
                                    const BlockAlgebra& alg, int u) {
  const FiniteGroupoid& g = fb.base;
  HilbertModule m;
  m.algebra = &alg;
  m.dim = ix.dim_at[u];
  const int e = g.unit_embed[u];
  m.action = Tensor3(m.dim, alg.dim(), m.dim);
  m.inner = Tensor3(m.dim, m.dim, alg.dim());
  for (size_t li = 0; li < ix.arrows_at[u].size(); ++li) {
    int l = ix.arrows_at[u][li];
    int off = ix.offset_at[u][li];
    const Tensor3& mt = fb.mult_tensor(l, e);
    for (int i = 0; i < fb.fibre_dims[l]; ++i)
      for (int b = 0; b < alg.dim(); ++b)
        for (int k = 0; k < fb.fibre_dims[l]; ++k)
          m.action.at(off + i, b, off + k) += mt.at(i, b, k);
    for (int i = 0; i < fb.fibre_dims[l]; ++i) {
      Vector star_i = fb.invol[l].col(i);
      for (int j = 0; j < fb.fibre_dims[l]; ++j) {
        Vector v = fb.multiply(g.inv[l], l, star_i, Vector::Unit(fb.fibre_dims[l], j));
        for (int k = 0; k < alg.dim(); ++k) m.inner.at(off + i, off + j, k) += v[k];
      }
    }
  }
  return m;
}

/// The H-translation T |-> h |> T on compact operators of the section
/// modules: block (l2', l1') of the result is block (l2' h, l1' h) of the
/// input, re-expressed as left multiplication on the new fibres.
inline Matrix kumjian_translate(const FellBundle& fb, const detail::SectionIndex& ix, int h,
                                const Matrix& t, double tol = kDefaultTol) {
  const FiniteGroupoid& g = fb.base;
  const int u = g.src[h], v = g.rng[h];
  Matrix out = Matrix::Zero(ix.dim_at[v], ix.dim_at[v]);
  for (int l2p : ix.arrows_at[v])
    for (int l1p : ix.arrows_at[v]) {
      int l2 = g.comp[l2p][h], l1 = g.comp[l1p][h];
      int a = g.comp[l2][g.inv[l1]];  // = comp(l2', inv(l1'))
      // extract c in B(a) with (left mult by c on B(l1)) = input block
      const int d1 = fb.fibre_dims[l1], d2 = fb.fibre_dims[l2], da = fb.fibre_dims[a];
      Matrix block = t.block(ix.offset(u, l2), ix.offset(u, l1), d2, d1);
      Matrix lm(d2 * d1, da);
      for (int c = 0; c < da; ++c) {
        Matrix lmat(d2, d1);
        for (int j = 0; j < d1; ++j)
          lmat.col(j) = fb.multiply(a, l1, Vector::Unit(da, c), Vector::Unit(d1, j));
        lm.col(c) = vectorize(lmat);
      }
      LstsqResult sol = lstsq(lm, vectorize(block));
      if (sol.residual > tol * (1.0 + frob(block)))
        throw StructuralError("kumjian_translate: block is not a left multiplication");
      Vector c = sol.x.col(0);
      const int d1p = fb.fibre_dims[l1p], d2p = fb.fibre_dims[l2p];
      Matrix nb(d2p, d1p);
      for (int j = 0; j < d1p; ++j)
        nb.col(j) = fb.multiply(a, l1p, c, Vector::Unit(d1p, j));
      out.block(ix.offset(v, l2p), ix.offset(v, l1p), d2p, d1p) = nb;
    }
  return out;
}

inline NamedFixture fixture_kumjian(const FellBundle& fb, double tol = kDefaultTol) {
  const FiniteGroupoid& g = fb.base;
  NamedFixture f;
  f.name = "kumjian";
  f.hint = "[mu (x) xi^op] -> (T, x y^{-1}) with T_{l2,l1} = mu(l2 x) xi(l1 x)^*";

  detail::SectionIndex ix(fb);

  // Demi-equivalence over X = H: M(x) = V(s(x)) with the shifted action and
  // summed inner product.
  DemiEquivalence& d = f.demi;
  d.bundle = fb;
  d.action = translation_action(g);
  const int nx = g.n_arrows;
  d.fibre_dims.resize(nx);
  for (int x = 0; x < nx; ++x) d.fibre_dims[x] = ix.dim_at[g.src[x]];
  for (int x = 0; x < nx; ++x) {
    const int sx = g.src[x];
    for (int k = 0; k < g.n_arrows; ++k) {
      if (!g.composable(x, k)) continue;
      const int sk = g.src[k];
      Tensor3 t(d.fibre_dims[x], fb.fibre_dims[k], ix.dim_at[sk]);
      // (xi . b)(l) = xi(l k^{-1}) b for l in H sk
      for (int l : ix.arrows_at[sk]) {
        int lk = g.comp[l][g.inv[k]];
        const Tensor3& mt = fb.mult_tensor(lk, k);
        int in_off = ix.offset(sx, lk), out_off = ix.offset(sk, l);
        for (int i = 0; i < mt.d1; ++i)
          for (int b = 0; b < mt.d2; ++b)
            for (int o = 0; o < mt.d3; ++o)
              t.at(in_off + i, b, out_off + o) += mt.at(i, b, o);
      }
      d.ract_tensors[{x, k}] = t;
    }
  }
  for (int x1 = 0; x1 < nx; ++x1)
    for (int x2 = x1; x2 < nx; ++x2) {
      if (g.rng[x1] != g.rng[x2]) continue;
      int k = g.comp[g.inv[x1]][x2];
      const int s1 = g.src[x1];
      Tensor3 t(d.fibre_dims[x1], d.fibre_dims[x2], fb.fibre_dims[k]);
      // <mu, xi> = sum_{l in H s1} mu(l)^* xi(l k)
      for (int l : ix.arrows_at[s1]) {
        int lk = g.comp[l][k];
        int off1 = ix.offset(s1, l), off2 = ix.offset(g.src[x2], lk);
        for (int i = 0; i < fb.fibre_dims[l]; ++i) {
          Vector star_i = fb.invol[l].col(i);
          for (int j = 0; j < fb.fibre_dims[lk]; ++j) {
            Vector v = fb.multiply(g.inv[l], lk, star_i, Vector::Unit(fb.fibre_dims[lk], j));
            for (int c = 0; c < t.d3; ++c) t.at(off1 + i, off2 + j, c) += v[c];
          }
        }
      }
      d.rip_tensors[{x1, x2}] = t;
    }

  // Expected: K(V) |x H over H itself, fibre at h given by the compacts of
  // V(r(h)) in matrix-unit coordinates.
  EquivalenceData& e = f.expected;
  e.demi = d;
  std::vector<BlockAlgebra> unit_algebras(g.n_units);
  std::vector<HilbertModule> vmod;
  std::vector<CompactsBlockRep> vrep(g.n_units);
  std::vector<std::vector<Matrix>> vbasis(g.n_units);
  // Module algebra pointers must stay stable; build over fb's unit algebras.
  vmod.reserve(g.n_units);
  for (int u = 0; u < g.n_units; ++u)
    vmod.push_back(kumjian_module(fb, ix, fb.unit_algebras[u], u));
  for (int u = 0; u < g.n_units; ++u) {
    vrep[u] = compacts_block_rep(vmod[u]);
    vbasis[u] = matrix_unit_operator_basis(vmod[u], vrep[u], tol);
    unit_algebras[u] = vrep[u].algebra;
  }
  FellBundle& eb = e.bundle;
  eb.base = g;
  eb.unit_algebras = unit_algebras;
  eb.fibre_dims.resize(g.n_arrows);
  for (int h = 0; h < g.n_arrows; ++h) eb.fibre_dims[h] = unit_algebras[g.rng[h]].dim();
  for (auto [a, b] : g.composable_pairs()) {
    int ab = g.comp[a][b];
    const int da = eb.fibre_dims[a], db = eb.fibre_dims[b], dab = eb.fibre_dims[ab];
    const int va = g.rng[a];
    Tensor3 t(da, db, dab);
    if (g.is_unit_arrow(a) && g.is_unit_arrow(b)) {
      t = algebra_mult_tensor(unit_algebras[va]);
    } else {
      for (int i = 0; i < da; ++i)
        for (int j = 0; j < db; ++j) {
          Matrix prod = vbasis[va][i] * kumjian_translate(fb, ix, a, vbasis[g.rng[b]][j], tol);
          Vector coords = coords_in_basis(vbasis[va], prod, tol);
          for (int k = 0; k < dab; ++k) t.at(i, j, k) = coords[k];
        }
    }
    eb.mult[{a, b}] = t;
  }
  eb.invol.resize(g.n_arrows);
  for (int h = 0; h < g.n_arrows; ++h) {
    const int v = g.rng[h], u = g.src[h];
    if (g.is_unit_arrow(h)) {
      eb.invol[h] = algebra_star_matrix(unit_algebras[v]);
      continue;
    }
    Matrix m(eb.fibre_dims[g.inv[h]], eb.fibre_dims[h]);
    for (int i = 0; i < eb.fibre_dims[h]; ++i) {
      Matrix adj = adjoint_map(vmod[v], vmod[v], vbasis[v][i], tol);
      Matrix moved = kumjian_translate(fb, ix, g.inv[h], adj, tol);
      m.col(i) = coords_in_basis(vbasis[u], moved, tol);
    }
    eb.invol[h] = m;
  }

  // leoq and the hint inner product; the expected data carries no left
  // action (the comparison only needs the inner products).
  e.leoq_tab.assign(nx, std::vector<int>(nx, -1));
  e.lact_point.assign(g.n_arrows, std::vector<int>(nx, -1));
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < nx; ++y)
      if (g.src[x] == g.src[y]) e.leoq_tab[x][y] = g.comp[x][g.inv[y]];
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < nx; ++y) {
      if (e.leoq_tab[x][y] < 0) continue;
      const int arrow = e.leoq_tab[x][y];
      const int v = g.rng[x];
      Tensor3 t(d.fibre_dims[x], d.fibre_dims[y], eb.fibre_dims[arrow]);
      // T_{l2,l1} = mu(l2 x) xi(l1 x)^*, left multiplication B(l1) -> B(l2)
      for (int l2 : ix.arrows_at[v])
        for (int l1 : ix.arrows_at[v]) {
          int p = g.comp[l2][x], q = g.comp[l1][x];
          int off_mu = ix.offset(g.src[x], p), off_xi = ix.offset(g.src[y], q);
          for (int i = 0; i < fb.fibre_dims[p]; ++i)
            for (int j = 0; j < fb.fibre_dims[q]; ++j) {
              Vector star_j = fb.invol[q].col(j);
              Vector c = fb.multiply(p, g.inv[q], Vector::Unit(fb.fibre_dims[p], i), star_j);
              // assemble the operator with this block and take coordinates
              Matrix op = Matrix::Zero(ix.dim_at[v], ix.dim_at[v]);
              int a = g.comp[p][g.inv[q]];
              Matrix blk(fb.fibre_dims[l2], fb.fibre_dims[l1]);
              for (int col = 0; col < fb.fibre_dims[l1]; ++col)
                blk.col(col) = fb.multiply(a, l1, c, Vector::Unit(fb.fibre_dims[l1], col));
              op.block(ix.offset(v, l2), ix.offset(v, l1), fb.fibre_dims[l2],
                       fb.fibre_dims[l1]) = blk;
              Vector coords = coords_in_basis(vbasis[v], op, tol);
              for (int k = 0; k < t.d3; ++k)
                t.at(off_mu + i, off_xi + j, k) += coords[k];
            }
        }
      e.left_inner[{x, y}] = t;
    }
  return f;
}

// ---------------------------------------------------------------------------
// Running fixtures
// ---------------------------------------------------------------------------

struct FixtureReport {
  std::string name;
  bool built = false;
  std::string error;
  ValidationReport demi_report;
  ValidationReport expected_bundle_report;
  ValidationReport bundle_report;
  ValidationReport equivalence_report;
  BundleIsomorphism iso;
  double max_residual = 0.0;

  bool pass() const {
    return built && error.empty() && demi_report.pass() && expected_bundle_report.pass() &&
           bundle_report.pass() && equivalence_report.pass() && iso.ok();
  }
};

inline FixtureReport run_fixture(const NamedFixture& f, double tol = kDefaultTol) {
  FixtureReport r;
  r.name = f.name;
  try {
    r.demi_report = validate_demi(f.demi, tol);
    if (!r.demi_report.pass()) return r;
    r.expected_bundle_report = validate_fell_bundle(f.expected.bundle, tol);
    ImprimitivityBundle ib = build_imprimitivity_bundle(f.demi, tol);
    ConvertedBundle cb = to_fell_bundle(ib, tol);
    r.bundle_report = validate_fell_bundle(cb.fb, tol);
    EquivalenceData eq = equivalence_data(ib, cb, tol);
    r.equivalence_report = validate_equivalence(eq, tol);
    r.iso = uniqueness_iso(eq, f.expected, tol);
    r.built = true;
    r.max_residual = std::max({r.bundle_report.max_residual(),
                               r.equivalence_report.max_residual(),
                               r.iso.report.max_residual()});
  } catch (const InvalidInput& ex) {
    r.error = ex.what();
    r.demi_report.merge(ex.report);
  } catch (const StructuralError& ex) {
    r.error = ex.what();
  }
  return r;
}

}  // namespace fell
