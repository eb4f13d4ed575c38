#pragma once

// Equivalence data over a demi-equivalence: a Fell bundle together with a
// left action and left inner product on the module bundle. The constructed
// imprimitivity bundle exports this form; closed-form expected bundles and
// deserialized files provide it directly. The uniqueness isomorphism solves
// for the fibre maps sending one left inner product to the other.

#include <map>
#include <utility>
#include <vector>

#include "fell/imprimitivity.hpp"

namespace fell {

inline Vector coords_in_basis(const std::vector<Matrix>& basis, const Matrix& t,
                              double tol = kDefaultTol) {
  if (basis.empty()) {
    if (frob(t) > tol) throw StructuralError("coords_in_basis: element outside span");
    return Vector(0);
  }
  Matrix a(t.size(), static_cast<Eigen::Index>(basis.size()));
  for (size_t k = 0; k < basis.size(); ++k) a.col(static_cast<Eigen::Index>(k)) = vectorize(basis[k]);
  LstsqResult r = lstsq(a, vectorize(t));
  if (r.residual > tol * (1.0 + frob(t)))
    throw StructuralError("coords_in_basis: element outside span");
  return r.x.col(0);
}

/// Structure-tensor form of a constructed bundle, with the chosen fibre
/// bases kept so elements can be moved between pictures.
struct ConvertedBundle {
  FellBundle fb;
  std::vector<std::vector<Matrix>> bases;  // per arrow: operator basis at rep(g)
};

/// Tensorize the operator-form bundle. Unit fibres become their block
/// algebras through the compacts block representation, with the fibre basis
/// pulled back from the matrix units so that unit tensors are exactly the
/// algebra tensors.
inline ConvertedBundle to_fell_bundle(const ImprimitivityBundle& ib, double tol = kDefaultTol) {
  const FiniteGroupoid& g = ib.gq.base;
  ConvertedBundle out;
  out.fb.base = g;
  out.fb.fibre_dims.assign(g.n_arrows, 0);
  out.bases.resize(g.n_arrows);
  out.fb.unit_algebras.resize(g.n_units);

  std::vector<CompactsBlockRep> unit_reps(g.n_units);
  for (int u = 0; u < g.n_units; ++u) {
    int e = g.unit_embed[u];
    int x0 = ib.rep(e).first;
    unit_reps[u] = compacts_block_rep(ib.ctx->mod(x0));
    out.fb.unit_algebras[u] = unit_reps[u].algebra;
    const int d = ib.fibre_dim(e);
    if (unit_reps[u].algebra.dim() != d)
      throw StructuralError("to_fell_bundle: compacts dimension mismatch at a unit");
    // R: matrix-unit coordinates of the nullspace basis; invert to pull back.
    Matrix r(d, d);
    for (int k = 0; k < d; ++k)
      r.col(k) = coords_of(unit_reps[u].to_blocks(ib.fibres[e].basis[k]));
    Matrix c = r.inverse();
    for (int a = 0; a < d; ++a) {
      Matrix b = Matrix::Zero(ib.fibres[e].basis[0].rows(), ib.fibres[e].basis[0].cols());
      for (int k = 0; k < d; ++k) b += c(k, a) * ib.fibres[e].basis[k];
      out.bases[e].push_back(b);
    }
  }
  for (int a = 0; a < g.n_arrows; ++a) {
    if (!g.is_unit_arrow(a)) out.bases[a] = ib.fibres[a].basis;
    out.fb.fibre_dims[a] = static_cast<int>(out.bases[a].size());
  }

  for (auto [a, b] : g.composable_pairs()) {
    int ab = g.comp[a][b];
    const int da = out.fb.fibre_dims[a], db = out.fb.fibre_dims[b], dab = out.fb.fibre_dims[ab];
    Tensor3 t(da, db, dab);
    for (int i = 0; i < da; ++i)
      for (int j = 0; j < db; ++j) {
        KElement xi{ib.rep(a).first, ib.rep(a).second, out.bases[a][i]};
        KElement eta{ib.rep(b).first, ib.rep(b).second, out.bases[b][j]};
        Vector coords = coords_in_basis(out.bases[ab], ib.multiply(a, b, xi, eta).t, tol);
        for (int k = 0; k < dab; ++k) t.at(i, j, k) = coords[k];
      }
    if (g.is_unit_arrow(a) && g.is_unit_arrow(b)) {
      // mathematically the block algebra product; store it exactly
      Tensor3 exact = algebra_mult_tensor(out.fb.unit_algebras[g.src[a]]);
      double drift = 0.0;
      for (size_t i = 0; i < t.a.size(); ++i) drift = std::max(drift, std::abs(t.a[i] - exact.a[i]));
      if (drift > 100 * tol)
        throw StructuralError("to_fell_bundle: unit fibre product drifted from the algebra");
      t = exact;
    }
    out.fb.mult[{a, b}] = t;
  }
  out.fb.invol.resize(g.n_arrows);
  for (int a = 0; a < g.n_arrows; ++a) {
    int ai = g.inv[a];
    Matrix m(out.fb.fibre_dims[ai], out.fb.fibre_dims[a]);
    for (int i = 0; i < out.fb.fibre_dims[a]; ++i) {
      KElement xi{ib.rep(a).first, ib.rep(a).second, out.bases[a][i]};
      m.col(i) = coords_in_basis(out.bases[ai], ib.involute(a, xi).t, tol);
    }
    if (g.is_unit_arrow(a)) {
      Matrix exact = algebra_star_matrix(out.fb.unit_algebras[g.src[a]]);
      if (frob(m - exact) > 100 * tol * (1.0 + frob(exact)))
        throw StructuralError("to_fell_bundle: unit involution drifted from the algebra");
      m = exact;
    }
    out.fb.invol[a] = m;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Equivalence data
// ---------------------------------------------------------------------------

/// A Fell bundle over some groupoid G', together with the left action and
/// left inner product making the demi-equivalence an equivalence. leoq gives
/// the G'-arrow transporting y to x for sigma-matched pairs.
struct EquivalenceData {
  DemiEquivalence demi;
  FellBundle bundle;  // A' over G'
  std::vector<std::vector<int>> leoq_tab;              // nx x nx, -1 off-domain
  std::vector<std::vector<int>> lact_point;            // arrow x point -> point, -1 off-domain
  std::map<std::pair<int, int>, Tensor3> left_inner;   // (x,y): m_x x m_y x d_g, antilinear in slot 2
  std::map<std::pair<int, int>, Tensor3> left_act;     // (g,y): d_g x m_y x m_x

  int points() const { return demi.points(); }
  bool has_left_action() const { return !left_act.empty(); }
  int leoq(int x, int y) const {
    int g = leoq_tab[x][y];
    if (g < 0) throw StructuralError("EquivalenceData::leoq: anchor mismatch");
    return g;
  }
  int rho(int y) const { return bundle.base.src[leoq(y, y)]; }

  /// <m, n>_{A'} in fibre coordinates at leoq(x,y); antilinear in n.
  Vector lip(int x, int y, const Vector& m, const Vector& n) const {
    auto it = left_inner.find({x, y});
    if (it == left_inner.end()) throw StructuralError("EquivalenceData::lip: pair off-domain");
    return it->second.apply(m, n.conjugate());
  }

  /// a |> m for a in A'(g) (coordinates) and m in M(y).
  Vector lact(int g, int y, const Vector& a, const Vector& m) const {
    auto it = left_act.find({g, y});
    if (it == left_act.end()) throw StructuralError("EquivalenceData::lact: pair off-domain");
    return it->second.apply(a, m);
  }
};

/// Export the constructed bundle as equivalence data over its own base.
inline EquivalenceData equivalence_data(const ImprimitivityBundle& ib, const ConvertedBundle& cb,
                                        double tol = kDefaultTol) {
  EquivalenceData out;
  out.demi = *ib.demi;
  out.bundle = cb.fb;
  const int nx = out.demi.points();
  const FiniteGroupoid& g = cb.fb.base;
  out.leoq_tab.assign(nx, std::vector<int>(nx, -1));
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < nx; ++y)
      if (out.demi.action.sigma[x] == out.demi.action.sigma[y])
        out.leoq_tab[x][y] = ib.gq.class_of(x, y);
  out.lact_point.assign(g.n_arrows, std::vector<int>(nx, -1));
  for (int a = 0; a < g.n_arrows; ++a)
    for (int y = 0; y < nx; ++y)
      if (g.src[a] == ib.gq.rho(y)) out.lact_point[a][y] = ib.gq.lact(a, y);

  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < nx; ++y) {
      if (out.leoq_tab[x][y] < 0) continue;
      int arrow = out.leoq_tab[x][y];
      const int dx = out.demi.dim(x), dy = out.demi.dim(y), dg = cb.fb.fibre_dims[arrow];
      Tensor3 t(dx, dy, dg);
      for (int i = 0; i < dx; ++i)
        for (int j = 0; j < dy; ++j) {
          KElement e = ib.left_inner(x, y, Vector::Unit(dx, i), Vector::Unit(dy, j));
          Vector coords = coords_in_basis(cb.bases[arrow], e.t, tol);
          for (int k = 0; k < dg; ++k) t.at(i, j, k) = coords[k];
        }
      out.left_inner[{x, y}] = t;
    }
  for (int a = 0; a < g.n_arrows; ++a)
    for (int y = 0; y < nx; ++y) {
      if (out.lact_point[a][y] < 0) continue;
      int x = out.lact_point[a][y];
      const int da = cb.fb.fibre_dims[a], dy = out.demi.dim(y), dx = out.demi.dim(x);
      Tensor3 t(da, dy, dx);
      for (int k = 0; k < da; ++k) {
        KElement xi{ib.rep(a).first, ib.rep(a).second, cb.bases[a][k]};
        for (int j = 0; j < dy; ++j) {
          int moved = -1;
          Vector v = ib.lact(a, xi, y, Vector::Unit(dy, j), &moved);
          if (moved != x) throw StructuralError("equivalence_data: lact point mismatch");
          for (int i = 0; i < dx; ++i) t.at(k, j, i) = v[i];
        }
      }
      out.left_act[{a, y}] = t;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Equivalence validation
// ---------------------------------------------------------------------------

inline ValidationReport validate_equivalence(const EquivalenceData& e, double tol = kDefaultTol) {
  ValidationReport rep;
  const DemiEquivalence& d = e.demi;
  const FiniteGroupoid& gh = d.bundle.base;  // H
  const FiniteGroupoid& gg = e.bundle.base;  // G'
  const int nx = d.points();

  // Structural: leoq defined exactly on sigma-matched pairs; tensors shaped.
  if (static_cast<int>(e.leoq_tab.size()) != nx) rep.structural("leoq table size mismatch");
  if (!rep.structurally_sound()) return rep;
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < nx; ++y) {
      bool matched = d.action.sigma[x] == d.action.sigma[y];
      int g = e.leoq_tab[x][y];
      if (matched && (g < 0 || g >= gg.n_arrows))
        rep.structural("leoq undefined on matched pair");
      if (!matched && g != -1) rep.structural("leoq defined off-domain");
    }
  if (!rep.structurally_sound()) return rep;
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < nx; ++y) {
      if (e.leoq_tab[x][y] < 0) continue;
      auto it = e.left_inner.find({x, y});
      if (it == e.left_inner.end()) {
        rep.structural("left inner product missing on matched pair");
        continue;
      }
      const Tensor3& t = it->second;
      if (t.d1 != d.dim(x) || t.d2 != d.dim(y) ||
          t.d3 != e.bundle.fibre_dims[e.leoq_tab[x][y]])
        rep.structural("left inner tensor shape mismatch");
    }
  const bool has_lact = e.has_left_action();
  if (has_lact) {
    for (int a = 0; a < gg.n_arrows; ++a)
      for (int y = 0; y < nx; ++y) {
        int x = e.lact_point[a][y];
        bool in_domain = gg.src[a] == e.rho(y);
        if (in_domain != (x >= 0)) rep.structural("lact domain mismatch");
        if (x >= 0) {
          auto it = e.left_act.find({a, y});
          if (it == e.left_act.end() || it->second.d1 != e.bundle.fibre_dims[a] ||
              it->second.d2 != d.dim(y) || it->second.d3 != d.dim(x))
            rep.structural("left action tensor shape mismatch");
        }
      }
  }
  if (!rep.structurally_sound()) return rep;

  std::mt19937_64 rng(0xe91ebULL);

  if (!has_lact) {
    for (const char* label : {"LA1", "LA2", "EQ2", "LIP1", "LIP4", "LIP5"})
      rep.mark_trivial(label, "left action not provided; skipped");
  }

  // LA1: the action covers the groupoid action: leoq(g |> y, y) = g.
  if (has_lact) {
    for (int a = 0; a < gg.n_arrows; ++a)
      for (int y = 0; y < nx; ++y) {
        int x = e.lact_point[a][y];
        if (x >= 0 && e.leoq_tab[x][y] != a)
          rep.record_fail("LA1", {a, y}, "lact does not cover the base action");
      }
    rep.check("LA1");
  }

  if (has_lact) {
    // LA2 (actions commute): (xi |> m) . b = xi |> (m . b).
    for (int a = 0; a < gg.n_arrows; ++a)
      for (int y = 0; y < nx; ++y) {
        int x = e.lact_point[a][y];
        if (x < 0) continue;
        for (int h = 0; h < gh.n_arrows; ++h) {
          if (!d.action.movable(y, h, gh)) continue;
          int yh = d.action.act[y][h];
          if (e.lact_point[a][yh] < 0) continue;
          for (int k = 0; k < e.bundle.fibre_dims[a]; ++k)
            for (int j = 0; j < d.dim(y); ++j)
              for (int c = 0; c < d.bundle.fibre_dims[h]; ++c) {
                Vector ea = Vector::Unit(e.bundle.fibre_dims[a], k);
                Vector ej = Vector::Unit(d.dim(y), j);
                Vector ec = Vector::Unit(d.bundle.fibre_dims[h], c);
                Vector lhs = d.ract(x, h, e.lact(a, y, ea, ej), ec);
                Vector rhs = e.lact(a, yh, ea, d.ract(y, h, ej, ec));
                rep.record("LA2", (lhs - rhs).norm(), tol, {a, y, h, k, j, c});
              }
        }
      }
    rep.check("LA2");
  }

  if (has_lact) {
    // EQ2 (adjointability): <xi |> m1, m2>_B = <m1, xi^* |> m2>_B.
    for (int a = 0; a < gg.n_arrows; ++a)
      for (int y1 = 0; y1 < nx; ++y1) {
        int x = e.lact_point[a][y1];
        if (x < 0) continue;
        int ai = gg.inv[a];
        for (int y2 = 0; y2 < nx; ++y2) {
          if (!d.same_orbit(x, y2)) continue;
          int y2m = e.lact_point[ai][y2];
          if (y2m < 0) continue;
          for (int k = 0; k < e.bundle.fibre_dims[a]; ++k)
            for (int i = 0; i < d.dim(y1); ++i)
              for (int j = 0; j < d.dim(y2); ++j) {
                Vector ea = Vector::Unit(e.bundle.fibre_dims[a], k);
                Vector ei = Vector::Unit(d.dim(y1), i);
                Vector ej = Vector::Unit(d.dim(y2), j);
                Vector lhs = d.rip(x, y2, e.lact(a, y1, ea, ei), ej);
                Vector rhs = d.rip(y1, y2m, ei, e.lact(ai, y2, e.bundle.involute(a, ea), ej));
                rep.record("EQ2", (lhs - rhs).norm(), tol, {a, y1, y2, k, i, j});
              }
        }
      }
    rep.check("EQ2");
  }

  if (has_lact) {
    // LIP1: the inner product covers leoq (already structural through LA1 and
    // the tensor domains); record the point bookkeeping.
    for (int x = 0; x < nx; ++x)
      for (int y = 0; y < nx; ++y) {
        if (e.leoq_tab[x][y] < 0) continue;
        if (e.lact_point[e.leoq_tab[x][y]][y] != x)
          rep.record_fail("LIP1", {x, y}, "leoq(x,y) |> y != x");
      }
    rep.check("LIP1");
  }

  // LIP2: fibrewise linear in the first and antilinear in the second slot.
  for (int t = 0; t < 20; ++t) {
    int x = static_cast<int>(rng() % nx);
    std::vector<int> ys;
    for (int y = 0; y < nx; ++y)
      if (e.leoq_tab[x][y] >= 0) ys.push_back(y);
    int y = ys[rng() % ys.size()];
    Vector m1 = random_vector(d.dim(x), rng), m2 = random_vector(d.dim(x), rng);
    Vector n1 = random_vector(d.dim(y), rng), n2 = random_vector(d.dim(y), rng);
    Complex lam(0.4, 1.1);
    double r1 = (e.lip(x, y, m1 + lam * m2, n1) -
                 (e.lip(x, y, m1, n1) + lam * e.lip(x, y, m2, n1))).norm();
    double r2 = (e.lip(x, y, m1, n1 + lam * n2) -
                 (e.lip(x, y, m1, n1) + std::conj(lam) * e.lip(x, y, m1, n2))).norm();
    rep.record("LIP2", std::max(r1, r2), tol, {x, y});
  }
  rep.check("LIP2");

  // LIP3: <m,n>^* = <n,m>.
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < nx; ++y) {
      if (e.leoq_tab[x][y] < 0) continue;
      int g = e.leoq_tab[x][y];
      for (int i = 0; i < d.dim(x); ++i)
        for (int j = 0; j < d.dim(y); ++j) {
          Vector lhs = e.bundle.involute(
              g, e.lip(x, y, Vector::Unit(d.dim(x), i), Vector::Unit(d.dim(y), j)));
          Vector rhs = e.lip(y, x, Vector::Unit(d.dim(y), j), Vector::Unit(d.dim(x), i));
          rep.record("LIP3", (lhs - rhs).norm(), tol, {x, y, i, j});
        }
    }
  rep.check("LIP3");

  if (has_lact) {
    // LIP4: [xi] . <m,n> = <xi |> m, n>.
    for (int a = 0; a < gg.n_arrows; ++a)
      for (int x = 0; x < nx; ++x) {
        if (gg.src[a] != e.rho(x)) continue;
        int xa = e.lact_point[a][x];
        for (int y = 0; y < nx; ++y) {
          if (e.leoq_tab[x][y] < 0) continue;
          int g = e.leoq_tab[x][y];
          if (!gg.composable(a, g)) {
            rep.record_fail("LIP4", {a, x, y}, "arrow bookkeeping mismatch");
            continue;
          }
          for (int k = 0; k < e.bundle.fibre_dims[a]; ++k)
            for (int i = 0; i < d.dim(x); ++i)
              for (int j = 0; j < d.dim(y); ++j) {
                Vector ea = Vector::Unit(e.bundle.fibre_dims[a], k);
                Vector ei = Vector::Unit(d.dim(x), i);
                Vector ej = Vector::Unit(d.dim(y), j);
                Vector lhs = e.bundle.multiply(a, g, ea, e.lip(x, y, ei, ej));
                Vector rhs = e.lip(xa, y, e.lact(a, x, ea, ei), ej);
                rep.record("LIP4", (lhs - rhs).norm(), tol, {a, x, y, k, i, j});
              }
        }
      }
    rep.check("LIP4");
  }

  if (has_lact) {
    // LIP5: <m1,m2>_A |> m3 = m1 . <m2,m3>_B.
    for (int x1 = 0; x1 < nx; ++x1)
      for (int x2 = 0; x2 < nx; ++x2) {
        if (e.leoq_tab[x1][x2] < 0) continue;
        int g = e.leoq_tab[x1][x2];
        for (int x3 = 0; x3 < nx; ++x3) {
          if (!d.same_orbit(x2, x3)) continue;
          int h = d.rip_arrow(x2, x3);
          int lhs_pt = e.lact_point[g][x3];
          int rhs_pt = d.action.act[x1][h];
          if (lhs_pt != rhs_pt) {
            rep.record_fail("LIP5", {x1, x2, x3}, "point bookkeeping mismatch");
            continue;
          }
          for (int i = 0; i < d.dim(x1); ++i)
            for (int j = 0; j < d.dim(x2); ++j)
              for (int k = 0; k < d.dim(x3); ++k) {
                Vector ei = Vector::Unit(d.dim(x1), i);
                Vector ej = Vector::Unit(d.dim(x2), j);
                Vector ek = Vector::Unit(d.dim(x3), k);
                Vector lhs = e.lact(g, x3, e.lip(x1, x2, ei, ej), ek);
                Vector rhs = d.ract(x1, h, ei, d.rip(x2, x3, ej, ek));
                rep.record("LIP5", (lhs - rhs).norm(), tol, {x1, x2, x3, i, j, k});
              }
        }
      }
    rep.check("LIP5");
  }

  // Left-sided DE6/DE7/DE8: positivity, norm compatibility, fullness.
  for (int x = 0; x < nx; ++x) {
    int g = e.leoq_tab[x][x];
    const int dx = d.dim(x);
    const BlockAlgebra& alg = e.bundle.unit_algebras[gg.src[g]];
    const int n = alg.rep_dim();
    Matrix gram(dx * n, dx * n);
    for (int i = 0; i < dx; ++i)
      for (int j = 0; j < dx; ++j) {
        // <m,m>_A = sum_{ij} m_i conj(m_j) <e_i,e_j>_A is PSD for all m iff
        // the block matrix [rep <e_i,e_j>_A]_{ij} is PSD.
        Vector v = e.lip(x, x, Vector::Unit(dx, i), Vector::Unit(dx, j));
        gram.block(i * n, j * n, n, n) = e.bundle.unit_element(g, v).full();
      }
    double scale = std::max(1.0, spectral_norm(gram));
    rep.record("LDE6", frob(gram - gram.adjoint()) / (2.0 * scale), tol, {x},
               "left inner product not Hermitian");
    Eigen::VectorXd ev = hermitian_eigenvalues(gram);
    rep.record("LDE6", std::max(0.0, -ev.minCoeff() / scale), tol, {x},
               "<m,m>_A not positive");
    for (int t = 0; t < 10; ++t) {
      Vector m = random_vector(dx, rng);
      double na = e.bundle.norm(g, e.lip(x, x, m, m));
      double nb = d.norm(x, m);
      rep.record("LDE7", std::abs(na - nb * nb) / (1.0 + nb * nb), tol, {x},
                 "||<m,m>_A|| != ||m||^2");
    }
    Matrix span(e.bundle.fibre_dims[g], dx * dx);
    int c = 0;
    for (int i = 0; i < dx; ++i)
      for (int j = 0; j < dx; ++j)
        span.col(c++) = e.lip(x, x, Vector::Unit(dx, i), Vector::Unit(dx, j));
    if (numerical_rank(span, tol) != e.bundle.fibre_dims[g])
      rep.record_fail("LDE8", {x}, "left inner products do not span A(rho(x))");
  }
  rep.check("LDE6");
  rep.check("LDE7");
  rep.check("LDE8");
  return rep;
}

// ---------------------------------------------------------------------------
// Uniqueness isomorphism
// ---------------------------------------------------------------------------

struct BundleIsomorphism {
  std::vector<int> base_map;
  std::vector<Matrix> fibre_maps;
  ValidationReport report;

  bool ok() const { return report.pass(); }
  double max_residual() const { return report.max_residual(); }
};

inline bool same_demi(const DemiEquivalence& a, const DemiEquivalence& b) {
  if (a.points() != b.points() || a.fibre_dims != b.fibre_dims) return false;
  if (a.action.sigma != b.action.sigma || a.action.act != b.action.act) return false;
  if (a.bundle.fibre_dims != b.bundle.fibre_dims) return false;
  if (a.bundle.base.comp != b.bundle.base.comp) return false;
  auto tensors_equal = [](const std::map<std::pair<int, int>, Tensor3>& s,
                          const std::map<std::pair<int, int>, Tensor3>& t) {
    if (s.size() != t.size()) return false;
    for (const auto& [k, v] : s) {
      auto it = t.find(k);
      if (it == t.end() || it->second.a != v.a) return false;
    }
    return true;
  };
  return tensors_equal(a.ract_tensors, b.ract_tensors) &&
         tensors_equal(a.rip_tensors, b.rip_tensors);
}

/// The unique Fell bundle isomorphism Omega: A1 -> A2 determined by
/// <m,n>_{A1} -> <m,n>_{A2}, over the base map leoq_1(x,y) -> leoq_2(x,y).
inline BundleIsomorphism uniqueness_iso(const EquivalenceData& e1, const EquivalenceData& e2,
                                        double tol = kDefaultTol) {
  BundleIsomorphism iso;
  ValidationReport& rep = iso.report;
  if (!same_demi(e1.demi, e2.demi)) {
    rep.structural("equivalences are not over the same bundle and module data");
    return iso;
  }
  const DemiEquivalence& d = e1.demi;
  const int nx = d.points();
  const FiniteGroupoid& g1 = e1.bundle.base;
  const FiniteGroupoid& g2 = e2.bundle.base;

  // Base map.
  iso.base_map.assign(g1.n_arrows, -1);
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < nx; ++y) {
      if (e1.leoq_tab[x][y] < 0) continue;
      int a1 = e1.leoq_tab[x][y], a2 = e2.leoq_tab[x][y];
      if (iso.base_map[a1] < 0) iso.base_map[a1] = a2;
      if (iso.base_map[a1] != a2)
        rep.record_fail("OMEGA-BASE", {x, y}, "base map not well defined");
    }
  for (int a = 0; a < g1.n_arrows; ++a)
    if (iso.base_map[a] < 0) rep.record_fail("OMEGA-BASE", {a}, "arrow not hit by leoq");
  if (rep.find("OMEGA-BASE") && !rep.find("OMEGA-BASE")->pass) return iso;
  if (!groupoid_isomorphic(g1, g2, iso.base_map))
    rep.record_fail("OMEGA-BASE", {}, "base map is not a groupoid isomorphism");
  rep.check("OMEGA-BASE");

  // Fibre maps from the spanning families of left inner products.
  iso.fibre_maps.assign(g1.n_arrows, Matrix());
  for (int a = 0; a < g1.n_arrows; ++a) {
    int a2 = iso.base_map[a];
    const int d1 = e1.bundle.fibre_dims[a], d2 = e2.bundle.fibre_dims[a2];
    if (d1 != d2) {
      rep.record_fail("OMEGA-SPAN", {a}, "fibre dimensions differ");
      continue;
    }
    int cols = 0;
    for (int x = 0; x < nx; ++x)
      for (int y = 0; y < nx; ++y)
        if (e1.leoq_tab[x][y] == a) cols += d.dim(x) * d.dim(y);
    Matrix s1(d1, cols), s2(d2, cols);
    int c = 0;
    for (int x = 0; x < nx; ++x)
      for (int y = 0; y < nx; ++y) {
        if (e1.leoq_tab[x][y] != a) continue;
        for (int i = 0; i < d.dim(x); ++i)
          for (int j = 0; j < d.dim(y); ++j) {
            Vector ei = Vector::Unit(d.dim(x), i), ej = Vector::Unit(d.dim(y), j);
            s1.col(c) = e1.lip(x, y, ei, ej);
            s2.col(c) = e2.lip(x, y, ei, ej);
            ++c;
          }
      }
    if (numerical_rank(s1, tol) != d1) {
      rep.record_fail("OMEGA-SPAN", {a}, "left inner products do not span A1 fibre");
      continue;
    }
    iso.fibre_maps[a] = s2 * pinv(s1, tol);
    double scale = 1.0 + frob(s2);
    rep.record("OMEGA-GEN", frob(iso.fibre_maps[a] * s1 - s2) / scale, tol, {a},
               "generators not matched");
    if (numerical_rank(iso.fibre_maps[a], tol) != d1)
      rep.record_fail("OMEGA-SPAN", {a}, "fibre map not bijective");
  }
  rep.check("OMEGA-SPAN");
  rep.check("OMEGA-GEN");
  if (!rep.pass()) return iso;

  // Multiplicative, star-preserving, isometric.
  for (auto [a, b] : g1.composable_pairs()) {
    int ab = g1.comp[a][b];
    for (int i = 0; i < e1.bundle.fibre_dims[a]; ++i)
      for (int j = 0; j < e1.bundle.fibre_dims[b]; ++j) {
        Vector ei = Vector::Unit(e1.bundle.fibre_dims[a], i);
        Vector ej = Vector::Unit(e1.bundle.fibre_dims[b], j);
        Vector lhs = iso.fibre_maps[ab] * e1.bundle.multiply(a, b, ei, ej);
        Vector rhs = e2.bundle.multiply(iso.base_map[a], iso.base_map[b],
                                        iso.fibre_maps[a] * ei, iso.fibre_maps[b] * ej);
        rep.record("OMEGA-MULT", (lhs - rhs).norm(), tol, {a, b, i, j});
      }
  }
  rep.check("OMEGA-MULT");
  for (int a = 0; a < g1.n_arrows; ++a) {
    int ai = g1.inv[a];
    for (int i = 0; i < e1.bundle.fibre_dims[a]; ++i) {
      Vector ei = Vector::Unit(e1.bundle.fibre_dims[a], i);
      Vector lhs = iso.fibre_maps[ai] * e1.bundle.involute(a, ei);
      Vector rhs = e2.bundle.involute(iso.base_map[a], iso.fibre_maps[a] * ei);
      rep.record("OMEGA-STAR", (lhs - rhs).norm(), tol, {a, i});
    }
  }
  rep.check("OMEGA-STAR");
  std::mt19937_64 rng(0x0a53);
  for (int a = 0; a < g1.n_arrows; ++a) {
    for (int t = 0; t < 4 + e1.bundle.fibre_dims[a]; ++t) {
      Vector v = t < e1.bundle.fibre_dims[a] ? Vector(Vector::Unit(e1.bundle.fibre_dims[a], t))
                                             : random_vector(e1.bundle.fibre_dims[a], rng);
      double n1 = e1.bundle.norm(a, v);
      double n2 = e2.bundle.norm(iso.base_map[a], iso.fibre_maps[a] * v);
      rep.record("OMEGA-ISO", std::abs(n1 - n2) / (1.0 + n1), tol, {a},
                 "fibre map not isometric");
    }
  }
  rep.check("OMEGA-ISO");
  return iso;
}

}  // namespace fell
