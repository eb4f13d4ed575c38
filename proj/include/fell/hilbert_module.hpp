#pragma once

// Finite-dimensional right Hilbert C*-modules over a BlockAlgebra, their
// compact-operator spaces, and the localization that turns module operators
// into honest matrices (used for norms, positivity, and block presentations).

#include <utility>
#include <vector>

#include "fell/cstar.hpp"
#include "fell/linalg.hpp"
#include "fell/report.hpp"

namespace fell {

/// Right Hilbert module over a BlockAlgebra: a coordinate space C^dim with a
/// right action tensor (module x algebra -> module) and an algebra-valued
/// inner product (conjugate-linear in the first slot).
struct HilbertModule {
  const BlockAlgebra* algebra = nullptr;
  int dim = 0;
  Tensor3 action;  // dim x alg.dim x dim
  Tensor3 inner;   // dim x dim x alg.dim

  Vector act(const Vector& m, const AlgebraElement& b) const {
    return action.apply(m, coords_of(b));
  }
  AlgebraElement ip(const Vector& m, const Vector& n) const {
    return element_from_coords(*algebra, inner.apply_sesqui(m, n));
  }
  double norm(const Vector& m) const { return std::sqrt(operator_norm(ip(m, m))); }

  /// Matrix of the right action by b.
  Matrix action_matrix(const AlgebraElement& b) const {
    Matrix r(dim, dim);
    for (int j = 0; j < dim; ++j) r.col(j) = act(Vector::Unit(dim, j), b);
    return r;
  }
};

/// Standard full module over the algebra: one Hom(C^{n_b}, C^{m_b}) summand
/// per block (multiplicity m_b >= 1), with <S,T> = S^* T blockwise.
/// Coordinates of block b are the matrix entries S(r,c), row-major.
inline HilbertModule standard_module(const BlockAlgebra& alg,
                                     const std::vector<int>& multiplicities) {
  if (static_cast<int>(multiplicities.size()) != alg.n_blocks())
    throw StructuralError("standard_module: one multiplicity per block required");
  HilbertModule m;
  m.algebra = &alg;
  m.dim = 0;
  std::vector<int> offset;
  for (int b = 0; b < alg.n_blocks(); ++b) {
    offset.push_back(m.dim);
    m.dim += alg.blocks[b] * multiplicities[b];
  }
  auto idx = [&](int b, int r, int c) { return offset[b] + r * alg.blocks[b] + c; };
  m.action = Tensor3(m.dim, alg.dim(), m.dim);
  m.inner = Tensor3(m.dim, m.dim, alg.dim());
  int aoff = 0;
  for (int b = 0; b < alg.n_blocks(); ++b) {
    const int n = alg.blocks[b], mu = multiplicities[b];
    auto aidx = [&](int p, int q) { return aoff + p * n + q; };
    for (int r = 0; r < mu; ++r)
      for (int p = 0; p < n; ++p)
        for (int q = 0; q < n; ++q) {
          // S * e_pq places S(r,p) at entry (r,q).
          m.action.at(idx(b, r, p), aidx(p, q), idx(b, r, q)) += 1.0;
          // (S^* T)(p,q) = sum_r conj(S(r,p)) T(r,q).
          m.inner.at(idx(b, r, p), idx(b, r, q), aidx(p, q)) += 1.0;
        }
    aoff += n * n;
  }
  return m;
}

/// Conjugate a module by an invertible coordinate change (new = t * old).
inline HilbertModule twist_module(const HilbertModule& m, const Matrix& t) {
  HilbertModule out;
  out.algebra = m.algebra;
  out.dim = m.dim;
  Matrix tinv = t.inverse();
  out.action = Tensor3(m.dim, m.algebra->dim(), m.dim);
  out.inner = Tensor3(m.dim, m.dim, m.algebra->dim());
  for (int i = 0; i < m.dim; ++i) {
    for (int a = 0; a < m.algebra->dim(); ++a) {
      Vector img = t * m.action.apply(tinv.col(i), Vector::Unit(m.algebra->dim(), a));
      for (int k = 0; k < m.dim; ++k) out.action.at(i, a, k) = img[k];
    }
    for (int j = 0; j < m.dim; ++j) {
      Vector ip = m.inner.apply(tinv.col(i).conjugate(), tinv.col(j));
      for (int k = 0; k < m.algebra->dim(); ++k) out.inner.at(i, j, k) = ip[k];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Localization: Y (x)_B C^N with the standard rep of B
// ---------------------------------------------------------------------------

/// Faithful Hilbert-space picture of a module. Raw vectors live on C^{dim*N}
/// with index (i,p) = i*N + p; `to_ortho` maps them onto orthonormal
/// coordinates of the localized space.
struct ModuleLocalization {
  int dim = 0;        // module dimension
  int rep_dim = 0;    // N of the algebra rep
  int rank = 0;       // dim of the localized Hilbert space
  Matrix to_ortho;    // rank x (dim*N)
  Matrix from_ortho;  // (dim*N) x rank

  /// A module operator T (target.dim x source.dim) as a matrix between
  /// orthonormal coordinates of the two localizations.
  static Matrix operator_on(const ModuleLocalization& src, const ModuleLocalization& dst,
                            const Matrix& t) {
    const int n = src.rep_dim;
    return dst.to_ortho * kron(t, Matrix::Identity(n, n)) * src.from_ortho;
  }
};

inline ModuleLocalization localize(const HilbertModule& m) {
  const BlockAlgebra& alg = *m.algebra;
  const int n = alg.rep_dim();
  ModuleLocalization loc;
  loc.dim = m.dim;
  loc.rep_dim = n;
  const int raw = m.dim * n;
  Matrix gram(raw, raw);
  for (int i = 0; i < m.dim; ++i)
    for (int j = 0; j < m.dim; ++j)
      gram.block(i * n, j * n, n, n) = m.ip(Vector::Unit(m.dim, i), Vector::Unit(m.dim, j)).full();
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (gram + gram.adjoint()));
  const Eigen::VectorXd ev = es.eigenvalues();
  const double cut = std::max(ev.cwiseAbs().maxCoeff(), 1e-300) * kDefaultTol;
  std::vector<int> keep;
  for (int i = 0; i < ev.size(); ++i)
    if (ev(i) > cut) keep.push_back(i);
  loc.rank = static_cast<int>(keep.size());
  Matrix w(raw, loc.rank);
  Eigen::VectorXd lam(loc.rank);
  for (int k = 0; k < loc.rank; ++k) {
    w.col(k) = es.eigenvectors().col(keep[k]);
    lam(k) = ev(keep[k]);
  }
  loc.to_ortho = lam.cwiseSqrt().asDiagonal() * w.adjoint();
  loc.from_ortho = w * lam.cwiseSqrt().cwiseInverse().asDiagonal();
  return loc;
}

// ---------------------------------------------------------------------------
// Compact operators
// ---------------------------------------------------------------------------

/// Space of B-linear maps source -> target with a fixed basis, elements
/// handled as raw (target.dim x source.dim) matrices.
struct ModuleMapSpace {
  const HilbertModule* source = nullptr;
  const HilbertModule* target = nullptr;
  std::vector<Matrix> basis;

  int dim() const { return static_cast<int>(basis.size()); }

  /// Coordinates of a map over the basis; gated least squares.
  Vector coords(const Matrix& t, double tol = kDefaultTol) const {
    if (basis.empty()) {
      if (frob(t) > tol) throw StructuralError("ModuleMapSpace::coords: map outside space");
      return Vector(0);
    }
    Matrix a(t.size(), dim());
    for (int k = 0; k < dim(); ++k) a.col(k) = vectorize(basis[k]);
    LstsqResult r = lstsq(a, vectorize(t));
    if (r.residual > tol * (1.0 + frob(t)))
      throw StructuralError("ModuleMapSpace::coords: map outside space");
    return r.x.col(0);
  }

  Matrix from_coords(const Vector& c) const {
    Matrix t = Matrix::Zero(target->dim, source->dim);
    for (int k = 0; k < dim(); ++k) t += c[k] * basis[k];
    return t;
  }
};

/// Rank-one operator z -> x . <y, z>.
inline Matrix rank_one(const HilbertModule& tgt, const HilbertModule& src,
                       const Vector& x, const Vector& y) {
  if (!(*tgt.algebra == *src.algebra))
    throw StructuralError("rank_one: coefficient algebra mismatch");
  Matrix t(tgt.dim, src.dim);
  for (int j = 0; j < src.dim; ++j)
    t.col(j) = tgt.act(x, src.ip(y, Vector::Unit(src.dim, j)));
  return t;
}

/// All B-linear maps source -> target, via the nullspace of the commutation
/// constraints T R_b = R'_b T over an algebra basis.
inline ModuleMapSpace compacts_space(const HilbertModule& src, const HilbertModule& tgt,
                                     double tol = kDefaultTol) {
  const int ad = src.algebra->dim();
  const int rows_per = tgt.dim * src.dim;
  Matrix constraints(ad * rows_per, rows_per);
  double scale = 1.0;
  for (int a = 0; a < ad; ++a) {
    AlgebraElement b = basis_element(*src.algebra, a);
    Matrix rs = src.action_matrix(b);
    Matrix rt = tgt.action_matrix(b);
    scale = std::max({scale, spectral_norm(rs), spectral_norm(rt)});
    constraints.block(a * rows_per, 0, rows_per, rows_per) =
        kron(rs.transpose(), Matrix::Identity(tgt.dim, tgt.dim)) -
        kron(Matrix::Identity(src.dim, src.dim), rt);
  }
  ModuleMapSpace s;
  s.source = &src;
  s.target = &tgt;
  Matrix ns = nullspace(constraints, tol, scale);
  for (int k = 0; k < ns.cols(); ++k)
    s.basis.push_back(unvectorize(ns.col(k), tgt.dim, src.dim));
  return s;
}

/// Adjoint: the unique T^* with <T n, m>_target = <n, T^* m>_source, solved
/// as a linear system over basis pairs.
inline Matrix adjoint_map(const HilbertModule& src, const HilbertModule& tgt,
                          const Matrix& t, double tol = kDefaultTol) {
  const int ad = src.algebra->dim();
  const int unknowns = src.dim * tgt.dim;
  Matrix a = Matrix::Zero(src.dim * tgt.dim * ad, unknowns);
  Vector rhs = Vector::Zero(src.dim * tgt.dim * ad);
  int row = 0;
  for (int i = 0; i < src.dim; ++i)
    for (int j = 0; j < tgt.dim; ++j) {
      Vector lhs = tgt.inner.apply(t.col(i).conjugate(), Vector::Unit(tgt.dim, j));
      for (int av = 0; av < ad; ++av) {
        for (int k = 0; k < src.dim; ++k)
          a(row, k * tgt.dim + j) += src.inner.at(i, k, av);
        rhs[row] = lhs[av];
        ++row;
      }
    }
  LstsqResult r = lstsq(a, rhs);
  if (r.residual > tol * (1.0 + frob(t)) * std::sqrt(double(std::max<Eigen::Index>(1, rhs.size()))))
    throw StructuralError("adjoint_map: no adjoint within tolerance");
  Matrix ts(src.dim, tgt.dim);
  for (int k = 0; k < src.dim; ++k)
    for (int j = 0; j < tgt.dim; ++j) ts(k, j) = r.x(k * tgt.dim + j, 0);
  return ts;
}

/// Operator norm of a module map, resolved through the localizations.
inline double compacts_norm(const ModuleLocalization& src, const ModuleLocalization& dst,
                            const Matrix& t) {
  return spectral_norm(ModuleLocalization::operator_on(src, dst, t));
}

inline double compacts_norm(const HilbertModule& src, const HilbertModule& tgt,
                            const Matrix& t) {
  return compacts_norm(localize(src), localize(tgt), t);
}

/// Appendix check: (||sum |x_i><x_i| ||_op , ||sum <x_i,x_i>||_B).
inline std::pair<double, double> norm_of_compacts_check(const HilbertModule& m,
                                                        const std::vector<Vector>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  Matrix t = Matrix::Zero(m.dim, m.dim);
  AlgebraElement s = AlgebraElement::zero(*m.algebra);
  for (const auto& x : xs) {
    t += rank_one(m, m, x, x);
    s = s + m.ip(x, x);
  }
  return {compacts_norm(m, m, t), operator_norm(s)};
}

// ---------------------------------------------------------------------------
// Block presentation of the compacts K_B(Y)
// ---------------------------------------------------------------------------

/// K_B(Y) of a full module is *-isomorphic to a BlockAlgebra whose block
/// sizes are the module multiplicities. The isomorphism compresses the
/// localized operator onto the invariant subspace Y (x) f_p spanned by a
/// single column p of each algebra block.
struct CompactsBlockRep {
  BlockAlgebra algebra;
  ModuleLocalization loc;
  std::vector<Matrix> block_iso;  // per algebra block: rank x m_b isometry

  AlgebraElement to_blocks(const Matrix& t) const {
    AlgebraElement e = AlgebraElement::zero(algebra);
    Matrix op = ModuleLocalization::operator_on(loc, loc, t);
    for (size_t b = 0; b < block_iso.size(); ++b)
      e.data[b] = block_iso[b].adjoint() * op * block_iso[b];
    return e;
  }
};

inline CompactsBlockRep compacts_block_rep(const HilbertModule& m) {
  CompactsBlockRep rep;
  rep.loc = localize(m);
  const BlockAlgebra& alg = *m.algebra;
  const int n = alg.rep_dim();
  int off = 0;
  for (int b = 0; b < alg.n_blocks(); ++b) {
    Matrix cols(rep.loc.rank, m.dim);
    for (int i = 0; i < m.dim; ++i) cols.col(i) = rep.loc.to_ortho.col(i * n + off);
    Eigen::JacobiSVD<Matrix> svd(cols, Eigen::ComputeThinU);
    const auto& sv = svd.singularValues();
    const double cut = (sv.size() ? sv(0) : 0.0) * kDefaultTol;
    int mult = 0;
    for (int i = 0; i < sv.size(); ++i)
      if (sv(i) > cut) ++mult;
    rep.block_iso.push_back(svd.matrixU().leftCols(mult));
    rep.algebra.blocks.push_back(mult);
    off += alg.blocks[b];
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Module validation (the DE9 package for a standalone module)
// ---------------------------------------------------------------------------

inline ValidationReport validate_module(const HilbertModule& m, double tol = kDefaultTol) {
  ValidationReport rep;
  const BlockAlgebra& alg = *m.algebra;
  const int d = m.dim, ad = alg.dim();
  if (m.action.d1 != d || m.action.d2 != ad || m.action.d3 != d)
    rep.structural("action tensor shape mismatch");
  if (m.inner.d1 != d || m.inner.d2 != d || m.inner.d3 != ad)
    rep.structural("inner tensor shape mismatch");
  if (!rep.structurally_sound()) return rep;

  // HM1: unit acts trivially; (m.b).b' = m.(bb').
  for (int i = 0; i < d; ++i) {
    Vector ei = Vector::Unit(d, i);
    double r = (m.act(ei, AlgebraElement::identity(alg)) - ei).norm();
    rep.record("HM1", r, tol, {i}, "unit acts trivially");
  }
  for (int a = 0; a < ad; ++a)
    for (int b = 0; b < ad; ++b) {
      AlgebraElement ea = basis_element(alg, a), eb = basis_element(alg, b);
      Matrix lhs = m.action_matrix(eb) * m.action_matrix(ea);
      Matrix rhs = m.action_matrix(ea * eb);
      rep.record("HM1", frob(lhs - rhs), tol, {a, b}, "right action associativity");
    }

  // HM2: <m, n.b> = <m,n> b.
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int a = 0; a < ad; ++a) {
        AlgebraElement b = basis_element(alg, a);
        Vector ei = Vector::Unit(d, i), ej = Vector::Unit(d, j);
        AlgebraElement lhs = m.ip(ei, m.act(ej, b));
        AlgebraElement rhs = m.ip(ei, ej) * b;
        rep.record("HM2", operator_norm(lhs - rhs), tol, {i, j, a});
      }

  // HM3: <m,n>^* = <n,m>.
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      Vector ei = Vector::Unit(d, i), ej = Vector::Unit(d, j);
      rep.record("HM3", operator_norm(m.ip(ei, ej).star() - m.ip(ej, ei)), tol, {i, j});
    }

  // HM4: positivity of the localized Gram; definiteness via the trace form.
  {
    const int n = alg.rep_dim();
    Matrix gram(d * n, d * n);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        gram.block(i * n, j * n, n, n) = m.ip(Vector::Unit(d, i), Vector::Unit(d, j)).full();
    double scale = std::max(1.0, spectral_norm(gram));
    Eigen::VectorXd ev = hermitian_eigenvalues(gram);
    rep.record("HM4", std::max(0.0, -ev.minCoeff() / scale), tol, {},
               "localized Gram not positive");
    Matrix tr(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        tr(i, j) = m.ip(Vector::Unit(d, i), Vector::Unit(d, j)).full().trace();
    Eigen::VectorXd tev = hermitian_eigenvalues(tr);
    if (tev.minCoeff() <= tol * std::max(1.0, tev.cwiseAbs().maxCoeff()))
      rep.record_fail("HM4", {}, "inner product degenerate: <m,m>=0 with m != 0");
  }

  // HM5: fullness, span{<m,n>} = B.
  {
    Matrix span(ad, d * d);
    int c = 0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        span.col(c++) = coords_of(m.ip(Vector::Unit(d, i), Vector::Unit(d, j)));
    int rank = numerical_rank(span, tol);
    if (rank != ad)
      rep.record_fail("HM5", {rank, ad}, "inner products do not span the algebra");
    rep.check("HM5");
  }
  return rep;
}

}  // namespace fell
