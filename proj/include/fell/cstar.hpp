#pragma once

// Exact finite-dimensional C*-arithmetic for unit fibres: block-diagonal
// matrix algebras, spectral norms, positivity at a declared tolerance, and
// Gram factorization of positive matrices over the algebra.

#include <vector>

#include "fell/linalg.hpp"

namespace fell {

/// Direct sum of full matrix algebras, given by its block dimension list.
struct BlockAlgebra {
  std::vector<int> blocks;

  int dim() const {
    int d = 0;
    for (int n : blocks) d += n * n;
    return d;
  }
  int rep_dim() const {
    int n = 0;
    for (int b : blocks) n += b;
    return n;
  }
  int n_blocks() const { return static_cast<int>(blocks.size()); }

  bool operator==(const BlockAlgebra& o) const { return blocks == o.blocks; }
};

/// Element of a BlockAlgebra, stored per block.
struct AlgebraElement {
  const BlockAlgebra* parent = nullptr;
  std::vector<Matrix> data;

  static AlgebraElement zero(const BlockAlgebra& alg) {
    AlgebraElement e;
    e.parent = &alg;
    for (int n : alg.blocks) e.data.push_back(Matrix::Zero(n, n));
    return e;
  }
  static AlgebraElement identity(const BlockAlgebra& alg) {
    AlgebraElement e;
    e.parent = &alg;
    for (int n : alg.blocks) e.data.push_back(Matrix::Identity(n, n));
    return e;
  }

  AlgebraElement operator+(const AlgebraElement& o) const {
    AlgebraElement r = *this;
    for (size_t b = 0; b < data.size(); ++b) r.data[b] += o.data[b];
    return r;
  }
  AlgebraElement operator-(const AlgebraElement& o) const {
    AlgebraElement r = *this;
    for (size_t b = 0; b < data.size(); ++b) r.data[b] -= o.data[b];
    return r;
  }
  AlgebraElement operator*(const AlgebraElement& o) const {
    AlgebraElement r = *this;
    for (size_t b = 0; b < data.size(); ++b) r.data[b] = data[b] * o.data[b];
    return r;
  }
  AlgebraElement operator*(Complex c) const {
    AlgebraElement r = *this;
    for (auto& m : r.data) m *= c;
    return r;
  }
  AlgebraElement star() const {
    AlgebraElement r = *this;
    for (auto& m : r.data) m = m.adjoint().eval();
    return r;
  }

  /// Block-diagonal realization on C^{rep_dim}.
  Matrix full() const {
    int n = parent->rep_dim();
    Matrix m = Matrix::Zero(n, n);
    int off = 0;
    for (size_t b = 0; b < data.size(); ++b) {
      int nb = parent->blocks[b];
      m.block(off, off, nb, nb) = data[b];
      off += nb;
    }
    return m;
  }
};

/// Coordinates over the matrix-unit basis, ordered block-major then row-major
/// inside each block. This ordering is the wire format for unit fibres.
inline Vector coords_of(const AlgebraElement& e) {
  Vector v(e.parent->dim());
  int k = 0;
  for (size_t b = 0; b < e.data.size(); ++b) {
    int n = e.parent->blocks[b];
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < n; ++q) v[k++] = e.data[b](p, q);
  }
  return v;
}

inline AlgebraElement element_from_coords(const BlockAlgebra& alg, const Vector& v) {
  if (v.size() != alg.dim()) throw StructuralError("element_from_coords: size mismatch");
  AlgebraElement e = AlgebraElement::zero(alg);
  int k = 0;
  for (size_t b = 0; b < e.data.size(); ++b) {
    int n = alg.blocks[b];
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < n; ++q) e.data[b](p, q) = v[k++];
  }
  return e;
}

/// Matrix-unit basis element with flat index i (same ordering as coords_of).
inline AlgebraElement basis_element(const BlockAlgebra& alg, int i) {
  Vector v = Vector::Zero(alg.dim());
  v[i] = Complex(1, 0);
  return element_from_coords(alg, v);
}

/// Block-diagonal rep of the basis element, used to inflate tensors.
inline Matrix basis_rep(const BlockAlgebra& alg, int i) {
  return basis_element(alg, i).full();
}

/// C*-norm: max over blocks of the largest singular value.
inline double operator_norm(const AlgebraElement& a) {
  double n = 0.0;
  for (const auto& m : a.data) n = std::max(n, spectral_norm(m));
  return n;
}

/// Positivity at tolerance: near-Hermitian and spectrum >= -tol*(1+|a|).
inline bool is_positive(const AlgebraElement& a, double tol = kDefaultTol) {
  const double scale = tol * (1.0 + operator_norm(a));
  AlgebraElement h = a - a.star();
  if (operator_norm(h) > 2.0 * scale) return false;
  for (const auto& m : a.data) {
    if (m.rows() == 0) continue;
    Eigen::VectorXd ev = hermitian_eigenvalues(m);
    if (ev.minCoeff() < -scale) return false;
  }
  return true;
}

/// Multiplication structure tensor of the algebra over its matrix-unit basis.
inline Tensor3 algebra_mult_tensor(const BlockAlgebra& alg) {
  const int d = alg.dim();
  Tensor3 t(d, d, d);
  int off = 0;
  for (int b = 0; b < alg.n_blocks(); ++b) {
    const int n = alg.blocks[b];
    auto idx = [&](int p, int q) { return off + p * n + q; };
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < n; ++q)
        for (int s = 0; s < n; ++s) t.at(idx(p, q), idx(q, s), idx(p, s)) += 1.0;
    off += n * n;
  }
  return t;
}

/// Star operation as a conjugate-linear map on coordinates.
inline Matrix algebra_star_matrix(const BlockAlgebra& alg) {
  const int d = alg.dim();
  Matrix m = Matrix::Zero(d, d);
  int off = 0;
  for (int b = 0; b < alg.n_blocks(); ++b) {
    const int n = alg.blocks[b];
    for (int p = 0; p < n; ++p)
      for (int q = 0; q < n; ++q) m(off + q * n + p, off + p * n + q) = 1.0;
    off += n * n;
  }
  return m;
}

/// Coordinate matrix of a *-automorphism given by unitary conjugation with
/// the given per-block unitaries.
inline Matrix ad_matrix(const BlockAlgebra& alg, const std::vector<Matrix>& unitaries) {
  const int d = alg.dim();
  Matrix m(d, d);
  for (int i = 0; i < d; ++i) {
    AlgebraElement e = basis_element(alg, i);
    for (int b = 0; b < alg.n_blocks(); ++b)
      e.data[b] = unitaries[b] * e.data[b] * unitaries[b].adjoint();
    m.col(i) = coords_of(e);
  }
  return m;
}

/// k x k matrix over a BlockAlgebra.
using AlgebraMatrix = std::vector<std::vector<AlgebraElement>>;

inline Matrix inflate(const AlgebraMatrix& g) {
  const int k = static_cast<int>(g.size());
  if (k == 0) return Matrix(0, 0);
  const int n = g[0][0].parent->rep_dim();
  Matrix m(k * n, k * n);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) m.block(i * n, j * n, n, n) = g[i][j].full();
  return m;
}

/// Gram factorization of a positive matrix over the algebra: returns (b_il)
/// with G_ij = sum_l b_il * b_jl^*, via the Hermitian square root of the
/// inflated matrix read back off blockwise.
inline AlgebraMatrix gram_factorize(const AlgebraMatrix& g, double tol = kDefaultTol) {
  const int k = static_cast<int>(g.size());
  if (k == 0) return {};
  const BlockAlgebra& alg = *g[0][0].parent;
  const int n = alg.rep_dim();
  Matrix big = inflate(g);
  const double scale = tol * (1.0 + spectral_norm(big));
  if (frob(big - big.adjoint()) > 2.0 * scale * std::sqrt(double(big.size())))
    throw std::domain_error("gram_factorize: input not Hermitian");
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (big + big.adjoint()));
  if (es.eigenvalues().minCoeff() < -scale)
    throw std::domain_error("gram_factorize: input not positive");
  Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
  Matrix root = es.eigenvectors() * lam.cwiseSqrt().asDiagonal() *
                es.eigenvectors().adjoint();
  AlgebraMatrix out(k, std::vector<AlgebraElement>(k, AlgebraElement::zero(alg)));
  for (int i = 0; i < k; ++i)
    for (int l = 0; l < k; ++l) {
      Matrix blk = root.block(i * n, l * n, n, n);
      AlgebraElement e = AlgebraElement::zero(alg);
      int off = 0;
      for (int b = 0; b < alg.n_blocks(); ++b) {
        int nb = alg.blocks[b];
        e.data[b] = blk.block(off, off, nb, nb);
        off += nb;
      }
      out[i][l] = e;
    }
  return out;
}

/// Max-norm residual of the factorization contract G_ij = sum_l b_il b_jl^*.
inline double gram_residual(const AlgebraMatrix& g, const AlgebraMatrix& b) {
  const int k = static_cast<int>(g.size());
  double r = 0.0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      AlgebraElement s = AlgebraElement::zero(*g[0][0].parent);
      for (int l = 0; l < k; ++l) s = s + b[i][l] * b[j][l].star();
      r = std::max(r, operator_norm(s - g[i][j]));
    }
  return r;
}

}  // namespace fell
