#pragma once

// Dense complex linear algebra helpers shared by the whole library:
// rank/nullspace decisions via SVD thresholding, least-squares solves with
// residual gating, and flat rank-3 structure tensors.

#include <Eigen/Dense>
#include <complex>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace fell {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr double kDefaultTol = 1e-9;

/// Raised when input data is malformed (index/shape problems), as opposed to
/// a mathematical axiom failure, which validators report instead of throwing.
struct StructuralError : std::runtime_error {
  explicit StructuralError(const std::string& what) : std::runtime_error(what) {}
};

/// Rank-3 structure tensor, stored flat row-major over (left-in, right-in, out).
struct Tensor3 {
  int d1 = 0, d2 = 0, d3 = 0;
  std::vector<Complex> a;

  Tensor3() = default;
  Tensor3(int n1, int n2, int n3)
      : d1(n1), d2(n2), d3(n3), a(static_cast<size_t>(n1) * n2 * n3, Complex(0, 0)) {}

  Complex& at(int i, int j, int k) {
    return a[(static_cast<size_t>(i) * d2 + j) * d3 + k];
  }
  Complex at(int i, int j, int k) const {
    return a[(static_cast<size_t>(i) * d2 + j) * d3 + k];
  }

  /// Bilinear evaluation: out_k = sum_ij x_i y_j T(i,j,k).
  Vector apply(const Vector& x, const Vector& y) const {
    if (x.size() != d1 || y.size() != d2)
      throw StructuralError("Tensor3::apply: operand size mismatch");
    Vector out = Vector::Zero(d3);
    for (int i = 0; i < d1; ++i) {
      if (x[i] == Complex(0, 0)) continue;
      for (int j = 0; j < d2; ++j) {
        const Complex c = x[i] * y[j];
        if (c == Complex(0, 0)) continue;
        for (int k = 0; k < d3; ++k) out[k] += c * at(i, j, k);
      }
    }
    return out;
  }

  /// Sesquilinear evaluation (conjugate-linear in the first slot).
  Vector apply_sesqui(const Vector& x, const Vector& y) const {
    return apply(x.conjugate(), y);
  }
};

/// Conjugate-linear map: y = M * conj(x).
struct ConjLinearMap {
  Matrix m;
  Vector apply(const Vector& x) const {
    if (x.size() != m.cols()) throw StructuralError("ConjLinearMap: size mismatch");
    return m * x.conjugate();
  }
};

inline double frob(const Matrix& m) { return m.norm(); }

/// Largest singular value (0 for empty matrices).
inline double spectral_norm(const Matrix& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  return Eigen::JacobiSVD<Matrix>(m).singularValues()(0);
}

/// Orthonormal basis of the right nullspace. Singular values are thresholded
/// at tol * max(sigma_max, scale): the scale floor keeps a nominally-zero
/// constraint matrix (pure floating-point noise) from acquiring fake rank.
inline Matrix nullspace(const Matrix& a, double tol = kDefaultTol, double scale = 0.0) {
  if (a.rows() == 0) return Matrix::Identity(a.cols(), a.cols());
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double cut = tol * std::max(sv.size() > 0 ? sv(0) : 0.0, scale);
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > cut) ++rank;
  return svd.matrixV().rightCols(a.cols() - rank);
}

/// Numerical rank with relative SVD threshold.
inline int numerical_rank(const Matrix& a, double tol = kDefaultTol) {
  if (a.rows() == 0 || a.cols() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(a);
  const auto& sv = svd.singularValues();
  const double cut = sv(0) * tol;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > cut) ++rank;
  return rank;
}

struct LstsqResult {
  Matrix x;
  double residual = 0.0;  // Frobenius norm of A*x - b
};

/// Minimum-norm least squares solve of A x = b.
inline LstsqResult lstsq(const Matrix& a, const Matrix& b) {
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(kDefaultTol);
  LstsqResult r;
  r.x = svd.solve(b);
  r.residual = frob(a * r.x - b);
  return r;
}

/// Moore-Penrose pseudoinverse with relative threshold.
inline Matrix pinv(const Matrix& a, double tol = kDefaultTol) {
  if (a.rows() == 0 || a.cols() == 0) return Matrix::Zero(a.cols(), a.rows());
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cut = sv(0) * tol;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > cut) inv(i) = 1.0 / sv(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();
}

/// Eigenvalues of a (numerically) Hermitian matrix, ascending.
inline Eigen::VectorXd hermitian_eigenvalues(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.adjoint()));
  return es.eigenvalues();
}

inline Matrix random_unitary(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = Complex(g(rng), g(rng));
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ();
  Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < n; ++i) {
    Complex d = r(i, i);
    double ad = std::abs(d);
    q.col(i) *= (ad > 0 ? d / ad : Complex(1, 0));
  }
  return q;
}

inline Vector random_vector(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = Complex(g(rng), g(rng));
  return v;
}

/// vec(M) column-major, matching Eigen's internal layout.
inline Vector vectorize(const Matrix& m) {
  return Eigen::Map<const Vector>(m.data(), m.size());
}

inline Matrix unvectorize(const Vector& v, int rows, int cols) {
  if (v.size() != static_cast<Eigen::Index>(rows) * cols)
    throw StructuralError("unvectorize: size mismatch");
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

/// Kronecker product, used to inflate matrices over block algebras.
inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace fell
