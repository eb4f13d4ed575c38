#pragma once

// Fell bundles over finite groupoids as structure-tensor data: per-arrow
// fibres, multiplication tensors on composable pairs, conjugate-linear
// involutions, and the full F-axiom validator including saturation.

#include <map>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

#include "fell/cstar.hpp"
#include "fell/groupoid.hpp"
#include "fell/linalg.hpp"
#include "fell/report.hpp"

namespace fell {

/// Fell bundle with concrete block-matrix unit fibres. Coordinates of a unit
/// fibre are the matrix-unit coordinates of its BlockAlgebra; non-unit fibres
/// are abstract spaces tied together by the structure tensors.
struct FellBundle {
  FiniteGroupoid base;
  std::vector<BlockAlgebra> unit_algebras;       // per unit
  std::vector<int> fibre_dims;                   // per arrow
  std::map<std::pair<int, int>, Tensor3> mult;   // composable pairs
  std::vector<Matrix> invol;                     // arrow g: B(g) -> B(inv g), applied to conj coords

  int dim(int g) const { return fibre_dims[g]; }

  const Tensor3& mult_tensor(int g, int h) const {
    auto it = mult.find({g, h});
    if (it == mult.end()) throw StructuralError("FellBundle: missing mult tensor");
    return it->second;
  }

  Vector multiply(int g, int h, const Vector& x, const Vector& y) const {
    if (!base.composable(g, h)) throw StructuralError("FellBundle::multiply: not composable");
    return mult_tensor(g, h).apply(x, y);
  }

  Vector involute(int g, const Vector& x) const {
    return invol[g] * x.conjugate();
  }

  /// Element of the unit-fibre algebra from coordinates at a unit arrow.
  AlgebraElement unit_element(int unit_arrow, const Vector& v) const {
    int u = base.src[unit_arrow];
    return element_from_coords(unit_algebras[u], v);
  }

  /// Derived fibre norm ||b|| = ||b* b||^{1/2} in B(src(g)).
  double norm(int g, const Vector& x) const {
    Vector star = involute(g, x);
    Vector sq = multiply(base.inv[g], g, star, x);
    return std::sqrt(operator_norm(unit_element(base.unit_embed[base.src[g]], sq)));
  }

  Vector unit_identity_coords(int u) const {
    return coords_of(AlgebraElement::identity(unit_algebras[u]));
  }
};

inline double fibre_norm(const FellBundle& fb, int g, const Vector& x) { return fb.norm(g, x); }

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

inline ValidationReport validate_fell_bundle(const FellBundle& fb, double tol = kDefaultTol) {
  ValidationReport rep;
  const FiniteGroupoid& g = fb.base;
  {
    ValidationReport base_rep = validate_groupoid(g);
    if (!base_rep.pass()) {
      rep.structural("base groupoid invalid");
      rep.merge(base_rep);
      return rep;
    }
  }
  if (static_cast<int>(fb.unit_algebras.size()) != g.n_units)
    rep.structural("one unit algebra per unit required");
  if (static_cast<int>(fb.fibre_dims.size()) != g.n_arrows)
    rep.structural("one fibre dimension per arrow required");
  if (static_cast<int>(fb.invol.size()) != g.n_arrows)
    rep.structural("one involution per arrow required");
  if (!rep.structurally_sound()) return rep;

  for (int u = 0; u < g.n_units; ++u)
    if (fb.fibre_dims[g.unit_embed[u]] != fb.unit_algebras[u].dim())
      rep.structural("unit fibre dimension does not match its block algebra at unit " +
                     std::to_string(u));
  for (int h = 0; h < g.n_arrows; ++h) {
    if (fb.fibre_dims[h] <= 0) rep.structural("empty fibre at arrow " + std::to_string(h));
    if (fb.invol[h].rows() != fb.fibre_dims[g.inv[h]] || fb.invol[h].cols() != fb.fibre_dims[h])
      rep.structural("involution shape mismatch at arrow " + std::to_string(h));
  }
  for (int a = 0; a < g.n_arrows; ++a)
    for (int b = 0; b < g.n_arrows; ++b) {
      auto it = fb.mult.find({a, b});
      if (g.composable(a, b)) {
        if (it == fb.mult.end()) {
          rep.structural("missing mult tensor on composable pair (" + std::to_string(a) + "," +
                         std::to_string(b) + ")");
        } else if (it->second.d1 != fb.fibre_dims[a] || it->second.d2 != fb.fibre_dims[b] ||
                   it->second.d3 != fb.fibre_dims[g.comp[a][b]]) {
          rep.structural("mult tensor shape mismatch on (" + std::to_string(a) + "," +
                         std::to_string(b) + ")");
        }
      } else if (it != fb.mult.end()) {
        rep.structural("mult tensor on non-composable pair (" + std::to_string(a) + "," +
                       std::to_string(b) + ")");
      }
    }
  if (!rep.structurally_sound()) return rep;

  // UFIB: unit fibres carry exactly their BlockAlgebra arithmetic.
  for (int u = 0; u < g.n_units; ++u) {
    int e = g.unit_embed[u];
    Tensor3 am = algebra_mult_tensor(fb.unit_algebras[u]);
    const Tensor3& bm = fb.mult_tensor(e, e);
    double r = 0.0;
    for (size_t i = 0; i < am.a.size(); ++i) r = std::max(r, std::abs(am.a[i] - bm.a[i]));
    rep.record("UFIB", r, tol, {u}, "unit mult tensor != block algebra product");
    Matrix sm = algebra_star_matrix(fb.unit_algebras[u]);
    rep.record("UFIB", frob(sm - fb.invol[e]), tol, {u},
               "unit involution != block algebra star");
  }

  // F1/F5 are structural with tensor-indexed fibres; record them as checked.
  rep.check("F1");
  rep.check("F5");
  // F2/F6/F8: bilinearity and conjugate-linearity hold by the tensor
  // representation; F8 (involutive) needs the two matrices to compose to id.
  rep.check("F2");
  rep.check("F6");
  for (int h = 0; h < g.n_arrows; ++h) {
    Matrix round_trip = fb.invol[g.inv[h]] * fb.invol[h].conjugate();
    rep.record("F8", frob(round_trip - Matrix::Identity(fb.fibre_dims[h], fb.fibre_dims[h])),
               tol, {h}, "invol(inv g) after invol(g) != id");
  }

  // F3: associativity on all basis triples.
  for (int a = 0; a < g.n_arrows; ++a)
    for (int b = 0; b < g.n_arrows; ++b) {
      if (!g.composable(a, b)) continue;
      for (int c = 0; c < g.n_arrows; ++c) {
        if (!g.composable(b, c)) continue;
        int ab = g.comp[a][b], bc = g.comp[b][c];
        double scale = 1.0;
        for (int i = 0; i < fb.fibre_dims[a]; ++i)
          for (int j = 0; j < fb.fibre_dims[b]; ++j)
            for (int k = 0; k < fb.fibre_dims[c]; ++k) {
              Vector ei = Vector::Unit(fb.fibre_dims[a], i);
              Vector ej = Vector::Unit(fb.fibre_dims[b], j);
              Vector ek = Vector::Unit(fb.fibre_dims[c], k);
              Vector lhs = fb.multiply(ab, c, fb.multiply(a, b, ei, ej), ek);
              Vector rhs = fb.multiply(a, bc, ei, fb.multiply(b, c, ej, ek));
              rep.record("F3", (lhs - rhs).norm() / scale, tol, {a, b, c, i, j, k});
            }
      }
    }

  // F7: anti-multiplicativity of the involution.
  for (int a = 0; a < g.n_arrows; ++a)
    for (int b = 0; b < g.n_arrows; ++b) {
      if (!g.composable(a, b)) continue;
      int ab = g.comp[a][b];
      for (int i = 0; i < fb.fibre_dims[a]; ++i)
        for (int j = 0; j < fb.fibre_dims[b]; ++j) {
          Vector ei = Vector::Unit(fb.fibre_dims[a], i);
          Vector ej = Vector::Unit(fb.fibre_dims[b], j);
          Vector lhs = fb.involute(ab, fb.multiply(a, b, ei, ej));
          Vector rhs = fb.multiply(g.inv[b], g.inv[a], fb.involute(b, ej), fb.involute(a, ei));
          rep.record("F7", (lhs - rhs).norm(), tol, {a, b, i, j});
        }
    }

  // F4/F9: norm inequalities and the C*-identity, on basis vectors and a few
  // deterministic pseudo-random combinations.
  std::mt19937_64 rng(0x5eedf00dULL);
  auto fibre_vectors = [&](int h) {
    std::vector<Vector> out;
    for (int i = 0; i < fb.fibre_dims[h]; ++i) out.push_back(Vector::Unit(fb.fibre_dims[h], i));
    for (int t = 0; t < 3; ++t) out.push_back(random_vector(fb.fibre_dims[h], rng));
    return out;
  };
  for (int a = 0; a < g.n_arrows; ++a) {
    for (const Vector& x : fibre_vectors(a)) {
      double nx = fb.norm(a, x);
      double nstar = fb.norm(g.inv[a], fb.involute(a, x));
      rep.record("F9", std::abs(nx - nstar) / (1.0 + nx), tol, {a}, "||b*|| != ||b||");
      // ||b b*|| computed in B(rng(a)) must equal ||b||^2 computed in B(src(a)).
      Vector bbstar = fb.multiply(a, g.inv[a], x, fb.involute(a, x));
      double nbb = operator_norm(fb.unit_element(g.unit_embed[g.rng[a]], bbstar));
      rep.record("F9", std::abs(nbb - nx * nx) / (1.0 + nx * nx), tol, {a},
                 "||b b*|| != ||b||^2");
    }
    for (int b = 0; b < g.n_arrows; ++b) {
      if (!g.composable(a, b)) continue;
      for (const Vector& x : fibre_vectors(a))
        for (const Vector& y : fibre_vectors(b)) {
          double lhs = fb.norm(g.comp[a][b], fb.multiply(a, b, x, y));
          double bound = fb.norm(a, x) * fb.norm(b, y);
          rep.record("F4", std::max(0.0, lhs - bound) / (1.0 + bound), tol, {a, b},
                     "||b1 b2|| > ||b1|| ||b2||");
        }
    }
  }

  // F10: b* b >= 0 for every b in B(g), exactly: the inflated matrix
  // [rep(e_i^* e_j)] over B(src(g)) must be positive semidefinite.
  for (int a = 0; a < g.n_arrows; ++a) {
    const int d = fb.fibre_dims[a];
    const BlockAlgebra& alg = fb.unit_algebras[g.src[a]];
    const int n = alg.rep_dim();
    Matrix big(d * n, d * n);
    for (int i = 0; i < d; ++i) {
      Vector star_i = fb.involute(a, Vector::Unit(d, i));
      for (int j = 0; j < d; ++j) {
        Vector prod = fb.multiply(g.inv[a], a, star_i, Vector::Unit(d, j));
        big.block(i * n, j * n, n, n) =
            fb.unit_element(g.unit_embed[g.src[a]], prod).full();
      }
    }
    double scale = std::max(1.0, spectral_norm(big));
    Eigen::VectorXd ev = hermitian_eigenvalues(big);
    rep.record("F10", std::max(0.0, -ev.minCoeff() / scale), tol, {a},
               "some b*b is not positive");
    // Norm definiteness (fibres must be Banach spaces): b*b = 0 only for b = 0,
    // i.e. the trace form of [e_i^* e_j] is positive definite.
    Matrix tr(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) tr(i, j) = big.block(i * n, j * n, n, n).trace();
    Eigen::VectorXd tev = hermitian_eigenvalues(tr);
    if (tev.minCoeff() <= tol * std::max(1.0, tev.cwiseAbs().maxCoeff()))
      rep.record_fail("F9", {a}, "degenerate fibre norm: b*b = 0 with b != 0");
  }

  // SAT: span{B(g) B(h)} = B(gh) for every composable pair.
  for (int a = 0; a < g.n_arrows; ++a)
    for (int b = 0; b < g.n_arrows; ++b) {
      if (!g.composable(a, b)) continue;
      int ab = g.comp[a][b];
      Matrix span(fb.fibre_dims[ab], fb.fibre_dims[a] * fb.fibre_dims[b]);
      int c = 0;
      for (int i = 0; i < fb.fibre_dims[a]; ++i)
        for (int j = 0; j < fb.fibre_dims[b]; ++j)
          span.col(c++) = fb.multiply(a, b, Vector::Unit(fb.fibre_dims[a], i),
                                      Vector::Unit(fb.fibre_dims[b], j));
      if (numerical_rank(span, tol) != fb.fibre_dims[ab])
        rep.record_fail("SAT", {a, b}, "products do not span the target fibre");
    }
  rep.check("SAT");
  return rep;
}

// ---------------------------------------------------------------------------
// Constructions
// ---------------------------------------------------------------------------

/// Line bundle: every fibre is C, multiplication is complex multiplication
/// along the groupoid, involution is conjugation.
inline FellBundle make_line_bundle(const FiniteGroupoid& g) {
  FellBundle fb;
  fb.base = g;
  fb.unit_algebras.assign(g.n_units, BlockAlgebra{{1}});
  fb.fibre_dims.assign(g.n_arrows, 1);
  for (auto [a, b] : g.composable_pairs()) {
    Tensor3 t(1, 1, 1);
    t.at(0, 0, 0) = 1.0;
    fb.mult[{a, b}] = t;
  }
  fb.invol.assign(g.n_arrows, Matrix::Identity(1, 1));
  return fb;
}

/// Constant algebra bundle B(h) = A for a single BlockAlgebra, with
/// multiplication a.beta_g(b) for a groupoid homomorphism beta into Aut(A)
/// (given as coordinate matrices), then an optional unitary re-basis of the
/// non-unit fibres.
struct BundleProfile {
  int groupoid_index = 1;           // into bundle_groupoid_catalogue()
  std::vector<int> blocks = {1};    // unit fibre algebra
  bool twist_fibres = true;         // random unitary re-basis off the units
  bool inner_twist = true;          // diagonal-unitary homomorphism on groups
};

inline std::vector<FiniteGroupoid> bundle_groupoid_catalogue() {
  return {
      make_trivial_groupoid(),
      make_cyclic_group(2),
      make_cyclic_group(3),
      make_cyclic_group(4),
      make_cyclic_group(5),
      make_cyclic_group(6),
      make_pair_groupoid(2),
      disjoint_union(make_cyclic_group(2), make_cyclic_group(2)),
      disjoint_union(make_cyclic_group(2), make_trivial_groupoid()),
      disjoint_union(make_pair_groupoid(2), make_trivial_groupoid()),
  };
}

/// A generated bundle together with the frame data the construction used:
/// all fibres are the constant algebra in canonical coordinates, conjugated
/// by `beta` along arrows and re-based by `t_fwd` per fibre. The demi
/// generator reuses this frame.
struct GeneratedBundle {
  FellBundle fb;
  BlockAlgebra algebra;
  std::vector<Matrix> beta;          // per arrow, on canonical coordinates
  std::vector<Matrix> t_fwd, t_bwd;  // stored = t_fwd * canonical
};

inline GeneratedBundle random_fell_bundle_with_frame(uint64_t seed,
                                                     const BundleProfile& profile) {
  auto catalogue = bundle_groupoid_catalogue();
  if (profile.groupoid_index < 0 ||
      profile.groupoid_index >= static_cast<int>(catalogue.size()))
    throw StructuralError("random_fell_bundle: unknown groupoid index");
  const FiniteGroupoid g = catalogue[profile.groupoid_index];
  BlockAlgebra alg{profile.blocks};
  const int d = alg.dim();
  std::mt19937_64 rng(seed);

  // Unit coboundary: gamma_u = Ad(U_u), with gamma = id on unit 0's component
  // to keep things well-conditioned.
  std::vector<Matrix> gamma(g.n_units);
  std::vector<Matrix> gamma_inv(g.n_units);
  for (int u = 0; u < g.n_units; ++u) {
    std::vector<Matrix> us;
    for (int nb : alg.blocks)
      us.push_back(profile.twist_fibres ? random_unitary(nb, rng) : Matrix::Identity(nb, nb));
    gamma[u] = ad_matrix(alg, us);
    std::vector<Matrix> usinv;
    for (auto& m : us) usinv.push_back(m.adjoint());
    gamma_inv[u] = ad_matrix(alg, usinv);
  }

  // Inner cyclic homomorphism on one-unit groupoids: delta_k = Ad(D^k) with
  // D diagonal n-th roots of unity, so delta is a genuine homomorphism.
  std::vector<Matrix> delta(g.n_arrows, Matrix::Identity(d, d));
  if (g.n_units == 1 && profile.inner_twist) {
    const int n = g.n_arrows;
    std::uniform_int_distribution<int> pick(0, n - 1);
    std::vector<Matrix> droots;
    for (int nb : alg.blocks) {
      Matrix dd = Matrix::Zero(nb, nb);
      for (int i = 0; i < nb; ++i) {
        double ang = 2.0 * std::numbers::pi_v<double> * pick(rng) / n;
        dd(i, i) = Complex(std::cos(ang), std::sin(ang));
      }
      droots.push_back(dd);
    }
    // only valid when arrows are literally Z/n (catalogue groups are cyclic)
    bool cyclic = true;
    for (int a = 0; a < n && cyclic; ++a)
      for (int b = 0; b < n && cyclic; ++b)
        if (g.comp[a][b] != (a + b) % n) cyclic = false;
    if (cyclic)
      for (int k = 0; k < n; ++k) {
        std::vector<Matrix> pw;
        for (size_t bl = 0; bl < droots.size(); ++bl) {
          Matrix p = Matrix::Identity(alg.blocks[bl], alg.blocks[bl]);
          for (int t = 0; t < k; ++t) p = p * droots[bl];
          pw.push_back(p);
        }
        delta[k] = ad_matrix(alg, pw);
      }
  }
  auto beta = [&](int h) -> Matrix {
    if (g.is_unit_arrow(h)) return Matrix::Identity(d, d);
    return gamma[g.rng[h]] * delta[h] * gamma_inv[g.src[h]];
  };

  // Fibre re-basis: stored coords v represent the canonical element T_h^{-1} v.
  std::vector<Matrix> t_fwd(g.n_arrows), t_bwd(g.n_arrows);
  for (int h = 0; h < g.n_arrows; ++h) {
    bool unit = g.is_unit_arrow(h);
    t_fwd[h] = (profile.twist_fibres && !unit) ? random_unitary(d, rng) : Matrix::Identity(d, d);
    t_bwd[h] = t_fwd[h].adjoint();
  }

  FellBundle fb;
  fb.base = g;
  fb.unit_algebras.assign(g.n_units, alg);
  fb.fibre_dims.assign(g.n_arrows, d);
  Tensor3 am = algebra_mult_tensor(alg);
  Matrix sm = algebra_star_matrix(alg);
  for (auto [a, b] : g.composable_pairs()) {
    int ab = g.comp[a][b];
    if (g.is_unit_arrow(a) && g.is_unit_arrow(b)) {
      fb.mult[{a, b}] = am;  // unit fibres are the algebra, bit for bit
      continue;
    }
    Tensor3 t(d, d, d);
    Matrix beta_a = beta(a);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        Vector prod = t_fwd[ab] * am.apply(t_bwd[a] * Vector::Unit(d, i),
                                           beta_a * t_bwd[b] * Vector::Unit(d, j));
        for (int k = 0; k < d; ++k) t.at(i, j, k) = prod[k];
      }
    fb.mult[{a, b}] = t;
  }
  fb.invol.resize(g.n_arrows);
  for (int h = 0; h < g.n_arrows; ++h) {
    if (g.is_unit_arrow(h)) {
      fb.invol[h] = sm;
      continue;
    }
    // b at h maps to beta_{h^{-1}}(b^*) at inv(h).
    fb.invol[h] = t_fwd[g.inv[h]] * beta(g.inv[h]) * sm * t_bwd[h].conjugate();
  }
  GeneratedBundle out;
  out.fb = std::move(fb);
  out.algebra = alg;
  for (int h = 0; h < g.n_arrows; ++h) out.beta.push_back(beta(h));
  out.t_fwd = std::move(t_fwd);
  out.t_bwd = std::move(t_bwd);
  return out;
}

inline FellBundle random_fell_bundle(uint64_t seed, const BundleProfile& profile) {
  return random_fell_bundle_with_frame(seed, profile).fb;
}

}  // namespace fell
