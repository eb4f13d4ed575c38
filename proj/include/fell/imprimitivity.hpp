#pragma once

// The imprimitivity Fell bundle of a demi-equivalence. Fibres over pairs are
// module-map spaces K(x,y^op) = K_B(M(y), M(x)); the transport Psi_h, the
// involutive Flip, the evaluation Phi and the composition U realize the
// quotient bundle over the imprimitivity groupoid, together with the left
// action and left inner product that make the demi-equivalence two-sided.

#include <memory>
#include <utility>
#include <vector>

#include "fell/demi_equivalence.hpp"
#include "fell/groupoid.hpp"
#include "fell/hilbert_module.hpp"

namespace fell {

/// Raised when an operation's input fails validation; carries the report.
struct InvalidInput : std::runtime_error {
  ValidationReport report;
  InvalidInput(const std::string& what, ValidationReport rep)
      : std::runtime_error(what), report(std::move(rep)) {}
};

/// Element of K(x,y^op), stored as an operator M(y) -> M(x).
struct KElement {
  int x = -1, y = -1;
  Matrix t;
};

/// Cached per-point module data for a demi-equivalence.
struct DemiContext {
  const DemiEquivalence* demi = nullptr;
  std::vector<HilbertModule> modules;
  std::vector<ModuleLocalization> locs;

  explicit DemiContext(const DemiEquivalence& d) : demi(&d) {
    modules.reserve(d.points());
    for (int x = 0; x < d.points(); ++x) modules.push_back(d.module_at(x));
    locs.reserve(d.points());
    for (int x = 0; x < d.points(); ++x) locs.push_back(localize(modules[x]));
  }
  DemiContext(const DemiContext&) = delete;
  DemiContext& operator=(const DemiContext&) = delete;

  const HilbertModule& mod(int x) const { return modules[x]; }

  int sigma(int x) const { return demi->action.sigma[x]; }
  int act(int x, int h) const { return demi->action.ract(x, h); }

  /// Operator norm of an element of K(x,y^op).
  double k_norm(const KElement& e) const {
    return compacts_norm(locs[e.y], locs[e.x], e.t);
  }

  KElement k_rank_one(int x, int y, const Vector& m, const Vector& n) const {
    return KElement{x, y, rank_one(modules[x], modules[y], m, n)};
  }
};

/// K(x,y^op) as a module-map space (requires sigma(x) == sigma(y)).
inline ModuleMapSpace k_fibre(const DemiContext& ctx, int x, int y) {
  if (ctx.sigma(x) != ctx.sigma(y)) throw StructuralError("k_fibre: anchor mismatch");
  return compacts_space(ctx.mod(y), ctx.mod(x));
}

/// Psi_h: K(a,b^op) -> K(a.h^{-1}, (b.h^{-1})^op) for sigma(a)=sigma(b)=s(h).
/// Determined by (m . b) (x) n^op  |->  m (x) (n . b^*)^op: the input is
/// decomposed over the spanning family rank_one(m_i . c_j, n_k), which is
/// solvable because M(a) = span M(a.h^{-1}) . B(h).
inline KElement psi_transport(const DemiContext& ctx, int h, const KElement& xi,
                              double tol = kDefaultTol) {
  const DemiEquivalence& d = *ctx.demi;
  const FiniteGroupoid& g = d.bundle.base;
  if (ctx.sigma(xi.x) != g.src[h] || ctx.sigma(xi.y) != g.src[h])
    throw StructuralError("psi_transport: fibre not anchored at s(h)");
  const int hinv = g.inv[h];
  const int x = ctx.act(xi.x, hinv), y = ctx.act(xi.y, hinv);
  const int dx = d.dim(x), db = d.bundle.fibre_dims[h], dn = d.dim(xi.y);

  // Spanning family and its flat matrix.
  const int cols = dx * db * dn;
  Matrix span(static_cast<Eigen::Index>(d.dim(xi.x)) * dn, cols);
  std::vector<Vector> acted(static_cast<size_t>(dx) * db);
  for (int i = 0; i < dx; ++i)
    for (int j = 0; j < db; ++j)
      acted[i * db + j] = d.ract(x, h, Vector::Unit(dx, i), Vector::Unit(db, j));
  int c = 0;
  for (int i = 0; i < dx; ++i)
    for (int j = 0; j < db; ++j)
      for (int k = 0; k < dn; ++k)
        span.col(c++) = vectorize(
            rank_one(ctx.mod(xi.x), ctx.mod(xi.y), acted[i * db + j], Vector::Unit(dn, k)));
  LstsqResult sol = lstsq(span, vectorize(xi.t));
  if (sol.residual > tol * (1.0 + frob(xi.t)))
    throw StructuralError("psi_transport: decomposition residual above tolerance");

  std::vector<Vector> moved(static_cast<size_t>(db) * dn);
  for (int j = 0; j < db; ++j) {
    Vector bstar = d.bundle.involute(h, Vector::Unit(db, j));
    for (int k = 0; k < dn; ++k)
      moved[j * dn + k] = d.ract(xi.y, hinv, Vector::Unit(dn, k), bstar);
  }
  Matrix out = Matrix::Zero(dx, d.dim(y));
  c = 0;
  for (int i = 0; i < dx; ++i)
    for (int j = 0; j < db; ++j)
      for (int k = 0; k < dn; ++k) {
        Complex lam = sol.x(c++, 0);
        if (lam == Complex(0, 0)) continue;
        out += lam * rank_one(ctx.mod(x), ctx.mod(y), Vector::Unit(dx, i), moved[j * dn + k]);
      }
  return KElement{x, y, out};
}

/// Flip: K(x,y^op) -> K(y,x^op), the adjoint map (m (x) n^op |-> n (x) m^op).
inline KElement flip(const DemiContext& ctx, const KElement& xi, double tol = kDefaultTol) {
  return KElement{xi.y, xi.x, adjoint_map(ctx.mod(xi.y), ctx.mod(xi.x), xi.t, tol)};
}

/// Phi: K(x,y^op) x M(y) -> M(x); in the operator picture, evaluation.
inline Vector phi_apply(const DemiContext& ctx, const KElement& xi, const Vector& k) {
  (void)ctx;
  return xi.t * k;
}

/// U: K(x,y^op) x K(y,z^op) -> K(x,z^op); composition of module maps.
inline KElement u_compose(const DemiContext& ctx, const KElement& xi, const KElement& eta) {
  (void)ctx;
  if (xi.y != eta.x) throw StructuralError("u_compose: middle points differ");
  return KElement{xi.x, eta.y, xi.t * eta.t};
}

/// Transport xi along the diagonal orbit to the representative pair (a,b).
inline KElement transport_to(const DemiContext& ctx, const KElement& xi, int a, int b,
                             double tol = kDefaultTol) {
  if (xi.x == a && xi.y == b) return xi;
  const DemiEquivalence& d = *ctx.demi;
  int k = reoq(d.bundle.base, d.action, a, xi.x);  // a . k = xi.x
  if (ctx.act(b, k) != xi.y)
    throw StructuralError("transport_to: target pair not in the same diagonal orbit");
  return psi_transport(ctx, k, xi, tol);
}

// ---------------------------------------------------------------------------
// The constructed bundle
// ---------------------------------------------------------------------------

/// Operator-form imprimitivity Fell bundle: fibres are K(rep(g)) with all
/// structure maps routed through the canonical representatives.
struct ImprimitivityBundle {
  std::shared_ptr<const DemiEquivalence> demi;
  std::unique_ptr<DemiContext> ctx;
  ImprimitivityGroupoid gq;
  std::vector<ModuleMapSpace> fibres;  // per arrow of gq.base, at rep(g)
  double tol = kDefaultTol;

  int arrows() const { return gq.base.n_arrows; }
  int fibre_dim(int g) const { return static_cast<int>(fibres[g].basis.size()); }

  const std::pair<int, int>& rep(int g) const { return gq.rep[g]; }

  KElement basis_element(int g, int k) const {
    return KElement{rep(g).first, rep(g).second, fibres[g].basis[k]};
  }

  KElement element(int g, const Vector& coords) const {
    return KElement{rep(g).first, rep(g).second, fibres[g].from_coords(coords)};
  }

  Vector coords(int g, const KElement& e) const {
    KElement moved = transport_to(*ctx, e, rep(g).first, rep(g).second, tol);
    return fibres[g].coords(moved.t, tol);
  }

  double norm([[maybe_unused]] int g, const KElement& e) const { return ctx->k_norm(e); }

  /// [xi] . [eta]: align the middle legs with Psi, compose with U, transport
  /// the result to the canonical representative.
  KElement multiply(int g1, int g2, const KElement& xi, const KElement& eta) const {
    const DemiEquivalence& d = *demi;
    if (gq.base.src[g1] != gq.base.rng[g2])
      throw StructuralError("ImprimitivityBundle::multiply: arrows not composable");
    int h = reoq(d.bundle.base, d.action, xi.y, eta.x);  // xi.y . h = eta.x
    KElement eta_moved = psi_transport(*ctx, h, eta, tol);
    KElement prod = u_compose(*ctx, xi, eta_moved);
    int g12 = gq.base.comp[g1][g2];
    return transport_to(*ctx, prod, rep(g12).first, rep(g12).second, tol);
  }

  /// [xi]^* = [Flip(xi)] transported to rep(g^{-1}).
  KElement involute(int g, const KElement& xi) const {
    KElement f = flip(*ctx, xi, tol);
    int gi = gq.base.inv[g];
    return transport_to(*ctx, f, rep(gi).first, rep(gi).second, tol);
  }

  /// [xi] |> m for m in M(y): transport so the second leg is y, then apply.
  Vector lact(int g, const KElement& xi, int y, const Vector& m, int* out_point = nullptr) const {
    const DemiEquivalence& d = *demi;
    if (gq.base.src[g] != gq.rho(y))
      throw StructuralError("ImprimitivityBundle::lact: anchor mismatch");
    int k = reoq(d.bundle.base, d.action, y, xi.y);  // y . k = xi.y
    KElement moved = psi_transport(*ctx, k, xi, tol);
    if (moved.y != y) throw StructuralError("lact: transport bookkeeping failed");
    if (out_point) *out_point = moved.x;
    return phi_apply(*ctx, moved, m);
  }

  /// <m, n>_A = [m (x) n^op] at the canonical representative of [x,y^op].
  KElement left_inner(int x, int y, const Vector& m, const Vector& n, int* out_arrow = nullptr) const {
    int g = gq.class_of(x, y);
    if (out_arrow) *out_arrow = g;
    KElement ro = ctx->k_rank_one(x, y, m, n);
    return transport_to(*ctx, ro, rep(g).first, rep(g).second, tol);
  }
};

/// Exhaustive transport-axiom suite over rank-one basis tuples: Psi1..Psi5,
/// the Flip/Psi diagram, U1..U4, the U/Psi diagram, and U in terms of Phi.
inline ValidationReport check_transport_axioms(const DemiContext& ctx, double tol = kDefaultTol) {
  ValidationReport rep;
  const DemiEquivalence& d = *ctx.demi;
  const FiniteGroupoid& g = d.bundle.base;
  const int nx = d.points();
  std::mt19937_64 rng(0x7a115ULL);

  auto pairs_at = [&](int u) {
    std::vector<std::pair<int, int>> out;
    for (int a = 0; a < nx; ++a)
      for (int b = 0; b < nx; ++b)
        if (d.action.sigma[a] == u && d.action.sigma[b] == u) out.emplace_back(a, b);
    return out;
  };

  for (int h = 0; h < g.n_arrows; ++h) {
    const bool unit = g.is_unit_arrow(h);
    for (auto [a, b] : pairs_at(g.src[h])) {
      for (int i = 0; i < d.dim(a); ++i)
        for (int j = 0; j < d.dim(b); ++j) {
          KElement xi = ctx.k_rank_one(a, b, Vector::Unit(d.dim(a), i), Vector::Unit(d.dim(b), j));
          KElement moved = psi_transport(ctx, h, xi, tol);
          // Psi2: isometric.
          rep.record("PSI2", std::abs(ctx.k_norm(moved) - ctx.k_norm(xi)) / (1.0 + ctx.k_norm(xi)),
                     tol, {h, a, b, i, j});
          // Psi4: inverse transport.
          KElement back = psi_transport(ctx, g.inv[h], moved, tol);
          rep.record("PSI4", frob(back.t - xi.t) / (1.0 + frob(xi.t)), tol, {h, a, b, i, j});
          // Psi5: units act as the identity.
          if (unit)
            rep.record("PSI5", frob(moved.t - xi.t) / (1.0 + frob(xi.t)), tol, {h, a, b, i, j});
          // Flip/Psi diagram.
          KElement lhs = flip(ctx, moved, tol);
          KElement rhs = psi_transport(ctx, h, flip(ctx, xi, tol), tol);
          rep.record("FLIPPSI", frob(lhs.t - rhs.t) / (1.0 + frob(lhs.t)), tol, {h, a, b, i, j});
          // Psi3: composition, over all arrows composable with h.
          for (int hp = 0; hp < g.n_arrows; ++hp) {
            if (!g.composable(hp, h)) continue;
            KElement two = psi_transport(ctx, hp, moved, tol);
            KElement direct = psi_transport(ctx, g.comp[hp][h], xi, tol);
            rep.record("PSI3", frob(two.t - direct.t) / (1.0 + frob(direct.t)),
                       tol, {hp, h, a, b, i, j});
          }
        }
      // Psi1: linearity on random combinations.
      KElement r1 = ctx.k_rank_one(a, b, random_vector(d.dim(a), rng), random_vector(d.dim(b), rng));
      KElement r2 = ctx.k_rank_one(a, b, random_vector(d.dim(a), rng), random_vector(d.dim(b), rng));
      Complex lam(0.6, -0.8);
      KElement sum{r1.x, r1.y, r1.t + lam * r2.t};
      KElement moved_sum = psi_transport(ctx, h, sum, tol);
      KElement expect{0, 0, Matrix()};
      KElement m1 = psi_transport(ctx, h, r1, tol), m2 = psi_transport(ctx, h, r2, tol);
      rep.record("PSI1", frob(moved_sum.t - (m1.t + lam * m2.t)) / (1.0 + frob(m1.t)), tol,
                 {h, a, b});
      (void)expect;
    }
  }
  for (const char* l : {"PSI1", "PSI2", "PSI3", "PSI4", "PSI5", "FLIPPSI"}) rep.check(l);

  // U axioms on rank-one tuples with matched anchors.
  for (int u = 0; u < g.n_units; ++u) {
    std::vector<int> pts;
    for (int x = 0; x < nx; ++x)
      if (d.action.sigma[x] == u) pts.push_back(x);
    for (int x : pts)
      for (int y : pts)
        for (int z : pts) {
          for (int i = 0; i < d.dim(x); ++i)
            for (int j = 0; j < d.dim(y); ++j)
              for (int k = 0; k < d.dim(z); ++k) {
                KElement xi =
                    ctx.k_rank_one(x, y, Vector::Unit(d.dim(x), i), Vector::Unit(d.dim(y), j));
                KElement eta =
                    ctx.k_rank_one(y, z, Vector::Unit(d.dim(y), j), Vector::Unit(d.dim(z), k));
                KElement prod = u_compose(ctx, xi, eta);
                // U2 norm bound.
                rep.record("U2",
                           std::max(0.0, ctx.k_norm(prod) - ctx.k_norm(xi) * ctx.k_norm(eta)) /
                               (1.0 + ctx.k_norm(prod)),
                           tol, {x, y, z, i, j, k});
                // U4: Flip is an anti-homomorphism.
                KElement f1 = flip(ctx, prod, tol);
                KElement f2 = u_compose(ctx, flip(ctx, eta, tol), flip(ctx, xi, tol));
                rep.record("U4", frob(f1.t - f2.t) / (1.0 + frob(f1.t)), tol, {x, y, z, i, j, k});
                // U in terms of Phi: U(xi, |k><l|) = |Phi(xi,k)><l|.
                KElement ro = ctx.k_rank_one(y, z, Vector::Unit(d.dim(y), j),
                                             Vector::Unit(d.dim(z), k));
                KElement viaU = u_compose(ctx, xi, ro);
                KElement viaPhi = ctx.k_rank_one(
                    x, z, phi_apply(ctx, xi, Vector::Unit(d.dim(y), j)), Vector::Unit(d.dim(z), k));
                rep.record("UPHI", frob(viaU.t - viaPhi.t) / (1.0 + frob(viaPhi.t)), tol,
                           {x, y, z, i, j, k});
              }
        }
    // U1 bilinearity and the second U2 identity on random elements.
    for (int t = 0; t < 8 && !pts.empty(); ++t) {
      auto pick = [&]() { return pts[rng() % pts.size()]; };
      int x = pick(), y = pick(), z = pick();
      KElement a1 = ctx.k_rank_one(x, y, random_vector(d.dim(x), rng), random_vector(d.dim(y), rng));
      KElement a2 = ctx.k_rank_one(x, y, random_vector(d.dim(x), rng), random_vector(d.dim(y), rng));
      KElement b1 = ctx.k_rank_one(y, z, random_vector(d.dim(y), rng), random_vector(d.dim(z), rng));
      Complex lam(1.1, 0.4);
      Matrix lhs = u_compose(ctx, KElement{x, y, a1.t + lam * a2.t}, b1).t;
      Matrix rhs = u_compose(ctx, a1, b1).t + lam * u_compose(ctx, a2, b1).t;
      rep.record("U1", frob(lhs - rhs) / (1.0 + frob(rhs)), tol, {x, y, z});
      KElement sq = u_compose(ctx, a1, flip(ctx, a1, tol));
      double na = ctx.k_norm(a1);
      rep.record("U2", std::abs(ctx.k_norm(sq) - na * na) / (1.0 + na * na), tol, {x, y, z});
    }
  }
  // U3: the U/Psi equivariance diagram on rank-one tuples.
  for (int h = 0; h < g.n_arrows; ++h) {
    std::vector<int> pts;
    for (int x = 0; x < nx; ++x)
      if (d.action.sigma[x] == g.src[h]) pts.push_back(x);
    for (int x : pts)
      for (int y : pts)
        for (int z : pts) {
          KElement xi = ctx.k_rank_one(x, y, random_vector(d.dim(x), rng),
                                       random_vector(d.dim(y), rng));
          KElement eta = ctx.k_rank_one(y, z, random_vector(d.dim(y), rng),
                                        random_vector(d.dim(z), rng));
          KElement lhs = psi_transport(ctx, h, u_compose(ctx, xi, eta), tol);
          KElement rhs =
              u_compose(ctx, psi_transport(ctx, h, xi, tol), psi_transport(ctx, h, eta, tol));
          rep.record("U3", frob(lhs.t - rhs.t) / (1.0 + frob(lhs.t)), tol, {h, x, y, z});
        }
  }
  for (const char* l : {"U1", "U2", "U3", "U4", "UPHI"}) rep.check(l);
  return rep;
}

inline ImprimitivityBundle build_imprimitivity_bundle(const DemiEquivalence& demi,
                                                      double tol = kDefaultTol) {
  {
    ValidationReport rep = validate_demi(demi, tol);
    if (!rep.pass()) throw InvalidInput("build_imprimitivity_bundle: invalid demi-equivalence",
                                        std::move(rep));
  }
  ImprimitivityBundle out;
  out.tol = tol;
  out.demi = std::make_shared<DemiEquivalence>(demi);
  out.ctx = std::make_unique<DemiContext>(*out.demi);
  out.gq = imprimitivity_groupoid(out.demi->bundle.base, out.demi->action);
  for (int g = 0; g < out.gq.base.n_arrows; ++g) {
    auto [x, y] = out.gq.rep[g];
    out.fibres.push_back(k_fibre(*out.ctx, x, y));
  }
  return out;
}

}  // namespace fell
