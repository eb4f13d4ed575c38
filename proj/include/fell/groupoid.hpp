#pragma once

// Finite groupoids as explicit composition tables, free actions on finite
// spaces, orbit quotients, and the imprimitivity groupoid of a principal
// action together with its translation maps leoq / reoq.

#include <algorithm>
#include <map>
#include <numeric>
#include <utility>
#include <vector>

#include "fell/linalg.hpp"
#include "fell/report.hpp"

namespace fell {

/// Small category with all arrows invertible; partial maps are domain-checked
/// tables where -1 marks "undefined".
struct FiniteGroupoid {
  int n_units = 0;
  int n_arrows = 0;
  std::vector<int> src;               // arrow -> unit
  std::vector<int> rng;               // arrow -> unit
  std::vector<std::vector<int>> comp; // comp[g][h], defined iff src(g)==rng(h)
  std::vector<int> inv;               // arrow -> arrow
  std::vector<int> unit_embed;        // unit -> identity arrow

  bool composable(int g, int h) const { return src[g] == rng[h]; }

  int compose(int g, int h) const {
    if (g < 0 || g >= n_arrows || h < 0 || h >= n_arrows)
      throw StructuralError("compose: arrow index out of range");
    int r = comp[g][h];
    if (r < 0) throw StructuralError("compose: arrows not composable");
    return r;
  }

  int inverse(int g) const {
    if (g < 0 || g >= n_arrows) throw StructuralError("inverse: index out of range");
    return inv[g];
  }

  int unit_arrow(int u) const {
    if (u < 0 || u >= n_units) throw StructuralError("unit_arrow: index out of range");
    return unit_embed[u];
  }

  bool is_unit_arrow(int g) const {
    return src[g] == rng[g] && unit_embed[src[g]] == g;
  }

  /// Arrows h with src(h) == u.
  std::vector<int> arrows_from(int u) const {
    std::vector<int> out;
    for (int h = 0; h < n_arrows; ++h)
      if (src[h] == u) out.push_back(h);
    return out;
  }

  /// Arrows h with rng(h) == u.
  std::vector<int> arrows_into(int u) const {
    std::vector<int> out;
    for (int h = 0; h < n_arrows; ++h)
      if (rng[h] == u) out.push_back(h);
    return out;
  }

  std::vector<std::pair<int, int>> composable_pairs() const {
    std::vector<std::pair<int, int>> out;
    for (int g = 0; g < n_arrows; ++g)
      for (int h = 0; h < n_arrows; ++h)
        if (composable(g, h)) out.emplace_back(g, h);
    return out;
  }
};

/// Finite right H-space with anchor sigma; the action table is partial,
/// defined exactly when sigma(x) == rng(h).
struct PrincipalAction {
  int n_points = 0;
  std::vector<int> sigma;            // point -> unit
  std::vector<std::vector<int>> act; // act[x][h], -1 when undefined

  bool movable(int x, int h, const FiniteGroupoid& g) const {
    return sigma[x] == g.rng[h];
  }

  int ract(int x, int h) const {
    if (x < 0 || x >= n_points) throw StructuralError("ract: point out of range");
    if (h < 0 || h >= static_cast<int>(act[x].size()))
      throw StructuralError("ract: arrow out of range");
    int r = act[x][h];
    if (r < 0) throw StructuralError("ract: action undefined for (x,h)");
    return r;
  }
};

// ---------------------------------------------------------------------------
// Validators
// ---------------------------------------------------------------------------

inline ValidationReport validate_groupoid(const FiniteGroupoid& g) {
  ValidationReport rep;
  const int nu = g.n_units, nh = g.n_arrows;
  if (static_cast<int>(g.src.size()) != nh) rep.structural("src table size != n_arrows");
  if (static_cast<int>(g.rng.size()) != nh) rep.structural("rng table size != n_arrows");
  if (static_cast<int>(g.inv.size()) != nh) rep.structural("inv table size != n_arrows");
  if (static_cast<int>(g.comp.size()) != nh) rep.structural("comp table size != n_arrows");
  if (static_cast<int>(g.unit_embed.size()) != nu)
    rep.structural("unit_embed table size != n_units");
  for (auto& row : g.comp)
    if (static_cast<int>(row.size()) != nh) rep.structural("comp row size != n_arrows");
  if (!rep.structurally_sound()) return rep;

  auto in_units = [&](int u) { return u >= 0 && u < nu; };
  auto in_arrows = [&](int h) { return h >= 0 && h < nh; };
  for (int h = 0; h < nh; ++h) {
    if (!in_units(g.src[h])) rep.structural("src out of range at arrow " + std::to_string(h));
    if (!in_units(g.rng[h])) rep.structural("rng out of range at arrow " + std::to_string(h));
    if (!in_arrows(g.inv[h])) rep.structural("inv out of range at arrow " + std::to_string(h));
  }
  for (int u = 0; u < nu; ++u)
    if (!in_arrows(g.unit_embed[u]))
      rep.structural("unit_embed out of range at unit " + std::to_string(u));
  for (int a = 0; a < nh; ++a)
    for (int b = 0; b < nh; ++b) {
      int c = g.comp[a][b];
      if (g.composable(a, b)) {
        if (!in_arrows(c)) rep.structural("comp undefined or out of range on composable pair (" +
                                          std::to_string(a) + "," + std::to_string(b) + ")");
      } else if (c != -1) {
        rep.structural("comp defined on non-composable pair (" + std::to_string(a) + "," +
                       std::to_string(b) + ")");
      }
    }
  if (!rep.structurally_sound()) return rep;

  // G1: range/source of products.
  for (int a = 0; a < nh; ++a)
    for (int b = 0; b < nh; ++b)
      if (g.composable(a, b)) {
        int c = g.comp[a][b];
        if (g.rng[c] != g.rng[a] || g.src[c] != g.src[b])
          rep.record_fail("G1", {a, b}, "rng/src of composite inconsistent");
      }
  rep.check("G1");

  // G2: associativity wherever defined.
  for (int a = 0; a < nh; ++a)
    for (int b = 0; b < nh; ++b) {
      if (!g.composable(a, b)) continue;
      for (int c = 0; c < nh; ++c) {
        if (!g.composable(b, c)) continue;
        if (g.comp[g.comp[a][b]][c] != g.comp[a][g.comp[b][c]])
          rep.record_fail("G2", {a, b, c}, "associativity fails");
      }
    }
  rep.check("G2");

  // G3: units are two-sided identities with matching src/rng.
  for (int u = 0; u < g.n_units; ++u) {
    int e = g.unit_embed[u];
    if (g.src[e] != u || g.rng[e] != u)
      rep.record_fail("G3", {u}, "unit arrow has wrong src/rng");
  }
  for (int a = 0; a < nh; ++a) {
    int er = g.unit_embed[g.rng[a]], es = g.unit_embed[g.src[a]];
    if (g.comp[er][a] != a) rep.record_fail("G3", {a}, "left unit law fails");
    if (g.comp[a][es] != a) rep.record_fail("G3", {a}, "right unit law fails");
  }
  rep.check("G3");

  // G4: inversion.
  for (int a = 0; a < nh; ++a) {
    int ia = g.inv[a];
    if (g.inv[ia] != a) rep.record_fail("G4", {a}, "inv not involutive");
    if (g.src[ia] != g.rng[a] || g.rng[ia] != g.src[a])
      rep.record_fail("G4", {a}, "inv has wrong src/rng");
    if (g.src[ia] == g.rng[a] && g.rng[ia] == g.src[a]) {
      if (g.comp[ia][a] != g.unit_embed[g.src[a]])
        rep.record_fail("G4", {a}, "inv(h)*h != unit at src(h)");
      if (g.comp[a][ia] != g.unit_embed[g.rng[a]])
        rep.record_fail("G4", {a}, "h*inv(h) != unit at rng(h)");
    }
  }
  rep.check("G4");
  return rep;
}

inline ValidationReport validate_action(const FiniteGroupoid& g, const PrincipalAction& a) {
  ValidationReport rep;
  const int nx = a.n_points, nh = g.n_arrows;
  if (static_cast<int>(a.sigma.size()) != nx) rep.structural("sigma table size != n_points");
  if (static_cast<int>(a.act.size()) != nx) rep.structural("act table size != n_points");
  for (auto& row : a.act)
    if (static_cast<int>(row.size()) != nh) rep.structural("act row size != n_arrows");
  if (!rep.structurally_sound()) return rep;
  for (int x = 0; x < nx; ++x) {
    if (a.sigma[x] < 0 || a.sigma[x] >= g.n_units)
      rep.structural("sigma out of range at point " + std::to_string(x));
    for (int h = 0; h < nh; ++h) {
      int y = a.act[x][h];
      if (a.movable(x, h, g)) {
        if (y < 0 || y >= nx)
          rep.structural("act undefined or out of range at (" + std::to_string(x) + "," +
                         std::to_string(h) + ")");
      } else if (y != -1) {
        rep.structural("act defined off-domain at (" + std::to_string(x) + "," +
                       std::to_string(h) + ")");
      }
    }
  }
  if (!rep.structurally_sound()) return rep;

  // A1: anchor compatibility sigma(x.h) = src(h).
  for (int x = 0; x < nx; ++x)
    for (int h = 0; h < nh; ++h)
      if (a.movable(x, h, g) && a.sigma[a.act[x][h]] != g.src[h])
        rep.record_fail("A1", {x, h}, "sigma(x.h) != src(h)");
  rep.check("A1");

  // A2: unit acts trivially.
  for (int x = 0; x < nx; ++x)
    if (a.act[x][g.unit_embed[a.sigma[x]]] != x)
      rep.record_fail("A2", {x}, "x . unit != x");
  rep.check("A2");

  // A3: compatibility with composition.
  for (int x = 0; x < nx; ++x)
    for (int h = 0; h < nh; ++h) {
      if (!a.movable(x, h, g)) continue;
      for (int k = 0; k < nh; ++k) {
        if (!g.composable(h, k)) continue;
        if (a.act[a.act[x][h]][k] != a.act[x][g.comp[h][k]])
          rep.record_fail("A3", {x, h, k}, "(x.h).k != x.(hk)");
      }
    }
  rep.check("A3");

  // A4: freeness.
  for (int x = 0; x < nx; ++x)
    for (int h = 0; h < nh; ++h)
      if (a.movable(x, h, g) && a.act[x][h] == x && h != g.unit_embed[a.sigma[x]])
        rep.record_fail("A4", {x, h}, "freeness violated");
  rep.check("A4");

  // A5: sigma surjective.
  {
    std::vector<char> hit(g.n_units, 0);
    for (int x = 0; x < nx; ++x)
      if (a.sigma[x] >= 0 && a.sigma[x] < g.n_units) hit[a.sigma[x]] = 1;
    for (int u = 0; u < g.n_units; ++u)
      if (!hit[u]) rep.record_fail("A5", {u}, "sigma misses unit");
  }
  rep.check("A5");

  // Properness holds automatically for finite discrete actions.
  rep.mark_trivial("A6", "properness automatic for finite discrete actions");
  return rep;
}

// ---------------------------------------------------------------------------
// Translation maps
// ---------------------------------------------------------------------------

/// Unique h with x.h == y; requires x,y in the same H-orbit.
inline int reoq(const FiniteGroupoid& g, const PrincipalAction& a, int x, int y) {
  for (int h = 0; h < g.n_arrows; ++h)
    if (a.movable(x, h, g) && a.act[x][h] == y) return h;
  throw StructuralError("reoq: points not in the same orbit");
}

/// Imprimitivity groupoid of a principal action: arrows are diagonal orbits
/// of sigma-matched pairs, with lexicographically least representatives.
struct ImprimitivityGroupoid {
  FiniteGroupoid base;
  const FiniteGroupoid* h = nullptr;  // not owned
  const PrincipalAction* action = nullptr;
  std::vector<std::pair<int, int>> rep;   // arrow -> representative pair
  std::map<std::pair<int, int>, int> cls; // sigma-matched pair -> arrow
  std::vector<int> orbit_of;              // point -> unit of base
  std::vector<int> orbit_least;           // unit of base -> least point

  int class_of(int x, int y) const {
    auto it = cls.find({x, y});
    if (it == cls.end()) throw StructuralError("class_of: pair has mismatched anchors");
    return it->second;
  }

  int rho(int x) const { return orbit_of[x]; }

  /// Left action [x,y^op] |> y = x.
  int lact(int g, int y) const {
    const auto& [xr, yr] = rep[g];
    if (orbit_of[y] != orbit_of[yr]) throw StructuralError("lact: anchor mismatch");
    int k = reoq(*h, *action, yr, y);
    return action->act[xr][k];
  }

  /// The left action packaged as a right action of the opposite groupoid,
  /// so the PrincipalAction validator applies verbatim.
  std::pair<FiniteGroupoid, PrincipalAction> left_principal_action() const {
    FiniteGroupoid op = base;
    std::swap(op.src, op.rng);
    for (int a = 0; a < base.n_arrows; ++a)
      for (int b = 0; b < base.n_arrows; ++b) op.comp[a][b] = base.comp[b][a];
    PrincipalAction pa;
    pa.n_points = action->n_points;
    pa.sigma = orbit_of;
    pa.act.assign(pa.n_points, std::vector<int>(base.n_arrows, -1));
    for (int x = 0; x < pa.n_points; ++x)
      for (int g = 0; g < base.n_arrows; ++g)
        if (op.rng[g] == orbit_of[x]) pa.act[x][g] = lact(g, x);
    return {std::move(op), std::move(pa)};
  }
};

inline ImprimitivityGroupoid imprimitivity_groupoid(const FiniteGroupoid& g,
                                                    const PrincipalAction& a) {
  {
    ValidationReport vg = validate_groupoid(g);
    if (!vg.pass()) throw StructuralError("imprimitivity_groupoid: invalid groupoid input");
    ValidationReport va = validate_action(g, a);
    if (!va.pass()) throw StructuralError("imprimitivity_groupoid: invalid action input");
  }
  ImprimitivityGroupoid out;
  out.h = &g;
  out.action = &a;
  const int nx = a.n_points;

  // Orbits of X, identified by least element and ordered by it.
  out.orbit_of.assign(nx, -1);
  for (int x = 0; x < nx; ++x) {
    if (out.orbit_of[x] >= 0) continue;
    int id = static_cast<int>(out.orbit_least.size());
    // x is the least point of a fresh orbit (smaller points already labeled).
    std::vector<int> stack{x};
    out.orbit_of[x] = id;
    while (!stack.empty()) {
      int y = stack.back();
      stack.pop_back();
      for (int h = 0; h < g.n_arrows; ++h)
        if (a.movable(y, h, g)) {
          int z = a.act[y][h];
          if (out.orbit_of[z] < 0) {
            out.orbit_of[z] = id;
            stack.push_back(z);
          }
        }
    }
    out.orbit_least.push_back(x);
  }

  // Diagonal orbits of sigma-matched pairs, lexicographically least reps.
  std::vector<std::pair<int, int>> pairs;
  for (int x = 0; x < nx; ++x)
    for (int y = 0; y < nx; ++y)
      if (a.sigma[x] == a.sigma[y]) pairs.emplace_back(x, y);
  for (const auto& p : pairs) {
    if (out.cls.count(p)) continue;
    int id = static_cast<int>(out.rep.size());
    std::pair<int, int> least = p;
    std::vector<std::pair<int, int>> orbit;
    for (int h = 0; h < g.n_arrows; ++h)
      if (a.movable(p.first, h, g)) {
        std::pair<int, int> q{a.act[p.first][h], a.act[p.second][h]};
        orbit.push_back(q);
        least = std::min(least, q);
      }
    for (const auto& q : orbit) out.cls[q] = id;
    out.rep.push_back(least);
  }

  // Assemble the base groupoid over the orbit data.
  FiniteGroupoid& b = out.base;
  b.n_units = static_cast<int>(out.orbit_least.size());
  b.n_arrows = static_cast<int>(out.rep.size());
  b.src.resize(b.n_arrows);
  b.rng.resize(b.n_arrows);
  b.inv.resize(b.n_arrows);
  b.unit_embed.assign(b.n_units, -1);
  b.comp.assign(b.n_arrows, std::vector<int>(b.n_arrows, -1));
  for (int ar = 0; ar < b.n_arrows; ++ar) {
    const auto& [x, y] = out.rep[ar];
    b.rng[ar] = out.orbit_of[x];
    b.src[ar] = out.orbit_of[y];
    b.inv[ar] = out.cls.at({y, x});
  }
  for (int u = 0; u < b.n_units; ++u) {
    int x0 = out.orbit_least[u];
    b.unit_embed[u] = out.cls.at({x0, x0});
  }
  for (int a1 = 0; a1 < b.n_arrows; ++a1)
    for (int a2 = 0; a2 < b.n_arrows; ++a2) {
      if (b.src[a1] != b.rng[a2]) continue;
      const auto& [x1, y1] = out.rep[a1];
      const auto& [x2, y2] = out.rep[a2];
      // Align the middle legs: replace (x2,y2) by (x2.h, y2.h) with x2.h = y1.
      int h = reoq(g, a, x2, y1);
      b.comp[a1][a2] = out.cls.at({x1, a.act[y2][h]});
    }
  return out;
}

/// Unique arrow [x,y^op] with [x,y^op] |> y = x; requires sigma(x)==sigma(y).
inline int leoq(const ImprimitivityGroupoid& gq, int x, int y) {
  if (gq.action->sigma[x] != gq.action->sigma[y])
    throw StructuralError("leoq: anchor mismatch");
  return gq.class_of(x, y);
}

/// True iff `candidate` (a total arrow map) is a groupoid isomorphism.
inline bool groupoid_isomorphic(const FiniteGroupoid& g1, const FiniteGroupoid& g2,
                                const std::vector<int>& candidate) {
  if (static_cast<int>(candidate.size()) != g1.n_arrows) return false;
  if (g1.n_arrows != g2.n_arrows || g1.n_units != g2.n_units) return false;
  std::vector<char> hit(g2.n_arrows, 0);
  for (int a = 0; a < g1.n_arrows; ++a) {
    int fa = candidate[a];
    if (fa < 0 || fa >= g2.n_arrows || hit[fa]) return false;
    hit[fa] = 1;
  }
  // Induced unit map from unit arrows.
  std::vector<int> umap(g1.n_units, -1);
  for (int u = 0; u < g1.n_units; ++u) {
    int e2 = candidate[g1.unit_embed[u]];
    if (!g2.is_unit_arrow(e2)) return false;
    umap[u] = g2.src[e2];
  }
  for (int a = 0; a < g1.n_arrows; ++a) {
    if (umap[g1.src[a]] != g2.src[candidate[a]]) return false;
    if (umap[g1.rng[a]] != g2.rng[candidate[a]]) return false;
    if (candidate[g1.inv[a]] != g2.inv[candidate[a]]) return false;
  }
  for (int a = 0; a < g1.n_arrows; ++a)
    for (int b = 0; b < g1.n_arrows; ++b) {
      if (!g1.composable(a, b)) continue;
      if (!g2.composable(candidate[a], candidate[b])) return false;
      if (candidate[g1.comp[a][b]] != g2.comp[candidate[a]][candidate[b]]) return false;
    }
  return true;
}

// ---------------------------------------------------------------------------
// Catalogue constructions used by fixtures and generators
// ---------------------------------------------------------------------------

inline FiniteGroupoid make_trivial_groupoid() {
  FiniteGroupoid g;
  g.n_units = 1;
  g.n_arrows = 1;
  g.src = {0};
  g.rng = {0};
  g.inv = {0};
  g.unit_embed = {0};
  g.comp = {{0}};
  return g;
}

/// Z/n as a one-object groupoid; arrow k is the group element k.
inline FiniteGroupoid make_cyclic_group(int n) {
  FiniteGroupoid g;
  g.n_units = 1;
  g.n_arrows = n;
  g.src.assign(n, 0);
  g.rng.assign(n, 0);
  g.unit_embed = {0};
  g.inv.resize(n);
  g.comp.assign(n, std::vector<int>(n));
  for (int i = 0; i < n; ++i) {
    g.inv[i] = (n - i) % n;
    for (int j = 0; j < n; ++j) g.comp[i][j] = (i + j) % n;
  }
  return g;
}

/// Full equivalence relation on n points; arrow i*n+j goes j -> i.
inline FiniteGroupoid make_pair_groupoid(int n) {
  FiniteGroupoid g;
  g.n_units = n;
  g.n_arrows = n * n;
  g.src.resize(n * n);
  g.rng.resize(n * n);
  g.inv.resize(n * n);
  g.unit_embed.resize(n);
  g.comp.assign(n * n, std::vector<int>(n * n, -1));
  auto id = [n](int i, int j) { return i * n + j; };
  for (int i = 0; i < n; ++i) {
    g.unit_embed[i] = id(i, i);
    for (int j = 0; j < n; ++j) {
      g.rng[id(i, j)] = i;
      g.src[id(i, j)] = j;
      g.inv[id(i, j)] = id(j, i);
      for (int k = 0; k < n; ++k) g.comp[id(i, j)][id(j, k)] = id(i, k);
    }
  }
  return g;
}

inline FiniteGroupoid disjoint_union(const FiniteGroupoid& a, const FiniteGroupoid& b) {
  FiniteGroupoid g;
  g.n_units = a.n_units + b.n_units;
  g.n_arrows = a.n_arrows + b.n_arrows;
  auto sh_u = [&](int u) { return u + a.n_units; };
  auto sh_a = [&](int h) { return h + a.n_arrows; };
  g.src = a.src;
  g.rng = a.rng;
  g.inv = a.inv;
  for (int h = 0; h < b.n_arrows; ++h) {
    g.src.push_back(sh_u(b.src[h]));
    g.rng.push_back(sh_u(b.rng[h]));
    g.inv.push_back(sh_a(b.inv[h]));
  }
  g.unit_embed = a.unit_embed;
  for (int u = 0; u < b.n_units; ++u) g.unit_embed.push_back(sh_a(b.unit_embed[u]));
  g.comp.assign(g.n_arrows, std::vector<int>(g.n_arrows, -1));
  for (int x = 0; x < a.n_arrows; ++x)
    for (int y = 0; y < a.n_arrows; ++y) g.comp[x][y] = a.comp[x][y];
  for (int x = 0; x < b.n_arrows; ++x)
    for (int y = 0; y < b.n_arrows; ++y)
      g.comp[sh_a(x)][sh_a(y)] = b.comp[x][y] < 0 ? -1 : sh_a(b.comp[x][y]);
  return g;
}

/// Right translation action of H on X = H (anchor = source map).
inline PrincipalAction translation_action(const FiniteGroupoid& g) {
  PrincipalAction a;
  a.n_points = g.n_arrows;
  a.sigma = g.src;
  a.act.assign(a.n_points, std::vector<int>(g.n_arrows, -1));
  for (int x = 0; x < a.n_points; ++x)
    for (int h = 0; h < g.n_arrows; ++h)
      if (g.composable(x, h)) a.act[x][h] = g.comp[x][h];
  return a;
}

/// Free H-space made of orbit copies of uH for the chosen base units.
/// Point (i, h) of copy i is realized as an index offset; sigma = src(h).
inline PrincipalAction orbit_sum_action(const FiniteGroupoid& g,
                                        const std::vector<int>& base_units) {
  PrincipalAction a;
  std::vector<std::vector<int>> copies;
  for (int u : base_units) copies.push_back(g.arrows_into(u));  // uH = r^{-1}(u)
  std::vector<int> offset;
  int total = 0;
  for (auto& c : copies) {
    offset.push_back(total);
    total += static_cast<int>(c.size());
  }
  a.n_points = total;
  a.sigma.assign(total, -1);
  a.act.assign(total, std::vector<int>(g.n_arrows, -1));
  for (size_t i = 0; i < copies.size(); ++i) {
    std::map<int, int> index;  // arrow in uH -> point id
    for (size_t j = 0; j < copies[i].size(); ++j)
      index[copies[i][j]] = offset[i] + static_cast<int>(j);
    for (int arrow : copies[i]) {
      int x = index.at(arrow);
      a.sigma[x] = g.src[arrow];
      for (int h = 0; h < g.n_arrows; ++h)
        if (g.composable(arrow, h)) a.act[x][h] = index.at(g.comp[arrow][h]);
    }
  }
  return a;
}

}  // namespace fell
