#pragma once

// Validation reporting: one entry per axiom label (DE1..DE16, F1..F10,
// Psi1..Psi5, U1..U4, LA1..LA2, LIP1..LIP5, SAT, ...) with witnesses for
// failures, plus structural errors kept separate from axiom failures.

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

namespace fell {

struct Witness {
  std::vector<int> indices;  // offending index tuple (arrows/points/basis)
  double residual = 0.0;
  std::string detail;
};

struct AxiomCheck {
  std::string label;
  bool pass = true;
  bool trivially_satisfied = false;  // e.g. continuity in the finite model
  double max_residual = 0.0;
  std::vector<Witness> witnesses;
  std::string note;
};

inline constexpr size_t kMaxWitnessesPerAxiom = 8;

struct ValidationReport {
  std::vector<AxiomCheck> checks;
  std::vector<std::string> structural_errors;

  bool structurally_sound() const { return structural_errors.empty(); }

  bool pass() const {
    if (!structural_errors.empty()) return false;
    return std::all_of(checks.begin(), checks.end(),
                       [](const AxiomCheck& c) { return c.pass; });
  }

  double max_residual() const {
    double r = 0.0;
    for (const auto& c : checks) r = std::max(r, c.max_residual);
    return r;
  }

  AxiomCheck& check(const std::string& label) {
    for (auto& c : checks)
      if (c.label == label) return c;
    AxiomCheck fresh;
    fresh.label = label;
    checks.push_back(std::move(fresh));
    return checks.back();
  }

  const AxiomCheck* find(const std::string& label) const {
    for (const auto& c : checks)
      if (c.label == label) return &c;
    return nullptr;
  }

  void record(const std::string& label, double residual, double bound,
              std::vector<int> indices = {}, const std::string& detail = {}) {
    AxiomCheck& c = check(label);
    c.max_residual = std::max(c.max_residual, residual);
    if (residual > bound) {
      c.pass = false;
      if (c.witnesses.size() < kMaxWitnessesPerAxiom)
        c.witnesses.push_back(Witness{std::move(indices), residual, detail});
    }
  }

  void record_fail(const std::string& label, std::vector<int> indices,
                   const std::string& detail, double residual = 1.0) {
    record(label, residual, 0.0, std::move(indices), detail);
  }

  void mark_trivial(const std::string& label, const std::string& note) {
    AxiomCheck& c = check(label);
    c.trivially_satisfied = true;
    c.note = note;
  }

  void structural(const std::string& msg) { structural_errors.push_back(msg); }

  void merge(const ValidationReport& other) {
    for (const auto& e : other.structural_errors) structural_errors.push_back(e);
    for (const auto& oc : other.checks) {
      AxiomCheck& c = check(oc.label);
      c.pass = c.pass && oc.pass;
      c.trivially_satisfied = c.trivially_satisfied || oc.trivially_satisfied;
      c.max_residual = std::max(c.max_residual, oc.max_residual);
      for (const auto& w : oc.witnesses)
        if (c.witnesses.size() < kMaxWitnessesPerAxiom) c.witnesses.push_back(w);
      if (c.note.empty()) c.note = oc.note;
    }
  }
};

/// Fixed float formatting so reports are byte-stable across runs.
inline std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

inline std::string to_text(const ValidationReport& r) {
  std::ostringstream os;
  for (const auto& e : r.structural_errors) os << "STRUCTURAL  " << e << "\n";
  for (const auto& c : r.checks) {
    os << (c.pass ? "PASS" : "FAIL") << "  " << c.label;
    if (c.trivially_satisfied) os << "  [trivially satisfied: " << c.note << "]";
    os << "  max_residual=" << format_double(c.max_residual) << "\n";
    for (const auto& w : c.witnesses) {
      os << "      witness (";
      for (size_t i = 0; i < w.indices.size(); ++i)
        os << (i ? "," : "") << w.indices[i];
      os << ") residual=" << format_double(w.residual);
      if (!w.detail.empty()) os << "  " << w.detail;
      os << "\n";
    }
  }
  os << (r.pass() ? "RESULT pass" : "RESULT fail") << "\n";
  return os.str();
}

}  // namespace fell
