#pragma once

#include <array>
#include <variant>

#include "handfuse/error.hpp"
#include "handfuse/matchers.hpp"

namespace handfuse {

/// Masses on {A}, {B} and the whole frame U over the two-class frame.
struct MassFunction {
  double a = 0.0, b = 0.0, u = 1.0;
  int class_a = kNoClass, class_b = kNoClass;

  double total() const { return a + b + u; }
};

/// Both classifiers chose the same class.
struct Agreement {
  int cls = kNoClass;
  double p1 = 0.0, p2 = 0.0;
};

struct BpaPair {
  MassFunction m1, m2;
};

using Bpas = std::variant<Agreement, BpaPair>;

namespace detail {

inline MassFunction bpa_row(double pa, double pb, int ca, int cb) {
  const double s = pa + pb;
  if (s > 1.0) return {pa / s, pb / s, 0.0, ca, cb};
  return {pa, pb, 1.0 - s, ca, cb};
}

}  // namespace detail

/// A = classifier 1's choice, B = classifier 2's; each row takes the
/// classifier's probabilities for A and B and leaves the rest on U.
inline Bpas assign_bpas(const CandidateDecision& d1, const CandidateDecision& d2) {
  if (d1.chosen == d2.chosen) return Agreement{d1.chosen, d1.chosen_prob(), d2.chosen_prob()};
  const int A = d1.chosen, B = d2.chosen;
  return BpaPair{detail::bpa_row(d1.prob_of(A), d1.prob_of(B), A, B), detail::bpa_row(d2.prob_of(A), d2.prob_of(B), A, B)};
}

inline double conflict(const MassFunction& m1, const MassFunction& m2) { return m1.a * m2.b + m1.b * m2.a; }

/// Dempster's rule on the frame {A, B}.
inline MassFunction combine(const MassFunction& m1, const MassFunction& m2) {
  const double k = conflict(m1, m2);
  if (!(k < 1.0)) fail(Errc::TotalConflict, "sources are in total conflict");
  const double norm = 1.0 - k;
  MassFunction m;
  m.class_a = m1.class_a;
  m.class_b = m1.class_b;
  m.a = (m1.a * m2.a + m1.a * m2.u + m1.u * m2.a) / norm;
  m.b = (m1.b * m2.b + m1.b * m2.u + m1.u * m2.b) / norm;
  m.u = m1.u * m2.u / norm;
  return m;
}

struct Interval {
  double belief = 0.0, plausibility = 0.0;
};

inline Interval interval_a(const MassFunction& m) { return {m.a, m.a + m.u}; }
inline Interval interval_b(const MassFunction& m) { return {m.b, m.b + m.u}; }

struct FusedDecision {
  double bel_a = 0.0, bel_b = 0.0, m_u = 1.0;
  int class_a = kNoClass, class_b = kNoClass;
  int rc = kNoClass;  // kNoClass: rejected
  bool agreement = false;

  bool rejected() const { return rc == kNoClass; }
  /// Belief in the recognized class, 0 when rejected.
  double winning_belief() const {
    if (rc == kNoClass) return 0.0;
    return rc == class_a ? bel_a : bel_b;
  }
};

/// Argmax of BEL(A), BEL(B) and m(U); any tie for the maximum rejects.
inline FusedDecision decide(const MassFunction& m) {
  FusedDecision d{m.a, m.b, m.u, m.class_a, m.class_b, kNoClass, false};
  if (m.a > m.u && m.a > m.b)
    d.rc = m.class_a;
  else if (m.b > m.u && m.b > m.a)
    d.rc = m.class_b;
  return d;
}

/// Agreement: the class is taken as is; its belief combines the two
/// classifiers' probabilities as simple support functions.
inline FusedDecision decide(const Agreement& g) {
  const double bel = 1.0 - (1.0 - g.p1) * (1.0 - g.p2);
  return {bel, 0.0, 1.0 - bel, g.cls, kNoClass, g.cls, true};
}

inline FusedDecision fuse(const CandidateDecision& d1, const CandidateDecision& d2) {
  const Bpas b = assign_bpas(d1, d2);
  if (const auto* g = std::get_if<Agreement>(&b)) return decide(*g);
  const auto& p = std::get<BpaPair>(b);
  return decide(combine(p.m1, p.m2));
}

}  // namespace handfuse
