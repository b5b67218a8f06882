#pragma once

#include <optional>
#include <string>

#include "handfuse/error.hpp"
#include "handfuse/evidence.hpp"
#include "handfuse/matchers.hpp"

namespace handfuse {

/// First-level configurations:
/// 1: classifier 1 on (C_L, C_R, C_F); classifier 2 on the top-d fused counts.
/// 2: classifier 1 with same-class probabilities added; classifier 2 with one
///    candidate per count channel, each scored against the feature total.
/// 3: classifier 1 on the d smallest fused sums; classifier 2 as in 1.
enum class Scheme { One = 1, Two = 2, Three = 3 };

inline Scheme parse_scheme(int id) {
  if (id < 1 || id > 3) fail(Errc::InvalidInput, "scheme must be 1, 2 or 3");
  return static_cast<Scheme>(id);
}

struct MatchParams {
  Scheme scheme = Scheme::Two;
  double th = 0.7;
  std::size_t d = 3;
};

struct TrialResult {
  int truth = kNoClass;
  FusedDecision fused;
  std::optional<CandidateDecision> first, second;
  std::string note;  // why the trial was rejected early, if it was

  int rc() const { return fused.rc; }
  bool correct() const { return truth != kNoClass && fused.rc == truth; }
};

inline CandidateDecision first_level_1(const TemplateDatabase& db, const DistanceSums& s, const MatchParams& p,
                                       int exclude) {
  switch (p.scheme) {
    case Scheme::One: return classifier1(db, s, p.d, exclude);
    case Scheme::Two: return classifier1_sum_rule(classifier1(db, s, p.d, exclude));
    case Scheme::Three: return classifier1_fused(db, s, p.d, exclude);
  }
  fail(Errc::InvalidInput, "unknown scheme");
}

inline CandidateDecision first_level_2(const TemplateDatabase& db, const MatchCounts& c, const MatchParams& p,
                                       int exclude) {
  if (p.scheme == Scheme::Two) return classifier2_channels(db, c, exclude);
  return classifier2(db, c, p.d, exclude);
}

/// Both classifiers, BPA assignment, combination and decision. Rows of
/// `exclude` are invisible to the matchers.
inline TrialResult run_trial(const TemplateDatabase& db, const TestPair& t, const MatchParams& p, int truth = kNoClass,
                             int exclude = kNoClass) {
  TrialResult r;
  r.truth = truth;
  const RowScores s = score_rows(db, t, p.th);
  try {
    r.first = first_level_1(db, s.dist, p, exclude);
    r.second = first_level_2(db, s.counts, p, exclude);
    r.fused = fuse(*r.first, *r.second);
  } catch (const Error& e) {
    if (e.code() != Errc::NoMatches && e.code() != Errc::TotalConflict) throw;
    r.fused = FusedDecision{};
    r.note = std::string(to_string(e.code()));
  }
  return r;
}

/// Recognized class, or nullopt when the fused decision rejects.
inline std::optional<int> identify(const TemplateDatabase& db, const TestPair& t, const MatchParams& p) {
  if (db.empty()) return std::nullopt;
  const TrialResult r = run_trial(db, t, p);
  if (r.fused.rejected()) return std::nullopt;
  return r.rc();
}

/// Accepts when the recognized class is the claim and its belief reaches tau.
inline bool accepts(const FusedDecision& d, int claim, double tau) {
  return !d.rejected() && d.rc == claim && d.winning_belief() >= tau;
}

inline bool verify(const TemplateDatabase& db, const std::string& claim, const TestPair& t, const MatchParams& p,
                   double tau) {
  const auto id = db.find_class(claim);
  if (!id) fail(Errc::UnknownClass, "claimed identity '" + claim + "' is not enrolled");
  return accepts(run_trial(db, t, p).fused, *id, tau);
}

}  // namespace handfuse
