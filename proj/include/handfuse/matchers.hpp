#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "handfuse/error.hpp"
#include "handfuse/types.hpp"

namespace handfuse {

inline constexpr int kNoClass = -1;

/// Row-aligned left (A) and right (B) template matrices with class labels.
/// Values are expected to be normalized with the enrollment statistics.
class TemplateDatabase {
 public:
  int intern(const std::string& name) {
    const auto [it, inserted] = ids_.try_emplace(name, static_cast<int>(names_.size()));
    if (inserted) names_.push_back(name);
    return it->second;
  }
  std::optional<int> find_class(const std::string& name) const {
    const auto it = ids_.find(name);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }
  const std::string& class_name(int id) const { return names_.at(static_cast<std::size_t>(id)); }
  std::size_t class_count() const { return names_.size(); }

  void add(int label, const FeatureValues& left, const FeatureValues& right) {
    if (label < 0 || static_cast<std::size_t>(label) >= names_.size()) fail(Errc::InvalidInput, "unknown class label");
    labels_.push_back(label);
    left_.push_back(left);
    right_.push_back(right);
  }
  void add(const std::string& name, const FeatureValues& left, const FeatureValues& right) {
    add(intern(name), left, right);
  }

  std::size_t rows() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  int label(std::size_t i) const { return labels_[i]; }
  const FeatureValues& left(std::size_t i) const { return left_[i]; }
  const FeatureValues& right(std::size_t i) const { return right_[i]; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> ids_;
  std::vector<int> labels_;
  std::vector<FeatureValues> left_, right_;
};

struct TestPair {
  FeatureValues left{};
  FeatureValues right{};
};

enum class Source { Classifier1, Classifier2 };

/// First-level decision: candidate classes with their matching probabilities.
struct CandidateDecision {
  std::vector<int> classes;
  std::vector<double> probs;
  Source source = Source::Classifier1;
  int chosen = kNoClass;
  bool exact_match = false;

  /// Probability this decision gives `cls`: the largest among its candidate
  /// entries, 0 when absent.
  double prob_of(int cls) const {
    double p = 0.0;
    for (std::size_t i = 0; i < classes.size(); ++i)
      if (classes[i] == cls) p = std::max(p, probs[i]);
    return p;
  }
  double chosen_prob() const { return prob_of(chosen); }
};

namespace detail {

/// Index of the first maximum.
inline std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

inline void finish(CandidateDecision& d) {
  if (d.classes.empty()) fail(Errc::NoMatches, "no candidates");
  d.chosen = d.classes[argmax(d.probs)];
}

/// Rows ordered by key (ascending or descending), ties to the lower index,
/// first `d` kept; rows of `exclude` are skipped. One linear pass.
template <class T>
std::vector<std::size_t> top_rows(const TemplateDatabase& db, const std::vector<T>& key, std::size_t d, bool descending,
                                  int exclude) {
  std::vector<std::size_t> best;
  if (d == 0) return best;
  best.reserve(d + 1);
  const auto before = [&](std::size_t a, std::size_t b) { return descending ? key[a] > key[b] : key[a] < key[b]; };
  for (std::size_t i = 0; i < key.size(); ++i) {
    if (db.label(i) == exclude) continue;
    if (best.size() == d && !before(i, best.back())) continue;
    auto pos = best.end();
    while (pos != best.begin() && before(i, *(pos - 1))) --pos;
    best.insert(pos, i);
    if (best.size() > d) best.pop_back();
  }
  return best;
}

}  // namespace detail

struct DistanceSums {
  std::vector<double> L, R, F;
};

/// Per-row sums of absolute feature differences; F is their mean (feature-level fusion).
inline DistanceSums distance_sums(const TemplateDatabase& db, const TestPair& t) {
  const std::size_t n = db.rows();
  DistanceSums s{std::vector<double>(n), std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const FeatureValues& a = db.left(i);
    const FeatureValues& b = db.right(i);
    double sl = 0.0, sr = 0.0;
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      sl += std::abs(a[j] - t.left[j]);
      sr += std::abs(b[j] - t.right[j]);
    }
    s.L[i] = sl;
    s.R[i] = sr;
    s.F[i] = (sl + sr) / 2.0;
  }
  return s;
}

/// P_W = (1 - C_W / SS) / (d - 1) with SS the sum of the given minima.
inline std::vector<double> classifier1_probs(const std::vector<double>& minima, std::size_t d) {
  if (d < 2) fail(Errc::InvalidInput, "d must be at least 2");
  const double ss = std::accumulate(minima.begin(), minima.end(), 0.0);
  if (!(ss > 0)) fail(Errc::InvalidInput, "probabilities undefined for zero total distance");
  std::vector<double> p;
  p.reserve(minima.size());
  for (double c : minima) p.push_back((1.0 - c / ss) / static_cast<double>(d - 1));
  return p;
}

/// Minimum left, right and fused sums, each voting for its row's class.
inline CandidateDecision classifier1(const TemplateDatabase& db, const DistanceSums& s, std::size_t d = 3,
                                     int exclude = kNoClass) {
  CandidateDecision out;
  out.source = Source::Classifier1;
  std::vector<double> minima;
  for (const auto* v : {&s.L, &s.R, &s.F}) {
    const auto best = detail::top_rows(db, *v, 1, false, exclude);
    if (best.empty()) fail(Errc::NoMatches, "database has no eligible rows");
    out.classes.push_back(db.label(best[0]));
    minima.push_back((*v)[best[0]]);
  }
  if (minima[0] + minima[1] + minima[2] == 0.0) {
    out.exact_match = true;
    out.classes = {out.classes[2]};
    out.probs = {1.0};
  } else {
    out.probs = classifier1_probs(minima, d);
  }
  detail::finish(out);
  return out;
}

inline CandidateDecision classifier1(const TemplateDatabase& db, const TestPair& t, std::size_t d = 3,
                                     int exclude = kNoClass) {
  return classifier1(db, distance_sums(db, t), d, exclude);
}

/// Merges candidates of the same class by adding their probabilities.
inline CandidateDecision classifier1_sum_rule(const CandidateDecision& dec) {
  CandidateDecision out;
  out.source = dec.source;
  out.exact_match = dec.exact_match;
  for (std::size_t i = 0; i < dec.classes.size(); ++i) {
    const auto it = std::find(out.classes.begin(), out.classes.end(), dec.classes[i]);
    if (it == out.classes.end()) {
      out.classes.push_back(dec.classes[i]);
      out.probs.push_back(dec.probs[i]);
    } else {
      out.probs[static_cast<std::size_t>(it - out.classes.begin())] += dec.probs[i];
    }
  }
  detail::finish(out);
  return out;
}

/// Classifier 1 restricted to the fused channel: the d smallest fused sums.
inline CandidateDecision classifier1_fused(const TemplateDatabase& db, const DistanceSums& s, std::size_t d = 3,
                                           int exclude = kNoClass) {
  const auto rows = detail::top_rows(db, s.F, d, false, exclude);
  if (rows.empty()) fail(Errc::NoMatches, "database has no eligible rows");
  CandidateDecision out;
  out.source = Source::Classifier1;
  std::vector<double> sums;
  for (std::size_t r : rows) {
    out.classes.push_back(db.label(r));
    sums.push_back(s.F[r]);
  }
  if (std::accumulate(sums.begin(), sums.end(), 0.0) == 0.0 || rows.size() < 2) {
    out.exact_match = sums[0] == 0.0;
    out.classes = {out.classes[0]};
    out.probs = {1.0};
  } else {
    out.probs = classifier1_probs(sums, rows.size());
  }
  detail::finish(out);
  return out;
}

inline CandidateDecision classifier1_fused(const TemplateDatabase& db, const TestPair& t, std::size_t d = 3,
                                           int exclude = kNoClass) {
  return classifier1_fused(db, distance_sums(db, t), d, exclude);
}

struct MatchCounts {
  std::vector<int> L, R;
  std::vector<double> F;
};

/// Per-row counts of features whose absolute difference is within `th`;
/// F is the mean of the two hands' counts.
inline MatchCounts match_counts(const TemplateDatabase& db, const TestPair& t, double th) {
  if (th < 0) fail(Errc::InvalidInput, "threshold must be non-negative");
  const std::size_t n = db.rows();
  MatchCounts c{std::vector<int>(n), std::vector<int>(n), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const FeatureValues& a = db.left(i);
    const FeatureValues& b = db.right(i);
    int cl = 0, cr = 0;
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      cl += std::abs(a[j] - t.left[j]) <= th;
      cr += std::abs(b[j] - t.right[j]) <= th;
    }
    c.L[i] = cl;
    c.R[i] = cr;
    c.F[i] = (cl + cr) / 2.0;
  }
  return c;
}

/// PR_h = Q_h / SC with SC the sum of the top counts.
inline std::vector<double> classifier2_probs(const std::vector<double>& top_counts) {
  const double sc = std::accumulate(top_counts.begin(), top_counts.end(), 0.0);
  if (!(sc > 0)) fail(Errc::NoMatches, "no feature lies within the threshold");
  std::vector<double> p;
  p.reserve(top_counts.size());
  for (double q : top_counts) p.push_back(q / sc);
  return p;
}

/// PR_h = Q_h / x, not normalized across candidates.
inline std::vector<double> count_probs_per_feature(const std::vector<double>& counts,
                                                   std::size_t x = kFeatureCount) {
  std::vector<double> p;
  p.reserve(counts.size());
  for (double q : counts) p.push_back(q / static_cast<double>(x));
  return p;
}

/// The d rows with the largest fused counts.
inline CandidateDecision classifier2(const TemplateDatabase& db, const MatchCounts& c, std::size_t d = 3,
                                     int exclude = kNoClass) {
  const auto rows = detail::top_rows(db, c.F, d, true, exclude);
  if (rows.empty()) fail(Errc::NoMatches, "database has no eligible rows");
  CandidateDecision out;
  out.source = Source::Classifier2;
  std::vector<double> q;
  for (std::size_t r : rows) {
    out.classes.push_back(db.label(r));
    q.push_back(c.F[r]);
  }
  out.probs = classifier2_probs(q);
  out.chosen = out.classes[0];
  return out;
}

inline CandidateDecision classifier2(const TemplateDatabase& db, const TestPair& t, double th, std::size_t d = 3,
                                     int exclude = kNoClass) {
  return classifier2(db, match_counts(db, t, th), d, exclude);
}

/// One candidate per channel: the best rows by left, right and fused counts,
/// each scored by its count over the feature total.
inline CandidateDecision classifier2_channels(const TemplateDatabase& db, const MatchCounts& c, int exclude = kNoClass) {
  CandidateDecision out;
  out.source = Source::Classifier2;
  std::vector<double> q;
  const auto add_best = [&](const auto& v) {
    const auto best = detail::top_rows(db, v, 1, true, exclude);
    if (best.empty()) fail(Errc::NoMatches, "database has no eligible rows");
    out.classes.push_back(db.label(best[0]));
    q.push_back(static_cast<double>(v[best[0]]));
  };
  add_best(c.L);
  add_best(c.R);
  add_best(c.F);
  if (std::accumulate(q.begin(), q.end(), 0.0) == 0.0) fail(Errc::NoMatches, "no feature lies within the threshold");
  out.probs = count_probs_per_feature(q);
  detail::finish(out);
  return out;
}

inline CandidateDecision classifier2_channels(const TemplateDatabase& db, const TestPair& t, double th,
                                              int exclude = kNoClass) {
  return classifier2_channels(db, match_counts(db, t, th), exclude);
}

struct RowScores {
  DistanceSums dist;
  MatchCounts counts;
};

/// Distance sums and match counts from a single pass over the database.
inline RowScores score_rows(const TemplateDatabase& db, const TestPair& t, double th) {
  if (th < 0) fail(Errc::InvalidInput, "threshold must be non-negative");
  const std::size_t n = db.rows();
  RowScores s{{std::vector<double>(n), std::vector<double>(n), std::vector<double>(n)},
              {std::vector<int>(n), std::vector<int>(n), std::vector<double>(n)}};
  for (std::size_t i = 0; i < n; ++i) {
    const FeatureValues& a = db.left(i);
    const FeatureValues& b = db.right(i);
    double sl = 0.0, sr = 0.0;
    int cl = 0, cr = 0;
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      const double dl = std::abs(a[j] - t.left[j]), dr = std::abs(b[j] - t.right[j]);
      sl += dl;
      sr += dr;
      cl += dl <= th;
      cr += dr <= th;
    }
    s.dist.L[i] = sl;
    s.dist.R[i] = sr;
    s.dist.F[i] = (sl + sr) / 2.0;
    s.counts.L[i] = cl;
    s.counts.R[i] = cr;
    s.counts.F[i] = (cl + cr) / 2.0;
  }
  return s;
}

}  // namespace handfuse
