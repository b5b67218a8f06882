#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "handfuse/error.hpp"
#include "handfuse/experiments.hpp"
#include "handfuse/features.hpp"
#include "handfuse/matchers.hpp"
#include "handfuse/pipeline.hpp"
#include "handfuse/store.hpp"
#include "handfuse/synthhand.hpp"

namespace handfuse {

struct TrialCounts {
  std::uint64_t total = 0, genuine = 0, imposter = 0;
  friend bool operator==(const TrialCounts&, const TrialCounts&) = default;
};

/// Verification protocol sizes: every user's held-out sample is a genuine
/// claim; every enrolled sample claims each other identity as an imposter.
inline TrialCounts count_trials(std::uint64_t n_users, std::uint64_t samples_per_user = 3, std::uint64_t enroll = 2) {
  if (n_users < 2) fail(Errc::InvalidInput, "at least two users are needed");
  if (enroll >= samples_per_user) fail(Errc::InvalidInput, "enrollment must leave a test sample");
  return {samples_per_user * n_users * n_users, n_users, enroll * (n_users - 1) * n_users};
}

struct Rates {
  double far = 0.0, gar = 0.0, frr = 0.0;  // percent
};

inline Rates far_gar(std::uint64_t wrong_accepts, std::uint64_t correct_accepts, const TrialCounts& counts) {
  if (counts.genuine == 0 || counts.imposter == 0) fail(Errc::InvalidInput, "empty genuine or imposter trial set");
  Rates r;
  r.far = 100.0 * static_cast<double>(wrong_accepts) / static_cast<double>(counts.imposter);
  r.gar = 100.0 * static_cast<double>(correct_accepts) / static_cast<double>(counts.genuine);
  r.frr = 100.0 - r.gar;
  return r;
}

// ---------------------------------------------------------------- cohorts

/// Raw features of one acquisition (both hands); absent when extraction failed.
struct Acquisition {
  std::optional<FeatureValues> left, right;
  std::string reason;

  bool ok() const { return left && right; }
};

struct Subject {
  std::string id;
  std::vector<Acquisition> samples;
};

using Cohort = std::vector<Subject>;

inline std::string subject_id(int user) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "u%03d", user);
  return buf;
}

/// Renders a synthetic population and runs every image through the pipeline.
inline Cohort measure_population(const synth::PopulationOptions& pop, const PipelineOptions& pipe = {}) {
  const auto samples = synth::generate_population(pop);
  Cohort cohort;
  std::uint64_t image_index = 0;
  for (const auto& s : samples) {
    if (cohort.empty() || cohort.back().id != subject_id(s.user)) cohort.push_back({subject_id(s.user), {}});
    Acquisition acq;
    for (const synth::HandParams* hp : {&s.left, &s.right}) {
      const auto img = synth::generate(*hp, pop.seed * 1000003ULL + image_index++);
      PipelineOptions opt = pipe;
      opt.debug_prefix = subject_id(s.user) + "_s" + std::to_string(s.sample) + "_" + side_code(hp->side);
      try {
        const auto m = measure(img.image, hp->side, opt);
        (hp->side == HandSide::Left ? acq.left : acq.right) = m.features.values;
      } catch (const Error& e) {
        acq.reason += std::string(acq.reason.empty() ? "" : "; ") + side_code(hp->side) + ": " + e.what();
      }
    }
    cohort.back().samples.push_back(std::move(acq));
  }
  return cohort;
}

/// Groups stored templates by user and sample index.
inline Cohort cohort_from_store(const TemplateStore& store) {
  std::map<std::string, std::map<int, Acquisition>> grouped;
  for (const auto& t : store.rows()) (t.side == HandSide::Left ? grouped[t.user][t.sample].left : grouped[t.user][t.sample].right) = t.raw;
  Cohort cohort;
  for (auto& [user, by_sample] : grouped) {
    Subject s{user, {}};
    for (auto& [idx, acq] : by_sample) {
      if (!acq.ok()) acq.reason = "missing hand";
      s.samples.push_back(std::move(acq));
    }
    cohort.push_back(std::move(s));
  }
  return cohort;
}

// ---------------------------------------------------------------- protocol

struct EvalOptions {
  MatchParams match;
  int split = -1;  // held-out sample index; negative counts from the end
  bool normalize = true;
  std::vector<double> thresholds{0.3, 0.7, 1.2, 1.6, 2.3, 2.5};
  int tau_points = 100;
};

struct TrialRecord {
  std::string kind;  // identify | imposter
  std::string user;
  int sample = 0;
  std::string rc;  // "U" when rejected
  double belief = 0.0;
  bool correct = false;
  std::string note;
};

struct RocPoint {
  double tau = 0.0, far = 0.0, gar = 0.0, frr = 0.0;
};

struct EvalReport {
  MatchParams match;
  int split = 0;
  std::size_t users = 0, enrolled_rows = 0, failed_acquisitions = 0;
  TrialCounts counts;
  double accuracy = 0.0;                // percent, fused decision at match.th
  double feature_level_accuracy = 0.0;  // percent, best fused count alone
  std::vector<std::pair<double, double>> accuracy_by_threshold;
  std::map<std::string, double> ablation;
  std::vector<RocPoint> roc;
  std::vector<TrialRecord> trials;
};

namespace detail {

inline std::string rc_name(const TemplateDatabase& db, int rc) { return rc == kNoClass ? "U" : db.class_name(rc); }

inline std::vector<double> tau_grid(int points) {
  if (points < 2) fail(Errc::InvalidInput, "tau grid needs at least two points");
  std::vector<double> g;
  for (int i = 0; i < points; ++i) g.push_back(static_cast<double>(i) / (points - 1));
  return g;
}

/// Class of the first row at the extreme of `key`.
template <class T>
int best_class(const TemplateDatabase& db, const std::vector<T>& key, bool maximum) {
  const auto rows = top_rows(db, key, 1, maximum, kNoClass);
  return rows.empty() ? kNoClass : db.label(rows[0]);
}

}  // namespace detail

/// Enrolls every sample except the held-out one, identifies each held-out
/// pair and sweeps the verification belief threshold.
inline EvalReport evaluate(const Cohort& cohort, const EvalOptions& opt) {
  if (cohort.size() < 2) fail(Errc::InvalidInput, "evaluation needs at least two users");
  std::size_t samples = 0;
  for (const auto& s : cohort) samples = std::max(samples, s.samples.size());
  if (samples < 2) fail(Errc::InvalidInput, "evaluation needs at least two samples per user");
  const int split = opt.split < 0 ? static_cast<int>(samples) + opt.split : opt.split;
  if (split < 0 || static_cast<std::size_t>(split) >= samples) fail(Errc::InvalidInput, "split index out of range");

  EvalReport rep;
  rep.match = opt.match;
  rep.split = split;
  rep.users = cohort.size();
  rep.counts = count_trials(cohort.size(), samples, samples - 1);

  std::vector<FeatureValues> left_rows, right_rows;
  for (const auto& s : cohort)
    for (std::size_t k = 0; k < s.samples.size(); ++k) {
      if (!s.samples[k].ok()) ++rep.failed_acquisitions;
      if (static_cast<int>(k) == split || !s.samples[k].ok()) continue;
      left_rows.push_back(*s.samples[k].left);
      right_rows.push_back(*s.samples[k].right);
    }
  if (left_rows.empty()) fail(Errc::InvalidInput, "no usable enrollment samples");
  const FeatureStats sl = opt.normalize ? usable_stats(compute_stats(left_rows)) : identity_stats();
  const FeatureStats sr = opt.normalize ? usable_stats(compute_stats(right_rows)) : identity_stats();

  TemplateDatabase db;
  for (const auto& s : cohort) db.intern(s.id);
  for (const auto& s : cohort)
    for (std::size_t k = 0; k < s.samples.size(); ++k)
      if (static_cast<int>(k) != split && s.samples[k].ok())
        db.add(s.id, normalize(*s.samples[k].left, sl), normalize(*s.samples[k].right, sr));
  rep.enrolled_rows = db.rows();
  auto probe = [&](const Acquisition& a) { return TestPair{normalize(*a.left, sl), normalize(*a.right, sr)}; };

  const std::vector<double> taus = detail::tau_grid(opt.tau_points);
  std::vector<std::uint64_t> genuine_accepts(taus.size(), 0), imposter_accepts(taus.size(), 0);
  auto tally = [&](std::vector<std::uint64_t>& acc, const FusedDecision& f, int claim) {
    for (std::size_t i = 0; i < taus.size(); ++i) acc[i] += accepts(f, claim, taus[i]);
  };

  std::vector<std::size_t> correct_at(opt.thresholds.size(), 0);
  std::map<std::string, std::size_t> hits;
  std::size_t correct = 0, feature_level = 0;
  for (const auto& s : cohort) {
    const int truth = *db.find_class(s.id);
    const Acquisition* test = static_cast<std::size_t>(split) < s.samples.size() ? &s.samples[split] : nullptr;
    TrialRecord rec{"identify", s.id, split, "U", 0.0, false, ""};
    if (!test || !test->ok()) {
      rec.note = test ? test->reason : "missing sample";
      rep.trials.push_back(rec);
      continue;
    }
    const TestPair t = probe(*test);
    const TrialResult r = run_trial(db, t, opt.match, truth);
    rec.rc = detail::rc_name(db, r.rc());
    rec.belief = r.fused.winning_belief();
    rec.correct = r.correct();
    rec.note = r.note;
    rep.trials.push_back(rec);
    correct += r.correct();
    tally(genuine_accepts, r.fused, truth);

    for (std::size_t i = 0; i < opt.thresholds.size(); ++i) {
      MatchParams p = opt.match;
      p.th = opt.thresholds[i];
      correct_at[i] += run_trial(db, t, p, truth).correct();
    }

    const RowScores scores = score_rows(db, t, opt.match.th);
    const MatchCounts& c = scores.counts;
    const DistanceSums& d = scores.dist;
    feature_level += detail::best_class(db, c.F, true) == truth;
    hits["count_left_only"] += detail::best_class(db, c.L, true) == truth;
    hits["count_right_only"] += detail::best_class(db, c.R, true) == truth;
    hits["count_feature_level"] += detail::best_class(db, c.F, true) == truth;
    hits["distance_left_only"] += detail::best_class(db, d.L, false) == truth;
    hits["distance_right_only"] += detail::best_class(db, d.R, false) == truth;
    hits["distance_feature_level"] += detail::best_class(db, d.F, false) == truth;
    for (int scheme = 1; scheme <= 3; ++scheme) {
      MatchParams p = opt.match;
      p.scheme = parse_scheme(scheme);
      hits["fused_scheme_" + std::to_string(scheme)] += run_trial(db, t, p, truth).correct();
    }
  }

  // Imposters: enrolled samples probe a database without their own identity.
  for (const auto& s : cohort) {
    const int self = *db.find_class(s.id);
    for (std::size_t k = 0; k < s.samples.size(); ++k) {
      if (static_cast<int>(k) == split) continue;
      TrialRecord rec{"imposter", s.id, static_cast<int>(k), "U", 0.0, false, ""};
      if (!s.samples[k].ok()) {
        rec.note = s.samples[k].reason;
        rep.trials.push_back(rec);
        continue;
      }
      const TrialResult r = run_trial(db, probe(s.samples[k]), opt.match, kNoClass, self);
      rec.rc = detail::rc_name(db, r.rc());
      rec.belief = r.fused.winning_belief();
      rec.note = r.note;
      rep.trials.push_back(rec);
      if (!r.fused.rejected()) tally(imposter_accepts, r.fused, r.rc());
    }
  }

  const double n = static_cast<double>(cohort.size());
  rep.accuracy = 100.0 * static_cast<double>(correct) / n;
  rep.feature_level_accuracy = 100.0 * static_cast<double>(feature_level) / n;
  for (std::size_t i = 0; i < opt.thresholds.size(); ++i)
    rep.accuracy_by_threshold.push_back({opt.thresholds[i], 100.0 * static_cast<double>(correct_at[i]) / n});
  for (const auto& [k, v] : hits) rep.ablation[k] = 100.0 * static_cast<double>(v) / n;
  for (const std::string c : {"count", "distance"})
    rep.ablation[c + "_best_hand"] = std::max(rep.ablation[c + "_left_only"], rep.ablation[c + "_right_only"]);
  for (std::size_t i = 0; i < taus.size(); ++i) {
    const Rates r = far_gar(imposter_accepts[i], genuine_accepts[i], rep.counts);
    rep.roc.push_back({taus[i], r.far, r.gar, r.frr});
  }
  return rep;
}

// ---------------------------------------------------------------- outputs

/// Rows by ascending tau (so FAR is non-increasing down the file).
inline void write_roc_csv(std::ostream& out, const EvalReport& rep) {
  out << "tau,far_percent,gar_percent\n";
  char buf[128];
  for (const auto& p : rep.roc) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f\n", p.tau, p.far, p.gar);
    out << buf;
  }
}

inline void write_trials_csv(std::ostream& out, const EvalReport& rep) {
  out << "kind,user,sample,rc,belief,correct,note\n";
  char buf[64];
  for (const auto& t : rep.trials) {
    std::snprintf(buf, sizeof buf, "%.6f", t.belief);
    std::string note = t.note;
    for (char& ch : note)
      if (ch == ',' || ch == '\n') ch = ';';
    out << t.kind << ',' << t.user << ',' << t.sample << ',' << t.rc << ',' << buf << ',' << (t.correct ? 1 : 0) << ','
        << note << '\n';
  }
}

inline nlohmann::json report_json(const EvalReport& rep, bool with_ablation) {
  nlohmann::json j;
  j["scheme"] = static_cast<int>(rep.match.scheme);
  j["th"] = rep.match.th;
  j["d"] = rep.match.d;
  j["split"] = rep.split;
  j["users"] = rep.users;
  j["enrolled_rows"] = rep.enrolled_rows;
  j["failed_acquisitions"] = rep.failed_acquisitions;
  j["trials"] = {{"total", rep.counts.total}, {"genuine", rep.counts.genuine}, {"imposter", rep.counts.imposter}};
  j["identification_accuracy_percent"] = rep.accuracy;
  j["feature_level_accuracy_percent"] = rep.feature_level_accuracy;
  auto& by = j["accuracy_by_threshold"] = nlohmann::json::array();
  for (const auto& [th, acc] : rep.accuracy_by_threshold) by.push_back({{"th", th}, {"accuracy_percent", acc}});
  if (with_ablation) j["ablation_accuracy_percent"] = rep.ablation;
  return j;
}

inline void write_report_table(std::ostream& out, const EvalReport& rep, bool with_ablation) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "scheme %d  th %.3g  d %zu  users %zu  enrolled rows %zu  failed acquisitions %zu\n",
                static_cast<int>(rep.match.scheme), rep.match.th, rep.match.d, rep.users, rep.enrolled_rows,
                rep.failed_acquisitions);
  out << buf;
  std::snprintf(buf, sizeof buf, "trials: total %llu  genuine %llu  imposter %llu\n",
                static_cast<unsigned long long>(rep.counts.total), static_cast<unsigned long long>(rep.counts.genuine),
                static_cast<unsigned long long>(rep.counts.imposter));
  out << buf;
  out << "threshold:";
  for (const auto& [th, acc] : rep.accuracy_by_threshold) {
    std::snprintf(buf, sizeof buf, " %8.2f", th);
    out << buf;
  }
  out << "\naccuracy%:";
  for (const auto& [th, acc] : rep.accuracy_by_threshold) {
    std::snprintf(buf, sizeof buf, " %8.2f", acc);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "\nidentification %.2f%%  feature-level only %.2f%%\n", rep.accuracy,
                rep.feature_level_accuracy);
  out << buf;
  if (with_ablation)
    for (const auto& [k, v] : rep.ablation) {
      std::snprintf(buf, sizeof buf, "  %-24s %7.2f%%\n", k.c_str(), v);
      out << buf;
    }
}

}  // namespace handfuse
