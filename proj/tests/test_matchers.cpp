#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "handfuse/matchers.hpp"

using namespace handfuse;

namespace {

FeatureValues filled(double v) {
  FeatureValues f;
  f.fill(v);
  return f;
}

TemplateDatabase random_db(std::mt19937_64& rng, int classes, int per_class) {
  std::normal_distribution<double> z(0.0, 1.0);
  TemplateDatabase db;
  for (int c = 0; c < classes; ++c) {
    const std::string name = "c" + std::to_string(c);
    for (int k = 0; k < per_class; ++k) {
      FeatureValues l, r;
      for (auto& v : l) v = z(rng);
      for (auto& v : r) v = z(rng);
      db.add(name, l, r);
    }
  }
  return db;
}

TestPair random_probe(std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  TestPair t;
  for (auto& v : t.left) v = z(rng);
  for (auto& v : t.right) v = z(rng);
  return t;
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST(Database, InternsNamesAndRejectsUnknownLabels) {
  TemplateDatabase db;
  EXPECT_EQ(db.intern("alice"), 0);
  EXPECT_EQ(db.intern("bob"), 1);
  EXPECT_EQ(db.intern("alice"), 0);
  EXPECT_EQ(db.class_count(), 2u);
  EXPECT_EQ(*db.find_class("bob"), 1);
  EXPECT_FALSE(db.find_class("carol"));
  EXPECT_THROW(db.add(5, filled(0), filled(0)), Error);
}

TEST(Classifier1, ProbabilitiesFromMinimumSums) {
  const auto p = classifier1_probs({2, 4, 3}, 3);
  EXPECT_NEAR(p[0], 0.3889, 1e-4);
  EXPECT_NEAR(p[1], 0.2778, 1e-4);
  EXPECT_NEAR(p[2], 0.3333, 1e-4);
  EXPECT_NEAR(sum(p), 1.0, 1e-12);
}

TEST(Classifier1, RejectsBadArguments) {
  EXPECT_THROW(classifier1_probs({1, 2}, 1), Error);
  EXPECT_THROW(classifier1_probs({0, 0, 0}, 3), Error);
}

TEST(Classifier1, ProbabilitiesSumToOneForRandomMinima) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  for (int k = 0; k < 10000; ++k) {
    const auto p = classifier1_probs({u(rng), u(rng), u(rng)}, 3);
    EXPECT_NEAR(sum(p), 1.0, 1e-12);
  }
}

TEST(Classifier1, VotesForNearestRowPerChannel) {
  TemplateDatabase db;
  db.add("a", filled(0.0), filled(5.0));
  db.add("b", filled(1.0), filled(1.0));
  db.add("c", filled(3.0), filled(0.0));
  TestPair t{filled(0.1), filled(0.1)};
  const CandidateDecision d = classifier1(db, t, 3);
  ASSERT_EQ(d.classes.size(), 3u);
  EXPECT_EQ(db.class_name(d.classes[0]), "a");  // left
  EXPECT_EQ(db.class_name(d.classes[1]), "c");  // right
  EXPECT_EQ(db.class_name(d.classes[2]), "b");  // fused
  const DistanceSums s = distance_sums(db, t);
  EXPECT_NEAR(s.L[0], 26 * 0.1, 1e-12);
  EXPECT_NEAR(s.F[1], 26 * 0.9, 1e-12);
  EXPECT_NEAR(sum(d.probs), 1.0, 1e-12);
}

TEST(Classifier1, ExactMatchGivesCertainty) {
  TemplateDatabase db;
  db.add("a", filled(0.0), filled(0.0));
  db.add("b", filled(1.0), filled(1.0));
  const CandidateDecision d = classifier1(db, {filled(1.0), filled(1.0)});
  EXPECT_TRUE(d.exact_match);
  EXPECT_EQ(db.class_name(d.chosen), "b");
  EXPECT_EQ(d.chosen_prob(), 1.0);
}

TEST(Classifier1, MatchesBruteForceArgmin) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const TemplateDatabase db = random_db(rng, 8, 2);
    const TestPair t = random_probe(rng);
    const CandidateDecision d = classifier1(db, t);
    std::size_t bl = 0, br = 0, bf = 0;
    double dl = 1e300, dr = 1e300, df = 1e300;
    for (std::size_t i = 0; i < db.rows(); ++i) {
      double l = 0, r = 0;
      for (std::size_t j = 0; j < kFeatureCount; ++j) l += std::abs(db.left(i)[j] - t.left[j]), r += std::abs(db.right(i)[j] - t.right[j]);
      if (l < dl) dl = l, bl = i;
      if (r < dr) dr = r, br = i;
      if ((l + r) / 2 < df) df = (l + r) / 2, bf = i;
    }
    EXPECT_EQ(d.classes, (std::vector<int>{db.label(bl), db.label(br), db.label(bf)}));
  }
}

TEST(Classifier1, SumRuleMergesSameClass) {
  CandidateDecision d;
  d.classes = {4, 4, 7};
  d.probs = {0.4, 0.3, 0.3};
  const CandidateDecision m = classifier1_sum_rule(d);
  EXPECT_EQ(m.classes, (std::vector<int>{4, 7}));
  EXPECT_NEAR(m.probs[0], 0.7, 1e-15);
  EXPECT_EQ(m.chosen, 4);
  EXPECT_NEAR(sum(m.probs), 1.0, 1e-12);
}

TEST(Classifier1, FusedTopThreeFromSums) {
  const auto p = classifier1_probs({2, 3, 4}, 3);
  EXPECT_NEAR(p[0], 0.3889, 1e-4);
  EXPECT_NEAR(p[1], 0.3333, 1e-4);
  EXPECT_NEAR(p[2], 0.2778, 1e-4);
}

TEST(Classifier1, FusedVariantSumsToOne) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const TemplateDatabase db = random_db(rng, 6, 3);
    const CandidateDecision d = classifier1_fused(db, random_probe(rng), 3);
    ASSERT_EQ(d.classes.size(), 3u);
    EXPECT_NEAR(sum(d.probs), 1.0, 1e-12);
  }
}

TEST(Classifier1, ExcludedClassIsInvisible) {
  TemplateDatabase db;
  db.add("a", filled(0.0), filled(0.0));
  db.add("b", filled(2.0), filled(2.0));
  db.add("c", filled(3.0), filled(3.0));
  const TestPair t{filled(0.0), filled(0.0)};
  const int a = *db.find_class("a");
  EXPECT_EQ(classifier1(db, t, 3, a).chosen, *db.find_class("b"));
  EXPECT_EQ(classifier1_fused(db, t, 3, a).classes, (std::vector<int>{1, 2}));
  TemplateDatabase only;
  only.add("a", filled(0.0), filled(0.0));
  try {
    classifier1(only, t, 3, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NoMatches);
  }
}

TEST(Classifier2, ProbabilitiesFromCounts) {
  const auto p = classifier2_probs({20, 15, 5});
  EXPECT_NEAR(p[0], 0.5, 1e-15);
  EXPECT_NEAR(p[1], 0.375, 1e-15);
  EXPECT_NEAR(p[2], 0.125, 1e-15);
  EXPECT_THROW(classifier2_probs({0, 0, 0}), Error);
}

TEST(Classifier2, SumsToOneAndIsScaleInvariant) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> q(0, 26);
  for (int k = 0; k < 10000; ++k) {
    std::vector<double> c{static_cast<double>(q(rng)), static_cast<double>(q(rng)), static_cast<double>(q(rng) + 1)};
    const auto p = classifier2_probs(c);
    EXPECT_NEAR(sum(p), 1.0, 1e-12);
    for (double& v : c) v *= 3.5;
    const auto s = classifier2_probs(c);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(s[i], p[i], 1e-12);
  }
}

TEST(Classifier2, PerFeatureScoresAreCountOverTotal) {
  const auto p = count_probs_per_feature({26, 13, 0});
  EXPECT_EQ(p, (std::vector<double>{1.0, 0.5, 0.0}));
}

TEST(Classifier2, CountsWithinThreshold) {
  TemplateDatabase db;
  FeatureValues l = filled(0.0);
  for (std::size_t j = 0; j < 10; ++j) l[j] = 5.0;
  db.add("a", l, filled(0.5));
  const MatchCounts c = match_counts(db, {filled(0.0), filled(0.0)}, 0.7);
  EXPECT_EQ(c.L[0], 16);
  EXPECT_EQ(c.R[0], 26);
  EXPECT_DOUBLE_EQ(c.F[0], 21.0);
}

TEST(Classifier2, TopRowsBreakTiesTowardsLowerIndex) {
  TemplateDatabase db;
  db.add("a", filled(1.0), filled(1.0));
  db.add("b", filled(0.0), filled(0.0));
  db.add("c", filled(0.0), filled(0.0));
  db.add("d", filled(1.0), filled(1.0));
  const CandidateDecision d = classifier2(db, {filled(0.0), filled(0.0)}, 0.5, 3);
  EXPECT_EQ(d.classes, (std::vector<int>{1, 2, 0}));
  EXPECT_EQ(d.chosen, 1);
  EXPECT_NEAR(d.probs[0], 0.5, 1e-15);
  EXPECT_NEAR(d.probs[2], 0.0, 1e-15);
}

TEST(Classifier2, ChannelsScoreEachHand) {
  TemplateDatabase db;
  db.add("a", filled(0.0), filled(9.0));
  db.add("b", filled(9.0), filled(0.0));
  const CandidateDecision d = classifier2_channels(db, {filled(0.0), filled(0.0)}, 0.7);
  EXPECT_EQ(d.classes, (std::vector<int>{0, 1, 0}));
  EXPECT_EQ(d.probs, (std::vector<double>{1.0, 1.0, 0.5}));
  EXPECT_EQ(d.chosen, 0);
  EXPECT_EQ(d.prob_of(0), 1.0);
}

TEST(Classifier2, NothingWithinThresholdIsNoMatch) {
  TemplateDatabase db;
  db.add("a", filled(5.0), filled(5.0));
  for (auto run : {+[](const TemplateDatabase& d) { classifier2_channels(d, {filled(0), filled(0)}, 0.7); },
                   +[](const TemplateDatabase& d) { classifier2(d, {filled(0), filled(0)}, 0.7); }}) {
    try {
      run(db);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::NoMatches);
    }
  }
  EXPECT_THROW(classifier2(db, {filled(0), filled(0)}, -1.0), Error);
}

TEST(Selection, TopRowsMatchesStableSort) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> key_value(0, 6), label(0, 4), size(0, 40), depth(0, 6);
  for (int trial = 0; trial < 500; ++trial) {
    TemplateDatabase db;
    for (int c = 0; c < 5; ++c) db.intern("c" + std::to_string(c));
    const int n = size(rng);
    std::vector<double> key;
    for (int i = 0; i < n; ++i) {
      db.add(label(rng), filled(0), filled(0));
      key.push_back(key_value(rng));
    }
    const int exclude = trial % 2 ? label(rng) : kNoClass;
    const auto d = static_cast<std::size_t>(depth(rng));
    for (bool descending : {false, true}) {
      std::vector<std::size_t> idx;
      for (int i = 0; i < n; ++i)
        if (db.label(static_cast<std::size_t>(i)) != exclude) idx.push_back(static_cast<std::size_t>(i));
      std::stable_sort(idx.begin(), idx.end(),
                       [&](std::size_t a, std::size_t b) { return descending ? key[a] > key[b] : key[a] < key[b]; });
      idx.resize(std::min(d, idx.size()));
      EXPECT_EQ(detail::top_rows(db, key, d, descending, exclude), idx);
    }
  }
}

TEST(Selection, SingleScanEqualsSeparateScans) {
  std::mt19937_64 rng(12);
  const TemplateDatabase db = random_db(rng, 6, 3);
  const TestPair t = random_probe(rng);
  const RowScores s = score_rows(db, t, 0.8);
  const DistanceSums d = distance_sums(db, t);
  const MatchCounts c = match_counts(db, t, 0.8);
  EXPECT_EQ(s.dist.L, d.L);
  EXPECT_EQ(s.dist.R, d.R);
  EXPECT_EQ(s.dist.F, d.F);
  EXPECT_EQ(s.counts.L, c.L);
  EXPECT_EQ(s.counts.R, c.R);
  EXPECT_EQ(s.counts.F, c.F);
  EXPECT_THROW(score_rows(db, t, -0.1), Error);
}
