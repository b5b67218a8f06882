#include <gtest/gtest.h>

#include <random>

#include "handfuse/experiments.hpp"

using namespace handfuse;

namespace {

/// Well-separated classes: class c sits at c * 3 in every feature.
TemplateDatabase spaced_db(int classes, int per_class, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 0.1);
  TemplateDatabase db;
  for (int c = 0; c < classes; ++c)
    for (int k = 0; k < per_class; ++k) {
      FeatureValues l, r;
      for (auto& v : l) v = 3.0 * c + z(rng);
      for (auto& v : r) v = 3.0 * c + z(rng);
      db.add("user" + std::to_string(c), l, r);
    }
  return db;
}

TestPair probe_near(int c, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 0.1);
  TestPair t;
  for (auto& v : t.left) v = 3.0 * c + z(rng);
  for (auto& v : t.right) v = 3.0 * c + z(rng);
  return t;
}

}  // namespace

TEST(Scheme, ParsesOneToThree) {
  EXPECT_EQ(parse_scheme(1), Scheme::One);
  EXPECT_EQ(parse_scheme(3), Scheme::Three);
  EXPECT_THROW(parse_scheme(0), Error);
  EXPECT_THROW(parse_scheme(4), Error);
}

TEST(Trial, EverySchemeIdentifiesCleanProbes) {
  std::mt19937_64 rng(1);
  const TemplateDatabase db = spaced_db(10, 2, rng);
  for (int s = 1; s <= 3; ++s) {
    const MatchParams p{parse_scheme(s), 0.7, 3};
    for (int c = 0; c < 10; ++c) {
      const TrialResult r = run_trial(db, probe_near(c, rng), p, c);
      EXPECT_TRUE(r.correct()) << "scheme " << s << " class " << c;
      EXPECT_TRUE(r.note.empty());
      ASSERT_TRUE(r.first && r.second);
    }
  }
}

TEST(Trial, NoFeatureWithinThresholdRejects) {
  std::mt19937_64 rng(2);
  const TemplateDatabase db = spaced_db(3, 2, rng);
  TestPair far;
  far.left.fill(100.0);
  far.right.fill(100.0);
  const TrialResult r = run_trial(db, far, MatchParams{}, 0);
  EXPECT_TRUE(r.fused.rejected());
  EXPECT_EQ(r.note, "NoMatches");
  EXPECT_FALSE(r.correct());
}

TEST(Trial, ExcludedClassIsNeverRecognized) {
  std::mt19937_64 rng(3);
  const TemplateDatabase db = spaced_db(5, 2, rng);
  for (int s = 1; s <= 3; ++s)
    for (int c = 0; c < 5; ++c) {
      const TrialResult r = run_trial(db, probe_near(c, rng), MatchParams{parse_scheme(s), 0.7, 3}, kNoClass, c);
      EXPECT_NE(r.rc(), c);
    }
}

TEST(Identify, EmptyDatabaseRejects) {
  EXPECT_FALSE(identify(TemplateDatabase{}, TestPair{}, MatchParams{}));
}

TEST(Verify, AcceptsGenuineAndRejectsOthers) {
  std::mt19937_64 rng(4);
  const TemplateDatabase db = spaced_db(4, 2, rng);
  const TestPair t = probe_near(2, rng);
  EXPECT_TRUE(verify(db, "user2", t, MatchParams{}, 0.5));
  EXPECT_FALSE(verify(db, "user1", t, MatchParams{}, 0.5));
  EXPECT_FALSE(verify(db, "user2", t, MatchParams{}, 1.01));
  try {
    verify(db, "nobody", t, MatchParams{}, 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnknownClass);
  }
}

TEST(Verify, AcceptanceNeedsClaimAndBelief) {
  FusedDecision d;
  d.class_a = 3;
  d.class_b = 4;
  d.bel_a = 0.6;
  d.bel_b = 0.3;
  d.rc = 3;
  EXPECT_TRUE(accepts(d, 3, 0.6));
  EXPECT_FALSE(accepts(d, 3, 0.61));
  EXPECT_FALSE(accepts(d, 4, 0.1));
  d.rc = kNoClass;
  EXPECT_FALSE(accepts(d, 3, 0.0));
}
