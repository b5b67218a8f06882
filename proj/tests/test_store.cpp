#include <gtest/gtest.h>

#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include "handfuse/store.hpp"
#include "support.hpp"

using namespace handfuse;

namespace {

FeatureValues random_values(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(5.0, 250.0);
  FeatureValues v;
  for (auto& x : v) x = u(rng);
  return v;
}

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::InvalidInput;
}

}  // namespace

TEST(Config, DefaultsAndOverrides) {
  std::istringstream in("# matching\nscheme = 3\nth=1.2  # wider\n\nd=4\nresize=200x300\nnormalize=off\n");
  const Config c = parse_config(in);
  EXPECT_EQ(c.scheme, 3);
  EXPECT_DOUBLE_EQ(c.th, 1.2);
  EXPECT_EQ(c.d, 4u);
  ASSERT_TRUE(c.resize);
  EXPECT_EQ(*c.resize, (Size{200, 300}));
  EXPECT_FALSE(c.normalize);
  EXPECT_DOUBLE_EQ(c.alpha_deg, 5.0);
  EXPECT_EQ(c.match().scheme, Scheme::Three);
}

TEST(Config, ResizeIsOffByDefault) { EXPECT_FALSE(Config{}.resize); }

TEST(Config, BadInputIsReported) {
  EXPECT_EQ(code_of([] {
              std::istringstream in("colour=blue\n");
              parse_config(in);
            }),
            Errc::ParseError);
  EXPECT_EQ(code_of([] {
              std::istringstream in("th=abc\n");
              parse_config(in);
            }),
            Errc::ParseError);
  EXPECT_EQ(code_of([] {
              std::istringstream in("no equals sign\n");
              parse_config(in);
            }),
            Errc::ParseError);
  EXPECT_EQ(code_of([] {
              std::istringstream in("d=1\n");
              parse_config(in);
            }),
            Errc::InvalidInput);
  EXPECT_EQ(code_of([] {
              std::istringstream in("scheme=5\n");
              parse_config(in);
            }),
            Errc::InvalidInput);
  EXPECT_EQ(code_of([] { load_config("/nonexistent/handfuse.conf"); }), Errc::IoError);
}

TEST(Store, SaveLoadRoundTripIsExact) {
  std::mt19937_64 rng(1);
  TemplateStore s;
  for (int u = 0; u < 4; ++u)
    for (int k = 0; k < 2; ++k)
      for (HandSide side : {HandSide::Left, HandSide::Right}) s.add({"user" + std::to_string(u), side, k, random_values(rng)});
  const auto dir = test_support::scratch_dir("store");
  s.save(dir / "db.csv");
  const TemplateStore back = TemplateStore::load(dir / "db.csv");
  EXPECT_TRUE(back == s);
  EXPECT_TRUE(std::filesystem::exists(stats_path(dir / "db.csv")));
  TemplateStore again = back;
  again.save(dir / "db2.csv");
  std::ifstream a(dir / "db.csv"), b(dir / "db2.csv");
  EXPECT_EQ(std::string(std::istreambuf_iterator<char>(a), {}), std::string(std::istreambuf_iterator<char>(b), {}));
}

TEST(Store, ValuesKeepSixDecimals) {
  TemplateStore s;
  FeatureValues v;
  v.fill(1.23456789);
  s.add({"a", HandSide::Left, 0, v});
  EXPECT_EQ(s.rows()[0].raw[0], 1.234568);
}

TEST(Store, DuplicateKeyIsRejected) {
  TemplateStore s;
  FeatureValues v{};
  v.fill(3.0);
  s.add({"a", HandSide::Left, 0, v});
  s.add({"a", HandSide::Right, 0, v});
  EXPECT_EQ(code_of([&] { s.add({"a", HandSide::Left, 0, v}); }), Errc::DuplicateSample);
  EXPECT_EQ(s.next_sample("a"), 1);
  EXPECT_EQ(s.next_sample("b"), 0);
  EXPECT_EQ(code_of([&] { s.add({"x,y", HandSide::Left, 0, v}); }), Errc::InvalidInput);
}

TEST(Store, MissingFileIsEmpty) { EXPECT_EQ(TemplateStore::load("/nonexistent/db.csv").size(), 0u); }

TEST(Store, MalformedRowsAreParseErrors) {
  std::istringstream short_row("user_id,hand,sample_index\nbob,L,0,1,2\n");
  EXPECT_EQ(code_of([&] { TemplateStore::read_csv(short_row); }), Errc::ParseError);
  std::string row = "bob,L,0";
  for (std::size_t j = 0; j < kFeatureCount; ++j) row += ",1";
  std::istringstream dup(row + "\n" + row + "\n");
  EXPECT_EQ(code_of([&] { TemplateStore::read_csv(dup); }), Errc::DuplicateSample);
  std::istringstream bad_side("bob,X,0" + row.substr(7) + "\n");
  EXPECT_THROW(TemplateStore::read_csv(bad_side), Error);
}

TEST(Store, StatsRoundTripExactly) {
  std::mt19937_64 rng(2);
  TemplateStore s;
  for (int k = 0; k < 3; ++k) {
    s.add({"a", HandSide::Left, k, random_values(rng)});
    s.add({"a", HandSide::Right, k, random_values(rng)});
  }
  std::ostringstream out;
  s.write_stats(out);
  std::istringstream in(out.str());
  EXPECT_TRUE(TemplateStore::read_stats(in) == s.stats());
  std::string mean_only = "L,mean";
  for (std::size_t j = 0; j < kFeatureCount; ++j) mean_only += ",1";
  std::istringstream partial("hand,stat\n" + mean_only + "\n");
  EXPECT_EQ(code_of([&] { TemplateStore::read_stats(partial); }), Errc::ParseError);
}

TEST(Store, DatabasePairsHandsBySample) {
  std::mt19937_64 rng(3);
  TemplateStore s;
  s.add({"a", HandSide::Left, 0, random_values(rng)});
  s.add({"a", HandSide::Right, 0, random_values(rng)});
  s.add({"b", HandSide::Left, 0, random_values(rng)});
  s.add({"b", HandSide::Right, 0, random_values(rng)});
  s.add({"b", HandSide::Left, 1, random_values(rng)});  // no right hand
  const TemplateDatabase raw = s.database(false);
  ASSERT_EQ(raw.rows(), 2u);
  EXPECT_EQ(raw.left(1), s.rows()[2].raw);
  EXPECT_EQ(raw.right(1), s.rows()[3].raw);
  const TemplateDatabase z = s.database(true);
  const FeatureStats sl = usable_stats(s.stats().left);
  EXPECT_NEAR(z.left(0)[0], (s.rows()[0].raw[0] - sl.mean[0]) / sl.sigma[0], 1e-12);
  const TestPair p = s.probe(s.rows()[0].raw, s.rows()[1].raw);
  EXPECT_EQ(p.left, z.left(0));
}

TEST(Store, ZeroSpreadFallsBackToUnitScale) {
  FeatureStats st;
  st.sigma.fill(0.0);
  st.sigma[3] = 2.0;
  const FeatureStats u = usable_stats(st);
  EXPECT_EQ(u.sigma[0], 1.0);
  EXPECT_EQ(u.sigma[3], 2.0);
}
