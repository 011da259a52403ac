#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "ctm/pvalue_stream.hpp"
#include "ctm/rng.hpp"

namespace {

// Direct transcription of the definition.
double naive_pvalue(const std::vector<double>& scores, double theta) {
  const double last = scores.back();
  double less = 0.0, equal = 0.0;
  for (double s : scores) {
    less += s < last ? 1.0 : 0.0;
    equal += s == last ? 1.0 : 0.0;
  }
  return (less + theta * equal) / static_cast<double>(scores.size());
}

TEST(PValueStream, FirstPValueIsTheTiebreak) {
  ctm::PValueStream s;
  const auto p = s.push(3.0, 0.37);
  EXPECT_EQ(p.index, 1u);
  EXPECT_DOUBLE_EQ(p.value, 0.37);
}

TEST(PValueStream, HandExample) {
  ctm::PValueStream s;
  s.push(2.0, 0.5);
  s.push(1.0, 0.5);
  // scores {2, 1, 2}: one below, two equal -> (1 + 0.25 * 2) / 3
  EXPECT_DOUBLE_EQ(s.push(2.0, 0.25).value, 0.5);
  // scores {2, 1, 2, 5}: largest, theta 1 -> 4 / 4
  EXPECT_DOUBLE_EQ(s.push(5.0, 1.0).value, 1.0);
  // scores {.., 0}: smallest, theta 0 -> 0
  EXPECT_DOUBLE_EQ(s.push(0.0, 0.0).value, 0.0);
}

TEST(PValueStream, AllTiedGivesTheTiebreak) {
  ctm::PValueStream s;
  for (int i = 0; i < 50; ++i) {
    const double theta = (i % 10) / 10.0;
    EXPECT_DOUBLE_EQ(s.push(1.5, theta).value, theta);
  }
}

TEST(PValueStream, NegativeZeroTiesWithZero) {
  ctm::PValueStream s;
  s.push(0.0, 0.5);
  EXPECT_DOUBLE_EQ(s.push(-0.0, 1.0).value, 1.0);
  EXPECT_EQ(s.ranks().distinct(), 1u);
}

// Property: the incremental rank state reproduces the O(n) definition.
TEST(PValueStream, MatchesDefinition) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ctm::CounterRng rng(seed);
    ctm::PValueStream s;
    std::vector<double> scores;
    for (int i = 0; i < 500; ++i) {
      const double score = seed % 2 ? std::floor(rng.uniform() * 8.0) : rng.normal();
      const double theta = rng.uniform();
      scores.push_back(score);
      const auto p = s.push(score, theta);
      ASSERT_EQ(p.index, scores.size());
      ASSERT_NEAR(p.value, naive_pvalue(scores, theta), 1e-15);
      ASSERT_GE(p.value, 0.0);
      ASSERT_LE(p.value, 1.0);
    }
  }
}

TEST(PValueStream, ExchangeableScoresGiveUniformPValues) {
  ctm::CounterRng rng(99);
  ctm::PValueStream s;
  std::vector<ctm::PValue> ps;
  const int n = 20000;
  for (int i = 0; i < n; ++i) ps.push_back(s.push(std::floor(rng.normal() * 3.0), rng.uniform()));
  // KS critical value at 0.001 is about 1.95 / sqrt(n).
  EXPECT_LT(ctm::uniformity_check(ps), 1.95 / std::sqrt(static_cast<double>(n)));
}

TEST(PValueStream, RejectsBadInput) {
  ctm::PValueStream s;
  s.push(1.0, 0.5);
  try {
    s.push(std::numeric_limits<double>::quiet_NaN(), 0.5);
    FAIL() << "expected StreamError";
  } catch (const ctm::StreamError& e) {
    EXPECT_EQ(e.index(), 2u);
  }
  EXPECT_THROW(s.push(std::numeric_limits<double>::infinity(), 0.5), ctm::StreamError);
  EXPECT_THROW(s.push(1.0, 1.5), ctm::InvalidArgument);
  EXPECT_THROW(s.push(1.0, -0.1), ctm::InvalidArgument);
  EXPECT_EQ(s.size(), 1u);
}

TEST(PValueStream, ScoreRecordsMustBeConsecutive) {
  ctm::PValueStream s;
  s.push(ctm::ScoreRecord{1, 0.3}, 0.5);
  EXPECT_THROW(s.push(ctm::ScoreRecord{3, 0.3}, 0.5), ctm::StreamError);
  EXPECT_EQ(s.push(ctm::ScoreRecord{2, 0.3}, 0.5).index, 2u);
}

TEST(KsDistance, GridValue) {
  const std::vector<double> grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  EXPECT_NEAR(ctm::ks_uniform_distance(grid), 0.1, 1e-15);
  const std::vector<double> mid{0.05, 0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85, 0.95};
  EXPECT_NEAR(ctm::ks_uniform_distance(mid), 0.05, 1e-15);
  EXPECT_THROW(ctm::ks_uniform_distance({}), ctm::InvalidArgument);
}

}  // namespace
