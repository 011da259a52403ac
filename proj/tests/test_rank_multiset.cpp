#include <algorithm>
#include <vector>

#include <gtest/gtest.h>

#include "ctm/rank_multiset.hpp"
#include "ctm/rng.hpp"

namespace {

std::size_t naive_less(const std::vector<int>& v, int key) {
  return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [&](int x) { return x < key; }));
}
std::size_t naive_equal(const std::vector<int>& v, int key) {
  return static_cast<std::size_t>(std::count(v.begin(), v.end(), key));
}

TEST(RankMultiset, EmptyQueries) {
  ctm::RankMultiset<double> s;
  EXPECT_TRUE(s.empty());
  EXPECT_EQ(s.size(), 0u);
  EXPECT_EQ(s.count_less(1.0), 0u);
  EXPECT_EQ(s.count_equal(1.0), 0u);
  EXPECT_EQ(s.count_greater(1.0), 0u);
}

TEST(RankMultiset, SmallHandExample) {
  ctm::RankMultiset<int> s;
  for (int v : {5, 1, 5, 3, 5, 9}) s.insert(v);
  EXPECT_EQ(s.size(), 6u);
  EXPECT_EQ(s.distinct(), 4u);
  EXPECT_EQ(s.count_less(5), 2u);
  EXPECT_EQ(s.count_equal(5), 3u);
  EXPECT_EQ(s.count_greater(5), 1u);
  EXPECT_EQ(s.count_less(0), 0u);
  EXPECT_EQ(s.count_greater(9), 0u);
  std::vector<std::pair<int, std::size_t>> seen;
  s.for_each([&](const int& k, std::size_t m) { seen.emplace_back(k, m); });
  const std::vector<std::pair<int, std::size_t>> expected{{1, 1}, {3, 1}, {5, 3}, {9, 1}};
  EXPECT_EQ(seen, expected);
}

// Property: every query agrees with an O(n) recount after every insertion.
TEST(RankMultiset, MatchesNaiveRecount) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ctm::CounterRng rng(seed);
    ctm::RankMultiset<int> s;
    std::vector<int> all;
    const int range = seed % 2 == 0 ? 10 : 1000;  // heavy ties vs mostly distinct
    for (int i = 0; i < 400; ++i) {
      const int v = static_cast<int>(rng.below(range));
      s.insert(v);
      all.push_back(v);
      const int q = static_cast<int>(rng.below(range + 2)) - 1;
      ASSERT_EQ(s.count_less(q), naive_less(all, q));
      ASSERT_EQ(s.count_equal(q), naive_equal(all, q));
      ASSERT_EQ(s.count_greater(q), all.size() - naive_less(all, q) - naive_equal(all, q));
      ASSERT_EQ(s.size(), all.size());
    }
  }
}

TEST(RankMultiset, SortedInsertionStaysFast) {
  // A plain BST would degrade to a list here.
  ctm::RankMultiset<int> s;
  for (int i = 0; i < 200000; ++i) s.insert(i);
  EXPECT_EQ(s.count_less(100000), 100000u);
  EXPECT_EQ(s.count_greater(100000), 99999u);
}

}  // namespace
