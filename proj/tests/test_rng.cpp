#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "ctm/parallel.hpp"
#include "ctm/rng.hpp"

namespace {

TEST(CounterRng, SameSeedSameStream) {
  ctm::CounterRng a(42), b(42);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a(), b());
}

TEST(CounterRng, StreamIsAFunctionOfSeedAndCounter) {
  ctm::CounterRng a(7);
  std::vector<std::uint64_t> first;
  for (int i = 0; i < 10; ++i) first.push_back(a());
  // Output i is mix(seed + (i+1) * gamma).
  for (std::uint64_t i = 0; i < 10; ++i) {
    EXPECT_EQ(first[i], ctm::splitmix64_mix(7 + (i + 1) * ctm::kGoldenGamma));
  }
  EXPECT_EQ(a.counter(), 10u);
}

TEST(CounterRng, DerivedSeedsAreDistinct) {
  std::set<std::uint64_t> seeds;
  for (std::uint64_t b = 0; b < 4; ++b) {
    for (std::uint64_t i = 0; i < 5000; ++i) seeds.insert(ctm::derive_seed(b, i));
  }
  EXPECT_EQ(seeds.size(), 20000u);
}

TEST(CounterRng, UniformRangeAndMoments) {
  ctm::CounterRng rng(1);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    sq += u * u;
  }
  const double mean = sum / n;
  EXPECT_NEAR(mean, 0.5, 5.0 * std::sqrt(1.0 / 12.0 / n));
  EXPECT_NEAR(sq / n - mean * mean, 1.0 / 12.0, 2e-3);
}

TEST(CounterRng, BelowIsUniformOverItsRange) {
  ctm::CounterRng rng(3);
  const int k = 7, n = 70000;
  std::vector<int> counts(k, 0);
  for (int i = 0; i < n; ++i) {
    const auto v = rng.below(k);
    ASSERT_LT(v, static_cast<std::uint64_t>(k));
    ++counts[v];
  }
  double chi2 = 0.0;
  const double expected = static_cast<double>(n) / k;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  EXPECT_LT(chi2, 22.46);  // chi-square(6) 0.999 quantile
  EXPECT_EQ(rng.below(1), 0u);
  EXPECT_EQ(rng.below(0), 0u);
}

TEST(CounterRng, NormalMoments) {
  ctm::CounterRng rng(5);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 5.0 / std::sqrt(n));
  EXPECT_NEAR(sq / n, 1.0, 0.02);
}

TEST(Shuffle, ProducesPermutationsDeterministically) {
  for (std::size_t n : {0u, 1u, 2u, 17u, 1000u}) {
    ctm::CounterRng a(n), b(n);
    const auto p = ctm::random_permutation(n, a);
    EXPECT_EQ(p, ctm::random_permutation(n, b));
    std::vector<std::size_t> sorted = p;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::size_t> iota(n);
    std::iota(iota.begin(), iota.end(), 0);
    EXPECT_EQ(sorted, iota);
  }
}

TEST(Shuffle, EveryPositionIsEquallyLikely) {
  // Element 0 of a 4-permutation should land in each slot 1/4 of the time.
  std::vector<int> where(4, 0);
  ctm::CounterRng rng(11);
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    const auto p = ctm::random_permutation(4, rng);
    ++where[std::find(p.begin(), p.end(), 0u) - p.begin()];
  }
  for (int w : where) EXPECT_NEAR(w, n / 4.0, 5.0 * std::sqrt(n * 0.25 * 0.75));
}

TEST(ParallelFor, VisitsEveryIndexOnceAndPropagatesErrors) {
  for (std::size_t threads : {1u, 4u}) {
    ctm::parallel_thread_override() = threads;
    std::vector<int> hits(1000, 0);
    ctm::parallel_for(hits.size(), [&](std::size_t i) { ++hits[i]; });
    EXPECT_TRUE(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
    EXPECT_THROW(ctm::parallel_for(10, [](std::size_t i) {
                   if (i == 5) throw std::runtime_error("boom");
                 }),
                 std::runtime_error);
  }
  ctm::parallel_thread_override() = 0;
}

}  // namespace
