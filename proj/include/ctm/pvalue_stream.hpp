#pragma once

// Online conformal p-values.
//
// For the n-th score alpha_n and tie-break theta_n in [0, 1]
//
//   p_n = ( #{i <= n : alpha_i < alpha_n} + theta_n * #{i <= n : alpha_i == alpha_n} ) / n
//
// where both counts include alpha_n itself. Under exchangeability of the
// scores and independent uniform theta, p_1, p_2, ... are IID Uniform[0,1].
// Randomness is never drawn here: theta is supplied by the caller so that a
// stream can be replayed exactly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ctm/error.hpp"
#include "ctm/rank_multiset.hpp"

namespace ctm {

struct ScoreRecord {
  std::uint64_t index = 0;  // 1-based
  double score = 0.0;
};

struct PValue {
  std::uint64_t index = 0;
  double value = 0.0;
  double tiebreak = 0.0;
};

/// Rank state over every score seen so far. Ties are exact value equality;
/// -0.0 is folded onto +0.0 so that value equality and bitwise equality agree.
class PValueStream {
 public:
  PValueStream() = default;

  PValue push(double score, double tiebreak) {
    if (!std::isfinite(score)) {
      throw StreamError("non-finite conformity score at index " + std::to_string(size() + 1), size() + 1);
    }
    if (!(tiebreak >= 0.0 && tiebreak <= 1.0)) {
      throw InvalidArgument("tie-break must lie in [0, 1], got " + std::to_string(tiebreak));
    }
    if (score == 0.0) score = 0.0;
    ranks_.insert(score);
    const auto n = static_cast<double>(ranks_.size());
    const auto less = static_cast<double>(ranks_.count_less(score));
    const auto equal = static_cast<double>(ranks_.count_equal(score));
    const double p = std::clamp((less + tiebreak * equal) / n, 0.0, 1.0);
    return PValue{ranks_.size(), p, tiebreak};
  }

  PValue push(const ScoreRecord& record, double tiebreak) {
    if (record.index != size() + 1) {
      throw StreamError("score record index " + std::to_string(record.index) + " does not follow " +
                            std::to_string(size()),
                        record.index);
    }
    return push(record.score, tiebreak);
  }

  std::uint64_t size() const { return ranks_.size(); }

  const RankMultiset<double>& ranks() const { return ranks_; }

 private:
  RankMultiset<double> ranks_;
};

/// Kolmogorov-Smirnov distance between the empirical CDF of `values` and the
/// Uniform[0,1] CDF.
inline double ks_uniform_distance(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("KS distance of an empty sample");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double x = std::clamp(sorted[i], 0.0, 1.0);
    d = std::max(d, static_cast<double>(i + 1) / n - x);
    d = std::max(d, x - static_cast<double>(i) / n);
  }
  return d;
}

inline double uniformity_check(std::span<const PValue> pvalues) {
  std::vector<double> values;
  values.reserve(pvalues.size());
  for (const auto& p : pvalues) values.push_back(p.value);
  return ks_uniform_distance(values);
}

}  // namespace ctm
