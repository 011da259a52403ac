#pragma once

// Alarm procedures on top of a test martingale S_0 = 1, S_1, S_2, ...
//
//   Ville               alarm at the first n with S_n >= c; P(false alarm) <= 1/c.
//   CUSUM               gamma_n = max_{i<n} S_n / S_i       = (S_n/S_{n-1}) max(gamma_{n-1}, 1)
//   Shiryaev-Roberts    psi_n   = sum_{i<n} S_n / S_i       = (S_n/S_{n-1}) (psi_{n-1} + 1)
//   linear barrier      alarm at the first n with gamma_n >= slope * n
//
// gamma_0 = psi_0 = 0. Every detector consumes log-capitals (or the step
// ratio directly), so the absolute scale of S_n never matters and the
// statistics stay exact however far S_n decays.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>

#include "ctm/error.hpp"

namespace ctm {

enum class DetectorKind : std::uint8_t { Ville, Cusum, ShiryaevRoberts, Barrier };

inline std::string_view to_string(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::Ville: return "ville";
    case DetectorKind::Cusum: return "cusum";
    case DetectorKind::ShiryaevRoberts: return "sr";
    case DetectorKind::Barrier: return "barrier";
  }
  return "unknown";
}

struct DetectorAlarm {
  DetectorKind kind = DetectorKind::Ville;
  std::uint64_t step = 0;
  double statistic = 0.0;  // S_n, gamma_n, psi_n, or gamma_n for the barrier
  double threshold = 0.0;  // c, or slope * n for the barrier
};

namespace detail {

inline double checked_threshold(double c, std::string_view what) {
  if (!(c > 0.0)) throw InvalidArgument(std::string(what) + " threshold must be positive");
  return c;
}

inline double checked_ratio(double ratio, std::uint64_t step) {
  if (!std::isfinite(ratio) || ratio < 0.0) {
    throw StreamError("non-finite martingale ratio at step " + std::to_string(step), step);
  }
  return ratio;
}

}  // namespace detail

class VilleDetector {
 public:
  explicit VilleDetector(double threshold)
      : threshold_(detail::checked_threshold(threshold, "Ville")), log_threshold_(std::log(threshold)) {}

  /// Feeds ln S_n for n = 1, 2, ... in order.
  std::optional<DetectorAlarm> step(double log_capital, std::uint64_t n) {
    if (n != last_step_ + 1) throw StreamError("Ville detector expects consecutive steps", n);
    last_step_ = n;
    if (fire_step_ || !(log_capital >= log_threshold_)) return std::nullopt;
    fire_step_ = n;
    return DetectorAlarm{DetectorKind::Ville, n, std::exp(log_capital), threshold_};
  }

  bool fired() const { return fire_step_.has_value(); }
  std::optional<std::uint64_t> fire_step() const { return fire_step_; }
  double threshold() const { return threshold_; }

 private:
  double threshold_;
  double log_threshold_;
  std::uint64_t last_step_ = 0;
  std::optional<std::uint64_t> fire_step_;
};

struct StatisticUpdate {
  double value = 0.0;
  std::optional<DetectorAlarm> alarm;
};

/// Shared machinery of the two ratio recursions.
template <DetectorKind Kind>
class RatioDetector {
 public:
  explicit RatioDetector(double threshold = std::numeric_limits<double>::infinity())
      : threshold_(detail::checked_threshold(threshold, Kind == DetectorKind::Cusum ? "CUSUM" : "Shiryaev-Roberts")) {}

  /// Feeds ln S_n; the ratio S_n / S_{n-1} is exp of the log difference.
  StatisticUpdate step(double log_capital) {
    const double ratio = std::exp(log_capital - log_prev_);
    log_prev_ = log_capital;
    return step_ratio(ratio);
  }

  /// Feeds S_n / S_{n-1} directly.
  StatisticUpdate step_ratio(double ratio) {
    ++steps_;
    detail::checked_ratio(ratio, steps_);
    if constexpr (Kind == DetectorKind::Cusum) {
      value_ = ratio * std::max(value_, 1.0);
    } else {
      value_ = ratio * (value_ + 1.0);
    }
    StatisticUpdate update{value_, std::nullopt};
    if (!fire_step_ && value_ >= threshold_) {
      fire_step_ = steps_;
      update.alarm = DetectorAlarm{Kind, steps_, value_, threshold_};
    }
    return update;
  }

  double value() const { return value_; }
  std::uint64_t steps() const { return steps_; }
  bool fired() const { return fire_step_.has_value(); }
  std::optional<std::uint64_t> fire_step() const { return fire_step_; }
  double threshold() const { return threshold_; }

 private:
  double threshold_;
  double value_ = 0.0;
  double log_prev_ = 0.0;  // ln S_0
  std::uint64_t steps_ = 0;
  std::optional<std::uint64_t> fire_step_;
};

using CusumDetector = RatioDetector<DetectorKind::Cusum>;
using ShiryaevRobertsDetector = RatioDetector<DetectorKind::ShiryaevRoberts>;

/// Running maximum psi*_n = max_{i<=n} psi_i (starts at psi_0 = 0).
class MaxProcess {
 public:
  double update(double value) {
    value_ = std::max(value_, value);
    return value_;
  }
  double value() const { return value_; }

 private:
  double value_ = 0.0;
};

/// Linear barrier y = slope * x on a paired CUSUM statistic.
class BarrierDetector {
 public:
  explicit BarrierDetector(double slope) : slope_(detail::checked_threshold(slope, "barrier")) {}

  std::optional<DetectorAlarm> step(double gamma, std::uint64_t n) {
    if (fire_step_ || !(gamma >= slope_ * static_cast<double>(n))) return std::nullopt;
    fire_step_ = n;
    return DetectorAlarm{DetectorKind::Barrier, n, gamma, slope_ * static_cast<double>(n)};
  }

  bool fired() const { return fire_step_.has_value(); }
  std::optional<std::uint64_t> fire_step() const { return fire_step_; }
  double slope() const { return slope_; }

 private:
  double slope_;
  std::optional<std::uint64_t> fire_step_;
};

/// Simple Jumper and both ratio recursions in plain linear arithmetic, the way
/// the formulas read. With rescale_period == 0 the capital is never rescaled
/// and underflows after roughly 1.9e5 ideal-setting steps, which corrupts the
/// ratios; with a period (e.g. 10000) the capital is reset to 1 every period
/// and the statistics stay correct. Kept as a reference for regression tests.
class LinearJumperReference {
 public:
  explicit LinearJumperReference(double jump_rate = 0.01, std::uint64_t rescale_period = 0)
      : jump_rate_(jump_rate), rescale_period_(rescale_period) {}

  double step(double p) {
    const double before = total_;
    for (double& c : capital_) c = (1.0 - jump_rate_) * c + (jump_rate_ / 3.0) * before;
    capital_[0] *= 1.0 - (p - 0.5);
    capital_[2] *= 1.0 + (p - 0.5);
    total_ = capital_[0] + capital_[1] + capital_[2];
    const double ratio = total_ / before;
    gamma_ = ratio * std::max(gamma_, 1.0);
    psi_ = ratio * (psi_ + 1.0);
    ++steps_;
    if (rescale_period_ != 0 && steps_ % rescale_period_ == 0 && total_ > 0.0) {
      log_offset_ += std::log(total_);
      for (double& c : capital_) c /= total_;
      total_ = 1.0;
    }
    return ratio;
  }

  double capital() const { return total_; }
  double log_capital() const { return log_offset_ + std::log(total_); }
  double gamma() const { return gamma_; }
  double psi() const { return psi_; }
  std::uint64_t steps() const { return steps_; }

 private:
  double jump_rate_;
  std::uint64_t rescale_period_;
  double capital_[3] = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  double total_ = 1.0;
  double log_offset_ = 0.0;
  double gamma_ = 0.0;
  double psi_ = 0.0;
  std::uint64_t steps_ = 0;
};

/// Larger root of slope * n * 10^(-decay * n) = opening_threshold.
///
/// The left-hand side rises from 0, peaks at n* = 1 / (decay ln 10) and decays
/// to 0, so there are two roots whenever the peak exceeds the threshold. This
/// is the step after which a linear barrier with the given slope beats a Ville
/// threshold on a capital decaying at `decay` decades per step.
inline double boundary_solve(double opening_threshold, double slope, double decay) {
  if (!(opening_threshold > 0.0) || !(slope > 0.0) || !(decay > 0.0)) {
    throw InvalidArgument("boundary_solve needs positive threshold, slope and decay");
  }
  const double k = decay * std::numbers::ln10;
  // g(n) = ln(lhs / rhs), strictly decreasing on (n*, inf).
  auto g = [&](double n) { return std::log(slope) + std::log(n) - k * n - std::log(opening_threshold); };
  const double peak = 1.0 / k;
  const double at_peak = g(peak);
  if (std::abs(at_peak) <= 1e-12) return peak;
  if (at_peak < 0.0) throw NumericError("boundary equation has no root: curve peak is below the threshold");
  double lo = peak;
  double hi = 2.0 * peak;
  while (g(hi) > 0.0) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) throw NumericError("boundary equation: failed to bracket the second root");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-10 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace ctm
