#pragma once

// Monte Carlo calibration in the ideal setting (p-values IID Uniform[0,1]).
//
// Every simulation i draws its p-values from CounterRng(derive_seed(base_seed, i)),
// so results depend only on (base_seed, i) and not on how simulations are
// spread over threads. Reductions always run in simulation-index order.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "ctm/betting.hpp"
#include "ctm/error.hpp"
#include "ctm/parallel.hpp"
#include "ctm/rng.hpp"

namespace ctm {

struct IdealSimulation {
  std::uint64_t n_steps = 0;
  std::uint64_t n_sims = 1000;
  std::uint64_t base_seed = 0;
  double jump_rate = SimpleJumper::kDefaultJumpRate;

  void validate() const {
    if (n_sims == 0) throw InvalidArgument("n_sims must be positive");
    if (!(jump_rate >= 0.0 && jump_rate <= 1.0)) throw InvalidArgument("jump rate must lie in [0, 1]");
  }

  CounterRng rng_for(std::uint64_t sim) const { return CounterRng(derive_seed(base_seed, sim)); }
};

// ---------------------------------------------------------------- quantiles

/// Linear-interpolation quantile (numpy's default) of an ascending sample.
/// +inf entries are allowed; a quantile touching one is +inf.
inline double sorted_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw InvalidArgument("quantile of an empty sample");
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double w = h - static_cast<double>(lo);
  if (w == 0.0 || lo == hi) return sorted[lo];
  if (std::isinf(sorted[hi]) || std::isinf(sorted[lo])) return std::numeric_limits<double>::infinity();
  return sorted[lo] + w * (sorted[hi] - sorted[lo]);
}

inline std::uint64_t count_at_or_above(std::span<const double> values, double threshold) {
  return static_cast<std::uint64_t>(std::count_if(values.begin(), values.end(), [&](double v) { return v >= threshold; }));
}

/// Candidate alarm threshold for a per-path false-alarm rate alpha: the
/// smallest observed value v such that at most floor(alpha * n) of the
/// values are >= v. For (1, ..., 100) and alpha = 0.01 this is 100. When no
/// observed value qualifies, the next double above the maximum is returned.
inline double threshold_for_alpha(std::span<const double> maxima, double alpha) {
  if (maxima.empty()) throw InvalidArgument("threshold_for_alpha on an empty sample");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  std::vector<double> sorted(maxima.begin(), maxima.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = sorted.size();
  const auto allowed = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(n)));
  if (allowed == 0) return std::nextafter(sorted.back(), std::numeric_limits<double>::infinity());
  // Candidate: the allowed-th largest value; step up past any ties below it.
  std::size_t idx = n - allowed;
  while (idx < n && static_cast<std::size_t>(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), sorted[idx])) > allowed) {
    idx = static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), sorted[idx]) - sorted.begin());
  }
  if (idx >= n) return std::nextafter(sorted.back(), std::numeric_limits<double>::infinity());
  return sorted[idx];
}

// ---------------------------------------------------------- Clopper-Pearson

struct BinomialCI {
  std::uint64_t successes = 0;
  std::uint64_t trials = 0;
  double level = 0.0;
  double lower = 0.0;
  double upper = 1.0;
};

namespace detail {

/// x with I_x(a, b) = q, by bisection on the regularized incomplete beta.
inline double beta_quantile(double q, double a, double b) {
  double lo = 0.0;
  double hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
    const double mid = 0.5 * (lo + hi);
    (boost::math::ibeta(a, b, mid) < q ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Exact (Clopper-Pearson) two-sided interval for a binomial proportion.
inline BinomialCI clopper_pearson(std::uint64_t x, std::uint64_t n, double level) {
  if (n == 0) throw InvalidArgument("clopper_pearson needs at least one trial");
  if (x > n) throw InvalidArgument("successes exceed trials");
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("confidence level must lie in (0, 1)");
  const double alpha = 1.0 - level;
  const auto xs = static_cast<double>(x);
  const auto ns = static_cast<double>(n);
  BinomialCI ci{x, n, level, 0.0, 1.0};
  if (x > 0) ci.lower = detail::beta_quantile(alpha / 2.0, xs, ns - xs + 1.0);
  if (x < n) ci.upper = detail::beta_quantile(1.0 - alpha / 2.0, xs + 1.0, ns - xs);
  return ci;
}

// ------------------------------------------------------------- simulations

/// Per simulation, max_{1<=n<=N} gamma_n of the CUSUM statistic on a Simple
/// Jumper path; 0 when N = 0 (gamma_0 = 0).
inline std::vector<double> simulate_cusum_max(const IdealSimulation& sim) {
  sim.validate();
  std::vector<double> maxima(sim.n_sims, 0.0);
  parallel_for(sim.n_sims, [&](std::size_t i) {
    CounterRng rng = sim.rng_for(i);
    SimpleJumper jumper(sim.jump_rate);
    double gamma = 0.0;
    double best = 0.0;
    for (std::uint64_t n = 0; n < sim.n_steps; ++n) {
      gamma = jumper.step_unchecked(rng.uniform()) * std::max(gamma, 1.0);
      best = std::max(best, gamma);
    }
    maxima[i] = best;
  });
  return maxima;
}

/// For each horizon N (ascending) and simulation, max_{1<=n<=N} gamma_n / n.
/// A path crosses the barrier y = c x within N steps iff this is >= c.
inline std::vector<std::vector<double>> simulate_barrier_ratio_maxima(const IdealSimulation& sim,
                                                                      std::span<const std::uint64_t> horizons) {
  sim.validate();
  if (horizons.empty()) throw InvalidArgument("at least one horizon required");
  for (std::size_t h = 0; h < horizons.size(); ++h) {
    if (horizons[h] == 0 || (h > 0 && horizons[h] <= horizons[h - 1])) {
      throw InvalidArgument("horizons must be positive and strictly increasing");
    }
  }
  std::vector<std::vector<double>> out(horizons.size(), std::vector<double>(sim.n_sims, 0.0));
  parallel_for(sim.n_sims, [&](std::size_t i) {
    CounterRng rng = sim.rng_for(i);
    SimpleJumper jumper(sim.jump_rate);
    double gamma = 0.0;
    double best = 0.0;
    std::size_t h = 0;
    for (std::uint64_t n = 1; n <= horizons.back(); ++n) {
      gamma = jumper.step_unchecked(rng.uniform()) * std::max(gamma, 1.0);
      best = std::max(best, gamma / static_cast<double>(n));
      if (n == horizons[h]) out[h++][i] = best;
    }
  });
  return out;
}

/// Smallest slope c >= 0 such that at most a fraction alpha of the paths
/// satisfy gamma_n >= c n for some n <= N, given per-path maxima of gamma_n / n.
inline double barrier_slope_for_alpha(std::span<const double> ratio_maxima, double alpha) {
  if (ratio_maxima.empty()) throw InvalidArgument("no paths");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in (0, 1]");
  const auto n = ratio_maxima.size();
  const auto allowed = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(n)));
  if (allowed >= n) return 0.0;
  std::vector<double> sorted(ratio_maxima.begin(), ratio_maxima.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  // Any c above the (allowed+1)-th largest value leaves at most `allowed` alarms.
  return std::nextafter(sorted[allowed], std::numeric_limits<double>::infinity());
}

struct BarrierSlopes {
  std::vector<std::uint64_t> horizons;
  std::vector<double> slopes;
  std::vector<std::vector<double>> ratio_maxima;  // [horizon][simulation]
};

inline BarrierSlopes simulate_barrier_slopes(const IdealSimulation& sim, std::span<const std::uint64_t> horizons,
                                             double alpha) {
  BarrierSlopes result;
  result.horizons.assign(horizons.begin(), horizons.end());
  result.ratio_maxima = simulate_barrier_ratio_maxima(sim, horizons);
  for (const auto& m : result.ratio_maxima) result.slopes.push_back(barrier_slope_for_alpha(m, alpha));
  return result;
}

struct LifespanSummary {
  std::uint64_t n_sims = 0;
  std::uint64_t censored = 0;
  std::uint64_t cap = 0;
  double mean = 0.0;
  /// True when censored runs were counted at the cap, making `mean` a lower bound.
  bool mean_is_lower_bound = false;
  double sd = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  /// Alarm time per simulation; +inf for censored runs.
  std::vector<double> times;
};

/// Distribution of min{n : psi_n >= C} over ideal-setting runs. Runs still
/// silent after 20 C steps are censored.
inline LifespanSummary sr_lifespan_stats(const IdealSimulation& sim, double threshold) {
  sim.validate();
  if (!(threshold > 0.0) || !std::isfinite(threshold)) throw InvalidArgument("threshold must be positive and finite");
  LifespanSummary s;
  s.n_sims = sim.n_sims;
  s.cap = static_cast<std::uint64_t>(std::ceil(20.0 * std::max(threshold, 1.0)));
  s.times.assign(sim.n_sims, std::numeric_limits<double>::infinity());
  parallel_for(sim.n_sims, [&](std::size_t i) {
    CounterRng rng = sim.rng_for(i);
    SimpleJumper jumper(sim.jump_rate);
    double psi = 0.0;
    for (std::uint64_t n = 1; n <= s.cap; ++n) {
      psi = jumper.step_unchecked(rng.uniform()) * (psi + 1.0);
      if (psi >= threshold) {
        s.times[i] = static_cast<double>(n);
        return;
      }
    }
  });
  double sum = 0.0;
  for (double t : s.times) {
    if (std::isinf(t)) {
      ++s.censored;
      sum += static_cast<double>(s.cap);
    } else {
      sum += t;
    }
  }
  const auto n = static_cast<double>(sim.n_sims);
  s.mean = sum / n;
  s.mean_is_lower_bound = s.censored > 0;
  double ss = 0.0;
  for (double t : s.times) {
    const double v = std::isinf(t) ? static_cast<double>(s.cap) : t;
    ss += (v - s.mean) * (v - s.mean);
  }
  s.sd = sim.n_sims > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  std::vector<double> sorted = s.times;
  std::sort(sorted.begin(), sorted.end());
  s.median = sorted_quantile(sorted, 0.5);
  s.q1 = sorted_quantile(sorted, 0.25);
  s.q3 = sorted_quantile(sorted, 0.75);
  return s;
}

struct DecaySummary {
  double median = 0.0;  // of log10 S_N
  double q1 = 0.0;
  double q3 = 0.0;
  /// median / N: decades lost per step (0 when N = 0).
  double per_step = 0.0;
  std::vector<double> finals;
};

/// Distribution of log10 S_N of the Simple Jumper in the ideal setting.
inline DecaySummary jumper_decay_stats(const IdealSimulation& sim) {
  sim.validate();
  DecaySummary d;
  d.finals.assign(sim.n_sims, 0.0);
  parallel_for(sim.n_sims, [&](std::size_t i) {
    CounterRng rng = sim.rng_for(i);
    SimpleJumper jumper(sim.jump_rate);
    for (std::uint64_t n = 0; n < sim.n_steps; ++n) jumper.step_unchecked(rng.uniform());
    d.finals[i] = jumper.log10_capital();
  });
  std::vector<double> sorted = d.finals;
  std::sort(sorted.begin(), sorted.end());
  d.median = sorted_quantile(sorted, 0.5);
  d.q1 = sorted_quantile(sorted, 0.25);
  d.q3 = sorted_quantile(sorted, 0.75);
  d.per_step = sim.n_steps > 0 ? d.median / static_cast<double>(sim.n_steps) : 0.0;
  return d;
}

// ------------------------------------------------------------------ reports

struct ThresholdCandidate {
  double threshold = 0.0;
  std::uint64_t alarms = 0;
  BinomialCI interval;
  /// The whole interval lies inside [0, alpha].
  bool validated = false;
};

struct CalibrationReport {
  std::string quantity;  // cusum_max_percentile | barrier_slope | sr_alarm_time | jumper_final_capital
  IdealSimulation simulation;
  double alpha = 0.01;
  double level = 0.999;
  /// Named point estimates, in insertion order.
  std::vector<std::pair<std::string, double>> estimates;
  std::vector<ThresholdCandidate> candidates;
  /// Number of candidates the confidence level is shared across.
  std::size_t candidate_count = 0;
};

/// Alarm counts and exact intervals for candidate thresholds applied to
/// per-path statistics (alarm iff statistic >= threshold).
inline std::vector<ThresholdCandidate> assess_candidates(std::span<const double> per_path, std::span<const double> thresholds,
                                                         double alpha, double level) {
  std::vector<ThresholdCandidate> out;
  for (double t : thresholds) {
    ThresholdCandidate c;
    c.threshold = t;
    c.alarms = count_at_or_above(per_path, t);
    c.interval = clopper_pearson(c.alarms, per_path.size(), level);
    c.validated = c.interval.upper <= alpha;
    out.push_back(c);
  }
  return out;
}

inline CalibrationReport calibrate_cusum_threshold(const IdealSimulation& sim, double alpha, double level,
                                                   std::span<const double> candidates, std::vector<double>* maxima_out = nullptr) {
  auto maxima = simulate_cusum_max(sim);
  CalibrationReport r;
  r.quantity = "cusum_max_percentile";
  r.simulation = sim;
  r.alpha = alpha;
  r.level = level;
  r.estimates.emplace_back("threshold_for_alpha", threshold_for_alpha(maxima, alpha));
  r.candidates = assess_candidates(maxima, candidates, alpha, level);
  r.candidate_count = candidates.size();
  if (maxima_out) *maxima_out = std::move(maxima);
  return r;
}

inline CalibrationReport calibrate_barrier(const IdealSimulation& sim, std::span<const std::uint64_t> horizons, double alpha,
                                           double level, std::span<const double> candidates,
                                           BarrierSlopes* slopes_out = nullptr) {
  auto slopes = simulate_barrier_slopes(sim, horizons, alpha);
  CalibrationReport r;
  r.quantity = "barrier_slope";
  r.simulation = sim;
  r.simulation.n_steps = horizons.empty() ? 0 : horizons.back();
  r.alpha = alpha;
  r.level = level;
  for (std::size_t h = 0; h < slopes.horizons.size(); ++h) {
    r.estimates.emplace_back("slope_at_" + std::to_string(slopes.horizons[h]), slopes.slopes[h]);
  }
  r.candidates = assess_candidates(slopes.ratio_maxima.back(), candidates, alpha, level);
  r.candidate_count = candidates.size();
  if (slopes_out) *slopes_out = std::move(slopes);
  return r;
}

inline CalibrationReport report_sr_lifespan(const IdealSimulation& sim, double threshold, LifespanSummary* out = nullptr) {
  auto s = sr_lifespan_stats(sim, threshold);
  CalibrationReport r;
  r.quantity = "sr_alarm_time";
  r.simulation = sim;
  r.simulation.n_steps = s.cap;
  r.estimates = {{"threshold", threshold},  {"mean", s.mean},         {"sd", s.sd},
                 {"median", s.median},      {"q1", s.q1},             {"q3", s.q3},
                 {"censored", static_cast<double>(s.censored)},
                 {"mean_is_lower_bound", s.mean_is_lower_bound ? 1.0 : 0.0}};
  if (out) *out = std::move(s);
  return r;
}

inline CalibrationReport report_jumper_decay(const IdealSimulation& sim, DecaySummary* out = nullptr) {
  auto d = jumper_decay_stats(sim);
  CalibrationReport r;
  r.quantity = "jumper_final_capital";
  r.simulation = sim;
  r.estimates = {{"median_log10", d.median}, {"q1_log10", d.q1}, {"q3_log10", d.q3}, {"per_step_log10", d.per_step}};
  if (out) *out = std::move(d);
  return r;
}

}  // namespace ctm
