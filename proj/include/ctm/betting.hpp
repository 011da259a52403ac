#pragma once

// Betting martingales over p-values: the Simple Jumper.
//
// Three betting functions f_e(p) = 1 + e (p - 1/2), e in {-1, 0, 1}, each
// integrate to 1 over [0, 1]. Capital is split across the three; before every
// bet a fraction J of the total is redistributed evenly ("jump"), then each
// share is multiplied by its f_e(p_n). S_n is the total.
//
// Representation: the per-state shares are kept normalised (they sum to 1)
// and the total is tracked as a natural log. The per-step growth ratio
// S_n / S_{n-1} is the sum of the multiplied shares and is always in
// [0.5, 1.5], so nothing here can under- or overflow however small S_n gets.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "ctm/error.hpp"
#include "ctm/parallel.hpp"
#include "ctm/pvalue_stream.hpp"
#include "ctm/rng.hpp"

namespace ctm {

struct BettingFunction {
  int epsilon = 0;  // -1, 0 or +1
  constexpr double operator()(double p) const noexcept { return 1.0 + epsilon * (p - 0.5); }
};

inline constexpr std::array<BettingFunction, 3> kJumperBets{BettingFunction{-1}, BettingFunction{0},
                                                             BettingFunction{1}};

/// Snapshot of a jumper in log domain; index 0, 1, 2 of the arrays is
/// epsilon = -1, 0, +1.
struct JumperState {
  std::array<double, 3> log_capital_per_state{};
  double log_total = 0.0;
  double jump_rate = 0.01;
  std::uint64_t step = 0;
};

class SimpleJumper {
 public:
  static constexpr double kDefaultJumpRate = 0.01;

  explicit SimpleJumper(double jump_rate = kDefaultJumpRate) : jump_rate_(validated_rate(jump_rate)) {}

  /// Starts from arbitrary nonnegative per-state capitals (C_{-1}, C_0, C_1).
  /// Used for degenerate or mid-run states; the usual start is (1/3, 1/3, 1/3).
  static SimpleJumper from_capitals(const std::array<double, 3>& capitals, double jump_rate) {
    double total = 0.0;
    for (double c : capitals) {
      if (!(c >= 0.0) || !std::isfinite(c)) throw InvalidArgument("jumper capitals must be finite and >= 0");
      total += c;
    }
    if (!(total > 0.0)) throw InvalidArgument("jumper total capital must be positive");
    SimpleJumper j(0.0);
    j.jump_rate_ = validated_rate(jump_rate);
    for (std::size_t e = 0; e < 3; ++e) j.weights_[e] = capitals[e] / total;
    j.log_total_ = std::log(total);
    return j;
  }

  /// Consumes p_n and returns the growth ratio S_n / S_{n-1}.
  double step(double p) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw StreamError("p-value outside [0, 1] at step " + std::to_string(steps_ + 1) + ": " + std::to_string(p),
                        steps_ + 1);
    }
    return step_unchecked(p);
  }

  /// step() without the range check, for simulation loops whose p-values are
  /// uniform draws by construction.
  double step_unchecked(double p) noexcept {
    const double keep = 1.0 - jump_rate_;
    const double spread = jump_rate_ / 3.0;
    const double down = (keep * weights_[0] + spread) * (1.5 - p);
    const double flat = keep * weights_[1] + spread;
    const double up = (keep * weights_[2] + spread) * (0.5 + p);
    const double ratio = down + flat + up;
    const double inv = 1.0 / ratio;
    weights_ = {down * inv, flat * inv, up * inv};
    pending_ *= ratio;
    if (pending_ < 0x1.0p-900 || pending_ > 0x1.0p900) flush();
    ++steps_;
    return ratio;
  }

  /// ln S_n.
  double log_capital() const noexcept { return log_total_ + std::log(pending_); }
  double log10_capital() const noexcept { return log_capital() / std::numbers::ln10; }

  /// ln C_e for e in {-1, 0, 1}; -inf for a state holding no capital.
  double log_capital(int epsilon) const {
    if (epsilon < -1 || epsilon > 1) throw InvalidArgument("epsilon must be -1, 0 or 1");
    return log_capital() + std::log(weights_[static_cast<std::size_t>(epsilon + 1)]);
  }

  /// Share of total capital per state (sums to 1).
  const std::array<double, 3>& weights() const noexcept { return weights_; }
  double jump_rate() const noexcept { return jump_rate_; }
  std::uint64_t steps() const noexcept { return steps_; }

  JumperState state() const {
    JumperState s;
    for (int e = -1; e <= 1; ++e) s.log_capital_per_state[static_cast<std::size_t>(e + 1)] = log_capital(e);
    s.log_total = log_capital();
    s.jump_rate = jump_rate_;
    s.step = steps_;
    return s;
  }

 private:
  static double validated_rate(double j) {
    if (!(j >= 0.0 && j <= 1.0)) throw InvalidArgument("jump rate must lie in [0, 1]");
    return j;
  }

  void flush() noexcept {
    log_total_ += std::log(pending_);
    pending_ = 1.0;
  }

  double jump_rate_;
  std::array<double, 3> weights_{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  double log_total_ = 0.0;
  double pending_ = 1.0;  // S_n = exp(log_total_) * pending_
  std::uint64_t steps_ = 0;
};

/// Natural-log martingale path; values[0] = ln S_0 = 0.
struct MartingalePath {
  std::vector<double> log_values{0.0};

  std::size_t steps() const { return log_values.size() - 1; }
  double log10_at(std::size_t n) const { return log_values[n] / std::numbers::ln10; }
};

inline MartingalePath run_martingale(std::span<const double> pvalues, double jump_rate = SimpleJumper::kDefaultJumpRate) {
  MartingalePath path;
  path.log_values.reserve(pvalues.size() + 1);
  SimpleJumper jumper(jump_rate);
  for (double p : pvalues) {
    jumper.step(p);
    path.log_values.push_back(jumper.log_capital());
  }
  return path;
}

inline MartingalePath run_martingale(std::span<const PValue> pvalues, double jump_rate = SimpleJumper::kDefaultJumpRate) {
  std::vector<double> values;
  values.reserve(pvalues.size());
  for (const auto& p : pvalues) values.push_back(p.value);
  return run_martingale(std::span<const double>(values), jump_rate);
}

struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::uint64_t samples = 0;
};

/// Monte Carlo estimate of E[S_n] under IID uniform p-values. The martingale
/// property makes this 1 for every n; only short horizons are accepted because
/// the estimator's variance explodes with n.
inline MeanEstimate martingale_expectation_check(double jump_rate, std::uint64_t n_steps, std::uint64_t n_sims,
                                                 std::uint64_t seed) {
  if (n_steps > 20) throw InvalidArgument("martingale_expectation_check supports at most 20 steps");
  if (n_sims == 0) throw InvalidArgument("n_sims must be positive");
  std::vector<double> finals(n_sims);
  parallel_for(n_sims, [&](std::size_t i) {
    CounterRng rng(derive_seed(seed, i));
    SimpleJumper jumper(jump_rate);
    double s = 1.0;
    for (std::uint64_t n = 0; n < n_steps; ++n) s *= jumper.step_unchecked(rng.uniform());
    finals[i] = s;
  });
  // Ordered two-pass reduction.
  double sum = 0.0;
  for (double v : finals) sum += v;
  const double mean = sum / static_cast<double>(n_sims);
  double ss = 0.0;
  for (double v : finals) ss += (v - mean) * (v - mean);
  const double var = n_sims > 1 ? ss / static_cast<double>(n_sims - 1) : 0.0;
  return MeanEstimate{mean, std::sqrt(var / static_cast<double>(n_sims)), n_sims};
}

}  // namespace ctm
