#pragma once

// Change-point experiments on labelled data.
//
// Delay experiment: per simulation, draw a training set and a disjoint
// calibration set from the pre-change population and a test set from the
// post-change population (each randomly ordered), fit a conformity measure on
// the training set, run one Simple Jumper over calibration followed by test,
// and record the delay: the ordinal of the test observation at which the
// detector fires.
//
// Three-fold paths: split a training set into folds; for each fold run the
// martingale over that fold and then over a no-change test set (scenario 0)
// or a post-change test set (scenario 1).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctm/betting.hpp"
#include "ctm/calibration.hpp"
#include "ctm/conformity.hpp"
#include "ctm/detectors.hpp"
#include "ctm/error.hpp"
#include "ctm/parallel.hpp"
#include "ctm/pvalue_stream.hpp"
#include "ctm/rng.hpp"
#include "ctm/schedules.hpp"

namespace ctm {

struct DetectorSpec {
  DetectorKind kind = DetectorKind::Ville;
  double threshold = 100.0;
};

struct ExperimentPlan {
  std::size_t training_size = 1000;
  std::size_t calibration_size = 1000;
  std::size_t test_size = 1000;
  BuiltinScorer scorer = BuiltinScorer::NearestDistance;
  DetectorSpec detector;
  std::size_t n_simulations = 100;
  std::uint64_t base_seed = 0;
  double jump_rate = SimpleJumper::kDefaultJumpRate;
};

struct DelaySummary {
  DetectorSpec detector;
  std::size_t n_runs = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  /// Runs that never fired (delay = inf).
  double no_alarm_fraction = 0.0;
  /// Runs that fired before the first test observation; their delay is 0.
  std::size_t calibration_alarms = 0;
  /// Per-run delays, +inf for no alarm.
  std::vector<double> delays;
};

inline DelaySummary summarize_delays(const DetectorSpec& spec, std::vector<double> delays, std::size_t calibration_alarms) {
  DelaySummary s;
  s.detector = spec;
  s.n_runs = delays.size();
  s.calibration_alarms = calibration_alarms;
  if (!delays.empty()) {
    std::vector<double> sorted = delays;
    std::sort(sorted.begin(), sorted.end());
    s.median = sorted_quantile(sorted, 0.5);
    s.q1 = sorted_quantile(sorted, 0.25);
    s.q3 = sorted_quantile(sorted, 0.75);
    s.no_alarm_fraction = static_cast<double>(std::count_if(sorted.begin(), sorted.end(), [](double d) { return std::isinf(d); })) /
                          static_cast<double>(sorted.size());
  }
  s.delays = std::move(delays);
  return s;
}

namespace detail {

/// Step (1-based) at which the detector first fires along a path given by its
/// per-step growth ratios and log-capitals.
inline std::optional<std::uint64_t> first_alarm(const DetectorSpec& spec, std::span<const double> ratios,
                                                std::span<const double> log_capitals) {
  switch (spec.kind) {
    case DetectorKind::Ville: {
      VilleDetector d(spec.threshold);
      for (std::size_t n = 0; n < log_capitals.size(); ++n) {
        if (d.step(log_capitals[n], n + 1)) return n + 1;
      }
      return std::nullopt;
    }
    case DetectorKind::Cusum: {
      CusumDetector d(spec.threshold);
      for (std::size_t n = 0; n < ratios.size(); ++n) {
        if (d.step_ratio(ratios[n]).alarm) return n + 1;
      }
      return std::nullopt;
    }
    case DetectorKind::ShiryaevRoberts: {
      ShiryaevRobertsDetector d(spec.threshold);
      for (std::size_t n = 0; n < ratios.size(); ++n) {
        if (d.step_ratio(ratios[n]).alarm) return n + 1;
      }
      return std::nullopt;
    }
    case DetectorKind::Barrier: {
      BarrierDetector barrier(spec.threshold);
      double gamma = 0.0;
      for (std::size_t n = 0; n < ratios.size(); ++n) {
        gamma = ratios[n] * std::max(gamma, 1.0);
        if (barrier.step(gamma, n + 1)) return n + 1;
      }
      return std::nullopt;
    }
  }
  return std::nullopt;
}

struct JumperTrace {
  std::vector<double> ratios;
  std::vector<double> log_capitals;
};

inline JumperTrace conformal_trace(std::span<const double> scores, CounterRng& tiebreaks, double jump_rate) {
  JumperTrace t;
  t.ratios.reserve(scores.size());
  t.log_capitals.reserve(scores.size());
  PValueStream stream;
  SimpleJumper jumper(jump_rate);
  for (double s : scores) {
    const PValue p = stream.push(s, tiebreaks.uniform());
    t.ratios.push_back(jumper.step(p.value));
    t.log_capitals.push_back(jumper.log_capital());
  }
  return t;
}

}  // namespace detail

/// Runs the delay experiment for several detectors on shared simulations, so
/// that detector i and j see exactly the same martingale paths.
inline std::vector<DelaySummary> run_delay_experiments(const ExperimentPlan& plan, const std::vector<DetectorSpec>& detectors,
                                                       const Dataset& pre, const Dataset& post) {
  const bool same_population = &pre == &post;
  const std::size_t pre_needed = plan.training_size + plan.calibration_size + (same_population ? plan.test_size : 0);
  if (plan.training_size == 0 || plan.test_size == 0) throw InvalidArgument("training and test sizes must be positive");
  if (plan.n_simulations == 0) throw InvalidArgument("n_simulations must be positive");
  if (pre.size() < pre_needed) {
    throw DataError("pre-change data has " + std::to_string(pre.size()) + " rows, plan needs " + std::to_string(pre_needed));
  }
  if (!same_population && post.size() < plan.test_size) {
    throw DataError("post-change data has " + std::to_string(post.size()) + " rows, plan needs " +
                    std::to_string(plan.test_size));
  }
  if (!same_population && pre.dimension() != post.dimension()) throw DataError("pre/post feature dimensions differ");
  pre.validate();
  if (!same_population) post.validate();

  std::vector<std::vector<double>> delays(detectors.size(), std::vector<double>(plan.n_simulations));
  std::vector<std::vector<char>> in_calibration(detectors.size(), std::vector<char>(plan.n_simulations, 0));
  parallel_for(plan.n_simulations, [&](std::size_t sim) {
    CounterRng rng(derive_seed(plan.base_seed, sim));
    const auto pre_perm = random_permutation(pre.size(), rng);
    std::vector<Observation> training;
    training.reserve(plan.training_size);
    for (std::size_t i = 0; i < plan.training_size; ++i) training.push_back(pre.rows[pre_perm[i]]);
    std::vector<const Observation*> stream;
    for (std::size_t i = 0; i < plan.calibration_size; ++i) stream.push_back(&pre.rows[pre_perm[plan.training_size + i]]);
    if (same_population) {
      const std::size_t offset = plan.training_size + plan.calibration_size;
      for (std::size_t i = 0; i < plan.test_size; ++i) stream.push_back(&pre.rows[pre_perm[offset + i]]);
    } else {
      const auto post_perm = random_permutation(post.size(), rng);
      for (std::size_t i = 0; i < plan.test_size; ++i) stream.push_back(&post.rows[post_perm[i]]);
    }
    const FittedScorer scorer(plan.scorer, training);
    std::vector<double> scores;
    scores.reserve(stream.size());
    for (const auto* obs : stream) scores.push_back(scorer.score(*obs));
    const auto trace = detail::conformal_trace(scores, rng, plan.jump_rate);
    for (std::size_t d = 0; d < detectors.size(); ++d) {
      const auto step = detail::first_alarm(detectors[d], trace.ratios, trace.log_capitals);
      if (!step) {
        delays[d][sim] = std::numeric_limits<double>::infinity();
      } else if (*step <= plan.calibration_size) {
        delays[d][sim] = 0.0;
        in_calibration[d][sim] = 1;
      } else {
        delays[d][sim] = static_cast<double>(*step - plan.calibration_size);
      }
    }
  });
  std::vector<DelaySummary> out;
  for (std::size_t d = 0; d < detectors.size(); ++d) {
    const auto early = static_cast<std::size_t>(std::count(in_calibration[d].begin(), in_calibration[d].end(), 1));
    out.push_back(summarize_delays(detectors[d], std::move(delays[d]), early));
  }
  return out;
}

/// Single-detector form. Passing the same Dataset object as `pre` and `post`
/// draws the test set from the remaining pre-change rows (no change point).
inline DelaySummary run_delay_experiment(const ExperimentPlan& plan, const Dataset& pre, const Dataset& post) {
  return run_delay_experiments(plan, {plan.detector}, pre, post).front();
}

/// Data for the three-fold protocol.
struct ThreefoldData {
  Dataset training;
  Dataset test_no_change;  // scenario 0
  Dataset test_change;     // scenario 1
};

/// test_no_change is `test_size` random pre-change rows, training the rest of
/// pre (random order), test_change the post-change rows in random order
/// (truncated to test_size).
inline ThreefoldData make_threefold_data(const Dataset& pre, const Dataset& post, std::size_t test_size, std::uint64_t seed) {
  if (pre.size() < test_size + 3) throw DataError("pre-change data too small for the requested test size");
  if (post.empty()) throw DataError("post-change data is empty");
  CounterRng rng(derive_seed(seed, 0xF01D));
  ThreefoldData d;
  d.training.feature_names = d.test_no_change.feature_names = d.test_change.feature_names = pre.feature_names;
  const auto perm = random_permutation(pre.size(), rng);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    (i < test_size ? d.test_no_change : d.training).rows.push_back(pre.rows[perm[i]]);
  }
  const auto post_perm = random_permutation(post.size(), rng);
  for (std::size_t i = 0; i < std::min(test_size, post.size()); ++i) d.test_change.rows.push_back(post.rows[post_perm[i]]);
  return d;
}

struct ThreefoldPaths {
  /// paths[fold][scenario]; each path covers the fold's calibration stream
  /// followed by the scenario's test set.
  std::vector<std::array<MartingalePath, 2>> paths;
  /// Calibration length per fold: the change point sits right after it.
  std::vector<std::size_t> change_points;
  FoldPlan plan;
};

inline ThreefoldPaths run_threefold_paths(const ThreefoldData& data, BuiltinScorer scorer_kind, double jump_rate,
                                          std::uint64_t seed, std::size_t folds = 3) {
  if (data.test_no_change.empty() || data.test_change.empty()) throw DataError("both test sets must be non-empty");
  ThreefoldPaths out;
  out.plan = make_fold_plan(data.training.size(), seed, folds);
  out.paths.resize(folds);
  out.change_points.resize(folds);
  parallel_for(folds, [&](std::size_t k) {
    std::vector<Observation> proper;
    for (std::size_t i : out.plan.training_proper(k)) proper.push_back(data.training.rows[i]);
    const FittedScorer scorer(scorer_kind, proper);
    std::vector<double> calibration;
    for (std::size_t i : out.plan.members[k]) calibration.push_back(scorer.score(data.training.rows[i]));
    out.change_points[k] = calibration.size();
    const Dataset* tests[2] = {&data.test_no_change, &data.test_change};
    for (std::size_t scenario = 0; scenario < 2; ++scenario) {
      std::vector<double> scores = calibration;
      for (const auto& obs : tests[scenario]->rows) scores.push_back(scorer.score(obs));
      // Same tie-break stream in both scenarios: the paths agree up to the change point.
      CounterRng tiebreaks(derive_seed(seed, 0x7100 + k));
      const auto trace = detail::conformal_trace(scores, tiebreaks, jump_rate);
      MartingalePath path;
      path.log_values.insert(path.log_values.end(), trace.log_capitals.begin(), trace.log_capitals.end());
      out.paths[k][scenario] = std::move(path);
    }
  });
  return out;
}

}  // namespace ctm
