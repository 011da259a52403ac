#pragma once

// Retraining schedules.
//
// The training set is split into folds (3 by default). Fold k's monitor
// scores observations with a model trained on the other folds, runs its
// conformal test martingale over fold k (permuted) and then over the shared
// test stream, and carries the detectors of the configured stages:
//
//   Opening     Ville, S^k_n >= opening_threshold (100)
//   Middlegame  gamma^k_n >= slope * n                    (Fixed, optional)
//   Endgame     psi^k_n >= C (Variable) or gamma^k_n >= f(C) (Fixed)
//
// A stage raises a retraining alarm once at least `quorum` folds have fired
// it. Per-fold flags latch: a fold that fired stays fired until the schedule
// is rebuilt. The first alarm ends the run.

#include <algorithm>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctm/betting.hpp"
#include "ctm/detectors.hpp"
#include "ctm/error.hpp"
#include "ctm/pvalue_stream.hpp"
#include "ctm/rng.hpp"

namespace ctm {

struct FoldPlan {
  std::uint64_t seed = 0;
  /// fold_of[i] in 1..folds for training observation i.
  std::vector<std::uint8_t> fold_of;
  /// Members of each fold in their (randomly permuted) calibration order.
  std::vector<std::vector<std::size_t>> members;
  std::vector<std::uint64_t> permutation_seeds;

  std::size_t folds() const { return members.size(); }
  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> s;
    for (const auto& m : members) s.push_back(m.size());
    return s;
  }
  /// Indices of every training observation outside fold k (0-based k).
  std::vector<std::size_t> training_proper(std::size_t k) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
      if (fold_of[i] != k + 1) out.push_back(i);
    }
    return out;
  }
};

/// Random split into `folds` parts whose sizes differ by at most one; the
/// first n % folds folds get the extra element.
inline FoldPlan make_fold_plan(std::size_t n_train, std::uint64_t seed, std::size_t folds = 3) {
  if (folds == 0 || folds > 255) throw InvalidArgument("fold count must be in 1..255");
  if (n_train < folds) {
    throw InvalidArgument("need at least " + std::to_string(folds) + " training observations, got " +
                          std::to_string(n_train));
  }
  FoldPlan plan;
  plan.seed = seed;
  plan.fold_of.assign(n_train, 0);
  plan.members.resize(folds);
  CounterRng rng(derive_seed(seed, 0));
  const auto perm = random_permutation(n_train, rng);
  std::size_t pos = 0;
  for (std::size_t k = 0; k < folds; ++k) {
    const std::size_t size = n_train / folds + (k < n_train % folds ? 1 : 0);
    for (std::size_t j = 0; j < size; ++j, ++pos) {
      plan.fold_of[perm[pos]] = static_cast<std::uint8_t>(k + 1);
      plan.members[k].push_back(perm[pos]);
    }
    std::sort(plan.members[k].begin(), plan.members[k].end());
    const std::uint64_t fold_seed = derive_seed(seed, k + 1);
    plan.permutation_seeds.push_back(fold_seed);
    CounterRng fold_rng(fold_seed);
    shuffle(plan.members[k], fold_rng);
  }
  return plan;
}

enum class ScheduleKind : std::uint8_t { Variable, Fixed, MiddlegameOnly, OpeningOnly };
enum class Stage : std::uint8_t { Opening, Middlegame, Endgame };

inline std::string_view to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::Variable: return "variable";
    case ScheduleKind::Fixed: return "fixed";
    case ScheduleKind::MiddlegameOnly: return "middlegame";
    case ScheduleKind::OpeningOnly: return "opening";
  }
  return "unknown";
}

inline ScheduleKind parse_schedule_kind(std::string_view s) {
  for (auto k : {ScheduleKind::Variable, ScheduleKind::Fixed, ScheduleKind::MiddlegameOnly, ScheduleKind::OpeningOnly}) {
    if (s == to_string(k)) return k;
  }
  throw ConfigError("unknown schedule kind '" + std::string(s) + "'");
}

inline std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Opening: return "opening";
    case Stage::Middlegame: return "middlegame";
    case Stage::Endgame: return "endgame";
  }
  return "unknown";
}

struct ScheduleConfig {
  ScheduleKind kind = ScheduleKind::Fixed;
  std::uint64_t target_lifespan = 1'000'000;
  double opening_threshold = 100.0;
  /// C for the variable schedule, f(C) for the fixed one.
  double endgame_threshold = 4e5;
  std::optional<double> middlegame_slope;
  std::size_t quorum = 2;
  std::size_t folds = 3;
  double jump_rate = SimpleJumper::kDefaultJumpRate;
  /// Per-fold false-alarm probability the fixed endgame threshold / the
  /// middlegame slope were calibrated to. Only used for budget accounting.
  double endgame_alpha = 0.01;
  double middlegame_alpha = 0.01;

  static ScheduleConfig variable(std::uint64_t lifespan) {
    ScheduleConfig c;
    c.kind = ScheduleKind::Variable;
    c.target_lifespan = lifespan;
    c.endgame_threshold = static_cast<double>(lifespan);
    return c;
  }
  static ScheduleConfig fixed(std::uint64_t lifespan, double f, std::optional<double> slope = std::nullopt) {
    ScheduleConfig c;
    c.kind = ScheduleKind::Fixed;
    c.target_lifespan = lifespan;
    c.endgame_threshold = f;
    c.middlegame_slope = slope;
    return c;
  }
  static ScheduleConfig middlegame_only(double slope) {
    ScheduleConfig c;
    c.kind = ScheduleKind::MiddlegameOnly;
    c.middlegame_slope = slope;
    return c;
  }
  static ScheduleConfig opening_only(double threshold = 100.0) {
    ScheduleConfig c;
    c.kind = ScheduleKind::OpeningOnly;
    c.opening_threshold = threshold;
    return c;
  }

  bool has_opening() const { return kind != ScheduleKind::MiddlegameOnly; }
  bool has_middlegame() const {
    return kind == ScheduleKind::MiddlegameOnly || (kind == ScheduleKind::Fixed && middlegame_slope.has_value());
  }
  bool has_endgame() const { return kind == ScheduleKind::Variable || kind == ScheduleKind::Fixed; }

  void validate() const {
    if (folds == 0) throw ConfigError("folds must be positive");
    if (quorum < 1 || quorum > folds) throw ConfigError("quorum must lie in 1.." + std::to_string(folds));
    if (has_opening() && !(opening_threshold > 1.0)) throw ConfigError("opening threshold must exceed 1");
    if (has_endgame() && !(endgame_threshold > 1.0)) throw ConfigError("endgame threshold must exceed 1");
    if (has_middlegame() && !(middlegame_slope && *middlegame_slope > 0.0)) {
      throw ConfigError("middlegame slope must be positive");
    }
    if (!(jump_rate >= 0.0 && jump_rate <= 1.0)) throw ConfigError("jump rate must lie in [0, 1]");
  }
};

/// Union bound on the probability that a run ever raises a false alarm in
/// the ideal setting. If each of K folds fires a stage with probability at
/// most a, the expected number of firing folds is at most K a, so by Markov's
/// inequality P(at least q folds fire) <= K a / q; stages add up. With the
/// defaults (3 folds, quorum 2, Ville at 100, endgame calibrated to 1%) this
/// is 1.5% + 1.5% = 3%. The variable schedule's endgame has no such bound
/// (Shiryaev-Roberts only controls the expected alarm time), so it is refused.
inline double overall_false_alarm_budget(const ScheduleConfig& config) {
  config.validate();
  if (config.kind == ScheduleKind::Variable) {
    throw InvalidArgument("the variable schedule has no false-alarm probability bound");
  }
  const double share = static_cast<double>(config.folds) / static_cast<double>(config.quorum);
  double budget = 0.0;
  if (config.has_opening()) budget += share / config.opening_threshold;
  if (config.has_middlegame()) budget += share * config.middlegame_alpha;
  if (config.has_endgame()) budget += share * config.endgame_alpha;
  return budget;
}

/// Snapshot of one fold after a step.
struct FoldStatus {
  std::size_t fold = 0;  // 1-based
  std::uint64_t step = 0;
  double log10_capital = 0.0;
  double gamma = 0.0;
  double psi = 0.0;
  double psi_star = 0.0;
  bool opening_fired = false;
  bool middlegame_fired = false;
  bool endgame_fired = false;
};

class FoldMonitor {
 public:
  FoldMonitor(std::size_t fold, const ScheduleConfig& config, std::size_t calibration_length)
      : config_(config),
        calibration_length_(calibration_length),
        jumper_(config.jump_rate),
        ville_(config.has_opening() ? config.opening_threshold : std::numeric_limits<double>::infinity()),
        cusum_(config.kind == ScheduleKind::Fixed ? config.endgame_threshold : std::numeric_limits<double>::infinity()),
        sr_(config.kind == ScheduleKind::Variable ? config.endgame_threshold : std::numeric_limits<double>::infinity()) {
    status_.fold = fold;
    if (config.has_middlegame()) barrier_.emplace(*config.middlegame_slope);
  }

  const FoldStatus& push(double score, double tiebreak) {
    const PValue p = pvalues_.push(score, tiebreak);
    const double ratio = jumper_.step(p.value);
    const std::uint64_t n = jumper_.steps();
    ville_.step(jumper_.log_capital(), n);
    const double gamma = cusum_.step_ratio(ratio).value;
    const double psi = sr_.step_ratio(ratio).value;
    if (barrier_) barrier_->step(gamma, n);

    status_.step = n;
    status_.log10_capital = jumper_.log10_capital();
    status_.gamma = gamma;
    status_.psi = psi;
    status_.psi_star = psi_max_.update(psi);
    status_.opening_fired = config_.has_opening() && ville_.fired();
    status_.middlegame_fired = barrier_ && barrier_->fired();
    status_.endgame_fired = config_.kind == ScheduleKind::Fixed ? cusum_.fired()
                            : config_.kind == ScheduleKind::Variable ? sr_.fired()
                                                                     : false;
    return status_;
  }

  bool in_calibration() const { return pvalues_.size() < calibration_length_; }
  std::size_t calibration_length() const { return calibration_length_; }
  const FoldStatus& status() const { return status_; }
  const SimpleJumper& jumper() const { return jumper_; }

  bool fired(Stage stage) const {
    switch (stage) {
      case Stage::Opening: return status_.opening_fired;
      case Stage::Middlegame: return status_.middlegame_fired;
      case Stage::Endgame: return status_.endgame_fired;
    }
    return false;
  }

 private:
  ScheduleConfig config_;
  std::size_t calibration_length_;
  PValueStream pvalues_;
  SimpleJumper jumper_;
  VilleDetector ville_;
  CusumDetector cusum_;
  ShiryaevRobertsDetector sr_;
  MaxProcess psi_max_;
  std::optional<BarrierDetector> barrier_;
  FoldStatus status_;
};

struct FoldScore {
  double score = 0.0;
  double tiebreak = 0.0;
};

struct AlarmEvent {
  Stage stage = Stage::Opening;
  /// Number of schedule steps taken, calibration included.
  std::uint64_t step = 0;
  /// Ordinal of the test observation (the delay); absent when the alarm
  /// falls inside the calibration streams.
  std::optional<std::uint64_t> test_index;
  std::vector<FoldStatus> firing_folds;
  /// Other stages that reached quorum on the same step.
  std::vector<Stage> concurrent_stages;
  double threshold = 0.0;  // opening / endgame threshold, or the middlegame slope
};

class Schedule {
 public:
  Schedule(const ScheduleConfig& config, const std::vector<std::size_t>& calibration_lengths) : config_(config) {
    config_.validate();
    if (calibration_lengths.size() != config_.folds) {
      throw ConfigError("expected " + std::to_string(config_.folds) + " calibration lengths");
    }
    for (std::size_t k = 0; k < config_.folds; ++k) monitors_.emplace_back(k + 1, config_, calibration_lengths[k]);
  }

  /// One schedule step. While any fold is still calibrating, folds that are
  /// calibrating take their own next score and folds that have finished take
  /// nothing; afterwards every fold takes the shared test observation.
  std::optional<AlarmEvent> advance(std::span<const std::optional<FoldScore>> inputs) {
    if (finished_) throw StreamError("schedule already raised its alarm", step_ + 1);
    if (inputs.size() != monitors_.size()) throw StreamError("one input per fold required", step_ + 1);
    const bool calibrating = std::any_of(monitors_.begin(), monitors_.end(), [](const auto& m) { return m.in_calibration(); });
    for (std::size_t k = 0; k < monitors_.size(); ++k) {
      const bool expects = !calibrating || monitors_[k].in_calibration();
      if (expects != inputs[k].has_value()) {
        throw StreamError("fold " + std::to_string(k + 1) + (expects ? " is missing its input" : " is out of sync: it finished calibration"),
                          step_ + 1);
      }
    }
    ++step_;
    if (!calibrating) ++test_steps_;
    for (std::size_t k = 0; k < monitors_.size(); ++k) {
      if (inputs[k]) monitors_[k].push(inputs[k]->score, inputs[k]->tiebreak);
    }
    return evaluate();
  }

  /// Test-stream convenience: every fold gets its score for the same observation.
  std::optional<AlarmEvent> advance_test(std::span<const FoldScore> scores) {
    std::vector<std::optional<FoldScore>> in(scores.begin(), scores.end());
    return advance(in);
  }

  bool finished() const { return finished_; }
  bool calibrating() const {
    return std::any_of(monitors_.begin(), monitors_.end(), [](const auto& m) { return m.in_calibration(); });
  }
  std::uint64_t steps() const { return step_; }
  std::uint64_t test_steps() const { return test_steps_; }
  const ScheduleConfig& config() const { return config_; }
  const std::vector<FoldMonitor>& monitors() const { return monitors_; }

 private:
  std::optional<AlarmEvent> evaluate() {
    std::optional<AlarmEvent> event;
    for (Stage stage : {Stage::Opening, Stage::Middlegame, Stage::Endgame}) {
      std::vector<FoldStatus> firing;
      for (const auto& m : monitors_) {
        if (m.fired(stage)) firing.push_back(m.status());
      }
      if (firing.size() < config_.quorum) continue;
      if (event) {
        event->concurrent_stages.push_back(stage);
        continue;
      }
      event.emplace();
      event->stage = stage;
      event->step = step_;
      if (test_steps_ > 0) event->test_index = test_steps_;
      event->firing_folds = std::move(firing);
      event->threshold = stage == Stage::Opening      ? config_.opening_threshold
                         : stage == Stage::Middlegame ? config_.middlegame_slope.value_or(0.0)
                                                      : config_.endgame_threshold;
    }
    if (event) finished_ = true;
    return event;
  }

  ScheduleConfig config_;
  std::vector<FoldMonitor> monitors_;
  std::uint64_t step_ = 0;
  std::uint64_t test_steps_ = 0;
  bool finished_ = false;
};

struct ScheduleRun {
  std::optional<AlarmEvent> alarm;
  std::uint64_t steps = 0;
};

/// Drives a schedule over precomputed per-fold calibration scores and per-fold
/// scores of one shared test stream, drawing tie-breaks from `tiebreaks`.
inline ScheduleRun run_schedule(const ScheduleConfig& config, const std::vector<std::vector<double>>& calibration_scores,
                                const std::vector<std::vector<double>>& test_scores, CounterRng& tiebreaks) {
  std::vector<std::size_t> lengths;
  for (const auto& c : calibration_scores) lengths.push_back(c.size());
  Schedule schedule(config, lengths);
  if (test_scores.size() != config.folds) throw StreamError("one test score stream per fold required");
  const std::size_t test_length = test_scores.front().size();
  for (const auto& t : test_scores) {
    if (t.size() != test_length) throw StreamError("per-fold test score streams differ in length");
  }
  ScheduleRun run;
  std::vector<std::optional<FoldScore>> in(config.folds);
  std::vector<std::size_t> cursor(config.folds, 0);
  while (schedule.calibrating()) {
    for (std::size_t k = 0; k < config.folds; ++k) {
      if (cursor[k] < lengths[k]) {
        in[k] = FoldScore{calibration_scores[k][cursor[k]++], tiebreaks.uniform()};
      } else {
        in[k].reset();
      }
    }
    run.alarm = schedule.advance(in);
    if (run.alarm) {
      run.steps = schedule.steps();
      return run;
    }
  }
  for (std::size_t t = 0; t < test_length; ++t) {
    for (std::size_t k = 0; k < config.folds; ++k) in[k] = FoldScore{test_scores[k][t], tiebreaks.uniform()};
    run.alarm = schedule.advance(in);
    if (run.alarm) break;
  }
  run.steps = schedule.steps();
  return run;
}

}  // namespace ctm
