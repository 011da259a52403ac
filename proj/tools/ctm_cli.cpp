// ctm: command-line front end.
//
//   ctm monitor    --training train.csv [--stream stream.csv|-]
//   ctm calibrate  --quantity cusum-max|barrier-slope|sr-lifespan|jumper-decay
//   ctm simulate   --n-steps N --n-paths K
//   ctm replicate  --pre a.csv --post b.csv | --predictions p.csv --stream s.csv
//
// Every subcommand takes --config file.json; flags override the file and
// CTM_OUTPUT_DIR overrides both for the output directory.
// Exit status: 0 ok, 2 configuration error, 3 data error, 4 runtime error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ctm/ctm.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

int exit_code(ctm::ErrorKind kind) {
  switch (kind) {
    case ctm::ErrorKind::Config: return kExitConfig;
    case ctm::ErrorKind::Data: return kExitData;
    case ctm::ErrorKind::Runtime: return kExitRuntime;
  }
  return kExitRuntime;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ctm::Error(ctm::ErrorKind::Runtime, "cannot write '" + path.string() + "'");
  return out;
}

fs::path prepare_output_dir(const ctm::RunConfig& cfg) {
  const fs::path dir(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ctm::Error(ctm::ErrorKind::Runtime, "cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir;
}

void write_config(const fs::path& dir, const ctm::RunConfig& cfg) {
  auto out = open_output(dir / "config.json");
  out << ctm::to_json(cfg).dump(2) << '\n';
}

std::string stage_detector(ctm::Stage stage, ctm::ScheduleKind kind) {
  switch (stage) {
    case ctm::Stage::Opening: return "ville";
    case ctm::Stage::Middlegame: return "barrier";
    case ctm::Stage::Endgame: return kind == ctm::ScheduleKind::Variable ? "sr" : "cusum";
  }
  return "unknown";
}

// ------------------------------------------------------------------ monitor

int run_monitor(const ctm::RunConfig& cfg) {
  const char delim = cfg.delimiter_char();
  const auto training = ctm::load_dataset(cfg.training, delim, cfg.label_column);
  ctm::ScheduleConfig schedule_cfg = cfg.schedule;
  schedule_cfg.jump_rate = cfg.jump_rate;
  if (training.size() < schedule_cfg.folds * 2) throw ctm::DataError("training set too small for the fold count");
  training.validate();

  const auto plan = ctm::make_fold_plan(training.size(), cfg.seed, schedule_cfg.folds);
  const auto scorer_kind = ctm::parse_builtin_scorer(cfg.scorer);
  std::vector<ctm::FittedScorer> scorers;
  std::vector<std::vector<double>> calibration(schedule_cfg.folds);
  std::vector<std::size_t> lengths;
  for (std::size_t k = 0; k < schedule_cfg.folds; ++k) {
    std::vector<ctm::Observation> proper;
    for (std::size_t i : plan.training_proper(k)) proper.push_back(training.rows[i]);
    scorers.emplace_back(scorer_kind, proper);
    for (std::size_t i : plan.members[k]) calibration[k].push_back(scorers[k].score(training.rows[i]));
    lengths.push_back(calibration[k].size());
  }

  const fs::path dir = prepare_output_dir(cfg);
  write_config(dir, cfg);
  const std::string hash = ctm::config_hash(cfg);
  const std::string started = ctm::utc_timestamp();
  auto alarms = open_output(dir / "alarms.jsonl");
  std::ofstream trace;
  if (cfg.trace) {
    trace = open_output(dir / "trace.csv");
    trace << "step,fold,log10_S,gamma,psi,psi_star\n";
  }

  ctm::Schedule schedule(schedule_cfg, lengths);
  ctm::CounterRng tiebreaks(ctm::derive_seed(cfg.seed, 0x71EB));
  std::vector<std::optional<ctm::FoldScore>> inputs(schedule_cfg.folds);
  std::vector<std::size_t> cursor(schedule_cfg.folds, 0);
  std::optional<ctm::AlarmEvent> alarm;

  auto record = [&]() {
    if (!cfg.trace) return;
    for (const auto& m : schedule.monitors()) {
      const auto& s = m.status();
      trace << schedule.steps() << ',' << s.fold << ',' << ctm::format_double(s.log10_capital) << ','
            << ctm::format_double(s.gamma) << ',' << ctm::format_double(s.psi) << ',' << ctm::format_double(s.psi_star)
            << '\n';
    }
  };

  while (!alarm && schedule.calibrating()) {
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      if (cursor[k] < lengths[k]) {
        inputs[k] = ctm::FoldScore{calibration[k][cursor[k]++], tiebreaks.uniform()};
      } else {
        inputs[k].reset();
      }
    }
    alarm = schedule.advance(inputs);
    record();
  }

  std::uint64_t stream_rows = 0;
  if (!alarm) {
    std::ifstream file;
    std::istream* in = &std::cin;
    if (cfg.stream != "-") {
      file.open(cfg.stream);
      if (!file) throw ctm::DataError("cannot open stream '" + cfg.stream + "'");
      in = &file;
    }
    ctm::DatasetReader reader(*in, delim, cfg.label_column);
    if (reader.feature_names().size() != training.dimension()) {
      throw ctm::DataError("stream has " + std::to_string(reader.feature_names().size()) + " features, training has " +
                           std::to_string(training.dimension()));
    }
    while (!alarm) {
      auto row = reader.next();
      if (!row) break;
      ++stream_rows;
      if (!row->in_test) continue;
      for (std::size_t k = 0; k < inputs.size(); ++k) {
        inputs[k] = ctm::FoldScore{scorers[k].score(row->observation), tiebreaks.uniform()};
      }
      alarm = schedule.advance(inputs);
      record();
    }
  }

  if (alarm) {
    ctm::AlarmLogRecord rec{hash + "-" + started, hash, ctm::utc_timestamp(), *alarm};
    auto j = ctm::to_json(rec);
    j["event"]["detector"] = stage_detector(alarm->stage, schedule_cfg.kind);
    alarms << j.dump() << '\n';
    std::cout << "alarm: " << ctm::to_string(alarm->stage) << " at step " << alarm->step;
    if (alarm->test_index) std::cout << " (test observation " << *alarm->test_index << ")";
    std::cout << '\n';
  } else {
    std::cout << "no alarm after " << schedule.test_steps() << " test observations (" << stream_rows << " rows read)\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- calibrate

int run_calibrate(const ctm::RunConfig& cfg) {
  ctm::IdealSimulation sim{cfg.n_steps, cfg.n_sims, cfg.seed, cfg.jump_rate};
  sim.validate();
  const fs::path dir = prepare_output_dir(cfg);
  ctm::CalibrationReport report;
  auto maxima = open_output(dir / "maxima.csv");
  if (cfg.quantity == "cusum-max") {
    std::vector<double> values;
    report = ctm::calibrate_cusum_threshold(sim, cfg.alpha, cfg.level, cfg.candidates, &values);
    maxima << "sim,max_gamma\n";
    for (std::size_t i = 0; i < values.size(); ++i) maxima << i << ',' << ctm::format_double(values[i]) << '\n';
  } else if (cfg.quantity == "barrier-slope") {
    std::vector<std::uint64_t> horizons = cfg.horizons;
    if (horizons.empty()) horizons.push_back(cfg.n_steps);
    if (horizons.front() == 0) throw ctm::ConfigError("horizons must be positive");
    ctm::BarrierSlopes slopes;
    report = ctm::calibrate_barrier(sim, horizons, cfg.alpha, cfg.level, cfg.candidates, &slopes);
    maxima << "sim";
    for (auto h : slopes.horizons) maxima << ",max_ratio_" << h;
    maxima << '\n';
    for (std::size_t i = 0; i < cfg.n_sims; ++i) {
      maxima << i;
      for (const auto& col : slopes.ratio_maxima) maxima << ',' << ctm::format_double(col[i]);
      maxima << '\n';
    }
  } else if (cfg.quantity == "sr-lifespan") {
    ctm::LifespanSummary s;
    report = ctm::report_sr_lifespan(sim, cfg.threshold, &s);
    maxima << "sim,alarm_time\n";
    for (std::size_t i = 0; i < s.times.size(); ++i) maxima << i << ',' << ctm::format_double(s.times[i]) << '\n';
  } else {
    ctm::DecaySummary d;
    report = ctm::report_jumper_decay(sim, &d);
    maxima << "sim,log10_S\n";
    for (std::size_t i = 0; i < d.finals.size(); ++i) maxima << i << ',' << ctm::format_double(d.finals[i]) << '\n';
  }
  auto out = open_output(dir / "report.json");
  out << ctm::to_json(report).dump(2) << '\n';
  for (const auto& [name, value] : report.estimates) std::cout << name << " = " << ctm::format_double(value) << '\n';
  return kExitOk;
}

// ----------------------------------------------------------------- simulate

int run_simulate(const ctm::RunConfig& cfg) {
  const fs::path dir = prepare_output_dir(cfg);
  for (std::uint64_t k = 0; k < cfg.n_paths; ++k) {
    ctm::CounterRng rng(ctm::derive_seed(cfg.seed, k));
    ctm::SimpleJumper jumper(cfg.jump_rate);
    ctm::CusumDetector cusum;
    ctm::ShiryaevRobertsDetector sr;
    ctm::MaxProcess psi_max;
    auto path = open_output(dir / ("path_" + std::to_string(k + 1) + ".csv"));
    path << "step,log10_S\n0,0\n";
    std::ofstream trace;
    if (cfg.trace) {
      trace = open_output(dir / ("trace_" + std::to_string(k + 1) + ".csv"));
      trace << "step,gamma,psi,psi_star\n0,0,0,0\n";
    }
    for (std::uint64_t n = 1; n <= cfg.n_steps; ++n) {
      const double ratio = jumper.step_unchecked(rng.uniform());
      const double gamma = cusum.step_ratio(ratio).value;
      const double psi = sr.step_ratio(ratio).value;
      const double psi_star = psi_max.update(psi);
      if (n % cfg.every != 0 && n != cfg.n_steps) continue;
      path << n << ',' << ctm::format_double(jumper.log10_capital()) << '\n';
      if (cfg.trace) {
        trace << n << ',' << ctm::format_double(gamma) << ',' << ctm::format_double(psi) << ','
              << ctm::format_double(psi_star) << '\n';
      }
    }
  }
  std::cout << cfg.n_paths << " path(s) of " << cfg.n_steps << " steps written to " << dir.string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- replicate

int replicate_predictions(const ctm::RunConfig& cfg, const fs::path& dir) {
  const char delim = cfg.delimiter_char();
  const auto preds = ctm::load_predictions(cfg.predictions, delim);
  ctm::Dataset data;
  if (cfg.stream == "-") {
    data = ctm::read_dataset(std::cin, delim, cfg.label_column);
  } else {
    data = ctm::load_dataset(cfg.stream, delim, cfg.label_column);
  }
  if (preds.size() != data.size()) {
    throw ctm::DataError("predictions have " + std::to_string(preds.size()) + " rows, stream has " + std::to_string(data.size()));
  }
  if (cfg.calibration_size >= data.size()) throw ctm::DataError("calibration_size must be smaller than the stream");
  std::vector<double> scores;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (cfg.scorer == "signed") {
      scores.push_back(ctm::score_signed(data.rows[i], preds[i]));
    } else if (cfg.scorer == "abs") {
      scores.push_back(ctm::score_abs(data.rows[i], preds[i]));
    } else {
      scores.push_back(ctm::score_pit(data.rows[i], preds[i]));
    }
  }
  ctm::CounterRng tiebreaks(ctm::derive_seed(cfg.seed, 0x9E3D));
  const auto trace = ctm::detail::conformal_trace(scores, tiebreaks, cfg.jump_rate);
  ctm::json results = ctm::json::array();
  for (std::size_t d = 0; d < cfg.detectors.size(); ++d) {
    const ctm::DetectorSpec spec{ctm::parse_detector_kind(cfg.detectors[d]), cfg.thresholds[d]};
    const auto step = ctm::detail::first_alarm(spec, trace.ratios, trace.log_capitals);
    double delay = std::numeric_limits<double>::infinity();
    std::size_t early = 0;
    if (step) {
      early = *step <= cfg.calibration_size ? 1 : 0;
      delay = early ? 0.0 : static_cast<double>(*step - cfg.calibration_size);
    }
    const auto summary = ctm::summarize_delays(spec, {delay}, early);
    results.push_back(ctm::to_json(summary));
    std::cout << cfg.detectors[d] << " c=" << spec.threshold << ": delay " << ctm::format_delay(summary) << '\n';
  }
  auto out = open_output(dir / "delays.json");
  out << ctm::json{{"mode", "predictions"}, {"change_point", cfg.calibration_size}, {"results", results}}.dump(2) << '\n';
  auto path = open_output(dir / "path.csv");
  ctm::MartingalePath mp;
  mp.log_values.insert(mp.log_values.end(), trace.log_capitals.begin(), trace.log_capitals.end());
  ctm::write_path_csv(path, mp);
  return kExitOk;
}

int run_replicate(const ctm::RunConfig& cfg) {
  const fs::path dir = prepare_output_dir(cfg);
  write_config(dir, cfg);
  if (!cfg.predictions.empty()) return replicate_predictions(cfg, dir);

  const char delim = cfg.delimiter_char();
  const auto pre = ctm::load_dataset(cfg.pre, delim, cfg.label_column);
  const bool same = fs::weakly_canonical(cfg.pre) == fs::weakly_canonical(cfg.post);
  const auto post = same ? ctm::Dataset{} : ctm::load_dataset(cfg.post, delim, cfg.label_column);
  const ctm::Dataset& post_ref = same ? pre : post;

  ctm::ExperimentPlan plan;
  plan.training_size = cfg.training_size;
  plan.calibration_size = cfg.calibration_size;
  plan.test_size = cfg.test_size;
  plan.scorer = ctm::parse_builtin_scorer(cfg.scorer);
  plan.n_simulations = cfg.n_sims;
  plan.base_seed = cfg.seed;
  plan.jump_rate = cfg.jump_rate;
  std::vector<ctm::DetectorSpec> specs;
  for (std::size_t d = 0; d < cfg.detectors.size(); ++d) {
    specs.push_back({ctm::parse_detector_kind(cfg.detectors[d]), cfg.thresholds[d]});
  }
  const auto summaries = ctm::run_delay_experiments(plan, specs, pre, post_ref);
  ctm::json results = ctm::json::array();
  for (const auto& s : summaries) {
    results.push_back(ctm::to_json(s));
    std::cout << ctm::to_string(s.detector.kind) << " c=" << s.detector.threshold << ": " << ctm::format_delay(s) << '\n';
  }
  auto out = open_output(dir / "delays.json");
  out << ctm::json{{"mode", same ? "no-change" : "change"}, {"results", results}}.dump(2) << '\n';

  if (cfg.paths) {
    const auto data = ctm::make_threefold_data(pre, post_ref, cfg.test_size, cfg.seed);
    const auto paths = ctm::run_threefold_paths(data, plan.scorer, cfg.jump_rate, cfg.seed);
    for (std::size_t k = 0; k < paths.paths.size(); ++k) {
      for (std::size_t s = 0; s < 2; ++s) {
        auto f = open_output(dir / ("path_fold" + std::to_string(k + 1) + "_scenario" + std::to_string(s) + ".csv"));
        ctm::write_path_csv(f, paths.paths[k][s]);
      }
    }
    auto cp = open_output(dir / "change_points.csv");
    cp << "fold,change_point\n";
    for (std::size_t k = 0; k < paths.change_points.size(); ++k) cp << k + 1 << ',' << paths.change_points[k] << '\n';
  }
  return kExitOk;
}

// -------------------------------------------------------------------- setup

/// Value of --config from argv, if any; it becomes the base that flags override.
std::optional<std::string> find_config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return std::string(argv[i + 1]);
    if (a.rfind("--config=", 0) == 0) return a.substr(9);
  }
  return std::nullopt;
}

ctm::RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ctm::ConfigError("cannot open config '" + path + "'");
  ctm::json j;
  try {
    j = ctm::json::parse(in);
  } catch (const ctm::json::parse_error& e) {
    throw ctm::ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return ctm::run_config_from_json(j);
}

void add_common(CLI::App* app, ctm::RunConfig& cfg, std::string& config_path) {
  app->add_option("--config", config_path, "JSON config file (flags override it)");
  app->add_option("--output-dir,-o", cfg.output_dir, "output directory (CTM_OUTPUT_DIR overrides)");
  app->add_option("--seed", cfg.seed, "base seed");
  app->add_option("--jump-rate", cfg.jump_rate, "Simple Jumper jump rate J");
  app->add_option("--threads", cfg.threads, "worker threads (0 = hardware)");
  app->add_option("--n-sims", cfg.n_sims, "number of simulations");
}

void add_data(CLI::App* app, ctm::RunConfig& cfg) {
  app->add_option("--delimiter", cfg.delimiter, "CSV delimiter (one character, or 'tab')");
  app->add_option("--label-column", cfg.label_column, "name of the label column");
  app->add_option("--scorer", cfg.scorer, "conformity measure: nd, fnd, signed-1nn, abs-1nn (signed, abs, pit with predictions)");
}

int run(int argc, char** argv) {
  ctm::RunConfig cfg;
  if (auto path = find_config_path(argc, argv)) cfg = load_config_file(*path);
  std::string config_path;

  CLI::App app{"Conformal test martingales: monitoring, calibration and replication"};
  app.require_subcommand(1);

  auto* monitor = app.add_subcommand("monitor", "run the three-fold retraining schedule over a stream");
  add_common(monitor, cfg, config_path);
  add_data(monitor, cfg);
  monitor->add_option("--training", cfg.training, "labelled training CSV");
  monitor->add_option("--stream", cfg.stream, "stream CSV, '-' for standard input");
  monitor->add_option("--trace", cfg.trace, "write trace.csv (true/false)");
  std::string schedule_kind;
  double middlegame_slope = 0.0;
  auto* kind_opt = monitor->add_option("--schedule", schedule_kind, "variable, fixed, middlegame or opening");
  monitor->add_option("--target-lifespan", cfg.schedule.target_lifespan, "target lifespan of the endgame");
  monitor->add_option("--opening-threshold", cfg.schedule.opening_threshold, "Ville threshold of the opening");
  monitor->add_option("--endgame-threshold", cfg.schedule.endgame_threshold, "CUSUM (fixed) or SR (variable) threshold");
  auto* slope_opt = monitor->add_option("--middlegame-slope", middlegame_slope, "barrier slope c");
  monitor->add_option("--quorum", cfg.schedule.quorum, "folds needed to raise an alarm");
  monitor->add_option("--folds", cfg.schedule.folds, "number of folds");
  monitor->add_option("--endgame-alpha", cfg.schedule.endgame_alpha, "per-fold level the endgame was calibrated to");
  monitor->add_option("--middlegame-alpha", cfg.schedule.middlegame_alpha, "per-fold level the slope was calibrated to");

  auto* calibrate = app.add_subcommand("calibrate", "Monte Carlo calibration in the ideal setting");
  add_common(calibrate, cfg, config_path);
  calibrate->add_option("--quantity", cfg.quantity, "cusum-max, barrier-slope, sr-lifespan or jumper-decay");
  calibrate->add_option("--n-steps", cfg.n_steps, "horizon N");
  calibrate->add_option("--alpha", cfg.alpha, "target false-alarm probability");
  calibrate->add_option("--level", cfg.level, "Clopper-Pearson confidence level");
  calibrate->add_option("--threshold", cfg.threshold, "SR threshold C (sr-lifespan)");
  calibrate->add_option("--candidates", cfg.candidates, "candidate thresholds to validate");
  calibrate->add_option("--horizons", cfg.horizons, "increasing horizons (barrier-slope)");

  auto* simulate = app.add_subcommand("simulate", "ideal-setting martingale paths");
  add_common(simulate, cfg, config_path);
  simulate->add_option("--n-steps", cfg.n_steps, "steps per path");
  simulate->add_option("--n-paths", cfg.n_paths, "number of paths");
  simulate->add_option("--every", cfg.every, "write every k-th step");
  simulate->add_option("--trace", cfg.trace, "also write detector traces (true/false)");

  auto* replicate = app.add_subcommand("replicate", "delay experiments and three-fold paths on datasets");
  add_common(replicate, cfg, config_path);
  add_data(replicate, cfg);
  replicate->add_option("--pre", cfg.pre, "pre-change dataset CSV");
  replicate->add_option("--post", cfg.post, "post-change dataset CSV (same file: no change)");
  replicate->add_option("--predictions", cfg.predictions, "predictions CSV (y_hat, y_hat_1..m)");
  replicate->add_option("--stream", cfg.stream, "labelled stream aligned with --predictions");
  replicate->add_option("--detectors", cfg.detectors, "ville, cusum, sr, barrier");
  replicate->add_option("--thresholds", cfg.thresholds, "one threshold per detector");
  replicate->add_option("--training-size", cfg.training_size, "training set size");
  replicate->add_option("--calibration-size", cfg.calibration_size, "calibration size / change point");
  replicate->add_option("--test-size", cfg.test_size, "test set size");
  replicate->add_option("--paths", cfg.paths, "also write three-fold path CSVs (true/false)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Error& e) {
    app.exit(e);
    return kExitConfig;
  }

  for (auto* sub : app.get_subcommands()) cfg.command = sub->get_name();
  if (!schedule_kind.empty()) cfg.schedule.kind = ctm::parse_schedule_kind(schedule_kind);
  if (slope_opt->count() > 0) cfg.schedule.middlegame_slope = middlegame_slope;
  (void)kind_opt;
  if (const char* env = std::getenv("CTM_OUTPUT_DIR"); env && *env) cfg.output_dir = env;
  cfg.validate();
  ctm::parallel_thread_override() = cfg.threads;

  if (cfg.command == "monitor") return run_monitor(cfg);
  if (cfg.command == "calibrate") return run_calibrate(cfg);
  if (cfg.command == "simulate") return run_simulate(cfg);
  return run_replicate(cfg);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ctm::Error& e) {
    std::cerr << "ctm: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "ctm: " << e.what() << '\n';
    return kExitRuntime;
  }
}
