#pragma once

// Data ingestion, structured output and run configuration.
//
//   dataset CSV      header row; feature columns then a label column (name
//                    configurable, default "label"); optional 0/1 column
//                    "in_test" marks test-stream rows (0 = exploitation only)
//   predictions CSV  y_hat and/or y_hat_1 .. y_hat_m
//   path CSV         step,log10_S
//   trace CSV        step,gamma,psi,psi_star
//   alarm JSONL      one AlarmLogRecord per line

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctm/betting.hpp"
#include "ctm/calibration.hpp"
#include "ctm/conformity.hpp"
#include "ctm/detectors.hpp"
#include "ctm/error.hpp"
#include "ctm/experiments.hpp"
#include "ctm/schedules.hpp"

namespace ctm {

using json = nlohmann::json;

// ---------------------------------------------------------------------- CSV

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

inline std::vector<std::string> split_line(std::string_view line, char delimiter) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t end = line.find(delimiter, start);
    cells.emplace_back(trim(line.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start)));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return cells;
}

inline double parse_number(std::string_view cell, std::size_t line, std::string_view column) {
  double value = 0.0;
  const auto* first = cell.data();
  const auto* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (cell.empty() || ec != std::errc() || ptr != last) {
    throw DataError("line " + std::to_string(line) + ", column '" + std::string(column) + "': not a number: '" +
                    std::string(cell) + "'");
  }
  return value;
}

}  // namespace detail

struct StreamRow {
  Observation observation;
  bool in_test = true;
  std::size_t line = 0;
};

/// Line-by-line dataset reader; usable on files and standard input.
class DatasetReader {
 public:
  DatasetReader(std::istream& in, char delimiter = ',', std::string label_column = "label")
      : in_(in), delimiter_(delimiter) {
    std::string header;
    while (std::getline(in_, header)) {
      ++line_;
      if (!detail::trim(header).empty()) break;
    }
    if (line_ == 0 || detail::trim(header).empty()) throw DataError("dataset has no header row");
    columns_ = detail::split_line(header, delimiter_);
    for (std::size_t c = 0; c < columns_.size(); ++c) {
      if (columns_[c] == label_column) {
        label_index_ = c;
      } else if (columns_[c] == "in_test") {
        in_test_index_ = c;
      } else {
        feature_indices_.push_back(c);
        feature_names_.push_back(columns_[c]);
      }
    }
    if (!label_index_) throw DataError("label column '" + label_column + "' not found in header");
  }

  std::optional<StreamRow> next() {
    std::string text;
    while (std::getline(in_, text)) {
      ++line_;
      if (detail::trim(text).empty()) continue;
      const auto cells = detail::split_line(text, delimiter_);
      if (cells.size() != columns_.size()) {
        throw DataError("line " + std::to_string(line_) + " has " + std::to_string(cells.size()) + " cells, header has " +
                        std::to_string(columns_.size()));
      }
      StreamRow row;
      row.line = line_;
      row.observation.features.reserve(feature_indices_.size());
      for (std::size_t c : feature_indices_) row.observation.features.push_back(detail::parse_number(cells[c], line_, columns_[c]));
      row.observation.label = detail::parse_number(cells[*label_index_], line_, columns_[*label_index_]);
      if (in_test_index_) row.in_test = detail::parse_number(cells[*in_test_index_], line_, "in_test") != 0.0;
      for (double v : row.observation.features) {
        if (!std::isfinite(v)) throw DataError("line " + std::to_string(line_) + ": non-finite feature");
      }
      if (!std::isfinite(row.observation.label)) throw DataError("line " + std::to_string(line_) + ": non-finite label");
      return row;
    }
    return std::nullopt;
  }

  const std::vector<std::string>& feature_names() const { return feature_names_; }

 private:
  std::istream& in_;
  char delimiter_;
  std::size_t line_ = 0;
  std::vector<std::string> columns_;
  std::vector<std::size_t> feature_indices_;
  std::vector<std::string> feature_names_;
  std::optional<std::size_t> label_index_;
  std::optional<std::size_t> in_test_index_;
};

inline Dataset read_dataset(std::istream& in, char delimiter = ',', const std::string& label_column = "label") {
  DatasetReader reader(in, delimiter, label_column);
  Dataset d;
  d.feature_names = reader.feature_names();
  while (auto row = reader.next()) d.rows.push_back(std::move(row->observation));
  return d;
}

inline Dataset load_dataset(const std::string& path, char delimiter = ',', const std::string& label_column = "label") {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path + "'");
  try {
    return read_dataset(in, delimiter, label_column);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline std::vector<PredictionRecord> read_predictions(std::istream& in, char delimiter = ',') {
  std::string header;
  if (!std::getline(in, header)) throw DataError("predictions file has no header row");
  const auto columns = detail::split_line(header, delimiter);
  std::optional<std::size_t> point;
  std::vector<std::pair<std::size_t, std::size_t>> ensemble;  // (member number, column)
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c] == "y_hat") {
      point = c;
    } else if (columns[c].rfind("y_hat_", 0) == 0) {
      const std::string_view num = std::string_view(columns[c]).substr(6);
      std::size_t j = 0;
      const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), j);
      if (ec != std::errc() || ptr != num.data() + num.size() || j == 0) {
        throw DataError("bad ensemble column '" + columns[c] + "'");
      }
      ensemble.emplace_back(j, c);
    }
  }
  std::sort(ensemble.begin(), ensemble.end());
  for (std::size_t j = 0; j < ensemble.size(); ++j) {
    if (ensemble[j].first != j + 1) throw DataError("ensemble columns must be y_hat_1 .. y_hat_m without gaps");
  }
  if (!point && ensemble.empty()) throw DataError("predictions file needs a y_hat or y_hat_1.. column");
  std::vector<PredictionRecord> out;
  std::string text;
  std::size_t line = 1;
  while (std::getline(in, text)) {
    ++line;
    if (detail::trim(text).empty()) continue;
    const auto cells = detail::split_line(text, delimiter);
    if (cells.size() != columns.size()) throw DataError("line " + std::to_string(line) + ": wrong number of cells");
    PredictionRecord r;
    if (point) r.point_prediction = detail::parse_number(cells[*point], line, "y_hat");
    for (const auto& [j, c] : ensemble) r.ensemble_predictions.push_back(detail::parse_number(cells[c], line, columns[c]));
    r.validate();
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<PredictionRecord> load_predictions(const std::string& path, char delimiter = ',') {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open predictions '" + path + "'");
  return read_predictions(in, delimiter);
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline void write_path_csv(std::ostream& out, const MartingalePath& path) {
  out << "step,log10_S\n";
  for (std::size_t n = 0; n < path.log_values.size(); ++n) out << n << ',' << format_double(path.log10_at(n)) << '\n';
}

inline MartingalePath read_path_csv(std::istream& in) {
  std::string header;
  if (!std::getline(in, header) || detail::trim(header) != "step,log10_S") throw DataError("not a path CSV");
  MartingalePath path;
  path.log_values.clear();
  std::string text;
  std::size_t line = 1;
  while (std::getline(in, text)) {
    ++line;
    if (detail::trim(text).empty()) continue;
    const auto cells = detail::split_line(text, ',');
    if (cells.size() != 2) throw DataError("line " + std::to_string(line) + ": expected 2 cells");
    const double step = detail::parse_number(cells[0], line, "step");
    if (step != static_cast<double>(path.log_values.size())) throw DataError("line " + std::to_string(line) + ": steps out of order");
    path.log_values.push_back(detail::parse_number(cells[1], line, "log10_S") * std::numbers::ln10);
  }
  if (path.log_values.empty()) throw DataError("path CSV has no rows");
  return path;
}

struct DetectorTraceRow {
  std::uint64_t step = 0;
  double gamma = 0.0;
  double psi = 0.0;
  double psi_star = 0.0;
};

/// CUSUM, Shiryaev-Roberts and the SR maximum process along a path.
inline std::vector<DetectorTraceRow> detector_trace(const MartingalePath& path) {
  std::vector<DetectorTraceRow> rows{{0, 0.0, 0.0, 0.0}};
  CusumDetector cusum;
  ShiryaevRobertsDetector sr;
  MaxProcess psi_max;
  for (std::size_t n = 1; n < path.log_values.size(); ++n) {
    const double gamma = cusum.step(path.log_values[n]).value;
    const double psi = sr.step(path.log_values[n]).value;
    rows.push_back({n, gamma, psi, psi_max.update(psi)});
  }
  return rows;
}

inline void write_trace_csv(std::ostream& out, const std::vector<DetectorTraceRow>& rows) {
  out << "step,gamma,psi,psi_star\n";
  for (const auto& r : rows) {
    out << r.step << ',' << format_double(r.gamma) << ',' << format_double(r.psi) << ',' << format_double(r.psi_star) << '\n';
  }
}

// --------------------------------------------------------------------- JSON

/// JSON has no infinities; they are written as null.
inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json to_json(const DetectorAlarm& a) {
  return json{{"detector", std::string(to_string(a.kind))},
              {"step", a.step},
              {"statistic", finite_or_null(a.statistic)},
              {"threshold", finite_or_null(a.threshold)}};
}

inline json to_json(const FoldStatus& s) {
  return json{{"fold", s.fold},   {"step", s.step},         {"log10_S", finite_or_null(s.log10_capital)},
              {"gamma", finite_or_null(s.gamma)}, {"psi", finite_or_null(s.psi)}, {"psi_star", finite_or_null(s.psi_star)}};
}

inline json to_json(const AlarmEvent& e) {
  json folds = json::array();
  for (const auto& f : e.firing_folds) folds.push_back(to_json(f));
  json concurrent = json::array();
  for (auto s : e.concurrent_stages) concurrent.push_back(std::string(to_string(s)));
  return json{{"stage", std::string(to_string(e.stage))},
              {"step", e.step},
              {"test_index", e.test_index ? json(*e.test_index) : json(nullptr)},
              {"threshold", e.threshold},
              {"firing_folds", folds},
              {"concurrent_stages", concurrent}};
}

inline json to_json(const BinomialCI& ci) {
  return json{{"successes", ci.successes}, {"trials", ci.trials}, {"level", ci.level}, {"lower", ci.lower}, {"upper", ci.upper}};
}

inline json to_json(const CalibrationReport& r) {
  json estimates = json::object();
  for (const auto& [k, v] : r.estimates) estimates[k] = finite_or_null(v);
  json candidates = json::array();
  for (const auto& c : r.candidates) {
    candidates.push_back(json{{"threshold", c.threshold}, {"alarms", c.alarms}, {"interval", to_json(c.interval)}, {"validated", c.validated}});
  }
  return json{{"quantity", r.quantity},
              {"n_steps", r.simulation.n_steps},
              {"n_sims", r.simulation.n_sims},
              {"base_seed", r.simulation.base_seed},
              {"jump_rate", r.simulation.jump_rate},
              {"alpha", r.alpha},
              {"level", r.level},
              {"estimates", estimates},
              {"candidates", candidates},
              {"candidate_count", r.candidate_count}};
}

inline json to_json(const DelaySummary& s, bool include_delays = true) {
  json j{{"detector", std::string(to_string(s.detector.kind))},
         {"threshold", s.detector.threshold},
         {"n_runs", s.n_runs},
         {"median", finite_or_null(s.median)},
         {"q1", finite_or_null(s.q1)},
         {"q3", finite_or_null(s.q3)},
         {"no_alarm_fraction", s.no_alarm_fraction},
         {"calibration_alarms", s.calibration_alarms}};
  if (include_delays) {
    json d = json::array();
    for (double v : s.delays) d.push_back(finite_or_null(v));
    j["delays"] = d;
  }
  return j;
}

inline json to_json(const LifespanSummary& s) {
  return json{{"n_sims", s.n_sims},
              {"censored", s.censored},
              {"cap", s.cap},
              {"mean", finite_or_null(s.mean)},
              {"mean_is_lower_bound", s.mean_is_lower_bound},
              {"sd", finite_or_null(s.sd)},
              {"median", finite_or_null(s.median)},
              {"q1", finite_or_null(s.q1)},
              {"q3", finite_or_null(s.q3)}};
}

/// "29 [26, 32]" style, with inf for missing alarms.
inline std::string format_delay(const DelaySummary& s) {
  auto f = [](double v) {
    if (std::isinf(v)) return std::string("inf");
    std::ostringstream o;
    o << v;
    return o.str();
  };
  return f(s.median) + " [" + f(s.q1) + ", " + f(s.q3) + "]";
}

// ------------------------------------------------------------------- config

struct RunConfig {
  std::string command;
  std::string output_dir = "out";
  std::uint64_t seed = 0;
  double jump_rate = SimpleJumper::kDefaultJumpRate;
  std::string delimiter = ",";
  std::string label_column = "label";
  std::string scorer = "nd";
  std::size_t threads = 0;

  // monitor
  std::string training;
  std::string stream = "-";
  ScheduleConfig schedule;
  bool trace = true;

  // calibrate / simulate
  std::string quantity = "cusum-max";
  std::uint64_t n_steps = 1000;
  std::uint64_t n_sims = 1000;
  std::uint64_t n_paths = 3;
  std::uint64_t every = 1;
  double alpha = 0.01;
  double level = 0.999;
  double threshold = 1000.0;
  std::vector<double> candidates;
  std::vector<std::uint64_t> horizons;

  // replicate
  std::string pre;
  std::string post;
  std::string predictions;
  std::vector<std::string> detectors{"ville", "cusum", "sr"};
  std::vector<double> thresholds{1e2, 1e4, 1e6};
  std::size_t training_size = 1000;
  std::size_t calibration_size = 1000;
  std::size_t test_size = 1000;
  bool paths = false;

  char delimiter_char() const { return delimiter == "\\t" || delimiter == "tab" ? '\t' : delimiter.front(); }
  void validate() const;
};

inline const std::set<std::string>& run_config_keys() {
  static const std::set<std::string> keys{
      "command",   "output_dir", "seed",      "jump_rate", "delimiter",  "label_column", "scorer",
      "threads",   "training",   "stream",    "schedule",  "trace",      "quantity",     "n_steps",
      "n_sims",    "n_paths",    "every",     "alpha",     "level",      "threshold",    "candidates",
      "horizons",  "pre",        "post",      "predictions", "detectors", "thresholds",  "training_size",
      "calibration_size", "test_size", "paths"};
  return keys;
}

inline const std::set<std::string>& schedule_keys() {
  static const std::set<std::string> keys{"kind", "target_lifespan", "opening_threshold", "endgame_threshold",
                                          "middlegame_slope", "quorum", "folds", "endgame_alpha", "middlegame_alpha"};
  return keys;
}

inline DetectorKind parse_detector_kind(std::string_view s) {
  if (s == "ville") return DetectorKind::Ville;
  if (s == "cusum") return DetectorKind::Cusum;
  if (s == "sr") return DetectorKind::ShiryaevRoberts;
  if (s == "barrier") return DetectorKind::Barrier;
  throw ConfigError("unknown detector '" + std::string(s) + "'");
}

inline void RunConfig::validate() const {
  static const std::set<std::string> commands{"monitor", "calibrate", "simulate", "replicate"};
  if (!commands.count(command)) throw ConfigError("unknown command '" + command + "'");
  if (!(jump_rate >= 0.0 && jump_rate <= 1.0)) throw ConfigError("jump_rate must lie in [0, 1]");
  if (delimiter.empty() || (delimiter.size() != 1 && delimiter != "\\t" && delimiter != "tab")) {
    throw ConfigError("delimiter must be a single character");
  }
  if (command == "monitor") {
    if (training.empty()) throw ConfigError("monitor needs a training dataset");
    if (stream.empty()) throw ConfigError("monitor needs a stream ('-' for standard input)");
    parse_builtin_scorer(scorer);
    schedule.validate();
  }
  if (command == "calibrate") {
    static const std::set<std::string> quantities{"cusum-max", "barrier-slope", "sr-lifespan", "jumper-decay"};
    if (!quantities.count(quantity)) throw ConfigError("unknown quantity '" + quantity + "'");
    if (n_sims == 0) throw ConfigError("n_sims must be positive");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("level must lie in (0, 1)");
    if (quantity == "sr-lifespan" && !(threshold > 0.0 && std::isfinite(threshold))) throw ConfigError("threshold must be positive");
    for (std::size_t h = 1; h < horizons.size(); ++h) {
      if (horizons[h] <= horizons[h - 1]) throw ConfigError("horizons must be strictly increasing");
    }
  }
  if (command == "simulate" && every == 0) throw ConfigError("every must be positive");
  if (command == "replicate") {
    if (predictions.empty() && (pre.empty() || post.empty())) throw ConfigError("replicate needs pre and post datasets");
    if (!predictions.empty() && stream.empty()) throw ConfigError("replicate with predictions needs a stream dataset");
    if (predictions.empty()) {
      parse_builtin_scorer(scorer);
    } else if (scorer != "signed" && scorer != "abs" && scorer != "pit") {
      throw ConfigError("with predictions the scorer must be signed, abs or pit");
    }
    if (detectors.size() != thresholds.size()) throw ConfigError("detectors and thresholds must pair up");
    for (const auto& d : detectors) parse_detector_kind(d);
    if (n_sims == 0) throw ConfigError("n_sims must be positive");
  }
}

inline json to_json(const ScheduleConfig& s) {
  return json{{"kind", std::string(to_string(s.kind))},
              {"target_lifespan", s.target_lifespan},
              {"opening_threshold", s.opening_threshold},
              {"endgame_threshold", s.endgame_threshold},
              {"middlegame_slope", s.middlegame_slope ? json(*s.middlegame_slope) : json(nullptr)},
              {"quorum", s.quorum},
              {"folds", s.folds},
              {"endgame_alpha", s.endgame_alpha},
              {"middlegame_alpha", s.middlegame_alpha}};
}

inline json to_json(const RunConfig& c) {
  return json{{"command", c.command},       {"output_dir", c.output_dir},   {"seed", c.seed},
              {"jump_rate", c.jump_rate},   {"delimiter", c.delimiter},     {"label_column", c.label_column},
              {"scorer", c.scorer},         {"threads", c.threads},         {"training", c.training},
              {"stream", c.stream},         {"schedule", to_json(c.schedule)}, {"trace", c.trace},
              {"quantity", c.quantity},     {"n_steps", c.n_steps},         {"n_sims", c.n_sims},
              {"n_paths", c.n_paths},       {"every", c.every},             {"alpha", c.alpha},
              {"level", c.level},           {"threshold", c.threshold},     {"candidates", c.candidates},
              {"horizons", c.horizons},     {"pre", c.pre},                 {"post", c.post},
              {"predictions", c.predictions}, {"detectors", c.detectors},   {"thresholds", c.thresholds},
              {"training_size", c.training_size}, {"calibration_size", c.calibration_size},
              {"test_size", c.test_size},   {"paths", c.paths}};
}

namespace detail {

template <class T>
void read_key(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace detail

inline ScheduleConfig schedule_from_json(const json& j, ScheduleConfig s = {}) {
  if (!j.is_object()) throw ConfigError("'schedule' must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!schedule_keys().count(k)) throw ConfigError("unknown schedule key '" + k + "'");
  }
  if (j.contains("kind")) {
    std::string kind;
    detail::read_key(j, "kind", kind);
    s.kind = parse_schedule_kind(kind);
  }
  detail::read_key(j, "target_lifespan", s.target_lifespan);
  detail::read_key(j, "opening_threshold", s.opening_threshold);
  detail::read_key(j, "endgame_threshold", s.endgame_threshold);
  if (j.contains("middlegame_slope")) {
    if (j.at("middlegame_slope").is_null()) {
      s.middlegame_slope.reset();
    } else {
      double slope = 0.0;
      detail::read_key(j, "middlegame_slope", slope);
      s.middlegame_slope = slope;
    }
  }
  detail::read_key(j, "quorum", s.quorum);
  detail::read_key(j, "folds", s.folds);
  detail::read_key(j, "endgame_alpha", s.endgame_alpha);
  detail::read_key(j, "middlegame_alpha", s.middlegame_alpha);
  return s;
}

/// Overlays the keys present in `j` onto `base`. Unknown keys are rejected.
inline RunConfig run_config_from_json(const json& j, RunConfig c = {}) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (!run_config_keys().count(k)) throw ConfigError("unknown config key '" + k + "'");
  }
  detail::read_key(j, "command", c.command);
  detail::read_key(j, "output_dir", c.output_dir);
  detail::read_key(j, "seed", c.seed);
  detail::read_key(j, "jump_rate", c.jump_rate);
  detail::read_key(j, "delimiter", c.delimiter);
  detail::read_key(j, "label_column", c.label_column);
  detail::read_key(j, "scorer", c.scorer);
  detail::read_key(j, "threads", c.threads);
  detail::read_key(j, "training", c.training);
  detail::read_key(j, "stream", c.stream);
  if (j.contains("schedule")) c.schedule = schedule_from_json(j.at("schedule"), c.schedule);
  detail::read_key(j, "trace", c.trace);
  detail::read_key(j, "quantity", c.quantity);
  detail::read_key(j, "n_steps", c.n_steps);
  detail::read_key(j, "n_sims", c.n_sims);
  detail::read_key(j, "n_paths", c.n_paths);
  detail::read_key(j, "every", c.every);
  detail::read_key(j, "alpha", c.alpha);
  detail::read_key(j, "level", c.level);
  detail::read_key(j, "threshold", c.threshold);
  detail::read_key(j, "candidates", c.candidates);
  detail::read_key(j, "horizons", c.horizons);
  detail::read_key(j, "pre", c.pre);
  detail::read_key(j, "post", c.post);
  detail::read_key(j, "predictions", c.predictions);
  detail::read_key(j, "detectors", c.detectors);
  detail::read_key(j, "thresholds", c.thresholds);
  detail::read_key(j, "training_size", c.training_size);
  detail::read_key(j, "calibration_size", c.calibration_size);
  detail::read_key(j, "test_size", c.test_size);
  detail::read_key(j, "paths", c.paths);
  return c;
}

/// FNV-1a 64 over the canonical JSON of the config, output location and
/// thread count excluded. Equal configs hash equally however they were written.
inline std::string config_hash(const RunConfig& c) {
  json j = to_json(c);
  j.erase("output_dir");
  j.erase("threads");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream o;
  o << std::hex << std::setw(16) << std::setfill('0') << h;
  return o.str();
}

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct AlarmLogRecord {
  std::string run_id;
  std::string config_hash;
  std::string timestamp;
  AlarmEvent event;
};

inline json to_json(const AlarmLogRecord& r) {
  return json{{"run_id", r.run_id}, {"config_hash", r.config_hash}, {"timestamp", r.timestamp}, {"event", to_json(r.event)}};
}

/// Appends one record as a single JSONL line.
inline void append_alarm(std::ostream& out, const AlarmLogRecord& record) {
  out << to_json(record).dump() << '\n';
  out.flush();
}

}  // namespace ctm
