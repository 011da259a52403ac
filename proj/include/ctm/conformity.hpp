#pragma once

// Conformity measures.
//
//   signed residual     alpha = y - y_hat
//   absolute residual   alpha = |y - y_hat|
//   PIT                 alpha = #{j : y_hat^j <= y} / m   (ensemble of m predictions)
//   nearest distance    alpha = Euclidean distance from x to the nearest
//                               training-proper sample (labels ignored)
//
// The built-in regressor is 1-nearest-neighbour; anything else enters through
// PredictionRecord (see io.hpp for the predictions CSV).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctm/error.hpp"

namespace ctm {

struct Observation {
  std::vector<double> features;
  double label = 0.0;
};

struct Dataset {
  std::vector<Observation> rows;
  std::vector<std::string> feature_names;

  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }
  std::size_t dimension() const { return rows.empty() ? feature_names.size() : rows.front().features.size(); }

  /// Checks constant dimension and finite entries.
  void validate() const {
    const std::size_t dim = dimension();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].features.size() != dim) {
        throw DataError("row " + std::to_string(i + 1) + " has " + std::to_string(rows[i].features.size()) +
                        " features, expected " + std::to_string(dim));
      }
      if (!std::isfinite(rows[i].label)) throw DataError("row " + std::to_string(i + 1) + " has a non-finite label");
      for (double v : rows[i].features) {
        if (!std::isfinite(v)) throw DataError("row " + std::to_string(i + 1) + " has a non-finite feature");
      }
    }
  }
};

struct PredictionRecord {
  std::optional<double> point_prediction;
  std::vector<double> ensemble_predictions;

  /// Point prediction, falling back to the ensemble mean.
  double point() const {
    if (point_prediction) return *point_prediction;
    if (ensemble_predictions.empty()) throw DataError("prediction record has neither y_hat nor an ensemble");
    double sum = 0.0;
    for (double v : ensemble_predictions) sum += v;
    return sum / static_cast<double>(ensemble_predictions.size());
  }

  void validate() const {
    if (point_prediction && !ensemble_predictions.empty()) {
      double sum = 0.0;
      for (double v : ensemble_predictions) sum += v;
      const double mean = sum / static_cast<double>(ensemble_predictions.size());
      if (std::abs(mean - *point_prediction) > 1e-9 * std::max(1.0, std::abs(mean))) {
        throw DataError("y_hat differs from the ensemble mean");
      }
    }
  }
};

enum class ScorerKind : std::uint8_t { SignedResidual, AbsoluteResidual, Pit, NearestDistance };

inline double score_signed(const Observation& obs, const PredictionRecord& pred) {
  if (!pred.point_prediction && pred.ensemble_predictions.empty()) {
    throw DataError("signed residual needs a point prediction");
  }
  return obs.label - pred.point();
}

inline double score_abs(const Observation& obs, const PredictionRecord& pred) { return std::abs(score_signed(obs, pred)); }

inline double score_pit(const Observation& obs, const PredictionRecord& pred) {
  const auto& ensemble = pred.ensemble_predictions;
  if (ensemble.empty()) throw DataError("PIT score needs ensemble predictions");
  const auto below = std::count_if(ensemble.begin(), ensemble.end(), [&](double v) { return v <= obs.label; });
  return static_cast<double>(below) / static_cast<double>(ensemble.size());
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double diff = a[d] - b[d];
    s += diff * diff;
  }
  return s;
}

struct NeighborHit {
  std::size_t index = 0;
  double squared_distance = 0.0;
  double distance() const { return std::sqrt(squared_distance); }
};

/// Exhaustive nearest-neighbour search; ties go to the lowest index.
inline NeighborHit nearest_neighbor(std::span<const Observation> training, std::span<const double> query) {
  if (training.empty()) throw DataError("nearest neighbour over an empty training set");
  NeighborHit best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < training.size(); ++i) {
    const auto& f = training[i].features;
    if (f.size() != query.size()) {
      throw DataError("dimension mismatch: training row " + std::to_string(i + 1) + " has " +
                      std::to_string(f.size()) + " features, query has " + std::to_string(query.size()));
    }
    const double d = squared_distance(f, query);
    if (d < best.squared_distance) best = NeighborHit{i, d};
  }
  return best;
}

inline double score_nearest_distance(const Observation& obs, std::span<const Observation> training_proper) {
  return nearest_neighbor(training_proper, obs.features).distance();
}

inline double knn1_fit_predict(std::span<const Observation> training_proper, std::span<const double> query) {
  return training_proper[nearest_neighbor(training_proper, query).index].label;
}

/// Per-feature centring and scaling with training statistics (population
/// standard deviation). A constant feature is centred only.
class Standardizer {
 public:
  Standardizer() = default;

  static Standardizer fit(std::span<const Observation> training) {
    if (training.empty()) throw DataError("cannot standardize with an empty training set");
    const std::size_t dim = training.front().features.size();
    Standardizer s;
    s.means_.assign(dim, 0.0);
    s.scales_.assign(dim, 1.0);
    const auto n = static_cast<double>(training.size());
    for (const auto& obs : training) {
      if (obs.features.size() != dim) throw DataError("inconsistent feature dimension in training set");
      for (std::size_t d = 0; d < dim; ++d) s.means_[d] += obs.features[d];
    }
    for (double& m : s.means_) m /= n;
    std::vector<double> var(dim, 0.0);
    for (const auto& obs : training) {
      for (std::size_t d = 0; d < dim; ++d) {
        const double c = obs.features[d] - s.means_[d];
        var[d] += c * c;
      }
    }
    for (std::size_t d = 0; d < dim; ++d) {
      const double sd = std::sqrt(var[d] / n);
      if (sd > 0.0) s.scales_[d] = sd;
    }
    return s;
  }

  Observation apply(const Observation& obs) const {
    if (obs.features.size() != means_.size()) throw DataError("standardizer dimension mismatch");
    Observation out = obs;
    for (std::size_t d = 0; d < means_.size(); ++d) out.features[d] = (obs.features[d] - means_[d]) / scales_[d];
    return out;
  }

  std::vector<Observation> apply(std::span<const Observation> rows) const {
    std::vector<Observation> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(apply(r));
    return out;
  }

  const std::vector<double>& means() const { return means_; }
  const std::vector<double>& scales() const { return scales_; }

 private:
  std::vector<double> means_;
  std::vector<double> scales_;
};

inline Dataset standardize(const Dataset& train, const Dataset& apply_to) {
  const auto s = Standardizer::fit(train.rows);
  Dataset out;
  out.feature_names = apply_to.feature_names;
  out.rows = s.apply(apply_to.rows);
  return out;
}

/// Built-in conformity measures that only need the training set proper.
enum class BuiltinScorer : std::uint8_t {
  NearestDistance,          // "nd": raw features
  StandardizedNearestDistance,  // "fnd": features standardized on the training set proper
  SignedResidual1nn,        // "signed-1nn": y - y_hat, 1-NN on standardized features
  AbsoluteResidual1nn,      // "abs-1nn": |y - y_hat|, 1-NN on standardized features
};

inline std::string_view to_string(BuiltinScorer s) {
  switch (s) {
    case BuiltinScorer::NearestDistance: return "nd";
    case BuiltinScorer::StandardizedNearestDistance: return "fnd";
    case BuiltinScorer::SignedResidual1nn: return "signed-1nn";
    case BuiltinScorer::AbsoluteResidual1nn: return "abs-1nn";
  }
  return "unknown";
}

inline BuiltinScorer parse_builtin_scorer(std::string_view name) {
  for (auto s : {BuiltinScorer::NearestDistance, BuiltinScorer::StandardizedNearestDistance,
                 BuiltinScorer::SignedResidual1nn, BuiltinScorer::AbsoluteResidual1nn}) {
    if (name == to_string(s)) return s;
  }
  throw InvalidArgument("unknown scorer '" + std::string(name) + "' (expected nd, fnd, signed-1nn or abs-1nn)");
}

/// A conformity measure fitted on a training set proper. Immutable after
/// construction.
class FittedScorer {
 public:
  FittedScorer(BuiltinScorer kind, std::span<const Observation> training_proper) : kind_(kind) {
    if (training_proper.empty()) throw DataError("empty training set proper");
    if (kind == BuiltinScorer::NearestDistance) {
      training_.assign(training_proper.begin(), training_proper.end());
    } else {
      scaler_ = Standardizer::fit(training_proper);
      training_ = scaler_.apply(training_proper);
    }
  }

  double score(const Observation& obs) const {
    const Observation x = kind_ == BuiltinScorer::NearestDistance ? obs : scaler_.apply(obs);
    const auto hit = nearest_neighbor(training_, x.features);
    switch (kind_) {
      case BuiltinScorer::NearestDistance:
      case BuiltinScorer::StandardizedNearestDistance:
        return hit.distance();
      case BuiltinScorer::SignedResidual1nn:
        return obs.label - training_[hit.index].label;
      case BuiltinScorer::AbsoluteResidual1nn:
        return std::abs(obs.label - training_[hit.index].label);
    }
    return 0.0;
  }

  BuiltinScorer kind() const { return kind_; }

 private:
  BuiltinScorer kind_;
  Standardizer scaler_;
  std::vector<Observation> training_;
};

}  // namespace ctm
