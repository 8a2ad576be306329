#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ldlf/config.hpp"
#include "ldlf/data.hpp"
#include "ldlf/forest.hpp"

namespace ldlf {

enum class Measure { kKl, kEuclidean, kSorensen, kSquaredChi2, kFidelity, kIntersection };

inline constexpr std::array<Measure, 6> kAllMeasures = {
    Measure::kKl,          Measure::kEuclidean, Measure::kSorensen,
    Measure::kSquaredChi2, Measure::kFidelity,  Measure::kIntersection};

std::string_view measure_name(Measure m);
/// Formula in plain text, written into report headers.
std::string_view measure_formula(Measure m);
/// KL, Euclidean, Sorensen and squared chi2 are distances; the rest similarities.
bool lower_is_better(Measure m);
Measure parse_measure(std::string_view name);

/// Distance or similarity between a target d and a prediction g.
///   KL           sum_c d_c ln(d_c / max(g_c, 1e-12)), 0 ln 0 = 0
///   Euclidean    sqrt(sum_c (d_c - g_c)^2)
///   Sorensen     sum_c |d_c - g_c| / sum_c (d_c + g_c)
///   SquaredChi2  sum_c (d_c - g_c)^2 / (d_c + g_c), 0/0 = 0
///   Fidelity     sum_c sqrt(d_c g_c)
///   Intersection sum_c min(d_c, g_c)
/// Throws ConfigError on length mismatch or inputs off the simplex.
double measure(Measure m, std::span<const double> d, std::span<const double> g);
inline double measure(Measure m, const LabelDistribution& d, const LabelDistribution& g) {
  return measure(m, d.probs(), g.probs());
}

struct MeasureSummary {
  double mean = 0.0;
  double std = 0.0;             // sample standard deviation (n - 1); 0 for a single value
  std::vector<double> values;   // raw per-sample or per-fold values
};

/// Per-measure summaries, indexed in kAllMeasures order.
struct EvaluationReport {
  std::array<MeasureSummary, 6> measures;

  const MeasureSummary& operator[](Measure m) const {
    return measures[static_cast<std::size_t>(m)];
  }
  MeasureSummary& operator[](Measure m) { return measures[static_cast<std::size_t>(m)]; }
};

MeasureSummary summarize(std::vector<double> values);

/// Per-sample measures of forest_predict against the targets.
EvaluationReport evaluate(const Forest& forest, const Dataset& dataset);

/// Measures of a fixed prediction against every target (constant-predictor baseline).
EvaluationReport evaluate_constant(const LabelDistribution& prediction, const Dataset& dataset);

/// Mean target distribution of a dataset.
LabelDistribution mean_distribution(const Dataset& dataset);

/// For each fold, trains on the complement with seed derive_seed(seed, fold)
/// and evaluates the mean measures on the fold; summaries are across folds.
EvaluationReport cross_validate(const Dataset& dataset, const TrainConfig& config,
                                std::size_t folds, std::uint64_t seed);

/// Human-readable table with a formula header.
std::string format_report_table(const EvaluationReport& report, std::string_view title);
/// JSON with mean, std, direction and raw values per measure.
std::string format_report_json(const EvaluationReport& report, std::string_view kind);

}  // namespace ldlf
