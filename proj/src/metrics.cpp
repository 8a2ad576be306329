#include "ldlf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "ldlf/error.hpp"
#include "ldlf/random.hpp"
#include "ldlf/training.hpp"

namespace ldlf {

namespace {

constexpr double kKlFloor = 1e-12;

struct MeasureInfo {
  std::string_view name;
  std::string_view formula;
  bool lower_better;
};

constexpr std::array<MeasureInfo, 6> kInfo = {{
    {"kl", "sum_c d_c ln(d_c / max(g_c, 1e-12)), with 0 ln 0 = 0", true},
    {"euclidean", "sqrt(sum_c (d_c - g_c)^2)", true},
    {"sorensen", "sum_c |d_c - g_c| / sum_c (d_c + g_c)", true},
    {"squared_chi2", "sum_c (d_c - g_c)^2 / (d_c + g_c), with 0/0 = 0", true},
    {"fidelity", "sum_c sqrt(d_c g_c)", false},
    {"intersection", "sum_c min(d_c, g_c)", false},
}};

const MeasureInfo& info(Measure m) { return kInfo[static_cast<std::size_t>(m)]; }

}  // namespace

std::string_view measure_name(Measure m) { return info(m).name; }
std::string_view measure_formula(Measure m) { return info(m).formula; }
bool lower_is_better(Measure m) { return info(m).lower_better; }

Measure parse_measure(std::string_view name) {
  for (auto m : kAllMeasures) {
    if (measure_name(m) == name) return m;
  }
  throw ConfigError("unknown measure '" + std::string(name) + "'");
}

double measure(Measure m, std::span<const double> d, std::span<const double> g) {
  if (d.size() != g.size()) throw ConfigError("measure: distributions differ in length");
  if (auto why = simplex_violation(d)) throw ConfigError("measure: target " + *why);
  if (auto why = simplex_violation(g)) throw ConfigError("measure: prediction " + *why);

  const auto C = d.size();
  double acc = 0.0;
  switch (m) {
    case Measure::kKl:
      for (std::size_t c = 0; c < C; ++c) {
        if (d[c] > 0.0) acc += d[c] * std::log(d[c] / std::max(g[c], kKlFloor));
      }
      return acc;
    case Measure::kEuclidean:
      for (std::size_t c = 0; c < C; ++c) acc += (d[c] - g[c]) * (d[c] - g[c]);
      return std::sqrt(acc);
    case Measure::kSorensen: {
      double total = 0.0;
      for (std::size_t c = 0; c < C; ++c) {
        acc += std::abs(d[c] - g[c]);
        total += d[c] + g[c];
      }
      return acc / total;
    }
    case Measure::kSquaredChi2:
      for (std::size_t c = 0; c < C; ++c) {
        const double s = d[c] + g[c];
        if (s > 0.0) acc += (d[c] - g[c]) * (d[c] - g[c]) / s;
      }
      return acc;
    case Measure::kFidelity:
      for (std::size_t c = 0; c < C; ++c) acc += std::sqrt(d[c] * g[c]);
      return acc;
    case Measure::kIntersection:
      for (std::size_t c = 0; c < C; ++c) acc += std::min(d[c], g[c]);
      return acc;
  }
  return acc;
}

MeasureSummary summarize(std::vector<double> values) {
  MeasureSummary s;
  s.values = std::move(values);
  if (s.values.empty()) return s;
  const double n = static_cast<double>(s.values.size());
  s.mean = std::accumulate(s.values.begin(), s.values.end(), 0.0) / n;
  if (s.values.size() > 1) {
    double ss = 0.0;
    for (double v : s.values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

EvaluationReport evaluate(const Forest& forest, const Dataset& dataset) {
  if (dataset.feature_dim() != forest.input_dim() || dataset.label_count() != forest.label_count) {
    throw ConfigError("dataset dimensions do not match the model");
  }
  std::array<std::vector<double>, 6> values;
  for (const auto& sample : dataset.samples()) {
    const auto g = forest_predict(forest, sample.features);
    for (std::size_t k = 0; k < kAllMeasures.size(); ++k) {
      values[k].push_back(measure(kAllMeasures[k], sample.target, g));
    }
  }
  EvaluationReport report;
  for (std::size_t k = 0; k < values.size(); ++k) report.measures[k] = summarize(std::move(values[k]));
  return report;
}

EvaluationReport evaluate_constant(const LabelDistribution& prediction, const Dataset& dataset) {
  std::array<std::vector<double>, 6> values;
  for (const auto& sample : dataset.samples()) {
    for (std::size_t k = 0; k < kAllMeasures.size(); ++k) {
      values[k].push_back(measure(kAllMeasures[k], sample.target, prediction));
    }
  }
  EvaluationReport report;
  for (std::size_t k = 0; k < values.size(); ++k) report.measures[k] = summarize(std::move(values[k]));
  return report;
}

LabelDistribution mean_distribution(const Dataset& dataset) {
  std::vector<double> mean(dataset.label_count(), 0.0);
  for (const auto& s : dataset.samples()) {
    for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += s.target[c];
  }
  double total = 0.0;
  for (double& v : mean) {
    v /= static_cast<double>(dataset.size());
    total += v;
  }
  for (double& v : mean) v /= total;
  return LabelDistribution::from_probs(std::move(mean));
}

EvaluationReport cross_validate(const Dataset& dataset, const TrainConfig& config,
                                std::size_t folds, std::uint64_t seed) {
  validate(config);
  const auto split = kfold_split(dataset, folds, seed);
  std::array<std::vector<double>, 6> values;
  for (std::size_t f = 0; f < folds; ++f) {
    const auto train_idx = split.train_indices(f);
    const auto test_idx = split.test_indices(f);
    auto fold_config = config;
    fold_config.seed = derive_seed(seed, f);
    const auto forest = train(dataset.subset(train_idx), fold_config);
    const auto fold_report = evaluate(forest, dataset.subset(test_idx));
    for (std::size_t k = 0; k < values.size(); ++k) values[k].push_back(fold_report.measures[k].mean);
  }
  EvaluationReport report;
  for (std::size_t k = 0; k < values.size(); ++k) report.measures[k] = summarize(std::move(values[k]));
  return report;
}

std::string format_report_table(const EvaluationReport& report, std::string_view title) {
  std::string out;
  out += "# ";
  out += title;
  out += "\n";
  for (auto m : kAllMeasures) {
    out += "#   ";
    out += measure_name(m);
    out += " = ";
    out += measure_formula(m);
    out += "\n";
  }
  char line[128];
  std::snprintf(line, sizeof(line), "%-14s %-6s %s\n", "measure", "dir", "mean +- std");
  out += line;
  for (auto m : kAllMeasures) {
    const auto& s = report[m];
    std::snprintf(line, sizeof(line), "%-14s %-6s %.3f+-%.3f\n",
                  std::string(measure_name(m)).c_str(), lower_is_better(m) ? "lower" : "higher",
                  s.mean, s.std);
    out += line;
  }
  return out;
}

std::string format_report_json(const EvaluationReport& report, std::string_view kind) {
  nlohmann::json doc;
  doc["kind"] = std::string(kind);
  nlohmann::json measures = nlohmann::json::object();
  for (auto m : kAllMeasures) {
    const auto& s = report[m];
    measures[std::string(measure_name(m))] = {
        {"formula", std::string(measure_formula(m))},
        {"direction", lower_is_better(m) ? "lower" : "higher"},
        {"mean", s.mean},
        {"std", s.std},
        {"values", s.values},
    };
  }
  doc["measures"] = std::move(measures);
  return doc.dump(1) + "\n";
}

}  // namespace ldlf
