#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ldlf {

/// Tolerance on |sum - 1| accepted by LabelDistribution.
inline constexpr double kSimplexTolerance = 1e-9;
/// Input rows whose target sum deviates from 1 by less than this are renormalized.
inline constexpr double kRepairBand = 1e-6;

/// A point on the probability simplex over C labels.
class LabelDistribution {
 public:
  LabelDistribution() = default;

  /// Validates entries in [0, 1] and sum within kSimplexTolerance of 1.
  /// Throws ConfigError otherwise.
  static LabelDistribution from_probs(std::vector<double> probs);
  static LabelDistribution uniform(std::size_t label_count);
  static LabelDistribution one_hot(std::size_t label_count, std::size_t index);

  std::span<const double> probs() const noexcept { return probs_; }
  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t c) const { return probs_[c]; }

  /// Lowest index among the maximal entries.
  std::size_t argmax() const;

  friend bool operator==(const LabelDistribution&, const LabelDistribution&) = default;

 private:
  explicit LabelDistribution(std::vector<double> probs) : probs_(std::move(probs)) {}
  std::vector<double> probs_;
};

/// Returns an error message when `probs` is not on the simplex within `tolerance`.
std::optional<std::string> simplex_violation(std::span<const double> probs,
                                             double tolerance = kSimplexTolerance);

struct Sample {
  std::vector<double> features;
  LabelDistribution target;
};

class Dataset {
 public:
  /// Validates that the dataset is non-empty, every sample has `feature_dim`
  /// finite features and a `label_count`-sized target.
  Dataset(std::vector<Sample> samples, std::size_t feature_dim, std::size_t label_count,
          std::vector<std::string> label_names = {});

  std::span<const Sample> samples() const noexcept { return samples_; }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }
  std::size_t size() const noexcept { return samples_.size(); }
  std::size_t feature_dim() const noexcept { return feature_dim_; }
  std::size_t label_count() const noexcept { return label_count_; }
  const std::vector<std::string>& label_names() const noexcept { return label_names_; }

  Dataset subset(std::span<const std::size_t> indices) const;

 private:
  std::vector<Sample> samples_;
  std::size_t feature_dim_;
  std::size_t label_count_;
  std::vector<std::string> label_names_;
};

enum class DatasetFormat { kLdl, kCsv };

DatasetFormat parse_format(const std::string& tag);
/// ".csv" maps to kCsv, everything else to kLdl.
DatasetFormat format_from_extension(const std::filesystem::path& path);

/// Parses the whitespace ".ldl" format or the CSV variant.
///
/// .ldl: line 1 "<m> <C>", optional "#labels: n1 ... nC", then one row per
/// sample: m features, "|", C probabilities.
/// CSV: a header row is required; label columns are the trailing block whose
/// header cells start with "label:" and all other columns are features.
///
/// Targets whose sum deviates from 1 by less than kRepairBand are divided by
/// their sum; larger deviations are rejected. Errors are DataError with the
/// 1-based sample row.
Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format);
Dataset parse_dataset(const std::string& text, DatasetFormat format);

/// Writes with 17 significant digits so values round-trip exactly.
void save_dataset(const Dataset& dataset, const std::filesystem::path& path,
                  DatasetFormat format);
std::string format_dataset(const Dataset& dataset, DatasetFormat format);

/// Discretized Gaussian over label indices 0..C-1, normalized to sum to 1.
LabelDistribution gaussian_label_distribution(double mean_index, double sigma,
                                              std::size_t label_count);

struct FoldSplit {
  std::vector<std::size_t> assignment;  // per-sample fold in [0, folds)
  std::size_t folds = 0;

  std::vector<std::size_t> test_indices(std::size_t fold) const;
  std::vector<std::size_t> train_indices(std::size_t fold) const;
};

/// Shuffled balanced partition: fold sizes differ by at most one.
FoldSplit kfold_split(std::size_t sample_count, std::size_t folds, std::uint64_t seed);
inline FoldSplit kfold_split(const Dataset& dataset, std::size_t folds, std::uint64_t seed) {
  return kfold_split(dataset.size(), folds, seed);
}

/// One epoch of mini-batches: a permutation keyed by (seed, epoch) cut into
/// chunks of `batch_size`; the last chunk may be smaller.
std::vector<std::vector<std::size_t>> minibatches(std::size_t sample_count,
                                                  std::size_t batch_size,
                                                  std::uint64_t seed, std::uint64_t epoch);
inline std::vector<std::vector<std::size_t>> minibatches(const Dataset& dataset,
                                                         std::size_t batch_size,
                                                         std::uint64_t seed,
                                                         std::uint64_t epoch) {
  return minibatches(dataset.size(), batch_size, seed, epoch);
}

}  // namespace ldlf
