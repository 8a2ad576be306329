#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ldlf/config.hpp"
#include "ldlf/data.hpp"

namespace ldlf {

/// Linear feature function f(x) = Theta [x; 1]. Row i of Theta feeds output
/// unit i; the trailing bias column is present only when `bias()` is set.
class FeatureFunction {
 public:
  FeatureFunction() = default;
  FeatureFunction(std::size_t output_dim, std::size_t input_dim, bool bias);
  /// `theta` is row-major output_dim x cols(); entries must be finite.
  FeatureFunction(std::size_t output_dim, std::size_t input_dim, bool bias,
                  std::vector<double> theta);

  std::size_t output_dim() const noexcept { return output_dim_; }
  std::size_t input_dim() const noexcept { return input_dim_; }
  bool bias() const noexcept { return bias_; }
  std::size_t cols() const noexcept { return input_dim_ + (bias_ ? 1 : 0); }

  std::span<const double> theta() const noexcept { return theta_; }
  std::span<double> theta() noexcept { return theta_; }
  std::span<const double> row(std::size_t unit) const {
    return std::span<const double>(theta_).subspan(unit * cols(), cols());
  }
  std::span<double> row(std::size_t unit) {
    return std::span<double>(theta_).subspan(unit * cols(), cols());
  }

  /// theta_unit . [x; 1]
  double preactivation(std::size_t unit, std::span<const double> x) const;

 private:
  std::size_t output_dim_ = 0;
  std::size_t input_dim_ = 0;
  bool bias_ = true;
  std::vector<double> theta_;
};

/// Complete binary tree in heap layout. Split nodes occupy positions
/// 0..split_count-1 with children 2n+1 and 2n+2; leaf l sits at heap
/// position split_count + l.
struct TreeTopology {
  std::size_t depth = 0;
  std::vector<std::size_t> index_map;  // split node -> output unit

  std::size_t split_count() const noexcept { return index_map.size(); }
  std::size_t leaf_count() const noexcept { return index_map.size() + 1; }
};

struct Tree {
  TreeTopology topology;
  std::size_t label_count = 0;
  std::vector<double> leaf_dists;  // leaf_count x label_count, rows on the simplex

  std::span<const double> leaf(std::size_t l) const {
    return std::span<const double>(leaf_dists).subspan(l * label_count, label_count);
  }
  std::span<double> leaf(std::size_t l) {
    return std::span<double>(leaf_dists).subspan(l * label_count, label_count);
  }
};

/// K trees sharing one feature function; each tree owns its leaf distributions.
struct Forest {
  FeatureFunction feature_fn;
  std::vector<Tree> trees;
  std::size_t label_count = 0;

  std::size_t input_dim() const noexcept { return feature_fn.input_dim(); }
  std::size_t depth() const noexcept { return trees.empty() ? 0 : trees.front().topology.depth; }
};

/// Throws ConfigError if any structural invariant is broken (shapes, index
/// ranges, leaf rows off the simplex, non-finite Theta).
void validate(const Forest& forest);

/// Logistic function, evaluated without overflow for any finite input.
double sigmoid(double z) noexcept;

/// s_n = sigmoid(f_{phi(n)}(x)) for every split node of `tree`.
std::vector<double> split_activations(const Tree& tree, const FeatureFunction& fn,
                                      std::span<const double> x);
/// Per-tree split activations.
std::vector<std::vector<double>> split_activations(const Forest& forest,
                                                   std::span<const double> x);

/// Routing probabilities p(l|x) from one root-to-leaf pass over the heap.
/// `node_mass` is scratch of size 2*split_count+1; `out` has leaf_count entries.
void leaf_probabilities(const TreeTopology& topology, std::span<const double> activations,
                        std::span<double> node_mass, std::span<double> out);
std::vector<double> leaf_probabilities(const TreeTopology& topology,
                                       std::span<const double> activations);

/// sum_l p(l|x) q_l into `out` (size label_count), no validation.
void mix_leaves(const Tree& tree, std::span<const double> leaf_probs, std::span<double> out);
LabelDistribution tree_predict(const Tree& tree, std::span<const double> leaf_probs);

/// Unweighted mean of the tree predictions.
LabelDistribution forest_predict(const Forest& forest, std::span<const double> x);

/// Random Gaussian Theta, uniform leaves, index maps drawn with replacement
/// from [0, output_units). Deterministic in (config, seed).
Forest build_forest(const TrainConfig& config, std::size_t input_dim, std::size_t label_count,
                    std::uint64_t seed);

}  // namespace ldlf
