#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "ldlf/config.hpp"
#include "ldlf/data.hpp"
#include "ldlf/forest.hpp"

namespace ldlf {

/// Cross-entropy of one tree, -(1/N) sum_i sum_c d_ic log g_c(x_i). Terms with
/// d_ic = 0 contribute nothing; log arguments are floored at `epsilon`.
double tree_loss(const Tree& tree, const FeatureFunction& fn, std::span<const Sample> samples,
                 double epsilon = 1e-12);

/// Forest loss: the mean of the per-tree losses.
double loss(const Forest& forest, std::span<const Sample> samples, double epsilon = 1e-12);

/// Per-split-node partial dR_i/df_{phi(n)} for one sample, without the 1/N
/// batch factor. Subtree sums g_c(T_n) are accumulated bottom-up from the
/// leaves; g_c(T) is floored at `epsilon`.
std::vector<double> split_gradient(const Tree& tree, const LabelDistribution& target,
                                   std::span<const double> activations,
                                   std::span<const double> leaf_probs, double epsilon = 1e-12);

/// dR_F/dTheta over a batch, shaped like Theta (row-major). Split nodes of
/// different trees mapped to the same unit accumulate into the same row.
struct GradientBuffer {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> d_theta;
  double batch_loss = 0.0;  // R_F on the batch at the pre-step Theta
};

/// Normalized by batch size and tree count. With threads > 1 the batch is cut
/// into contiguous chunks whose partial sums are reduced in chunk order.
GradientBuffer theta_gradient(const Forest& forest, std::span<const Sample> batch,
                              double epsilon = 1e-12, std::size_t threads = 1);

struct MomentumState {
  std::vector<double> velocity;
};

/// velocity <- momentum * velocity - learning_rate * d_theta; Theta += velocity.
/// Leaf distributions are untouched. Throws NumericError on non-finite input.
void sgd_step(Forest& forest, const GradientBuffer& grad, const TrainConfig& config,
              MomentumState& state);

/// p(l|x_i) for a fixed Theta, sample-major (N x leaf_count).
struct RoutingTable {
  std::size_t sample_count = 0;
  std::size_t leaf_count = 0;
  std::vector<double> probs;

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(probs).subspan(i * leaf_count, leaf_count);
  }
};

RoutingTable compute_routing(const Tree& tree, const FeatureFunction& fn,
                             std::span<const Sample> samples);

/// Numerators sum_i d_ic xi_l(q_lc, x_i) with
/// xi_l = p(l|x_i) q_lc / g_c(x_i), per leaf and label (leaf_count x C).
struct LeafStatistics {
  std::size_t leaf_count = 0;
  std::size_t label_count = 0;
  std::vector<double> numerators;
};

LeafStatistics accumulate_leaf_statistics(const Tree& tree, const RoutingTable& routing,
                                          std::span<const Sample> samples,
                                          double epsilon = 1e-12, std::size_t threads = 1);

/// One synchronous fixed-point step of the variational-bounding leaf update;
/// returns the new leaf_dists. Each leaf row is its numerators divided by their
/// sum; rows with a zero sum (no routing mass) are returned unchanged.
std::vector<double> leaf_update_iteration(const Tree& tree, const RoutingTable& routing,
                                          std::span<const Sample> samples,
                                          double epsilon = 1e-12, std::size_t threads = 1);
std::vector<double> leaf_update_iteration(const Tree& tree, const FeatureFunction& fn,
                                          std::span<const Sample> samples,
                                          double epsilon = 1e-12);

struct TrainEvent {
  enum class Kind { kSgdStep, kLeafPhase };
  Kind kind;
  std::size_t iteration;  // SGD steps completed so far
  double loss;            // batch loss (kSgdStep) or window mean batch loss (kLeafPhase)
};

using ProgressSink = std::function<void(const TrainEvent&)>;

/// Alternating optimization: one momentum-SGD step per mini-batch, with every
/// n_B batches retained and then used for leaf_update_iters leaf updates of
/// every tree. Stops after max_iterations SGD steps (or the optional early
/// stop); a trailing partial buffer gets a final leaf phase.
Forest train(const Dataset& dataset, const TrainConfig& config, const ProgressSink& sink = {});

}  // namespace ldlf
