#pragma once

#include <cstddef>
#include <cstdint>

namespace ldlf {

/// Hyperparameters of forest construction and the alternating training loop.
struct TrainConfig {
  std::size_t tree_count = 5;          // K
  std::size_t tree_depth = 7;          // h; 2^(h-1)-1 split nodes, 2^(h-1) leaves
  std::size_t output_units = 64;       // M, rows of the linear feature function
  std::size_t leaf_update_iters = 20;  // fixed-point iterations per leaf phase
  std::size_t buffer_batches = 100;    // n_B, SGD steps between leaf phases
  std::size_t batch_size = 64;
  std::size_t max_iterations = 25000;  // total SGD steps
  double learning_rate = 0.1;
  double momentum = 0.9;
  double theta_init_std = 0.01;
  bool bias = true;
  std::uint64_t seed = 0;
  double epsilon = 1e-12;  // floor for divisions and log arguments

  /// Stop once the mean batch loss of the last leaf phase window improved by
  /// less than early_stop_tolerance over early_stop_windows windows.
  bool early_stop = false;
  std::size_t early_stop_windows = 10;
  double early_stop_tolerance = 1e-6;

  /// Worker threads for per-sample accumulation; 1 selects the sequential path.
  std::size_t threads = 1;
};

/// 2^(depth-1) - 1.
std::size_t split_node_count(std::size_t depth);

/// Throws ConfigError on out-of-range values, including the constraint
/// output_units >= 2^(depth-1) - 1 (the message names both values).
void validate(const TrainConfig& config);

}  // namespace ldlf
