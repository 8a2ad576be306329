#include "ldlf/config.hpp"

#include <cmath>
#include <string>

#include "ldlf/error.hpp"

namespace ldlf {

std::size_t split_node_count(std::size_t depth) {
  if (depth < 1 || depth > 40) throw ConfigError("tree depth must lie in [1, 40]");
  return (std::size_t{1} << (depth - 1)) - 1;
}

void validate(const TrainConfig& config) {
  if (config.tree_count < 1) throw ConfigError("tree count must be at least 1");
  if (config.tree_depth < 2 || config.tree_depth > 30) {
    throw ConfigError("tree depth must lie in [2, 30], got " + std::to_string(config.tree_depth));
  }
  const auto required = split_node_count(config.tree_depth);
  if (config.output_units < required) {
    throw ConfigError("output units " + std::to_string(config.output_units) +
                      " violate the constraint output_units >= 2^(depth-1)-1 = " +
                      std::to_string(required) + " for tree depth " +
                      std::to_string(config.tree_depth));
  }
  if (config.buffer_batches < 1) throw ConfigError("buffer batches must be at least 1");
  if (config.batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (!(config.learning_rate > 0.0) || !std::isfinite(config.learning_rate)) {
    throw ConfigError("learning rate must be positive");
  }
  if (!(config.momentum >= 0.0 && config.momentum < 1.0)) {
    throw ConfigError("momentum must lie in [0, 1)");
  }
  if (!(config.theta_init_std > 0.0) || !std::isfinite(config.theta_init_std)) {
    throw ConfigError("theta init std must be positive");
  }
  if (!(config.epsilon > 0.0 && config.epsilon < 1e-3)) {
    throw ConfigError("epsilon must lie in (0, 1e-3)");
  }
  if (config.threads < 1) throw ConfigError("threads must be at least 1");
  if (config.early_stop && config.early_stop_windows < 1) {
    throw ConfigError("early stop window count must be at least 1");
  }
}

}  // namespace ldlf
