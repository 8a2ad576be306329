#include "ldlf/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "ldlf/error.hpp"
#include "ldlf/random.hpp"

namespace ldlf {

namespace {

constexpr std::uint64_t kThetaStream = 0x7468657461;
constexpr std::uint64_t kIndexStream = 0x696e646578;

void check_input(const FeatureFunction& fn, std::span<const double> x) {
  if (x.size() != fn.input_dim()) {
    throw ConfigError("feature vector has " + std::to_string(x.size()) +
                      " entries, expected " + std::to_string(fn.input_dim()));
  }
}

}  // namespace

FeatureFunction::FeatureFunction(std::size_t output_dim, std::size_t input_dim, bool bias)
    : output_dim_(output_dim),
      input_dim_(input_dim),
      bias_(bias),
      theta_(output_dim * (input_dim + (bias ? 1 : 0)), 0.0) {}

FeatureFunction::FeatureFunction(std::size_t output_dim, std::size_t input_dim, bool bias,
                                 std::vector<double> theta)
    : output_dim_(output_dim), input_dim_(input_dim), bias_(bias), theta_(std::move(theta)) {
  if (theta_.size() != output_dim_ * cols()) {
    throw ConfigError("theta has " + std::to_string(theta_.size()) + " entries, expected " +
                      std::to_string(output_dim_ * cols()));
  }
  if (!std::all_of(theta_.begin(), theta_.end(), [](double v) { return std::isfinite(v); })) {
    throw ConfigError("theta contains non-finite entries");
  }
}

double FeatureFunction::preactivation(std::size_t unit, std::span<const double> x) const {
  const double* w = theta_.data() + unit * cols();
  double z = 0.0;
  for (std::size_t j = 0; j < input_dim_; ++j) z += w[j] * x[j];
  if (bias_) z += w[input_dim_];
  return z;
}

void validate(const Forest& forest) {
  const auto& fn = forest.feature_fn;
  if (forest.trees.empty()) throw ConfigError("forest has no trees");
  if (forest.label_count < 1) throw ConfigError("forest label count must be positive");
  if (fn.theta().size() != fn.output_dim() * fn.cols()) {
    throw ConfigError("theta shape mismatch");
  }
  for (double v : fn.theta()) {
    if (!std::isfinite(v)) throw ConfigError("theta contains non-finite entries");
  }
  const auto depth = forest.trees.front().topology.depth;
  for (std::size_t k = 0; k < forest.trees.size(); ++k) {
    const auto& tree = forest.trees[k];
    const auto where = " in tree " + std::to_string(k);
    if (tree.topology.depth != depth) throw ConfigError("trees differ in depth" + where);
    if (tree.topology.split_count() != split_node_count(depth)) {
      throw ConfigError("index map length does not match depth" + where);
    }
    if (fn.output_dim() < tree.topology.split_count()) {
      throw ConfigError("output units " + std::to_string(fn.output_dim()) +
                        " fewer than split nodes " + std::to_string(tree.topology.split_count()));
    }
    for (auto unit : tree.topology.index_map) {
      if (unit >= fn.output_dim()) throw ConfigError("index map entry out of range" + where);
    }
    if (tree.label_count != forest.label_count ||
        tree.leaf_dists.size() != tree.topology.leaf_count() * forest.label_count) {
      throw ConfigError("leaf distribution shape mismatch" + where);
    }
    for (std::size_t l = 0; l < tree.topology.leaf_count(); ++l) {
      if (auto why = simplex_violation(tree.leaf(l))) {
        throw ConfigError("leaf " + std::to_string(l) + where + ": " + *why);
      }
    }
  }
}

double sigmoid(double z) noexcept {
  double s;
  if (z >= 0.0) {
    s = 1.0 / (1.0 + std::exp(-z));
    if (s >= 1.0) s = std::nextafter(1.0, 0.0);
  } else {
    const double e = std::exp(z);
    s = e / (1.0 + e);
    if (s <= 0.0) s = std::numeric_limits<double>::denorm_min();
  }
  return s;
}

std::vector<double> split_activations(const Tree& tree, const FeatureFunction& fn,
                                      std::span<const double> x) {
  check_input(fn, x);
  std::vector<double> s(tree.topology.split_count());
  for (std::size_t n = 0; n < s.size(); ++n) {
    s[n] = sigmoid(fn.preactivation(tree.topology.index_map[n], x));
  }
  return s;
}

std::vector<std::vector<double>> split_activations(const Forest& forest,
                                                   std::span<const double> x) {
  std::vector<std::vector<double>> out;
  out.reserve(forest.trees.size());
  for (const auto& tree : forest.trees) out.push_back(split_activations(tree, forest.feature_fn, x));
  return out;
}

void leaf_probabilities(const TreeTopology& topology, std::span<const double> activations,
                        std::span<double> node_mass, std::span<double> out) {
  const auto splits = topology.split_count();
  node_mass[0] = 1.0;
  for (std::size_t n = 0; n < splits; ++n) {
    const double mass = node_mass[n];
    const double s = activations[n];
    node_mass[2 * n + 1] = mass * s;
    node_mass[2 * n + 2] = mass * (1.0 - s);
  }
  std::copy_n(node_mass.begin() + static_cast<std::ptrdiff_t>(splits), splits + 1, out.begin());
}

std::vector<double> leaf_probabilities(const TreeTopology& topology,
                                       std::span<const double> activations) {
  if (activations.size() != topology.split_count()) {
    throw ConfigError("activation count " + std::to_string(activations.size()) +
                      " does not match split node count " +
                      std::to_string(topology.split_count()));
  }
  std::vector<double> mass(2 * topology.split_count() + 1);
  std::vector<double> out(topology.leaf_count());
  leaf_probabilities(topology, activations, mass, out);
  return out;
}

void mix_leaves(const Tree& tree, std::span<const double> leaf_probs, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  const auto C = tree.label_count;
  const double* q = tree.leaf_dists.data();
  for (std::size_t l = 0; l < leaf_probs.size(); ++l, q += C) {
    const double p = leaf_probs[l];
    for (std::size_t c = 0; c < C; ++c) out[c] += p * q[c];
  }
}

LabelDistribution tree_predict(const Tree& tree, std::span<const double> leaf_probs) {
  if (leaf_probs.size() != tree.topology.leaf_count()) {
    throw ConfigError("leaf probability count " + std::to_string(leaf_probs.size()) +
                      " does not match leaf count " + std::to_string(tree.topology.leaf_count()));
  }
  std::vector<double> g(tree.label_count);
  mix_leaves(tree, leaf_probs, g);
  for (double& v : g) v = std::clamp(v, 0.0, 1.0);
  return LabelDistribution::from_probs(std::move(g));
}

LabelDistribution forest_predict(const Forest& forest, std::span<const double> x) {
  check_input(forest.feature_fn, x);
  if (forest.trees.empty()) throw ConfigError("forest has no trees");
  const auto C = forest.label_count;
  std::vector<double> sum(C, 0.0);
  std::vector<double> g(C);
  std::vector<double> mass;
  std::vector<double> routing;
  for (const auto& tree : forest.trees) {
    const auto s = split_activations(tree, forest.feature_fn, x);
    mass.resize(2 * tree.topology.split_count() + 1);
    routing.resize(tree.topology.leaf_count());
    leaf_probabilities(tree.topology, s, mass, routing);
    mix_leaves(tree, routing, g);
    for (std::size_t c = 0; c < C; ++c) sum[c] += g[c];
  }
  const double inv_k = 1.0 / static_cast<double>(forest.trees.size());
  for (double& v : sum) v = std::clamp(v * inv_k, 0.0, 1.0);
  return LabelDistribution::from_probs(std::move(sum));
}

Forest build_forest(const TrainConfig& config, std::size_t input_dim, std::size_t label_count,
                    std::uint64_t seed) {
  validate(config);
  if (input_dim < 1) throw ConfigError("feature dimension must be positive");
  if (label_count < 1) throw ConfigError("label count must be positive");

  Forest forest;
  forest.label_count = label_count;
  forest.feature_fn = FeatureFunction(config.output_units, input_dim, config.bias);
  Rng theta_rng(derive_seed(seed, kThetaStream));
  std::normal_distribution<double> gauss(0.0, config.theta_init_std);
  for (double& v : forest.feature_fn.theta()) v = gauss(theta_rng);

  const auto splits = split_node_count(config.tree_depth);
  const double uniform = 1.0 / static_cast<double>(label_count);
  forest.trees.resize(config.tree_count);
  for (std::size_t k = 0; k < config.tree_count; ++k) {
    auto& tree = forest.trees[k];
    Rng index_rng(derive_seed(derive_seed(seed, kIndexStream), k));
    std::uniform_int_distribution<std::size_t> pick(0, config.output_units - 1);
    tree.topology.depth = config.tree_depth;
    tree.topology.index_map.resize(splits);
    for (auto& unit : tree.topology.index_map) unit = pick(index_rng);
    tree.label_count = label_count;
    tree.leaf_dists.assign((splits + 1) * label_count, uniform);
  }
  return forest;
}

}  // namespace ldlf
