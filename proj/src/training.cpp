#include "ldlf/training.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>

#include "ldlf/error.hpp"

namespace ldlf {

namespace {

using SampleRefs = std::span<const Sample* const>;

std::vector<const Sample*> refs_of(std::span<const Sample> samples) {
  std::vector<const Sample*> refs(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) refs[i] = &samples[i];
  return refs;
}

/// Runs fn(chunk, begin, end) over `chunks` contiguous ranges of [0, n).
template <class Fn>
void for_chunks(std::size_t n, std::size_t chunks, Fn&& fn) {
  if (chunks <= 1) {
    fn(std::size_t{0}, std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(chunks);
  for (std::size_t t = 0; t < chunks; ++t) {
    const auto begin = n * t / chunks;
    const auto end = n * (t + 1) / chunks;
    workers.emplace_back([&fn, t, begin, end] { fn(t, begin, end); });
  }
  for (auto& w : workers) w.join();
}

std::size_t chunk_count(std::size_t n, std::size_t threads) {
  return std::max<std::size_t>(1, std::min(n, threads));
}

/// Per-sample, per-tree forward and backward state, reused across samples.
struct TreeWorkspace {
  std::vector<double> activations;
  std::vector<double> node_mass;
  std::vector<double> routing;
  std::vector<double> subtree;  // (2S+1) x C bottom-up sums g_c(T_n)
  std::vector<double> partials;

  void resize(const Tree& tree) {
    const auto S = tree.topology.split_count();
    activations.resize(S);
    node_mass.resize(2 * S + 1);
    routing.resize(S + 1);
    subtree.resize((2 * S + 1) * tree.label_count);
    partials.resize(S);
  }
};

void forward(const Tree& tree, const FeatureFunction& fn, std::span<const double> x,
             TreeWorkspace& ws) {
  const auto& map = tree.topology.index_map;
  for (std::size_t n = 0; n < map.size(); ++n) ws.activations[n] = sigmoid(fn.preactivation(map[n], x));
  leaf_probabilities(tree.topology, ws.activations, ws.node_mass, ws.routing);
}

/// Fills ws.subtree bottom-up from ws.routing and returns the sample's loss
/// contribution -sum_c d_c log g_c(T); also fills ws.partials when asked.
double backward(const Tree& tree, const LabelDistribution& target, double epsilon,
                TreeWorkspace& ws, bool want_partials) {
  const auto S = tree.topology.split_count();
  const auto C = tree.label_count;
  double* g = ws.subtree.data();
  for (std::size_t l = 0; l <= S; ++l) {
    const double p = ws.routing[l];
    const auto q = tree.leaf(l);
    double* out = g + (S + l) * C;
    for (std::size_t c = 0; c < C; ++c) out[c] = p * q[c];
  }
  for (std::size_t n = S; n-- > 0;) {
    double* out = g + n * C;
    const double* left = g + (2 * n + 1) * C;
    const double* right = g + (2 * n + 2) * C;
    for (std::size_t c = 0; c < C; ++c) out[c] = left[c] + right[c];
  }

  double sample_loss = 0.0;
  const auto d = target.probs();
  for (std::size_t c = 0; c < C; ++c) {
    if (d[c] > 0.0) sample_loss -= d[c] * std::log(std::max(g[c], epsilon));
  }
  if (!want_partials) return sample_loss;

  for (std::size_t n = 0; n < S; ++n) {
    const double s = ws.activations[n];
    const double* left = g + (2 * n + 1) * C;
    const double* right = g + (2 * n + 2) * C;
    double partial = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      if (d[c] > 0.0) {
        partial += d[c] * (s * right[c] - (1.0 - s) * left[c]) / std::max(g[c], epsilon);
      }
    }
    ws.partials[n] = partial;
  }
  return sample_loss;
}

GradientBuffer gradient_over(const Forest& forest, SampleRefs batch, double epsilon,
                             std::size_t threads) {
  const auto& fn = forest.feature_fn;
  const auto rows = fn.output_dim();
  const auto cols = fn.cols();
  const auto m = fn.input_dim();
  const auto chunks = chunk_count(batch.size(), threads);

  std::vector<GradientBuffer> partial(chunks);
  for_chunks(batch.size(), chunks, [&](std::size_t t, std::size_t begin, std::size_t end) {
    auto& buf = partial[t];
    buf.d_theta.assign(rows * cols, 0.0);
    TreeWorkspace ws;
    for (std::size_t i = begin; i < end; ++i) {
      const Sample& sample = *batch[i];
      for (const auto& tree : forest.trees) {
        ws.resize(tree);
        forward(tree, fn, sample.features, ws);
        buf.batch_loss += backward(tree, sample.target, epsilon, ws, true);
        const auto& map = tree.topology.index_map;
        for (std::size_t n = 0; n < map.size(); ++n) {
          const double partial_n = ws.partials[n];
          if (partial_n == 0.0) continue;
          double* row = buf.d_theta.data() + map[n] * cols;
          for (std::size_t j = 0; j < m; ++j) row[j] += partial_n * sample.features[j];
          if (fn.bias()) row[m] += partial_n;
        }
      }
    }
  });

  GradientBuffer out = std::move(partial.front());
  for (std::size_t t = 1; t < chunks; ++t) {
    for (std::size_t e = 0; e < out.d_theta.size(); ++e) out.d_theta[e] += partial[t].d_theta[e];
    out.batch_loss += partial[t].batch_loss;
  }
  const double scale =
      1.0 / (static_cast<double>(batch.size()) * static_cast<double>(forest.trees.size()));
  for (double& v : out.d_theta) v *= scale;
  out.batch_loss *= scale;
  out.rows = rows;
  out.cols = cols;
  return out;
}

RoutingTable routing_over(const Tree& tree, const FeatureFunction& fn, SampleRefs samples) {
  RoutingTable table;
  table.sample_count = samples.size();
  table.leaf_count = tree.topology.leaf_count();
  table.probs.resize(table.sample_count * table.leaf_count);
  TreeWorkspace ws;
  ws.resize(tree);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    forward(tree, fn, samples[i]->features, ws);
    std::copy(ws.routing.begin(), ws.routing.end(),
              table.probs.begin() + static_cast<std::ptrdiff_t>(i * table.leaf_count));
  }
  return table;
}

LeafStatistics statistics_over(const Tree& tree, const RoutingTable& routing, SampleRefs samples,
                               double epsilon, std::size_t threads) {
  if (routing.sample_count != samples.size() || routing.leaf_count != tree.topology.leaf_count()) {
    throw ConfigError("routing table does not match tree and samples");
  }
  const auto L = tree.topology.leaf_count();
  const auto C = tree.label_count;
  const auto chunks = chunk_count(samples.size(), threads);
  std::vector<std::vector<double>> partial(chunks);
  for_chunks(samples.size(), chunks, [&](std::size_t t, std::size_t begin, std::size_t end) {
    auto& num = partial[t];
    num.assign(L * C, 0.0);
    std::vector<double> g(C);
    for (std::size_t i = begin; i < end; ++i) {
      const auto p = routing.row(i);
      const auto d = samples[i]->target.probs();
      mix_leaves(tree, p, g);
      for (std::size_t c = 0; c < C; ++c) g[c] = d[c] > 0.0 ? d[c] / std::max(g[c], epsilon) : 0.0;
      for (std::size_t l = 0; l < L; ++l) {
        if (p[l] == 0.0) continue;
        const auto q = tree.leaf(l);
        double* out = num.data() + l * C;
        for (std::size_t c = 0; c < C; ++c) out[c] += g[c] * p[l] * q[c];
      }
    }
  });
  LeafStatistics stats;
  stats.leaf_count = L;
  stats.label_count = C;
  stats.numerators = std::move(partial.front());
  for (std::size_t t = 1; t < chunks; ++t) {
    for (std::size_t e = 0; e < stats.numerators.size(); ++e) stats.numerators[e] += partial[t][e];
  }
  return stats;
}

std::vector<double> normalize_leaves(const Tree& tree, const LeafStatistics& stats) {
  const auto C = stats.label_count;
  std::vector<double> next = tree.leaf_dists;
  for (std::size_t l = 0; l < stats.leaf_count; ++l) {
    const double* num = stats.numerators.data() + l * C;
    double denom = 0.0;
    for (std::size_t c = 0; c < C; ++c) denom += num[c];
    if (!(denom > 0.0)) continue;  // no routing mass: keep the previous row
    double* row = next.data() + l * C;
    for (std::size_t c = 0; c < C; ++c) row[c] = num[c] / denom;
  }
  return next;
}

void check_samples(const Forest& forest, SampleRefs samples) {
  for (const Sample* s : samples) {
    if (s->features.size() != forest.input_dim() || s->target.size() != forest.label_count) {
      throw ConfigError("sample dimensions (" + std::to_string(s->features.size()) + ", " +
                        std::to_string(s->target.size()) + ") do not match forest (" +
                        std::to_string(forest.input_dim()) + ", " +
                        std::to_string(forest.label_count) + ")");
    }
  }
}

}  // namespace

double tree_loss(const Tree& tree, const FeatureFunction& fn, std::span<const Sample> samples,
                 double epsilon) {
  if (samples.empty()) throw ConfigError("loss requires at least one sample");
  TreeWorkspace ws;
  ws.resize(tree);
  double total = 0.0;
  for (const auto& sample : samples) {
    if (sample.features.size() != fn.input_dim() || sample.target.size() != tree.label_count) {
      throw ConfigError("sample dimensions do not match tree");
    }
    forward(tree, fn, sample.features, ws);
    total += backward(tree, sample.target, epsilon, ws, false);
  }
  return total / static_cast<double>(samples.size());
}

double loss(const Forest& forest, std::span<const Sample> samples, double epsilon) {
  if (samples.empty()) throw ConfigError("loss requires at least one sample");
  double total = 0.0;
  for (const auto& tree : forest.trees) total += tree_loss(tree, forest.feature_fn, samples, epsilon);
  return total / static_cast<double>(forest.trees.size());
}

std::vector<double> split_gradient(const Tree& tree, const LabelDistribution& target,
                                   std::span<const double> activations,
                                   std::span<const double> leaf_probs, double epsilon) {
  if (activations.size() != tree.topology.split_count() ||
      leaf_probs.size() != tree.topology.leaf_count() || target.size() != tree.label_count) {
    throw ConfigError("split_gradient: input sizes do not match the tree");
  }
  TreeWorkspace ws;
  ws.resize(tree);
  std::copy(activations.begin(), activations.end(), ws.activations.begin());
  std::copy(leaf_probs.begin(), leaf_probs.end(), ws.routing.begin());
  backward(tree, target, epsilon, ws, true);
  return ws.partials;
}

GradientBuffer theta_gradient(const Forest& forest, std::span<const Sample> batch, double epsilon,
                              std::size_t threads) {
  if (batch.empty()) throw ConfigError("gradient requires a non-empty batch");
  const auto refs = refs_of(batch);
  check_samples(forest, refs);
  return gradient_over(forest, refs, epsilon, threads);
}

void sgd_step(Forest& forest, const GradientBuffer& grad, const TrainConfig& config,
              MomentumState& state) {
  auto theta = forest.feature_fn.theta();
  if (grad.d_theta.size() != theta.size()) throw ConfigError("gradient shape does not match theta");
  for (std::size_t e = 0; e < grad.d_theta.size(); ++e) {
    if (!std::isfinite(grad.d_theta[e])) {
      throw NumericError("non-finite gradient entry at theta[" + std::to_string(e / grad.cols) +
                         "][" + std::to_string(e % grad.cols) + "]");
    }
  }
  if (state.velocity.empty()) state.velocity.assign(theta.size(), 0.0);
  if (state.velocity.size() != theta.size()) throw ConfigError("velocity shape does not match theta");
  for (std::size_t e = 0; e < theta.size(); ++e) {
    state.velocity[e] = config.momentum * state.velocity[e] - config.learning_rate * grad.d_theta[e];
    theta[e] += state.velocity[e];
  }
  for (std::size_t e = 0; e < theta.size(); ++e) {
    if (!std::isfinite(theta[e])) {
      throw NumericError("theta diverged at entry " + std::to_string(e) +
                         "; reduce the learning rate");
    }
  }
}

RoutingTable compute_routing(const Tree& tree, const FeatureFunction& fn,
                             std::span<const Sample> samples) {
  const auto refs = refs_of(samples);
  for (const Sample* s : refs) {
    if (s->features.size() != fn.input_dim()) throw ConfigError("sample feature dimension mismatch");
  }
  return routing_over(tree, fn, refs);
}

LeafStatistics accumulate_leaf_statistics(const Tree& tree, const RoutingTable& routing,
                                          std::span<const Sample> samples, double epsilon,
                                          std::size_t threads) {
  if (samples.empty()) throw ConfigError("leaf update requires a non-empty buffer");
  return statistics_over(tree, routing, refs_of(samples), epsilon, threads);
}

std::vector<double> leaf_update_iteration(const Tree& tree, const RoutingTable& routing,
                                          std::span<const Sample> samples, double epsilon,
                                          std::size_t threads) {
  return normalize_leaves(tree,
                          accumulate_leaf_statistics(tree, routing, samples, epsilon, threads));
}

std::vector<double> leaf_update_iteration(const Tree& tree, const FeatureFunction& fn,
                                          std::span<const Sample> samples, double epsilon) {
  return leaf_update_iteration(tree, compute_routing(tree, fn, samples), samples, epsilon);
}

Forest train(const Dataset& dataset, const TrainConfig& config, const ProgressSink& sink) {
  validate(config);
  Forest forest = build_forest(config, dataset.feature_dim(), dataset.label_count(), config.seed);
  if (config.max_iterations == 0) return forest;

  // Datasets smaller than one batch are consumed whole.
  const auto batch_size = std::min(config.batch_size, dataset.size());
  const auto all = dataset.samples();
  MomentumState momentum;
  std::vector<const Sample*> batch;
  std::vector<const Sample*> buffer;
  std::size_t buffered_batches = 0;
  std::size_t iteration = 0;
  double window_loss = 0.0;
  std::vector<double> window_history;
  bool stop = false;

  const auto leaf_phase = [&] {
    for (auto& tree : forest.trees) {
      const auto routing = routing_over(tree, forest.feature_fn, buffer);
      for (std::size_t t = 0; t < config.leaf_update_iters; ++t) {
        tree.leaf_dists = normalize_leaves(
            tree, statistics_over(tree, routing, buffer, config.epsilon, config.threads));
      }
    }
    const double mean_loss = window_loss / static_cast<double>(buffered_batches);
    if (sink) sink({TrainEvent::Kind::kLeafPhase, iteration, mean_loss});
    window_history.push_back(mean_loss);
    if (config.early_stop && window_history.size() > config.early_stop_windows) {
      const auto past = window_history[window_history.size() - 1 - config.early_stop_windows];
      if (past - mean_loss < config.early_stop_tolerance) stop = true;
    }
    buffer.clear();
    buffered_batches = 0;
    window_loss = 0.0;
  };

  for (std::uint64_t epoch = 0; iteration < config.max_iterations && !stop; ++epoch) {
    for (const auto& indices : minibatches(all.size(), batch_size, config.seed, epoch)) {
      if (iteration >= config.max_iterations || stop) break;
      batch.clear();
      for (auto i : indices) batch.push_back(&all[i]);
      const auto grad = gradient_over(forest, batch, config.epsilon, config.threads);
      sgd_step(forest, grad, config, momentum);
      ++iteration;
      window_loss += grad.batch_loss;
      if (sink) sink({TrainEvent::Kind::kSgdStep, iteration, grad.batch_loss});
      buffer.insert(buffer.end(), batch.begin(), batch.end());
      if (++buffered_batches == config.buffer_batches) leaf_phase();
    }
  }
  if (buffered_batches > 0) leaf_phase();
  return forest;
}

}  // namespace ldlf
