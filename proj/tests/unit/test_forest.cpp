#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "ldlf/error.hpp"
#include "ldlf/forest.hpp"
#include "ldlf/serialization.hpp"
#include "oracle.hpp"

using namespace ldlf;

namespace {

Tree make_tree(std::size_t depth, std::vector<std::vector<double>> leaves) {
  Tree tree;
  tree.topology.depth = depth;
  tree.topology.index_map.assign(split_node_count(depth), 0);
  tree.label_count = leaves.front().size();
  for (const auto& q : leaves) tree.leaf_dists.insert(tree.leaf_dists.end(), q.begin(), q.end());
  return tree;
}

}  // namespace

TEST_CASE("sigmoid") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(2.0) == doctest::Approx(0.8807970779778823).epsilon(1e-15));
  CHECK(sigmoid(-2.0) == doctest::Approx(1.0 - 0.8807970779778823).epsilon(1e-15));
  CHECK(sigmoid(1000.0) < 1.0);
  CHECK(sigmoid(-1000.0) > 0.0);
  CHECK(std::isfinite(sigmoid(-1e308)));
}

TEST_CASE("split activations") {
  TrainConfig config;
  config.tree_count = 2;
  config.tree_depth = 3;
  config.output_units = 4;
  auto forest = build_forest(config, 3, 2, 1);
  SUBCASE("zero theta rows give one half") {
    for (double& v : forest.feature_fn.theta()) v = 0.0;
    for (const auto& s : split_activations(forest, std::vector<double>{1.0, -2.0, 3.0})) {
      for (double v : s) CHECK(v == 0.5);
    }
  }
  SUBCASE("zero pre-activation") {
    for (std::size_t u = 0; u < 4; ++u) {
      auto row = forest.feature_fn.row(u);
      std::fill(row.begin(), row.end(), 0.0);
      row[0] = 1.0;
    }
    for (const auto& s : split_activations(forest, std::vector<double>{0.0, 5.0, 5.0})) {
      for (double v : s) CHECK(v == 0.5);
    }
  }
  SUBCASE("pre-activation 2 through the bias column") {
    for (std::size_t u = 0; u < 4; ++u) {
      auto row = forest.feature_fn.row(u);
      std::fill(row.begin(), row.end(), 0.0);
      row[3] = 2.0;
    }
    for (const auto& s : split_activations(forest, std::vector<double>{0.3, 0.1, 0.2})) {
      for (double v : s) CHECK(v == doctest::Approx(0.8807970779778823).epsilon(1e-15));
    }
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(split_activations(forest, std::vector<double>{1.0}), ConfigError);
  }
}

TEST_CASE("leaf probabilities") {
  TreeTopology depth2{2, {0}};
  TreeTopology depth3{3, {0, 0, 0}};
  CHECK(leaf_probabilities(depth2, std::vector<double>{0.5}) == std::vector<double>{0.5, 0.5});
  CHECK(leaf_probabilities(depth3, std::vector<double>{0.5, 0.5, 0.5}) ==
        std::vector<double>{0.25, 0.25, 0.25, 0.25});
  const auto p = leaf_probabilities(depth3, std::vector<double>{0.9, 0.6, 0.2});
  const std::vector<double> expected = {0.54, 0.36, 0.02, 0.08};
  for (std::size_t l = 0; l < 4; ++l) CHECK(p[l] == doctest::Approx(expected[l]).epsilon(1e-14));
  CHECK_THROWS_AS(leaf_probabilities(depth3, std::vector<double>{0.5}), ConfigError);
}

TEST_CASE("leaf probabilities match ancestor path products and sum to one") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t depth = 2 + rng() % 9;
    TreeTopology topo{depth, std::vector<std::size_t>(split_node_count(depth), 0)};
    std::vector<double> s(topo.split_count());
    for (double& v : s) v = unit(rng);
    const auto p = leaf_probabilities(topo, s);
    const auto ref = oracle::leaf_probs(depth, s);
    for (std::size_t l = 0; l < p.size(); ++l) CHECK(std::abs(p[l] - ref[l]) < 1e-15);
    CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) < 1e-12);
  }
}

TEST_CASE("subtree sums split into left and right children") {
  std::mt19937_64 rng(8);
  auto forest = oracle::random_forest(rng, 1, 5, 3, 4);
  const auto& tree = forest.trees[0];
  const std::vector<double> x = {0.3, -1.2, 0.8};
  const auto s = split_activations(tree, forest.feature_fn, x);
  const auto p = leaf_probabilities(tree.topology, s);
  const auto S = tree.topology.split_count();
  // g_c(T_n) from the leaves under heap node n, collected by brute force.
  const auto subtree_sum = [&](std::size_t node, std::size_t c) {
    double acc = 0.0;
    for (std::size_t l = 0; l <= S; ++l) {
      std::size_t pos = S + l;
      while (pos > node) pos = (pos - 1) / 2;
      if (pos == node) acc += p[l] * tree.leaf(l)[c];
    }
    return acc;
  };
  for (std::size_t n = 0; n < S; ++n) {
    for (std::size_t c = 0; c < 4; ++c) {
      CHECK(subtree_sum(n, c) ==
            doctest::Approx(subtree_sum(2 * n + 1, c) + subtree_sum(2 * n + 2, c)).epsilon(1e-13));
    }
  }
  const auto g = tree_predict(tree, p);
  for (std::size_t c = 0; c < 4; ++c) CHECK(g[c] == doctest::Approx(subtree_sum(0, c)).epsilon(1e-13));
}

TEST_CASE("tree predict") {
  SUBCASE("identical leaves ignore routing") {
    const auto tree = make_tree(3, {{0.1, 0.9}, {0.1, 0.9}, {0.1, 0.9}, {0.1, 0.9}});
    const auto g = tree_predict(tree, std::vector<double>{0.7, 0.1, 0.15, 0.05});
    CHECK(g[0] == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(g[1] == doctest::Approx(0.9).epsilon(1e-15));
  }
  SUBCASE("one-hot routing picks the leaf") {
    const auto tree = make_tree(3, {{0.1, 0.9}, {0.3, 0.7}, {0.6, 0.4}, {1.0, 0.0}});
    const auto g = tree_predict(tree, std::vector<double>{0, 0, 1, 0});
    CHECK(g[0] == 0.6);
    CHECK(g[1] == 0.4);
  }
  SUBCASE("midpoint") {
    const auto tree = make_tree(2, {{1.0, 0.0}, {0.0, 1.0}});
    const auto g = tree_predict(tree, std::vector<double>{0.5, 0.5});
    CHECK(g[0] == 0.5);
    CHECK(g[1] == 0.5);
  }
  SUBCASE("length mismatch") {
    const auto tree = make_tree(2, {{1.0, 0.0}, {0.0, 1.0}});
    CHECK_THROWS_AS(tree_predict(tree, std::vector<double>{1.0}), ConfigError);
  }
}

TEST_CASE("forest predict") {
  std::mt19937_64 rng(2);
  const std::vector<double> x = {0.5, -0.25};
  SUBCASE("single tree equals tree predict") {
    const auto forest = oracle::random_forest(rng, 1, 4, 2, 3);
    const auto s = split_activations(forest.trees[0], forest.feature_fn, x);
    const auto t = tree_predict(forest.trees[0], leaf_probabilities(forest.trees[0].topology, s));
    const auto f = forest_predict(forest, x);
    for (std::size_t c = 0; c < 3; ++c) CHECK(f[c] == doctest::Approx(t[c]).epsilon(1e-15));
  }
  SUBCASE("mean of two trees") {
    auto forest = oracle::random_forest(rng, 2, 2, 2, 2);
    std::fill(forest.trees[0].leaf_dists.begin(), forest.trees[0].leaf_dists.end(), 0.0);
    std::fill(forest.trees[1].leaf_dists.begin(), forest.trees[1].leaf_dists.end(), 0.0);
    forest.trees[0].leaf(0)[0] = forest.trees[0].leaf(1)[0] = 1.0;
    forest.trees[1].leaf(0)[1] = forest.trees[1].leaf(1)[1] = 1.0;
    const auto f = forest_predict(forest, x);
    CHECK(f[0] == doctest::Approx(0.5));
    CHECK(f[1] == doctest::Approx(0.5));
  }
  SUBCASE("idempotent average") {
    auto forest = oracle::random_forest(rng, 4, 3, 2, 3);
    for (auto& tree : forest.trees) {
      for (std::size_t l = 0; l < tree.topology.leaf_count(); ++l) {
        tree.leaf(l)[0] = 0.2;
        tree.leaf(l)[1] = 0.3;
        tree.leaf(l)[2] = 0.5;
      }
    }
    const auto f = forest_predict(forest, x);
    CHECK(f[0] == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(f[2] == doctest::Approx(0.5).epsilon(1e-14));
  }
  SUBCASE("dimension mismatch") {
    const auto forest = oracle::random_forest(rng, 1, 2, 2, 2);
    CHECK_THROWS_AS(forest_predict(forest, std::vector<double>{1.0, 2.0, 3.0}), ConfigError);
  }
}

TEST_CASE("build forest") {
  TrainConfig config;
  SUBCASE("default configuration satisfies the unit constraint") {
    const auto forest = build_forest(config, 10, 5, 0);
    CHECK(forest.trees.size() == 5);
    CHECK(forest.feature_fn.output_dim() == 64);
    CHECK(forest.trees[0].topology.split_count() == 63);
    CHECK(forest.trees[0].topology.leaf_count() == 64);
    for (const auto& tree : forest.trees) {
      for (double q : tree.leaf_dists) CHECK(q == 0.2);
      for (auto unit : tree.topology.index_map) CHECK(unit < 64);
    }
    validate(forest);
  }
  SUBCASE("depth 8 with 64 units is rejected naming both values") {
    config.tree_depth = 8;
    try {
      build_forest(config, 10, 5, 0);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      const std::string what = e.what();
      CHECK(what.find("64") != std::string::npos);
      CHECK(what.find("127") != std::string::npos);
    }
  }
  SUBCASE("bit-identical for equal seeds") {
    const auto a = build_forest(config, 4, 3, 17);
    const auto b = build_forest(config, 4, 3, 17);
    const auto c = build_forest(config, 4, 3, 18);
    CHECK(serialize_forest(a) == serialize_forest(b));
    CHECK(serialize_forest(a) != serialize_forest(c));
  }
  SUBCASE("index map depends on tree id and seed only") {
    config.tree_count = 3;
    const auto small = build_forest(config, 4, 3, 17);
    config.tree_count = 6;
    const auto large = build_forest(config, 4, 3, 17);
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(small.trees[k].topology.index_map == large.trees[k].topology.index_map);
    }
  }
  SUBCASE("theta starts near zero") {
    const auto forest = build_forest(config, 50, 3, 3);
    double ss = 0.0;
    for (double v : forest.feature_fn.theta()) ss += v * v;
    const double std = std::sqrt(ss / static_cast<double>(forest.feature_fn.theta().size()));
    CHECK(std == doctest::Approx(0.01).epsilon(0.05));
  }
  SUBCASE("no bias column when disabled") {
    config.bias = false;
    CHECK(build_forest(config, 4, 3, 0).feature_fn.cols() == 4);
  }
}

TEST_CASE("forest JSON round-trips bit-exactly") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    auto forest = oracle::random_forest(rng, 1 + rng() % 3, 2 + rng() % 4, 1 + rng() % 5,
                                        2 + rng() % 4, 3.0);
    const auto text = serialize_forest(forest);
    const auto back = deserialize_forest(text);
    const auto a = forest.feature_fn.theta();
    const auto b = back.feature_fn.theta();
    CHECK(std::equal(a.begin(), a.end(), b.begin(), b.end()));
    for (std::size_t k = 0; k < forest.trees.size(); ++k) {
      CHECK(back.trees[k].leaf_dists == forest.trees[k].leaf_dists);
      CHECK(back.trees[k].topology.index_map == forest.trees[k].topology.index_map);
    }
    CHECK(serialize_forest(back) == text);
  }
}

TEST_CASE("malformed model documents are rejected") {
  std::mt19937_64 rng(4);
  const auto text = serialize_forest(oracle::random_forest(rng, 2, 3, 2, 2));
  CHECK_THROWS_AS(deserialize_forest("{"), ConfigError);
  CHECK_THROWS_AS(deserialize_forest("{\"format\": \"other\"}"), ConfigError);
  auto broken = text;
  broken.replace(broken.find("\"tree_count\": 2"), 15, "\"tree_count\": 3");
  CHECK_THROWS_AS(deserialize_forest(broken), ConfigError);
}
