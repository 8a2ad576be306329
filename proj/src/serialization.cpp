#include "ldlf/serialization.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ldlf/error.hpp"

namespace ldlf {

using nlohmann::json;

std::string serialize_forest(const Forest& forest) {
  const auto& fn = forest.feature_fn;
  json doc;
  doc["format"] = "ldlf-model";
  doc["version"] = kModelFormatVersion;
  doc["input_dim"] = fn.input_dim();
  doc["label_count"] = forest.label_count;
  doc["tree_count"] = forest.trees.size();
  doc["tree_depth"] = forest.depth();
  doc["output_units"] = fn.output_dim();
  doc["bias"] = fn.bias();
  doc["theta"] = std::vector<double>(fn.theta().begin(), fn.theta().end());
  json trees = json::array();
  for (const auto& tree : forest.trees) {
    json leaves = json::array();
    for (std::size_t l = 0; l < tree.topology.leaf_count(); ++l) {
      const auto row = tree.leaf(l);
      leaves.push_back(std::vector<double>(row.begin(), row.end()));
    }
    trees.push_back({{"index_map", tree.topology.index_map}, {"leaf_dists", std::move(leaves)}});
  }
  doc["trees"] = std::move(trees);
  return doc.dump(1) + "\n";
}

Forest deserialize_forest(const std::string& json_text) {
  try {
    const auto doc = json::parse(json_text);
    if (doc.at("format").get<std::string>() != "ldlf-model") {
      throw ConfigError("not an ldlf model document");
    }
    if (doc.at("version").get<int>() != kModelFormatVersion) {
      throw ConfigError("unsupported model version " + doc.at("version").dump());
    }
    const auto m = doc.at("input_dim").get<std::size_t>();
    const auto C = doc.at("label_count").get<std::size_t>();
    const auto K = doc.at("tree_count").get<std::size_t>();
    const auto depth = doc.at("tree_depth").get<std::size_t>();
    const auto M = doc.at("output_units").get<std::size_t>();
    const auto bias = doc.at("bias").get<bool>();

    Forest forest;
    forest.label_count = C;
    forest.feature_fn = FeatureFunction(M, m, bias, doc.at("theta").get<std::vector<double>>());
    const auto& trees = doc.at("trees");
    if (!trees.is_array() || trees.size() != K) throw ConfigError("tree count mismatch");
    for (const auto& node : trees) {
      Tree tree;
      tree.topology.depth = depth;
      tree.topology.index_map = node.at("index_map").get<std::vector<std::size_t>>();
      tree.label_count = C;
      for (const auto& row : node.at("leaf_dists")) {
        const auto q = row.get<std::vector<double>>();
        if (q.size() != C) throw ConfigError("leaf distribution length mismatch");
        tree.leaf_dists.insert(tree.leaf_dists.end(), q.begin(), q.end());
      }
      forest.trees.push_back(std::move(tree));
    }
    validate(forest);
    return forest;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed model document: ") + e.what());
  }
}

void save_forest(const Forest& forest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write model '" + path.string() + "'");
  out << serialize_forest(forest);
  if (!out) throw IoError("failed writing model '" + path.string() + "'");
}

Forest load_forest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return deserialize_forest(buffer.str());
}

}  // namespace ldlf
