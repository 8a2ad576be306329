#pragma once

#include <filesystem>
#include <string>

#include "ldlf/forest.hpp"

namespace ldlf {

inline constexpr int kModelFormatVersion = 1;

/// JSON document: format/version header, dimensions, bias flag, row-major
/// Theta and per-tree index_map / leaf_dists. Doubles are written in
/// shortest round-trip form, so parse(serialize(f)) reproduces f bit for bit.
std::string serialize_forest(const Forest& forest);
/// Throws ConfigError on a malformed or inconsistent document.
Forest deserialize_forest(const std::string& json_text);

void save_forest(const Forest& forest, const std::filesystem::path& path);
Forest load_forest(const std::filesystem::path& path);

}  // namespace ldlf
