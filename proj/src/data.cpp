#include "ldlf/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ldlf/error.hpp"
#include "ldlf/random.hpp"

namespace ldlf {

namespace {

constexpr std::uint64_t kFoldStream = 0x666f6c64;
constexpr std::uint64_t kBatchStream = 0x62617463;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_whitespace(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<std::string_view> split_char(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string row_suffix(std::size_t row) { return " at row " + std::to_string(row); }

double parse_number(std::string_view token, std::size_t row) {
  double value = 0.0;
  const char* begin = token.data();
  const char* end = token.data() + token.size();
  if (!token.empty() && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec == std::errc::result_out_of_range) {
    throw DataError(DataError::Kind::kNonFinite, row,
                    "non-finite value '" + std::string(token) + "'" + row_suffix(row));
  }
  if (ec != std::errc() || ptr != end) {
    throw DataError(DataError::Kind::kMalformedValue, row,
                    "malformed number '" + std::string(token) + "'" + row_suffix(row));
  }
  return value;
}

std::size_t parse_count(std::string_view token) {
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size() || value == 0) {
    throw DataError(DataError::Kind::kMalformedHeader, 0,
                    "malformed header: expected positive integer, got '" + std::string(token) +
                        "'");
  }
  return value;
}

Sample make_sample(std::span<const std::string_view> feature_tokens,
                   std::span<const std::string_view> prob_tokens, std::size_t row) {
  Sample sample;
  sample.features.reserve(feature_tokens.size());
  std::vector<double> probs;
  probs.reserve(prob_tokens.size());
  for (auto t : feature_tokens) sample.features.push_back(parse_number(t, row));
  for (auto t : prob_tokens) probs.push_back(parse_number(t, row));

  const auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(sample.features.begin(), sample.features.end(), finite) ||
      !std::all_of(probs.begin(), probs.end(), finite)) {
    throw DataError(DataError::Kind::kNonFinite, row, "non-finite value" + row_suffix(row));
  }
  if (std::any_of(probs.begin(), probs.end(), [](double p) { return p < 0.0; })) {
    throw DataError(DataError::Kind::kNegativeProbability, row,
                    "negative probability" + row_suffix(row));
  }
  const double sum = std::accumulate(probs.begin(), probs.end(), 0.0);
  if (!(std::abs(sum - 1.0) < kRepairBand)) {
    throw DataError(DataError::Kind::kSumOutOfTolerance, row,
                    "distribution sum out of tolerance" + row_suffix(row));
  }
  for (double& p : probs) p /= sum;
  sample.target = LabelDistribution::from_probs(std::move(probs));
  return sample;
}

Dataset parse_ldl(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);

  std::size_t pos = 0;
  while (pos < lines.size() && trim(lines[pos]).empty()) ++pos;
  if (pos == lines.size()) {
    throw DataError(DataError::Kind::kMalformedHeader, 0, "malformed header: empty file");
  }
  const auto header = split_whitespace(lines[pos++]);
  if (header.size() != 2) {
    throw DataError(DataError::Kind::kMalformedHeader, 0,
                    "malformed header: expected '<feature_dim> <label_count>'");
  }
  const std::size_t m = parse_count(header[0]);
  const std::size_t C = parse_count(header[1]);

  std::vector<std::string> names;
  if (pos < lines.size()) {
    const auto first = trim(lines[pos]);
    if (first.starts_with("#labels:")) {
      for (auto n : split_whitespace(first.substr(8))) names.emplace_back(n);
      if (names.size() != C) {
        throw DataError(DataError::Kind::kMalformedHeader, 0,
                        "malformed header: #labels lists " + std::to_string(names.size()) +
                            " names, expected " + std::to_string(C));
      }
      ++pos;
    }
  }

  std::vector<Sample> samples;
  std::size_t row = 0;
  for (; pos < lines.size(); ++pos) {
    const auto content = trim(lines[pos]);
    if (content.empty()) continue;
    ++row;
    const auto bar = content.find('|');
    if (bar == std::string_view::npos || content.find('|', bar + 1) != std::string_view::npos) {
      throw DataError(DataError::Kind::kRowArity, row,
                      "expected exactly one '|' separator" + row_suffix(row));
    }
    const auto features = split_whitespace(content.substr(0, bar));
    const auto probs = split_whitespace(content.substr(bar + 1));
    if (features.size() != m || probs.size() != C) {
      throw DataError(DataError::Kind::kRowArity, row,
                      "row arity mismatch: got " + std::to_string(features.size()) + " | " +
                          std::to_string(probs.size()) + " values, expected " +
                          std::to_string(m) + " | " + std::to_string(C) + row_suffix(row));
    }
    samples.push_back(make_sample(features, probs, row));
  }
  if (samples.empty()) {
    throw DataError(DataError::Kind::kEmpty, 0, "dataset contains no samples");
  }
  return Dataset(std::move(samples), m, C, std::move(names));
}

Dataset parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) lines.push_back(line);
  }
  if (lines.empty()) {
    throw DataError(DataError::Kind::kMalformedHeader, 0, "malformed header: empty file");
  }
  const auto header = split_char(lines[0], ',');
  std::size_t first_label = header.size();
  while (first_label > 0 && header[first_label - 1].starts_with("label:")) --first_label;
  const std::size_t m = first_label;
  const std::size_t C = header.size() - first_label;
  if (C == 0 || m == 0) {
    throw DataError(DataError::Kind::kMalformedHeader, 0,
                    "malformed header: need feature columns followed by 'label:' columns");
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (header[i].starts_with("label:")) {
      throw DataError(DataError::Kind::kMalformedHeader, 0,
                      "malformed header: 'label:' columns must be the trailing block");
    }
  }
  std::vector<std::string> names;
  for (std::size_t i = m; i < header.size(); ++i) names.emplace_back(header[i].substr(6));
  // Unnamed label columns ("label:") carry no names.
  if (std::any_of(names.begin(), names.end(), [](const auto& n) { return n.empty(); })) {
    names.clear();
  }

  std::vector<Sample> samples;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = split_char(lines[r], ',');
    if (cells.size() != m + C) {
      throw DataError(DataError::Kind::kRowArity, r,
                      "row arity mismatch: got " + std::to_string(cells.size()) +
                          " columns, expected " + std::to_string(m + C) + row_suffix(r));
    }
    const std::span<const std::string_view> all(cells);
    samples.push_back(make_sample(all.first(m), all.subspan(m), r));
  }
  if (samples.empty()) {
    throw DataError(DataError::Kind::kEmpty, 0, "dataset contains no samples");
  }
  return Dataset(std::move(samples), m, C, std::move(names));
}

void append_number(std::string& out, double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  out.append(buf, ptr);
}

}  // namespace

// ---------------------------------------------------------------------------
// LabelDistribution

std::optional<std::string> simplex_violation(std::span<const double> probs, double tolerance) {
  if (probs.empty()) return "empty distribution";
  double sum = 0.0;
  for (std::size_t c = 0; c < probs.size(); ++c) {
    const double p = probs[c];
    if (!std::isfinite(p)) return "non-finite entry at index " + std::to_string(c);
    if (p < 0.0 || p > 1.0) return "entry outside [0, 1] at index " + std::to_string(c);
    sum += p;
  }
  if (std::abs(sum - 1.0) > tolerance) {
    return "entries sum to " + std::to_string(sum) + ", expected 1";
  }
  return std::nullopt;
}

LabelDistribution LabelDistribution::from_probs(std::vector<double> probs) {
  if (auto why = simplex_violation(probs)) {
    throw ConfigError("invalid label distribution: " + *why);
  }
  return LabelDistribution(std::move(probs));
}

LabelDistribution LabelDistribution::uniform(std::size_t label_count) {
  if (label_count == 0) throw ConfigError("label count must be positive");
  return LabelDistribution(
      std::vector<double>(label_count, 1.0 / static_cast<double>(label_count)));
}

LabelDistribution LabelDistribution::one_hot(std::size_t label_count, std::size_t index) {
  if (index >= label_count) throw ConfigError("one-hot index out of range");
  std::vector<double> probs(label_count, 0.0);
  probs[index] = 1.0;
  return LabelDistribution(std::move(probs));
}

std::size_t LabelDistribution::argmax() const {
  return static_cast<std::size_t>(std::max_element(probs_.begin(), probs_.end()) -
                                  probs_.begin());
}

// ---------------------------------------------------------------------------
// Dataset

Dataset::Dataset(std::vector<Sample> samples, std::size_t feature_dim, std::size_t label_count,
                 std::vector<std::string> label_names)
    : samples_(std::move(samples)),
      feature_dim_(feature_dim),
      label_count_(label_count),
      label_names_(std::move(label_names)) {
  if (samples_.empty()) throw DataError(DataError::Kind::kEmpty, 0, "dataset is empty");
  if (!label_names_.empty() && label_names_.size() != label_count_) {
    throw DataError(DataError::Kind::kMalformedHeader, 0, "label name count mismatch");
  }
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const auto& s = samples_[i];
    if (s.features.size() != feature_dim_ || s.target.size() != label_count_) {
      throw DataError(DataError::Kind::kRowArity, i + 1,
                      "sample dimension mismatch" + row_suffix(i + 1));
    }
    for (double v : s.features) {
      if (!std::isfinite(v)) {
        throw DataError(DataError::Kind::kNonFinite, i + 1, "non-finite feature" + row_suffix(i + 1));
      }
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  std::vector<Sample> picked;
  picked.reserve(indices.size());
  for (auto i : indices) picked.push_back(samples_.at(i));
  return Dataset(std::move(picked), feature_dim_, label_count_, label_names_);
}

// ---------------------------------------------------------------------------
// File I/O

DatasetFormat parse_format(const std::string& tag) {
  if (tag == "ldl") return DatasetFormat::kLdl;
  if (tag == "csv") return DatasetFormat::kCsv;
  throw ConfigError("unknown dataset format '" + tag + "' (expected ldl or csv)");
}

DatasetFormat format_from_extension(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? DatasetFormat::kCsv : DatasetFormat::kLdl;
}

Dataset parse_dataset(const std::string& text, DatasetFormat format) {
  return format == DatasetFormat::kCsv ? parse_csv(text) : parse_ldl(text);
}

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_dataset(buffer.str(), format);
}

std::string format_dataset(const Dataset& dataset, DatasetFormat format) {
  std::string out;
  const auto m = dataset.feature_dim();
  const auto C = dataset.label_count();
  if (format == DatasetFormat::kCsv) {
    for (std::size_t j = 0; j < m; ++j) out += "x" + std::to_string(j) + ",";
    for (std::size_t c = 0; c < C; ++c) {
      out += "label:";
      out += dataset.label_names().empty() ? std::to_string(c) : dataset.label_names()[c];
      out += c + 1 < C ? "," : "\n";
    }
    for (const auto& s : dataset.samples()) {
      for (double v : s.features) {
        append_number(out, v);
        out += ',';
      }
      for (std::size_t c = 0; c < C; ++c) {
        append_number(out, s.target[c]);
        out += c + 1 < C ? "," : "\n";
      }
    }
    return out;
  }

  out += std::to_string(m) + " " + std::to_string(C) + "\n";
  if (!dataset.label_names().empty()) {
    out += "#labels:";
    for (const auto& n : dataset.label_names()) out += " " + n;
    out += "\n";
  }
  for (const auto& s : dataset.samples()) {
    for (double v : s.features) {
      append_number(out, v);
      out += ' ';
    }
    out += '|';
    for (double p : s.target.probs()) {
      out += ' ';
      append_number(out, p);
    }
    out += '\n';
  }
  return out;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path,
                  DatasetFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset '" + path.string() + "'");
  out << format_dataset(dataset, format);
  if (!out) throw IoError("failed writing dataset '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Generators and partitions

LabelDistribution gaussian_label_distribution(double mean_index, double sigma,
                                              std::size_t label_count) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma must be positive");
  if (label_count < 2) throw ConfigError("label count must be at least 2");
  const double upper = static_cast<double>(label_count - 1);
  if (!(mean_index >= 0.0 && mean_index <= upper)) {
    throw ConfigError("mean index must lie in [0, C-1]");
  }
  // Shift exponents by their maximum so that a tiny sigma cannot underflow every entry.
  std::vector<double> exponents(label_count);
  for (std::size_t c = 0; c < label_count; ++c) {
    const double d = static_cast<double>(c) - mean_index;
    exponents[c] = -(d * d) / (2.0 * sigma * sigma);
  }
  const double top = *std::max_element(exponents.begin(), exponents.end());
  std::vector<double> probs(label_count);
  double sum = 0.0;
  for (std::size_t c = 0; c < label_count; ++c) {
    probs[c] = std::exp(exponents[c] - top);
    sum += probs[c];
  }
  for (double& p : probs) p /= sum;
  return LabelDistribution::from_probs(std::move(probs));
}

std::vector<std::size_t> FoldSplit::test_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldSplit::train_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] != fold) out.push_back(i);
  }
  return out;
}

FoldSplit kfold_split(std::size_t sample_count, std::size_t folds, std::uint64_t seed) {
  if (folds < 2 || folds > sample_count) {
    throw ConfigError("fold count " + std::to_string(folds) + " must lie in [2, " +
                      std::to_string(sample_count) + "]");
  }
  std::vector<std::size_t> order(sample_count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, kFoldStream));
  std::shuffle(order.begin(), order.end(), rng);
  FoldSplit split;
  split.folds = folds;
  split.assignment.resize(sample_count);
  for (std::size_t pos = 0; pos < sample_count; ++pos) split.assignment[order[pos]] = pos % folds;
  return split;
}

std::vector<std::vector<std::size_t>> minibatches(std::size_t sample_count,
                                                  std::size_t batch_size,
                                                  std::uint64_t seed, std::uint64_t epoch) {
  if (batch_size < 1 || batch_size > sample_count) {
    throw ConfigError("batch size " + std::to_string(batch_size) + " must lie in [1, " +
                      std::to_string(sample_count) + "]");
  }
  std::vector<std::size_t> order(sample_count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(derive_seed(seed, kBatchStream), epoch));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < sample_count; start += batch_size) {
    const auto stop = std::min(sample_count, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return batches;
}

}  // namespace ldlf
