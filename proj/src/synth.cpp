#include "ldlf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <json.hpp>

#include "ldlf/error.hpp"
#include "ldlf/random.hpp"

namespace ldlf {

namespace {

constexpr std::uint64_t kSynthStream = 0x73796e7468;
constexpr double kMinWeight = 0.3;
constexpr double kMaxWeight = 0.7;

LabelDistribution mixture(std::size_t a, std::size_t b, double weight, double sigma,
                          std::size_t C) {
  const auto first = gaussian_label_distribution(static_cast<double>(a), sigma, C);
  const auto second = gaussian_label_distribution(static_cast<double>(b), sigma, C);
  std::vector<double> probs(C);
  double sum = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    probs[c] = weight * first[c] + (1.0 - weight) * second[c];
    sum += probs[c];
  }
  for (double& p : probs) p /= sum;
  return LabelDistribution::from_probs(std::move(probs));
}

}  // namespace

SynthMode parse_synth_mode(const std::string& tag) {
  if (tag == "gaussian-unimodal") return SynthMode::kGaussianUnimodal;
  if (tag == "two-component-mixture") return SynthMode::kTwoComponentMixture;
  throw ConfigError("unknown synth mode '" + tag +
                    "' (expected gaussian-unimodal or two-component-mixture)");
}

std::string synth_mode_name(SynthMode mode) {
  return mode == SynthMode::kGaussianUnimodal ? "gaussian-unimodal" : "two-component-mixture";
}

std::vector<std::size_t> local_maxima(std::span<const double> probs) {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < probs.size(); ++c) {
    const bool left_ok = c == 0 || probs[c] > probs[c - 1];
    const bool right_ok = c + 1 == probs.size() || probs[c] > probs[c + 1];
    if (left_ok && right_ok) out.push_back(c);
  }
  return out;
}

SynthResult synthesize(const SynthSpec& spec) {
  if (spec.samples < 1) throw ConfigError("synth: sample count must be positive");
  if (spec.features < 1) throw ConfigError("synth: feature count must be positive");
  if (spec.labels < 2) throw ConfigError("synth: label count must be at least 2");
  if (spec.components < 1) throw ConfigError("synth: component count must be positive");
  if (!(spec.noise >= 0.0) || !std::isfinite(spec.noise)) {
    throw ConfigError("synth: noise must be non-negative");
  }
  if (!(spec.sigma > 0.0)) throw ConfigError("synth: sigma must be positive");
  if (!(spec.center_scale >= 0.0)) throw ConfigError("synth: center scale must be non-negative");

  const auto C = spec.labels;
  const double top = static_cast<double>(C - 1);
  const double spread =
      spec.components > 1 ? static_cast<double>(spec.components - 1) : 1.0;
  Rng rng(derive_seed(spec.seed, kSynthStream));
  std::normal_distribution<double> unit(0.0, 1.0);

  std::vector<SynthComponent> components(spec.components);
  for (std::size_t k = 0; k < spec.components; ++k) {
    auto& comp = components[k];
    comp.center.resize(spec.features);
    for (double& v : comp.center) v = spec.center_scale * unit(rng);
    if (spec.mode == SynthMode::kGaussianUnimodal) {
      const double mean = top * (static_cast<double>(k) + 0.5) / static_cast<double>(spec.components);
      comp.peaks = {static_cast<std::size_t>(std::lround(mean))};
      comp.canonical = gaussian_label_distribution(mean, spec.sigma, C);
    } else {
      const auto a = static_cast<std::size_t>(
          std::lround(top * (0.1 + 0.35 * static_cast<double>(k) / spread)));
      const auto gap = std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(0.45 * top)));
      const auto b = std::min(C - 1, a + gap);
      if (b < a + 2) {
        throw ConfigError("synth: too few labels for two peaks at least 2 indices apart");
      }
      comp.peaks = {a, b};
      comp.canonical = mixture(a, b, 0.5, spec.sigma, C);
      for (double w : {kMinWeight, kMaxWeight}) {
        if (local_maxima(mixture(a, b, w, spec.sigma, C).probs()) != comp.peaks) {
          throw ConfigError("synth: sigma too wide for a bimodal mixture");
        }
      }
    }
  }

  std::uniform_int_distribution<std::size_t> pick(0, spec.components - 1);
  std::vector<Sample> samples;
  std::vector<std::size_t> assignment;
  samples.reserve(spec.samples);
  for (std::size_t i = 0; i < spec.samples; ++i) {
    const auto k = pick(rng);
    const auto& comp = components[k];
    Sample sample;
    sample.features.resize(spec.features);
    for (std::size_t j = 0; j < spec.features; ++j) sample.features[j] = comp.center[j] + unit(rng);
    const double z = unit(rng);
    if (spec.noise == 0.0) {
      sample.target = comp.canonical;
    } else if (spec.mode == SynthMode::kGaussianUnimodal) {
      const double mean =
          top * (static_cast<double>(k) + 0.5) / static_cast<double>(spec.components);
      sample.target = gaussian_label_distribution(std::clamp(mean + spec.noise * z, 0.0, top),
                                                  spec.sigma, C);
    } else {
      const double weight = 0.5 + (kMaxWeight - 0.5) * std::tanh(spec.noise * z);
      sample.target = mixture(comp.peaks[0], comp.peaks[1], weight, spec.sigma, C);
    }
    samples.push_back(std::move(sample));
    assignment.push_back(k);
  }

  return SynthResult{Dataset(std::move(samples), spec.features, C), std::move(components),
                     std::move(assignment)};
}

std::string ground_truth_json(const SynthSpec& spec, const SynthResult& result) {
  nlohmann::json doc;
  doc["mode"] = synth_mode_name(spec.mode);
  doc["samples"] = spec.samples;
  doc["features"] = spec.features;
  doc["labels"] = spec.labels;
  doc["noise"] = spec.noise;
  doc["sigma"] = spec.sigma;
  doc["center_scale"] = spec.center_scale;
  doc["seed"] = spec.seed;
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : result.components) {
    comps.push_back({{"center", c.center},
                     {"peaks", c.peaks},
                     {"canonical", std::vector<double>(c.canonical.probs().begin(),
                                                       c.canonical.probs().end())}});
  }
  doc["components"] = std::move(comps);
  doc["assignment"] = result.assignment;
  return doc.dump(1) + "\n";
}

}  // namespace ldlf
