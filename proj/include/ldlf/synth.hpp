#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ldlf/data.hpp"

namespace ldlf {

enum class SynthMode { kGaussianUnimodal, kTwoComponentMixture };

SynthMode parse_synth_mode(const std::string& tag);
std::string synth_mode_name(SynthMode mode);

struct SynthSpec {
  std::size_t samples = 1000;
  std::size_t features = 10;
  std::size_t labels = 8;
  std::size_t components = 2;
  SynthMode mode = SynthMode::kTwoComponentMixture;
  double noise = 0.1;
  double sigma = 0.6;          // label-index width of each Gaussian bump
  double center_scale = 2.0;   // std of the component centers in feature space
  std::uint64_t seed = 0;
};

struct SynthComponent {
  std::vector<double> center;
  std::vector<std::size_t> peaks;  // one peak (unimodal) or two (mixture)
  LabelDistribution canonical;
};

struct SynthResult {
  Dataset dataset;
  std::vector<SynthComponent> components;
  std::vector<std::size_t> assignment;  // generating component per sample
};

/// Features are drawn around per-component centers with unit variance. Targets
/// are the component's canonical distribution perturbed by `noise`: a shifted
/// Gaussian mean (unimodal) or a shifted mixture weight in [0.3, 0.7]
/// (mixture). noise = 0 reproduces the canonical distribution exactly.
SynthResult synthesize(const SynthSpec& spec);

/// Sidecar JSON describing the generating components and assignments.
std::string ground_truth_json(const SynthSpec& spec, const SynthResult& result);

/// Indices that are strictly greater than their neighbours.
std::vector<std::size_t> local_maxima(std::span<const double> probs);

}  // namespace ldlf
