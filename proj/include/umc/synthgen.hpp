#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "umc/dataset.hpp"

namespace umc {

enum class DistortionKind { none, temperature, logit_shift, mixed };

/// Synthetic log: true logit = base + per-field-value effects + group effect,
/// label ~ Bernoulli(sigmoid(true logit)), and the raw score logit is
/// alpha * true logit + per-field-value shifts. The ideal correction is then
/// sigmoid((logit(s) - shift(x)) / alpha), monotone in s for fixed x.
struct SynthConfig {
  std::vector<std::size_t> vocab_sizes{8, 16, 32};
  std::size_t n_samples = 100000;
  std::uint64_t seed = 1;
  double base_mean = -1.5;
  double base_std = 1.5;
  double effect_std = 0.5;
  DistortionKind distortion = DistortionKind::none;
  double temperature = 1.0;
  std::vector<double> shift_levels{-1.0, 0.0, 1.0};
  /// Fields that receive shifts; empty means every field.
  std::vector<std::size_t> shifted_fields;
  std::size_t group_cardinality = 100;
  double group_effect_std = 0.3;
  double clamp_eps = 1e-6;

  void validate() const;
};

/// Ground truth tables used to build a dataset. Index 0 of each field (the
/// reserved unknown id) has zero effect and zero shift.
struct SyntheticTruth {
  std::vector<std::vector<double>> effects;
  std::vector<std::vector<double>> shifts;
  std::vector<double> group_effects;
};

struct SyntheticData {
  Dataset dataset;
  SyntheticTruth truth;
};

SyntheticData generate_synthetic_with_truth(const SynthConfig& config);
Dataset generate_synthetic(const SynthConfig& config);

/// Named configurations: identity, temperature, field-shift, mixed.
SynthConfig synth_preset(std::string_view name, std::size_t n_samples, std::uint64_t seed);

/// mean |s' - true_p|.
double oracle_error(std::span<const double> calibrated, std::span<const double> true_p);

}  // namespace umc
