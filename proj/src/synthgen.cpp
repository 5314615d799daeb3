#include "umc/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "umc/error.hpp"
#include "umc/nn.hpp"

namespace umc {
namespace {

// Box-Muller on our own uniform draws so output does not depend on the
// standard library's normal_distribution.
class NormalSource {
 public:
  explicit NormalSource(std::uint64_t seed) : rng_(seed) {}
  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = uniform_unit(rng_);
    } while (u1 <= 0.0);
    const double u2 = uniform_unit(rng_);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    spare_ = radius * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return radius * std::cos(2.0 * std::numbers::pi * u2);
  }
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

bool has_temperature(DistortionKind k) { return k == DistortionKind::temperature || k == DistortionKind::mixed; }
bool has_shift(DistortionKind k) { return k == DistortionKind::logit_shift || k == DistortionKind::mixed; }

}  // namespace

void SynthConfig::validate() const {
  if (vocab_sizes.empty()) throw ConfigError("synthetic data needs at least one field");
  for (auto v : vocab_sizes)
    if (v < 2) throw ConfigError("synthetic vocabulary sizes must be >= 2 (id 0 is reserved)");
  if (n_samples < 1) throw ConfigError("n_samples must be >= 1");
  if (!(base_std >= 0.0) || !(effect_std >= 0.0) || !(group_effect_std >= 0.0))
    throw ConfigError("standard deviations must be non-negative");
  if (has_temperature(distortion) && !(temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (has_shift(distortion) && shift_levels.empty()) throw ConfigError("logit-shift distortion needs shift levels");
  for (auto f : shifted_fields)
    if (f >= vocab_sizes.size()) throw ConfigError("shifted field index out of range");
  if (group_cardinality < 1) throw ConfigError("group cardinality must be >= 1");
  if (!(clamp_eps > 0.0 && clamp_eps < 0.5)) throw ConfigError("clamp_eps must lie in (0, 0.5)");
}

SyntheticData generate_synthetic_with_truth(const SynthConfig& config) {
  config.validate();
  const std::size_t fields = config.vocab_sizes.size();

  SyntheticTruth truth;
  NormalSource tables(config.seed ^ 0x5deece66dULL);
  for (std::size_t f = 0; f < fields; ++f) {
    std::vector<double> effect(config.vocab_sizes[f], 0.0);
    for (std::size_t v = 1; v < effect.size(); ++v) effect[v] = config.effect_std * tables();
    truth.effects.push_back(std::move(effect));
  }
  for (std::size_t f = 0; f < fields; ++f) {
    std::vector<double> shift(config.vocab_sizes[f], 0.0);
    const bool shifted =
        has_shift(config.distortion) &&
        (config.shifted_fields.empty() ||
         std::find(config.shifted_fields.begin(), config.shifted_fields.end(), f) != config.shifted_fields.end());
    if (shifted)
      for (std::size_t v = 1; v < shift.size(); ++v)
        shift[v] = config.shift_levels[uniform_below(tables.engine(), config.shift_levels.size())];
    truth.shifts.push_back(std::move(shift));
  }
  truth.group_effects.resize(config.group_cardinality);
  for (auto& g : truth.group_effects) g = config.group_effect_std * tables();

  std::vector<FieldSpec> specs;
  for (std::size_t f = 0; f < fields; ++f) specs.push_back({"f" + std::to_string(f), config.vocab_sizes[f]});
  std::vector<std::string> tokens;
  for (std::size_t g = 0; g < config.group_cardinality; ++g) tokens.push_back("g" + std::to_string(g));

  const double alpha = has_temperature(config.distortion) ? config.temperature : 1.0;
  NormalSource rows(config.seed);
  std::vector<Sample> samples;
  samples.reserve(config.n_samples);
  for (std::size_t i = 0; i < config.n_samples; ++i) {
    Sample s;
    s.timestamp_index = i;
    s.features.resize(fields);
    double true_logit = config.base_mean + config.base_std * rows();
    double shift = 0.0;
    for (std::size_t f = 0; f < fields; ++f) {
      const auto id = 1 + uniform_below(rows.engine(), config.vocab_sizes[f] - 1);
      s.features[f] = static_cast<std::int32_t>(id);
      true_logit += truth.effects[f][id];
      shift += truth.shifts[f][id];
    }
    const auto group = static_cast<std::uint32_t>(uniform_below(rows.engine(), config.group_cardinality));
    true_logit += truth.group_effects[group];
    s.group = group;
    const double p = nn::sigmoid(true_logit);
    s.true_p = p;
    s.label = uniform_unit(rows.engine()) < p ? 1 : 0;
    s.score = std::clamp(nn::sigmoid(alpha * true_logit + shift), config.clamp_eps, 1.0 - config.clamp_eps);
    samples.push_back(std::move(s));
  }
  return {Dataset(FieldSchema(std::move(specs)), std::move(samples), std::move(tokens)), std::move(truth)};
}

Dataset generate_synthetic(const SynthConfig& config) { return generate_synthetic_with_truth(config).dataset; }

SynthConfig synth_preset(std::string_view name, std::size_t n_samples, std::uint64_t seed) {
  SynthConfig c;
  c.n_samples = n_samples;
  c.seed = seed;
  if (name == "identity") {
    c.distortion = DistortionKind::none;
  } else if (name == "temperature") {
    c.distortion = DistortionKind::temperature;
    c.temperature = 2.0;
  } else if (name == "field-shift") {
    c.distortion = DistortionKind::logit_shift;
  } else if (name == "mixed") {
    c.distortion = DistortionKind::mixed;
    c.temperature = 1.5;
  } else {
    throw ConfigError("unknown synthetic preset '" + std::string(name) +
                      "' (expected identity, temperature, field-shift or mixed)");
  }
  return c;
}

double oracle_error(std::span<const double> calibrated, std::span<const double> true_p) {
  if (calibrated.size() != true_p.size()) throw ShapeError("oracle_error: length mismatch");
  if (calibrated.empty()) throw MetricError("oracle_error: empty input");
  double sum = 0.0;
  for (std::size_t i = 0; i < calibrated.size(); ++i) sum += std::abs(calibrated[i] - true_p[i]);
  return sum / static_cast<double>(calibrated.size());
}

}  // namespace umc
