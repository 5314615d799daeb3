#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "umc/dataset.hpp"
#include "umc/matrix.hpp"
#include "umc/nn.hpp"
#include "umc/quadrature.hpp"

namespace umc {

struct CalibratorConfig {
  std::size_t embed_dim = 16;
  std::vector<std::size_t> derivative_hidden{50, 50};
  std::vector<std::size_t> rescale_hidden{200, 200};
  std::size_t quadrature_nodes = 50;
  double clamp_eps = 1e-6;
  bool use_rescaling = true;
  bool use_features = true;
  /// Hidden activation of the rescaling network.
  nn::Activation rescale_activation = nn::Activation::elu;

  friend bool operator==(const CalibratorConfig&, const CalibratorConfig&) = default;
};

/// Everything calibrate_batch computed, for the matching backward call.
/// Hidden activations of the derivative network are not stored: backward
/// recomputes them chunk by chunk from the same quadrature nodes.
struct ForwardCache {
  std::uint64_t parameter_version = 0;
  std::size_t rows = 0;
  std::size_t num_fields = 0;
  std::vector<std::int32_t> features;
  Matrix embedded;              ///< rows x embed width (zeros without features)
  std::vector<double> upper;    ///< logit(s), the integration upper limit
  Matrix h_values;              ///< rows x T, derivative net at the mapped nodes
  std::vector<double> integral; ///< U(s, x)
  std::vector<double> log_scale;  ///< w(x)
  std::vector<double> shift;      ///< b(x)
  std::vector<double> pre_sigmoid;
  std::vector<double> output;     ///< s'
  nn::MlpCache rescale_cache;
};

struct CalibrationResult {
  std::vector<double> scores;
  ForwardCache cache;
};

/// Monotone-in-score calibrator
///   s' = sigmoid(exp(w(x)) * U(s, x) + b(x)),
///   U(s, x) = integral_0^logit(s) h(t, x) dt + beta,
///   h(t, x) = 1 + elu(MLP([t; x])) > 0,
/// integrated with a fixed Clenshaw-Curtis rule.
class UmnnCalibrator {
 public:
  UmnnCalibrator() = default;
  /// Glorot hidden weights, zero output layers (so a fresh calibrator is the
  /// identity map), embeddings uniform in +-0.01, beta = 0.
  UmnnCalibrator(FieldSchema schema, CalibratorConfig config, std::uint64_t seed);

  const FieldSchema& schema() const { return schema_; }
  const CalibratorConfig& config() const { return config_; }
  const QuadratureRule& rule() const { return rule_; }
  std::size_t embed_width() const { return embeddings_.width(); }
  std::uint64_t parameter_version() const { return version_; }

  /// All weights, biases and beta set to zero.
  void zero_parameters();
  /// Every weight (output layers included) Glorot-uniform, biases and beta
  /// uniform in +-bias_scale, embeddings uniform in +-embed_scale.
  void randomize_parameters(std::mt19937_64& rng, double bias_scale = 0.1, double embed_scale = 0.5);

  /// Mutable views of every parameter. Invalidates outstanding caches.
  nn::ParameterList parameters();
  /// Read-only views of every parameter, same keys and order.
  std::vector<nn::ConstParamView> parameters() const;
  /// Zero gradients keyed and shaped like parameters().
  nn::GradientBundle zero_gradients() const;
  double beta() const { return beta_; }
  const nn::Mlp& derivative_mlp() const { return derivative_net_; }
  const nn::Mlp& rescale_mlp() const { return rescale_net_; }
  const nn::EmbeddingTable& embeddings() const { return embeddings_; }

  /// Embedded features (rows x width); all zeros when use_features is off.
  Matrix embed(std::span<const std::int32_t> features, std::size_t rows) const;

  /// h(t_r, x_r) per row.
  std::vector<double> derivative_net(std::span<const double> t, const Matrix& x_embed) const;

  /// U(s_r, x_r) per row; throws DomainError for s outside [eps, 1-eps].
  std::vector<double> umnn_integral(std::span<const double> s, const Matrix& x_embed) const;

  CalibrationResult calibrate_batch(const Batch& batch) const;

  /// Parameter gradients of sum_r grad[r] * s'_r. The raw score is treated
  /// as a constant input.
  nn::GradientBundle calibrate_backward(const ForwardCache& cache, std::span<const double> grad_output) const;

  /// d s' / d s per row, used to check monotonicity analytically.
  std::vector<double> score_derivative(const Batch& batch) const;

  /// Calibrated score for every sample, evaluated in chunks.
  std::vector<double> predict(const Dataset& dataset) const;

 private:
  struct IntegralPass {
    std::vector<double> upper;
    Matrix h_values;
    std::vector<double> integral;
  };

  void check_score(double s) const;
  Matrix project_features(const Matrix& x_embed) const;
  void evaluate_nodes(std::span<const double> upper, const Matrix& projection, std::size_t row_begin,
                      std::size_t row_end, Matrix* h_out) const;
  IntegralPass integrate(std::span<const double> s, const Matrix& x_embed) const;
  void bump_version();
  nn::ParameterList collect_views();

  FieldSchema schema_;
  CalibratorConfig config_;
  QuadratureRule rule_;
  nn::EmbeddingTable embeddings_;
  nn::Mlp derivative_net_;
  double beta_ = 0.0;
  nn::Mlp rescale_net_;
  std::uint64_t version_ = 0;
};

}  // namespace umc
