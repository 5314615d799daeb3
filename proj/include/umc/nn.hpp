#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "umc/dataset.hpp"
#include "umc/matrix.hpp"

namespace umc::nn {

// ---------------------------------------------------------------------------
// Scalar activations
// ---------------------------------------------------------------------------

/// ELU with alpha = 1.
double elu(double x);
double elu_derivative(double x);
/// Stable for large |x|.
double sigmoid(double x);
/// Inverse sigmoid; throws DomainError outside (0,1).
double logit(double p);

enum class ScalarActivation { elu, sigmoid, logit };
double apply_activation(ScalarActivation kind, double x);

enum class Activation { elu, identity };

// ---------------------------------------------------------------------------
// Parameter registry and gradients
// ---------------------------------------------------------------------------

/// Mutable view of one named parameter tensor owned by a model.
struct ParamView {
  std::string key;
  std::vector<std::size_t> shape;
  std::span<double> values;
};
using ParameterList = std::vector<ParamView>;

struct ConstParamView {
  std::string key;
  std::vector<std::size_t> shape;
  std::span<const double> values;
};

/// Gradient arrays keyed like the parameter registry, in registration order.
class GradientBundle {
 public:
  struct Entry {
    std::string key;
    std::vector<std::size_t> shape;
    std::vector<double> values;
  };

  static GradientBundle zeros_like(const ParameterList& params);

  void add(std::string key, std::vector<std::size_t> shape);
  bool contains(std::string_view key) const;
  std::span<double> at(std::string_view key);
  std::span<const double> at(std::string_view key) const;
  const std::vector<Entry>& entries() const { return entries_; }

  void scale(double factor);
  double max_abs() const;

 private:
  std::size_t index_of(std::string_view key) const;

  std::vector<Entry> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// ---------------------------------------------------------------------------
// Dense layers and MLPs
// ---------------------------------------------------------------------------

/// out = in * weight + bias, with weight stored (in x out).
struct DenseLayer {
  Matrix weight;
  std::vector<double> bias;

  std::size_t inputs() const { return weight.rows(); }
  std::size_t outputs() const { return weight.cols(); }
};

/// Activations saved by a forward pass. inputs[l] feeds layer l, preacts[l]
/// is its affine output. Only layers >= first_layer are populated.
struct MlpCache {
  std::size_t first_layer = 0;
  std::vector<Matrix> inputs;
  std::vector<Matrix> preacts;
};

class Mlp {
 public:
  Mlp() = default;
  /// layer_sizes = {input, hidden..., output}; needs at least two entries.
  explicit Mlp(std::vector<std::size_t> layer_sizes, Activation hidden = Activation::elu);

  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  std::size_t input_width() const { return sizes_.front(); }
  std::size_t output_width() const { return sizes_.back(); }
  std::size_t num_layers() const { return layers_.size(); }
  Activation hidden_activation() const { return hidden_; }

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  /// Glorot-uniform weights, zero biases.
  void init_glorot(std::mt19937_64& rng);
  void zero();

  /// Runs layers [first_layer, end). The output layer is linear.
  Matrix forward(const Matrix& input, MlpCache* cache = nullptr, std::size_t first_layer = 0) const;

  /// Accumulates parameter gradients into `grads` under `prefix` and returns
  /// the gradient with respect to the input of cache.first_layer.
  Matrix backward(const MlpCache& cache, const Matrix& upstream, GradientBundle& grads,
                  std::string_view prefix) const;

  void collect_parameters(std::string_view prefix, ParameterList& out);
  void add_gradient_entries(std::string_view prefix, GradientBundle& grads) const;

  static std::string weight_key(std::string_view prefix, std::size_t layer);
  static std::string bias_key(std::string_view prefix, std::size_t layer);

 private:
  std::vector<std::size_t> sizes_;
  Activation hidden_ = Activation::elu;
  std::vector<DenseLayer> layers_;
};

/// Applies the hidden activation in place, element-wise.
void activate(Activation kind, const Matrix& preact, Matrix& out);
/// grad_out = grad_in * activation'(preact) with act = activation(preact).
void activate_backward(Activation kind, const Matrix& preact, const Matrix& act, const Matrix& grad_in,
                       Matrix& grad_out);

// ---------------------------------------------------------------------------
// Embeddings
// ---------------------------------------------------------------------------

class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(const FieldSchema& schema, std::size_t embed_dim);

  std::size_t embed_dim() const { return dim_; }
  std::size_t num_fields() const { return tables_.size(); }
  std::size_t width() const { return dim_ * tables_.size(); }
  std::vector<Matrix>& tables() { return tables_; }
  const std::vector<Matrix>& tables() const { return tables_; }

  void init_uniform(std::mt19937_64& rng, double scale);
  void zero();

  /// Concatenated vectors of one row's ids into `out` (length width()).
  void embed(std::span<const std::int32_t> features, std::span<double> out) const;
  /// rows x width() for row-major ids (rows x num_fields).
  Matrix embed_rows(std::span<const std::int32_t> features, std::size_t rows) const;
  /// Scatter-adds grad rows back onto the looked-up table rows.
  void backward(std::span<const std::int32_t> features, const Matrix& grad, GradientBundle& grads,
                std::string_view prefix) const;

  void collect_parameters(std::string_view prefix, ParameterList& out);
  void add_gradient_entries(std::string_view prefix, GradientBundle& grads) const;
  static std::string key(std::string_view prefix, std::string_view field);

 private:
  std::size_t dim_ = 0;
  std::vector<Matrix> tables_;
  std::vector<std::string> names_;
};

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::map<std::string, std::vector<double>, std::less<>> first_moment;
  std::map<std::string, std::vector<double>, std::less<>> second_moment;
};

/// One bias-corrected Adam update. L2 enters as grad + l2 * param before the
/// moment updates. Throws OptimizerError naming the key of any non-finite
/// gradient before touching any parameter.
void adam_step(const ParameterList& params, const GradientBundle& grads, AdamState& state, double lr,
               double l2);

}  // namespace umc::nn
