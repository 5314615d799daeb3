#include "umc/nn.hpp"

#include <algorithm>
#include <cmath>

#include "umc/error.hpp"
#include "umc/simd/kernels.hpp"

namespace umc::nn {

double elu(double x) { return x >= 0.0 ? x : std::expm1(x); }

double elu_derivative(double x) { return x >= 0.0 ? 1.0 : std::exp(x); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("logit argument must lie in (0,1)");
  return std::log(p) - std::log1p(-p);
}

double apply_activation(ScalarActivation kind, double x) {
  switch (kind) {
    case ScalarActivation::elu: return elu(x);
    case ScalarActivation::sigmoid: return sigmoid(x);
    case ScalarActivation::logit: return logit(x);
  }
  throw ConfigError("unknown activation");
}

// ---------------------------------------------------------------------------

GradientBundle GradientBundle::zeros_like(const ParameterList& params) {
  GradientBundle g;
  for (const auto& p : params) g.add(p.key, p.shape);
  return g;
}

void GradientBundle::add(std::string key, std::vector<std::size_t> shape) {
  if (index_.contains(key)) throw ContractError("duplicate gradient key '" + key + "'");
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  index_.emplace(key, entries_.size());
  entries_.push_back({std::move(key), std::move(shape), std::vector<double>(n, 0.0)});
}

bool GradientBundle::contains(std::string_view key) const { return index_.find(key) != index_.end(); }

std::size_t GradientBundle::index_of(std::string_view key) const {
  const auto it = index_.find(key);
  if (it == index_.end()) throw LookupError("no gradient entry '" + std::string(key) + "'");
  return it->second;
}

std::span<double> GradientBundle::at(std::string_view key) { return entries_[index_of(key)].values; }

std::span<const double> GradientBundle::at(std::string_view key) const { return entries_[index_of(key)].values; }

void GradientBundle::scale(double factor) {
  for (auto& e : entries_)
    for (auto& v : e.values) v *= factor;
}

double GradientBundle::max_abs() const {
  double m = 0.0;
  for (const auto& e : entries_)
    for (double v : e.values) m = std::max(m, std::abs(v));
  return m;
}

// ---------------------------------------------------------------------------

void activate(Activation kind, const Matrix& preact, Matrix& out) {
  out.reshape(preact.rows(), preact.cols());
  if (kind == Activation::identity) {
    std::copy(preact.values().begin(), preact.values().end(), out.values().begin());
    return;
  }
  simd::kernels().elu(preact.size(), preact.data(), out.data());
}

void activate_backward(Activation kind, const Matrix& preact, const Matrix& act, const Matrix& grad_in,
                       Matrix& grad_out) {
  grad_out.reshape(grad_in.rows(), grad_in.cols());
  if (kind == Activation::identity) {
    std::copy(grad_in.values().begin(), grad_in.values().end(), grad_out.values().begin());
    return;
  }
  simd::kernels().elu_backward(preact.size(), preact.data(), act.data(), grad_in.data(), grad_out.data());
}

namespace {

void dense_forward(const DenseLayer& layer, const Matrix& in, Matrix& out) {
  const std::size_t rows = in.rows();
  out.reshape(rows, layer.outputs());
  for (std::size_t r = 0; r < rows; ++r) std::copy(layer.bias.begin(), layer.bias.end(), out.row_ptr(r));
  if (rows == 0) return;
  simd::kernels().gemm(simd::Transpose::no, rows, layer.outputs(), layer.inputs(), in.data(), in.cols(),
                       layer.weight.data(), layer.weight.cols(), out.data(), out.cols(), true);
}

}  // namespace

Mlp::Mlp(std::vector<std::size_t> layer_sizes, Activation hidden) : sizes_(std::move(layer_sizes)), hidden_(hidden) {
  if (sizes_.size() < 2) throw ShapeError("an MLP needs at least input and output sizes");
  for (std::size_t l = 1; l < sizes_.size(); ++l)
    if (sizes_[l] == 0) throw ShapeError("MLP layer sizes must be positive");
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l)
    layers_.push_back({Matrix(sizes_[l], sizes_[l + 1]), std::vector<double>(sizes_[l + 1], 0.0)});
}

void Mlp::init_glorot(std::mt19937_64& rng) {
  for (auto& layer : layers_) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.inputs() + layer.outputs()));
    for (auto& w : layer.weight.values()) w = (2.0 * uniform_unit(rng) - 1.0) * limit;
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
  }
}

void Mlp::zero() {
  for (auto& layer : layers_) {
    layer.weight.fill(0.0);
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
  }
}

Matrix Mlp::forward(const Matrix& input, MlpCache* cache, std::size_t first_layer) const {
  if (first_layer >= layers_.size()) throw ShapeError("first_layer beyond the last MLP layer");
  if (input.cols() != layers_[first_layer].inputs())
    throw ShapeError("MLP input width " + std::to_string(input.cols()) + " does not match layer width " +
                     std::to_string(layers_[first_layer].inputs()));
  const Matrix* in = &input;
  if (cache) {
    cache->first_layer = first_layer;
    cache->inputs.assign(layers_.size(), Matrix());
    cache->preacts.assign(layers_.size(), Matrix());
    cache->inputs[first_layer] = input;
    in = &cache->inputs[first_layer];
  }
  Matrix current;
  Matrix z;
  for (std::size_t l = first_layer; l < layers_.size(); ++l) {
    dense_forward(layers_[l], *in, z);
    if (l + 1 == layers_.size()) {
      if (cache) cache->preacts[l] = z;
      return z;
    }
    Matrix act;
    activate(hidden_, z, act);
    if (cache) {
      cache->preacts[l] = std::move(z);
      cache->inputs[l + 1] = std::move(act);
      in = &cache->inputs[l + 1];
    } else {
      current = std::move(act);
      in = &current;
    }
  }
  return current;
}

Matrix Mlp::backward(const MlpCache& cache, const Matrix& upstream, GradientBundle& grads,
                     std::string_view prefix) const {
  const std::size_t last = layers_.size() - 1;
  if (cache.preacts.size() != layers_.size() || cache.preacts[last].rows() != upstream.rows() ||
      upstream.cols() != output_width())
    throw ShapeError("MLP backward: upstream gradient does not match the cached forward pass");
  const auto& k = simd::kernels();
  Matrix dz = upstream;
  Matrix dinput;
  for (std::size_t l = last + 1; l-- > cache.first_layer;) {
    const DenseLayer& layer = layers_[l];
    const Matrix& in = cache.inputs[l];
    const std::size_t rows = dz.rows();
    auto dw = grads.at(weight_key(prefix, l));
    auto db = grads.at(bias_key(prefix, l));
    if (rows > 0) {
      k.gemm(simd::Transpose::yes, layer.inputs(), layer.outputs(), rows, in.data(), in.cols(), dz.data(),
             dz.cols(), dw.data(), layer.outputs(), true);
      for (std::size_t r = 0; r < rows; ++r) k.axpy(layer.outputs(), 1.0, dz.row_ptr(r), db.data());
    }
    const Matrix wt = layer.weight.transposed();
    dinput.reshape(rows, layer.inputs());
    if (rows > 0)
      k.gemm(simd::Transpose::no, rows, layer.inputs(), layer.outputs(), dz.data(), dz.cols(), wt.data(),
             wt.cols(), dinput.data(), dinput.cols(), false);
    if (l == cache.first_layer) break;
    activate_backward(hidden_, cache.preacts[l - 1], cache.inputs[l], dinput, dz);
  }
  return dinput;
}

std::string Mlp::weight_key(std::string_view prefix, std::size_t layer) {
  return std::string(prefix) + ".l" + std::to_string(layer) + ".weight";
}

std::string Mlp::bias_key(std::string_view prefix, std::size_t layer) {
  return std::string(prefix) + ".l" + std::to_string(layer) + ".bias";
}

void Mlp::collect_parameters(std::string_view prefix, ParameterList& out) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    auto& layer = layers_[l];
    out.push_back({weight_key(prefix, l), {layer.inputs(), layer.outputs()}, layer.weight.values()});
    out.push_back({bias_key(prefix, l), {layer.outputs()}, layer.bias});
  }
}

void Mlp::add_gradient_entries(std::string_view prefix, GradientBundle& grads) const {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    grads.add(weight_key(prefix, l), {layers_[l].inputs(), layers_[l].outputs()});
    grads.add(bias_key(prefix, l), {layers_[l].outputs()});
  }
}

// ---------------------------------------------------------------------------

EmbeddingTable::EmbeddingTable(const FieldSchema& schema, std::size_t embed_dim) : dim_(embed_dim) {
  if (embed_dim < 1) throw ShapeError("embed_dim must be >= 1");
  for (const auto& f : schema.fields()) {
    tables_.emplace_back(f.vocabulary_size, embed_dim);
    names_.push_back(f.name);
  }
}

void EmbeddingTable::init_uniform(std::mt19937_64& rng, double scale) {
  for (auto& t : tables_)
    for (auto& v : t.values()) v = (2.0 * uniform_unit(rng) - 1.0) * scale;
}

void EmbeddingTable::zero() {
  for (auto& t : tables_) t.fill(0.0);
}

void EmbeddingTable::embed(std::span<const std::int32_t> features, std::span<double> out) const {
  if (features.size() != tables_.size() || out.size() != width())
    throw ShapeError("embedding lookup: feature count or output width mismatch");
  for (std::size_t f = 0; f < tables_.size(); ++f) {
    const auto id = features[f];
    if (id < 0 || static_cast<std::size_t>(id) >= tables_[f].rows())
      throw LookupError("embedding id " + std::to_string(id) + " out of range for field '" + names_[f] + "'");
    const auto row = tables_[f].row(static_cast<std::size_t>(id));
    std::copy(row.begin(), row.end(), out.begin() + static_cast<std::ptrdiff_t>(f * dim_));
  }
}

Matrix EmbeddingTable::embed_rows(std::span<const std::int32_t> features, std::size_t rows) const {
  if (features.size() != rows * tables_.size()) throw ShapeError("embedding lookup: feature block size mismatch");
  Matrix out(rows, width());
  for (std::size_t r = 0; r < rows; ++r) embed(features.subspan(r * tables_.size(), tables_.size()), out.row(r));
  return out;
}

void EmbeddingTable::backward(std::span<const std::int32_t> features, const Matrix& grad, GradientBundle& grads,
                              std::string_view prefix) const {
  const std::size_t fields = tables_.size();
  if (grad.cols() != width() || features.size() != grad.rows() * fields)
    throw ShapeError("embedding backward: gradient shape mismatch");
  for (std::size_t f = 0; f < fields; ++f) {
    auto g = grads.at(key(prefix, names_[f]));
    for (std::size_t r = 0; r < grad.rows(); ++r) {
      const auto id = static_cast<std::size_t>(features[r * fields + f]);
      const double* src = grad.row_ptr(r) + f * dim_;
      double* dst = g.data() + id * dim_;
      for (std::size_t d = 0; d < dim_; ++d) dst[d] += src[d];
    }
  }
}

std::string EmbeddingTable::key(std::string_view prefix, std::string_view field) {
  return std::string(prefix) + "." + std::string(field);
}

void EmbeddingTable::collect_parameters(std::string_view prefix, ParameterList& out) {
  for (std::size_t f = 0; f < tables_.size(); ++f)
    out.push_back({key(prefix, names_[f]), {tables_[f].rows(), dim_}, tables_[f].values()});
}

void EmbeddingTable::add_gradient_entries(std::string_view prefix, GradientBundle& grads) const {
  for (std::size_t f = 0; f < tables_.size(); ++f) grads.add(key(prefix, names_[f]), {tables_[f].rows(), dim_});
}

// ---------------------------------------------------------------------------

void adam_step(const ParameterList& params, const GradientBundle& grads, AdamState& state, double lr, double l2) {
  if (!(lr > 0.0)) throw OptimizerError("learning rate must be positive");
  if (!(l2 >= 0.0)) throw OptimizerError("l2 coefficient must be non-negative");
  for (const auto& p : params) {
    const auto g = grads.at(p.key);
    if (g.size() != p.values.size()) throw ShapeError("gradient for '" + p.key + "' has the wrong size");
    for (double v : g)
      if (!std::isfinite(v)) throw OptimizerError("non-finite gradient for parameter '" + p.key + "'");
  }
  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (const auto& p : params) {
    const auto g = grads.at(p.key);
    auto& m = state.first_moment[p.key];
    auto& v = state.second_moment[p.key];
    if (m.empty()) {
      m.assign(p.values.size(), 0.0);
      v.assign(p.values.size(), 0.0);
    }
    if (m.size() != p.values.size()) throw ShapeError("optimizer state for '" + p.key + "' has the wrong size");
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      const double gi = g[i] + l2 * p.values[i];
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p.values[i] -= lr * mhat / (std::sqrt(vhat) + c.epsilon);
    }
  }
}

}  // namespace umc::nn
