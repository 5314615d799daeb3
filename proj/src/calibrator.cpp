#include "umc/calibrator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "umc/error.hpp"
#include "umc/simd/kernels.hpp"

namespace umc {
namespace {

constexpr std::size_t kChunkRows = 32;
constexpr std::size_t kPredictRows = 4096;

const std::string kEmbedPrefix = "embed";
const std::string kDerivativePrefix = "derivative";
const std::string kRescalePrefix = "rescale";
const std::string kBetaKey = "beta";

std::uint64_t next_version() {
  static std::atomic<std::uint64_t> counter{0};
  return ++counter;
}

void check_finite(std::span<const double> values, const char* stage) {
  for (double v : values)
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite value in calibrator stage: ") + stage);
}

// Derivative-network evaluation for a block of rows at K points per row.
// Layer 0 sees [t; x]; its x part is precomputed per row (`projection`), so
// each point only adds t times the first weight row.
struct PointBlock {
  Matrix z1;  // (rows*K) x H1
  Matrix a1;  // elu(z1) when the net has hidden layers
  nn::MlpCache tail;
  Matrix m;   // (rows*K) x 1, the MLP output
};

}  // namespace

UmnnCalibrator::UmnnCalibrator(FieldSchema schema, CalibratorConfig config, std::uint64_t seed)
    : schema_(std::move(schema)), config_(std::move(config)) {
  if (config_.embed_dim < 1) throw ConfigError("embed_dim must be >= 1");
  if (!(config_.clamp_eps > 0.0 && config_.clamp_eps < 0.5)) throw ConfigError("clamp_eps must lie in (0, 0.5)");
  rule_ = clenshaw_curtis_rule(config_.quadrature_nodes);
  embeddings_ = nn::EmbeddingTable(schema_, config_.embed_dim);
  const std::size_t width = embeddings_.width();

  std::vector<std::size_t> dsizes{1 + width};
  dsizes.insert(dsizes.end(), config_.derivative_hidden.begin(), config_.derivative_hidden.end());
  dsizes.push_back(1);
  derivative_net_ = nn::Mlp(dsizes, nn::Activation::elu);

  std::vector<std::size_t> rsizes{width};
  rsizes.insert(rsizes.end(), config_.rescale_hidden.begin(), config_.rescale_hidden.end());
  rsizes.push_back(2);
  rescale_net_ = nn::Mlp(rsizes, config_.rescale_activation);

  std::mt19937_64 rng(seed);
  embeddings_.init_uniform(rng, 0.01);
  derivative_net_.init_glorot(rng);
  rescale_net_.init_glorot(rng);
  derivative_net_.layers().back().weight.fill(0.0);
  rescale_net_.layers().back().weight.fill(0.0);
  beta_ = 0.0;
  version_ = next_version();
}

void UmnnCalibrator::bump_version() { version_ = next_version(); }

void UmnnCalibrator::zero_parameters() {
  embeddings_.zero();
  derivative_net_.zero();
  rescale_net_.zero();
  beta_ = 0.0;
  bump_version();
}

void UmnnCalibrator::randomize_parameters(std::mt19937_64& rng, double bias_scale, double embed_scale) {
  embeddings_.init_uniform(rng, embed_scale);
  derivative_net_.init_glorot(rng);
  rescale_net_.init_glorot(rng);
  auto jitter = [&](std::vector<double>& b) {
    for (auto& v : b) v = (2.0 * uniform_unit(rng) - 1.0) * bias_scale;
  };
  for (auto& l : derivative_net_.layers()) jitter(l.bias);
  for (auto& l : rescale_net_.layers()) jitter(l.bias);
  beta_ = (2.0 * uniform_unit(rng) - 1.0) * bias_scale;
  bump_version();
}

nn::ParameterList UmnnCalibrator::parameters() {
  bump_version();
  return collect_views();
}

std::vector<nn::ConstParamView> UmnnCalibrator::parameters() const {
  // collect_views only forms spans; nothing is written through them here.
  std::vector<nn::ConstParamView> out;
  for (auto& p : const_cast<UmnnCalibrator*>(this)->collect_views()) out.push_back({p.key, p.shape, p.values});
  return out;
}

nn::ParameterList UmnnCalibrator::collect_views() {
  nn::ParameterList out;
  embeddings_.collect_parameters(kEmbedPrefix, out);
  derivative_net_.collect_parameters(kDerivativePrefix, out);
  out.push_back({kBetaKey, {1}, std::span<double>(&beta_, 1)});
  rescale_net_.collect_parameters(kRescalePrefix, out);
  return out;
}

Matrix UmnnCalibrator::embed(std::span<const std::int32_t> features, std::size_t rows) const {
  if (features.size() != rows * schema_.size()) throw ShapeError("feature block does not match the schema");
  if (!config_.use_features) return Matrix(rows, embeddings_.width());
  return embeddings_.embed_rows(features, rows);
}

void UmnnCalibrator::check_score(double s) const {
  const double lo = config_.clamp_eps;
  const double hi = 1.0 - config_.clamp_eps;
  if (!(s >= lo && s <= hi))
    throw DomainError("score " + std::to_string(s) + " outside the clamp range [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]");
}

Matrix UmnnCalibrator::project_features(const Matrix& x_embed) const {
  const std::size_t width = embeddings_.width();
  if (x_embed.cols() != width) throw ShapeError("embedded feature width mismatch");
  const nn::DenseLayer& first = derivative_net_.layers().front();
  const std::size_t h1 = first.outputs();
  Matrix p(x_embed.rows(), h1);
  for (std::size_t r = 0; r < p.rows(); ++r) std::copy(first.bias.begin(), first.bias.end(), p.row_ptr(r));
  if (width > 0 && p.rows() > 0)
    simd::kernels().gemm(simd::Transpose::no, p.rows(), h1, width, x_embed.data(), width, first.weight.data() + h1,
                         h1, p.data(), h1, true);
  return p;
}

namespace {

void forward_points(const nn::Mlp& net, const Matrix& t_points, const Matrix& projection, std::size_t row_begin,
                    std::size_t row_end, PointBlock& block, bool keep_cache) {
  const auto& k = simd::kernels();
  const nn::DenseLayer& first = net.layers().front();
  const std::size_t h1 = first.outputs();
  const std::size_t points = t_points.cols();
  const std::size_t rows = (row_end - row_begin) * points;
  block.z1.reshape(rows, h1);
  const double* t_weight = first.weight.row_ptr(0);
  for (std::size_t r = row_begin; r < row_end; ++r) {
    const double* pr = projection.row_ptr(r);
    for (std::size_t j = 0; j < points; ++j) {
      double* z = block.z1.row_ptr((r - row_begin) * points + j);
      std::copy(pr, pr + h1, z);
      k.axpy(h1, t_points(r, j), t_weight, z);
    }
  }
  if (net.num_layers() == 1) {
    block.m = block.z1;
    return;
  }
  nn::activate(net.hidden_activation(), block.z1, block.a1);
  block.m = net.forward(block.a1, keep_cache ? &block.tail : nullptr, 1);
}

void h_from_output(const Matrix& m, std::span<double> h) {
  simd::kernels().elu(m.size(), m.data(), h.data());
  for (auto& v : h) v += 1.0;
}

}  // namespace

std::vector<double> UmnnCalibrator::derivative_net(std::span<const double> t, const Matrix& x_embed) const {
  if (t.size() != x_embed.rows()) throw ShapeError("derivative_net: t and x row counts differ");
  const Matrix projection = project_features(x_embed);
  Matrix t_points(t.size(), 1);
  std::copy(t.begin(), t.end(), t_points.data());
  std::vector<double> h(t.size());
  PointBlock block;
  for (std::size_t begin = 0; begin < t.size(); begin += kChunkRows) {
    const std::size_t end = std::min(t.size(), begin + kChunkRows);
    forward_points(derivative_net_, t_points, projection, begin, end, block, false);
    h_from_output(block.m, std::span<double>(h).subspan(begin, end - begin));
  }
  return h;
}

UmnnCalibrator::IntegralPass UmnnCalibrator::integrate(std::span<const double> s, const Matrix& x_embed) const {
  if (s.size() != x_embed.rows()) throw ShapeError("umnn_integral: score and feature row counts differ");
  const std::size_t rows = s.size();
  const std::size_t nodes = rule_.size();
  IntegralPass pass;
  pass.upper.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    check_score(s[r]);
    pass.upper[r] = nn::logit(s[r]);
  }
  Matrix t_points(rows, nodes);
  for (std::size_t r = 0; r < rows; ++r) rule_.mapped_nodes(pass.upper[r], t_points.row(r));

  const Matrix projection = project_features(x_embed);
  pass.h_values.resize(rows, nodes);
  PointBlock block;
  for (std::size_t begin = 0; begin < rows; begin += kChunkRows) {
    const std::size_t end = std::min(rows, begin + kChunkRows);
    forward_points(derivative_net_, t_points, projection, begin, end, block, false);
    h_from_output(block.m, std::span<double>(pass.h_values.row_ptr(begin), (end - begin) * nodes));
  }
  check_finite(pass.h_values.values(), "derivative network");

  pass.integral.resize(rows);
  for (std::size_t r = 0; r < rows; ++r)
    pass.integral[r] = integrate_on_interval(rule_, pass.h_values.row(r), pass.upper[r]) + beta_;
  check_finite(pass.integral, "integral");
  return pass;
}

std::vector<double> UmnnCalibrator::umnn_integral(std::span<const double> s, const Matrix& x_embed) const {
  return integrate(s, x_embed).integral;
}

CalibrationResult UmnnCalibrator::calibrate_batch(const Batch& batch) const {
  if (batch.num_fields != schema_.size()) throw ShapeError("batch does not conform to the calibrator schema");
  const std::size_t rows = batch.rows();
  CalibrationResult result;
  ForwardCache& c = result.cache;
  c.parameter_version = version_;
  c.rows = rows;
  c.num_fields = batch.num_fields;
  c.features = batch.features;
  c.embedded = embed(batch.features, rows);
  check_finite(c.embedded.values(), "embedding");

  IntegralPass pass = integrate(batch.scores, c.embedded);
  c.upper = std::move(pass.upper);
  c.h_values = std::move(pass.h_values);
  c.integral = std::move(pass.integral);

  c.log_scale.assign(rows, 0.0);
  c.shift.assign(rows, 0.0);
  if (config_.use_rescaling) {
    const Matrix head = rescale_net_.forward(c.embedded, &c.rescale_cache);
    for (std::size_t r = 0; r < rows; ++r) {
      c.log_scale[r] = head(r, 0);
      c.shift[r] = head(r, 1);
    }
    check_finite(head.values(), "rescaling");
  }
  c.pre_sigmoid.resize(rows);
  c.output.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    c.pre_sigmoid[r] =
        config_.use_rescaling ? std::exp(c.log_scale[r]) * c.integral[r] + c.shift[r] : c.integral[r];
    c.output[r] = nn::sigmoid(c.pre_sigmoid[r]);
  }
  check_finite(c.pre_sigmoid, "rescaling");
  result.scores = c.output;
  return result;
}

nn::GradientBundle UmnnCalibrator::zero_gradients() const {
  nn::GradientBundle grads;
  embeddings_.add_gradient_entries(kEmbedPrefix, grads);
  derivative_net_.add_gradient_entries(kDerivativePrefix, grads);
  grads.add(kBetaKey, {1});
  rescale_net_.add_gradient_entries(kRescalePrefix, grads);
  return grads;
}

nn::GradientBundle UmnnCalibrator::calibrate_backward(const ForwardCache& c, std::span<const double> grad_output) const {
  if (c.parameter_version != version_)
    throw ContractError("forward cache is stale: parameters changed since calibrate_batch");
  if (grad_output.size() != c.rows) throw ShapeError("calibrate_backward: gradient length mismatch");
  const auto& k = simd::kernels();
  const std::size_t rows = c.rows;
  const std::size_t nodes = rule_.size();
  const std::size_t width = embeddings_.width();
  nn::GradientBundle grads = zero_gradients();

  // Through the sigmoid and the rescaling head.
  std::vector<double> grad_integral(rows);
  Matrix grad_embedded(rows, width);
  if (config_.use_rescaling) {
    Matrix head_grad(rows, 2);
    for (std::size_t r = 0; r < rows; ++r) {
      const double g_pre = grad_output[r] * c.output[r] * (1.0 - c.output[r]);
      const double scale = std::exp(c.log_scale[r]);
      grad_integral[r] = g_pre * scale;
      head_grad(r, 0) = g_pre * scale * c.integral[r];
      head_grad(r, 1) = g_pre;
    }
    grad_embedded = rescale_net_.backward(c.rescale_cache, head_grad, grads, kRescalePrefix);
  } else {
    for (std::size_t r = 0; r < rows; ++r) grad_integral[r] = grad_output[r] * c.output[r] * (1.0 - c.output[r]);
  }

  double grad_beta = 0.0;
  for (double g : grad_integral) grad_beta += g;
  grads.at(kBetaKey)[0] = grad_beta;

  // Through the quadrature: dU/dtheta = (b/2) sum_j w_j dh(t_j)/dtheta at the
  // forward nodes, so the result is the exact gradient of the discretized U.
  const nn::DenseLayer& first = derivative_net_.layers().front();
  const std::size_t h1 = first.outputs();
  const auto weights = rule_.weights();
  auto g_w0 = grads.at(nn::Mlp::weight_key(kDerivativePrefix, 0));
  auto g_b0 = grads.at(nn::Mlp::bias_key(kDerivativePrefix, 0));
  const Matrix projection = project_features(c.embedded);
  Matrix t_points(rows, nodes);
  for (std::size_t r = 0; r < rows; ++r) rule_.mapped_nodes(c.upper[r], t_points.row(r));

  // Transposed x-part of the first weight matrix: H1 x width.
  Matrix w0x_t(h1, width);
  for (std::size_t i = 0; i < width; ++i)
    for (std::size_t o = 0; o < h1; ++o) w0x_t(o, i) = first.weight(1 + i, o);

  PointBlock block;
  Matrix grad_m, grad_z1, row_sums;
  for (std::size_t begin = 0; begin < rows; begin += kChunkRows) {
    const std::size_t end = std::min(rows, begin + kChunkRows);
    const std::size_t chunk = end - begin;
    forward_points(derivative_net_, t_points, projection, begin, end, block, true);

    grad_m.reshape(chunk * nodes, 1);
    for (std::size_t r = begin; r < end; ++r) {
      const double coeff = grad_integral[r] * 0.5 * c.upper[r];
      const double* h = c.h_values.row_ptr(r);
      for (std::size_t j = 0; j < nodes; ++j) {
        // d(1 + elu(m))/dm is 1 for m >= 0 and exp(m) = h otherwise.
        const double m = block.m((r - begin) * nodes + j, 0);
        grad_m((r - begin) * nodes + j, 0) = coeff * weights[j] * (m >= 0.0 ? 1.0 : h[j]);
      }
    }

    if (derivative_net_.num_layers() == 1) {
      grad_z1 = grad_m;
    } else {
      const Matrix grad_a1 = derivative_net_.backward(block.tail, grad_m, grads, kDerivativePrefix);
      nn::activate_backward(derivative_net_.hidden_activation(), block.z1, block.a1, grad_a1, grad_z1);
    }

    row_sums.resize(chunk, h1);
    for (std::size_t r = 0; r < chunk; ++r) {
      double* sum = row_sums.row_ptr(r);
      for (std::size_t j = 0; j < nodes; ++j) {
        const double* gz = grad_z1.row_ptr(r * nodes + j);
        k.axpy(h1, 1.0, gz, sum);
        k.axpy(h1, t_points(begin + r, j), gz, g_w0.data());
      }
      k.axpy(h1, 1.0, sum, g_b0.data());
    }
    if (width > 0) {
      k.gemm(simd::Transpose::yes, width, h1, chunk, c.embedded.row_ptr(begin), width, row_sums.data(), h1,
             g_w0.data() + h1, h1, true);
      k.gemm(simd::Transpose::no, chunk, width, h1, row_sums.data(), h1, w0x_t.data(), width,
             grad_embedded.row_ptr(begin), width, true);
    }
  }

  if (config_.use_features && width > 0) embeddings_.backward(c.features, grad_embedded, grads, kEmbedPrefix);
  return grads;
}

std::vector<double> UmnnCalibrator::score_derivative(const Batch& batch) const {
  const CalibrationResult fwd = calibrate_batch(batch);
  const ForwardCache& c = fwd.cache;
  const std::vector<double> h = derivative_net(c.upper, c.embedded);
  std::vector<double> out(c.rows);
  for (std::size_t r = 0; r < c.rows; ++r) {
    const double s = batch.scores[r];
    const double du_ds = h[r] / (s * (1.0 - s));
    const double scale = config_.use_rescaling ? std::exp(c.log_scale[r]) : 1.0;
    out[r] = c.output[r] * (1.0 - c.output[r]) * scale * du_ds;
  }
  return out;
}

std::vector<double> UmnnCalibrator::predict(const Dataset& dataset) const {
  std::vector<double> out;
  out.reserve(dataset.size());
  for (std::size_t begin = 0; begin < dataset.size(); begin += kPredictRows) {
    const Batch batch = make_batch(dataset, begin, std::min(dataset.size(), begin + kPredictRows));
    const auto result = calibrate_batch(batch);
    out.insert(out.end(), result.scores.begin(), result.scores.end());
  }
  return out;
}

}  // namespace umc
