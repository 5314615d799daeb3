#include "umc/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "umc/error.hpp"

namespace umc {

LossValue bce_loss(std::span<const double> calibrated, std::span<const double> labels) {
  if (calibrated.size() != labels.size()) throw ShapeError("bce_loss: length mismatch");
  if (calibrated.empty()) throw ShapeError("bce_loss: empty batch");
  const double n = static_cast<double>(calibrated.size());
  LossValue out;
  out.grad.resize(calibrated.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < calibrated.size(); ++i) {
    const double p = calibrated[i];
    const double y = labels[i];
    if (!(p > 0.0 && p < 1.0)) throw DomainError("bce_loss: prediction must lie strictly inside (0,1)");
    sum -= y * std::log(p) + (1.0 - y) * std::log1p(-p);
    out.grad[i] = (p - y) / (p * (1.0 - p)) / n;
  }
  out.loss = sum / n;
  return out;
}

LossValue mse_loss(std::span<const double> calibrated, std::span<const double> labels) {
  if (calibrated.size() != labels.size()) throw ShapeError("mse_loss: length mismatch");
  if (calibrated.empty()) throw ShapeError("mse_loss: empty batch");
  const double n = static_cast<double>(calibrated.size());
  LossValue out;
  out.grad.resize(calibrated.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < calibrated.size(); ++i) {
    const double d = calibrated[i] - labels[i];
    sum += d * d;
    out.grad[i] = 2.0 * d / n;
  }
  out.loss = sum / n;
  return out;
}

std::vector<std::size_t> assign_groups(std::span<const double> calibrated, std::size_t num_groups) {
  if (num_groups < 1) throw ConfigError("number of groups must be >= 1");
  std::vector<std::size_t> out(calibrated.size());
  const double n = static_cast<double>(num_groups);
  for (std::size_t i = 0; i < calibrated.size(); ++i) {
    const double v = std::clamp(calibrated[i], 0.0, 1.0);
    out[i] = std::min(static_cast<std::size_t>(std::floor(v * n)), num_groups - 1);
  }
  return out;
}

EmaState::EmaState(std::size_t num_groups, double decay, bool bias_correction)
    : decay_(decay),
      bias_correction_(bias_correction),
      label_avg_(num_groups, 0.0),
      score_avg_(num_groups, 0.0),
      updates_(num_groups, 0) {
  if (num_groups < 1) throw ConfigError("EMA needs at least one group");
  if (!(decay >= 0.0 && decay <= 1.0)) throw ConfigError("EMA decay must lie in [0,1]");
}

namespace {

double correction(double decay, std::uint64_t updates) {
  return 1.0 - std::pow(decay, static_cast<double>(updates));
}

}  // namespace

double EmaState::label_average(std::size_t k) const {
  if (bias_correction_ && updates_[k] > 0) return label_avg_[k] / correction(decay_, updates_[k]);
  return label_avg_[k];
}

double EmaState::score_average(std::size_t k) const {
  if (bias_correction_ && updates_[k] > 0) return score_avg_[k] / correction(decay_, updates_[k]);
  return score_avg_[k];
}

double EmaState::current_batch_weight(std::size_t k) const {
  const double w = 1.0 - decay_;
  if (bias_correction_ && updates_[k] > 0) return w / correction(decay_, updates_[k]);
  return w;
}

void EmaState::reset() {
  std::fill(label_avg_.begin(), label_avg_.end(), 0.0);
  std::fill(score_avg_.begin(), score_avg_.end(), 0.0);
  std::fill(updates_.begin(), updates_.end(), 0);
}

void EmaState::update(std::span<const std::size_t> groups, std::span<const double> labels,
                      std::span<const double> calibrated) {
  if (groups.size() != labels.size() || groups.size() != calibrated.size())
    throw ShapeError("ema_update: length mismatch");
  const std::size_t n = num_groups();
  std::vector<double> label_sum(n, 0.0), score_sum(n, 0.0);
  std::vector<std::size_t> count(n, 0);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const std::size_t k = groups[i];
    if (k >= n) throw ShapeError("ema_update: group index out of range");
    label_sum[k] += labels[i];
    score_sum[k] += calibrated[i];
    ++count[k];
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (count[k] == 0) continue;
    const double c = static_cast<double>(count[k]);
    label_avg_[k] = decay_ * label_avg_[k] + (1.0 - decay_) * (label_sum[k] / c);
    score_avg_[k] = decay_ * score_avg_[k] + (1.0 - decay_) * (score_sum[k] / c);
    ++updates_[k];
  }
}

void EmaState::set_raw(std::size_t k, double label_avg, double score_avg, std::uint64_t updates) {
  label_avg_.at(k) = label_avg;
  score_avg_.at(k) = score_avg;
  updates_.at(k) = updates;
}

LossValue sc_loss(std::span<const std::size_t> groups, std::span<const double> labels,
                  std::span<const double> calibrated, const EmaState& state) {
  if (groups.size() != labels.size() || groups.size() != calibrated.size())
    throw ShapeError("sc_loss: length mismatch");
  if (groups.empty()) throw ShapeError("sc_loss: empty batch");
  const std::size_t n = state.num_groups();
  std::vector<std::size_t> count(n, 0);
  for (std::size_t k : groups) {
    if (k >= n) throw ShapeError("sc_loss: group index out of range");
    ++count[k];
  }
  const double batch = static_cast<double>(groups.size());
  LossValue out;
  double sum = 0.0;
  std::vector<double> row_grad(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    if (count[k] == 0) continue;
    const double gap = state.label_average(k) - state.score_average(k);
    sum += static_cast<double>(count[k]) * gap * gap;
    row_grad[k] = -2.0 * gap * state.current_batch_weight(k) / batch;
  }
  out.loss = sum / batch;
  out.grad.resize(groups.size());
  for (std::size_t i = 0; i < groups.size(); ++i) out.grad[i] = row_grad[groups[i]];
  return out;
}

LossVariant parse_loss_variant(std::string_view name) {
  if (name == "scloss") return LossVariant::scloss;
  if (name == "mse") return LossVariant::mse;
  if (name == "none") return LossVariant::none;
  throw ConfigError("unknown loss variant '" + std::string(name) + "' (expected scloss, mse or none)");
}

std::string_view to_string(LossVariant variant) {
  switch (variant) {
    case LossVariant::scloss: return "scloss";
    case LossVariant::mse: return "mse";
    case LossVariant::none: return "none";
  }
  return "unknown";
}

void LossConfig::validate() const {
  if (!(weight >= 0.0) || !std::isfinite(weight)) throw ConfigError("loss weight lambda must be >= 0");
  if (num_groups < 1) throw ConfigError("number of groups N must be >= 1");
  if (!(decay >= 0.0 && decay <= 1.0)) throw ConfigError("decay tau must lie in [0,1]");
}

TotalLoss total_loss(const LossConfig& config, std::span<const double> calibrated, std::span<const double> labels,
                     EmaState& state, std::optional<std::span<const std::size_t>> frozen_groups) {
  config.validate();
  if (config.variant == LossVariant::scloss && state.num_groups() != config.num_groups)
    throw ConfigError("EMA state group count does not match the loss configuration");
  const LossValue bce = bce_loss(calibrated, labels);
  TotalLoss out;
  out.bce = bce.loss;
  out.grad = bce.grad;
  switch (config.variant) {
    case LossVariant::none:
      break;
    case LossVariant::mse: {
      const LossValue mse = mse_loss(calibrated, labels);
      out.auxiliary = mse.loss;
      for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad[i] += config.weight * mse.grad[i];
      break;
    }
    case LossVariant::scloss: {
      std::vector<std::size_t> assigned;
      std::span<const std::size_t> groups;
      if (frozen_groups) {
        groups = *frozen_groups;
      } else {
        assigned = assign_groups(calibrated, state.num_groups());
        groups = assigned;
      }
      state.update(groups, labels, calibrated);
      const LossValue sc = sc_loss(groups, labels, calibrated, state);
      out.auxiliary = sc.loss;
      for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad[i] += config.weight * sc.grad[i];
      break;
    }
  }
  out.total = out.bce + config.weight * out.auxiliary;
  if (config.variant == LossVariant::none) out.total = out.bce;
  return out;
}

}  // namespace umc
