#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace umc {

struct LossValue {
  double loss = 0.0;
  std::vector<double> grad;  ///< d loss / d s' per row
};

/// Mean binary cross-entropy. Throws DomainError if any s' is 0 or 1.
LossValue bce_loss(std::span<const double> calibrated, std::span<const double> labels);

/// Mean squared error between s' and the binary label.
LossValue mse_loss(std::span<const double> calibrated, std::span<const double> labels);

/// Equal-width bin of each s' in [0,1]: floor(s' * N), with s' = 1 folded
/// into the top bin. Indices are 0-based (0..N-1).
std::vector<std::size_t> assign_groups(std::span<const double> calibrated, std::size_t num_groups);

/// Smoothed per-group label and score averages.
class EmaState {
 public:
  EmaState() = default;
  EmaState(std::size_t num_groups, double decay, bool bias_correction = false);

  std::size_t num_groups() const { return label_avg_.size(); }
  double decay() const { return decay_; }
  bool bias_correction() const { return bias_correction_; }

  /// Smoothed averages, bias-corrected when enabled.
  double label_average(std::size_t k) const;
  double score_average(std::size_t k) const;
  bool seen(std::size_t k) const { return updates_[k] > 0; }
  std::uint64_t updates(std::size_t k) const { return updates_[k]; }

  /// Multiplier of a row's s' inside score_average(k) times |G_k|, i.e. the
  /// (1 - tau) factor, divided by the bias-correction term when enabled.
  double current_batch_weight(std::size_t k) const;

  /// Back to the all-zero state.
  void reset();

  /// Applies one batch: non-empty groups move toward their batch means,
  /// empty groups are left untouched.
  void update(std::span<const std::size_t> groups, std::span<const double> labels,
              std::span<const double> calibrated);

  /// Raw (uncorrected) storage, for tests and serialization.
  std::span<const double> raw_label_averages() const { return label_avg_; }
  std::span<const double> raw_score_averages() const { return score_avg_; }
  void set_raw(std::size_t k, double label_avg, double score_avg, std::uint64_t updates);

 private:
  double decay_ = 0.0;
  bool bias_correction_ = false;
  std::vector<double> label_avg_;
  std::vector<double> score_avg_;
  std::vector<std::uint64_t> updates_;
};

/// Smooth calibration loss on a batch whose statistics were already folded
/// into `state`: (1/|B|) sum_k |G_k| (ybar_k - sbar'_k)^2 over non-empty
/// groups. Gradients flow only through the current batch's contribution to
/// sbar'_k; labels, the history and group membership are constants.
LossValue sc_loss(std::span<const std::size_t> groups, std::span<const double> labels,
                  std::span<const double> calibrated, const EmaState& state);

enum class LossVariant { scloss, mse, none };

LossVariant parse_loss_variant(std::string_view name);
std::string_view to_string(LossVariant variant);

struct LossConfig {
  double weight = 0.1;  ///< lambda
  std::size_t num_groups = 10;
  double decay = 0.95;  ///< tau
  LossVariant variant = LossVariant::scloss;
  bool ema_bias_correction = false;

  void validate() const;
};

struct TotalLoss {
  double total = 0.0;
  double bce = 0.0;
  double auxiliary = 0.0;  ///< SCLoss or MSE term before weighting
  std::vector<double> grad;
};

/// BCE + lambda * (SCLoss | MSE | nothing). For the scloss variant, `state`
/// is updated with this batch before the loss is taken. `frozen_groups`
/// overrides the group assignment (finite-difference checks).
TotalLoss total_loss(const LossConfig& config, std::span<const double> calibrated, std::span<const double> labels,
                     EmaState& state, std::optional<std::span<const std::size_t>> frozen_groups = std::nullopt);

}  // namespace umc
