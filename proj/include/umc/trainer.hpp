#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "umc/baselines.hpp"
#include "umc/calibrator.hpp"
#include "umc/dataset.hpp"
#include "umc/losses.hpp"
#include "umc/metrics.hpp"

namespace umc {

enum class StopMetric { ece, mfrce, logloss };

StopMetric parse_stop_metric(std::string_view name);
std::string_view to_string(StopMetric metric);

struct TrainConfig {
  double learning_rate = 1e-3;
  double l2 = 0.0;
  std::size_t batch_size = 16384;
  std::size_t max_epochs = 200;
  std::size_t num_groups = 10;  ///< N
  double decay = 0.95;          ///< tau
  double loss_weight = 0.1;     ///< lambda
  LossVariant variant = LossVariant::scloss;
  std::uint64_t seed = 1;
  std::size_t early_stop_patience = 5;
  StopMetric early_stop_metric = StopMetric::ece;
  /// Zero the EMA statistics at the start of every epoch.
  bool reset_ema_each_epoch = true;
  bool ema_bias_correction = false;
  /// Tail of the calibration set held out for early stopping when no
  /// evaluation set is supplied.
  double eval_fraction = 0.2;
  MetricConfig metrics;

  LossConfig loss_config() const;
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  ///< 1-based
  std::size_t batches = 0;
  double total = 0.0;     ///< mean over batches
  double bce = 0.0;
  double auxiliary = 0.0;
  double eval_ece = 0.0;
  double eval_mfrce = 0.0;
  double eval_logloss = 0.0;
  double stop_value = 0.0;  ///< the early-stopping metric
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  ///< 0 when no epoch ran

  /// Comma-separated table with a header row, full precision.
  std::string to_text() const;
  friend bool operator==(const TrainHistory&, const TrainHistory&) = default;
};

inline bool operator==(const EpochRecord& a, const EpochRecord& b) {
  return a.epoch == b.epoch && a.batches == b.batches && a.total == b.total && a.bce == b.bce &&
         a.auxiliary == b.auxiliary && a.eval_ece == b.eval_ece && a.eval_mfrce == b.eval_mfrce &&
         a.eval_logloss == b.eval_logloss && a.stop_value == b.stop_value;
}

struct TrainResult {
  UmnnCalibrator calibrator;
  TrainHistory history;
};

/// Per epoch: reset the EMA state, then for every shuffled batch run the
/// forward pass, fold the batch into the EMA, take BCE + lambda * aux, and
/// apply one Adam step. The parameters with the best early-stopping metric
/// are returned. Stops at max_epochs or after `patience` epochs without
/// improvement.
TrainResult train(UmnnCalibrator calibrator, const Dataset& calib_set, const Dataset* eval_set,
                  const TrainConfig& config);

/// Gradients of the configured total loss on one batch, as train would use
/// them. `ema` is advanced exactly as in training.
nn::GradientBundle batch_gradients(const UmnnCalibrator& calibrator, const Batch& batch, const TrainConfig& config,
                                   EmaState& ema, TotalLoss* loss_out = nullptr);

MetricsReport evaluate_model(const UmnnCalibrator& calibrator, const Dataset& dataset,
                             const MetricConfig& config = {});
MetricsReport evaluate_model(const ScoreMapping& mapping, const Dataset& dataset, const MetricConfig& config = {});

/// Hyper-parameter grid. Empty axes keep the base value.
struct SearchGrid {
  std::vector<double> learning_rates;
  std::vector<double> l2s;
  std::vector<std::size_t> num_groups;
  std::vector<double> decays;
  std::vector<double> loss_weights;
};

struct SearchOutcome {
  TrainConfig config;
  double best_stop_value = 0.0;
};

/// Trains one fresh calibrator per grid point and returns the outcomes in
/// grid order (learning rate outermost).
std::vector<SearchOutcome> grid_search(const std::function<UmnnCalibrator()>& make_calibrator,
                                       const Dataset& calib_set, const Dataset* eval_set, const TrainConfig& base,
                                       const SearchGrid& grid);

}  // namespace umc
