#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "umc/checkpoint.hpp"
#include "umc/dataset.hpp"
#include "umc/metrics.hpp"
#include "umc/trainer.hpp"

namespace umc::cli {

enum class Method { umc, umc_no_rescale, umc_no_feature, umc_no_scloss, umc_mse, histbin, isotonic, sir, platt, none };

Method parse_method(std::string_view name);
std::string_view to_string(Method method);
/// True for the neural calibrator and its ablations.
bool is_neural(Method method);
std::vector<Method> parse_method_list(std::string_view comma_separated);

/// Flat run configuration shared by every command. Config-file keys are the
/// long flag names (`lr = 0.001`).
struct RunConfig {
  std::string data;
  std::string out;
  std::string schema;
  std::string model;
  std::string history;
  std::string column = "calibrated";

  std::string preset = "field-shift";
  std::size_t n = 100000;

  std::string method = "umc";
  std::string methods = "none,histbin,isotonic,sir,platt,umc";
  double split = 0.5;  ///< fit share of the compare split

  double lr = 1e-3;
  double l2 = 0.0;
  std::size_t batch = 16384;
  std::size_t epochs = 200;
  std::size_t groups = 10;
  double tau = 0.95;
  double lambda = 0.1;
  /// Overrides the method's loss variant when set.
  std::optional<std::string> variant;
  std::size_t patience = 5;
  double eval_fraction = 0.2;
  std::string stop_metric = "ece";

  std::size_t steps = 50;  ///< quadrature nodes T
  std::size_t embed_dim = 16;
  bool no_rescale = false;
  bool no_features = false;
  std::size_t bins = 50;  ///< histogram-binning bins

  std::uint64_t seed = 1;
  std::optional<std::string> frce_field;
  std::size_t ece_bins = 100;

  MetricConfig metric_config() const;
  CalibratorConfig calibrator_config(Method method) const;
  TrainConfig train_config(Method method) const;
};

struct FitOutcome {
  CalibrationModel model;
  std::optional<TrainHistory> history;  ///< neural methods only
};

/// Fits one method on `calib`. Neural methods hold out the tail of `calib`
/// for early stopping.
FitOutcome fit_method(Method method, const Dataset& calib, const RunConfig& config);

struct ComparisonRow {
  std::string method;
  MetricsReport report;
};

/// Chronological split of `data` into a fit part (first `split` share) and a
/// test part; every method is fitted on the first and scored on the second.
std::vector<ComparisonRow> run_comparison(const Dataset& data, const std::vector<Method>& methods,
                                          const RunConfig& config);

/// Tab-separated: method, AUC, GAUC, ECE, FRCE, MFRCE[, oracle_mae].
std::string comparison_table(const std::vector<ComparisonRow>& rows);

/// Entry point. `args` excludes the program name. Returns the exit code.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace umc::cli
