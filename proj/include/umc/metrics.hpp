#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "umc/dataset.hpp"

namespace umc {

/// (1/|D|) sum_k |sum_{s' in bin k} (s' - y)| over M equal-width bins on
/// [0,1]; bins are half-open except the top one.
double ece(std::span<const double> calibrated, std::span<const double> labels, std::size_t num_bins = 100);

struct FrceResult {
  double value = 0.0;
  std::size_t skipped_values = 0;  ///< field values with no positives
  std::size_t used_values = 0;
};

/// (1/|D|) sum_v |sum_{z=v} (s' - y)| / |sum_{z=v} y|. Field values without
/// positives are skipped and counted; throws MetricError if all are.
FrceResult frce(std::span<const double> calibrated, std::span<const double> labels,
                std::span<const std::int32_t> field_values);

/// Unweighted mean of frce over the given field columns.
double mfrce(std::span<const double> calibrated, std::span<const double> labels,
             const std::vector<std::vector<std::int32_t>>& field_columns);

/// Rank-sum AUC with ties counted one half. Throws MetricError unless both
/// classes are present.
double auc(std::span<const double> scores, std::span<const double> labels);

enum class GaucWeighting { samples, positives };

/// Weighted mean of per-group AUC over groups containing both classes.
double gauc(std::span<const double> scores, std::span<const double> labels, std::span<const std::uint32_t> groups,
            GaucWeighting weighting = GaucWeighting::samples);

struct MetricConfig {
  std::size_t ece_bins = 100;
  /// Field used for the single-field FRCE; the first field when unset.
  std::optional<std::string> frce_field;
  GaucWeighting gauc_weighting = GaucWeighting::samples;
};

struct MetricsReport {
  double ece = 0.0;
  double frce = 0.0;
  std::string frce_field;
  double mfrce = 0.0;
  double auc = 0.0;
  std::optional<double> gauc;        ///< present when the data has group ids
  std::vector<std::pair<std::string, double>> field_frce;
  std::size_t skipped_field_values = 0;
  std::optional<double> oracle_mae;  ///< present when the data has true_p
  std::size_t samples = 0;
};

/// Every metric for calibrated scores aligned with `dataset` rows.
MetricsReport compute_report(std::span<const double> calibrated, const Dataset& dataset,
                             const MetricConfig& config = {});

/// `key=value` lines, one metric per line, with round-trip precision.
std::string to_key_value(const MetricsReport& report);
/// Aligned two-column table for terminals.
std::string to_table(const MetricsReport& report);
/// Parses to_key_value output back into a report.
MetricsReport parse_key_value(const std::string& text);

}  // namespace umc
