#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "umc/dataset.hpp"

namespace umc {

struct IdentityMap {};

/// Bin i covers (upper_edges[i-1], upper_edges[i]]; the first bin extends
/// down to 0 and the last up to 1.
struct HistogramBins {
  std::vector<double> upper_edges;
  std::vector<double> values;
};

/// Step function over pooled blocks. Block i spans scores [lower[i], upper[i]].
struct IsotonicSteps {
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> values;
  std::vector<double> weights;
};

/// Piece-wise linear through (knot_x, knot_y), constant outside.
struct InterpolationKnots {
  std::vector<double> knot_x;
  std::vector<double> knot_y;
};

/// s' = sigmoid(a * logit(s) + b).
struct PlattParams {
  double a = 1.0;
  double b = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// A fitted univariate calibration map.
class ScoreMapping {
 public:
  using Data = std::variant<IdentityMap, HistogramBins, IsotonicSteps, InterpolationKnots, PlattParams>;

  ScoreMapping() = default;
  explicit ScoreMapping(Data data) : data_(std::move(data)) {}

  /// "none", "histbin", "isotonic", "sir" or "platt".
  std::string_view kind() const;
  const Data& data() const { return data_; }

  /// Defined for every s in [0,1]; output in [0,1].
  double apply(double s) const;
  std::vector<double> apply(std::span<const double> s) const;
  std::vector<double> apply(const Dataset& dataset) const;

  std::string serialize() const;
  static ScoreMapping parse(const std::string& text);

 private:
  Data data_;
};

/// Least-squares non-decreasing fit of y (in the given order) with weights,
/// by pool-adjacent-violators. Returns the fitted value per input.
std::vector<double> pool_adjacent_violators(std::span<const double> y, std::span<const double> w);

/// Equal-frequency bins over sorted scores mapped to their positive rate.
/// Bin boundaries never split tied scores. Throws ConfigError if num_bins > n.
ScoreMapping fit_histogram_binning(std::span<const double> scores, std::span<const double> labels,
                                   std::size_t num_bins);
ScoreMapping fit_histogram_binning(const Dataset& calib, std::size_t num_bins);

/// Tied scores are pre-averaged into one weighted point.
ScoreMapping fit_isotonic(std::span<const double> scores, std::span<const double> labels);
ScoreMapping fit_isotonic(const Dataset& calib);

/// Isotonic blocks become knots at their score-range midpoints.
ScoreMapping smooth_isotonic(const IsotonicSteps& steps);
ScoreMapping fit_sir(std::span<const double> scores, std::span<const double> labels);
ScoreMapping fit_sir(const Dataset& calib);

/// Newton's method on the mean BCE of sigmoid(a * logit(s) + b). Throws
/// FitError when only one class is present.
ScoreMapping fit_platt(std::span<const double> scores, std::span<const double> labels, std::size_t max_iters = 100,
                       double tol = 1e-10);
ScoreMapping fit_platt(const Dataset& calib, std::size_t max_iters = 100, double tol = 1e-10);

}  // namespace umc
