#include "umc/quadrature.hpp"

#include <cmath>
#include <numbers>

#include "umc/error.hpp"
#include "umc/simd/kernels.hpp"

namespace umc {

QuadratureRule clenshaw_curtis_rule(std::size_t num_nodes) {
  if (num_nodes < 2) throw ConfigError("Clenshaw-Curtis rule needs at least 2 nodes");
  const std::size_t n = num_nodes - 1;
  const double nd = static_cast<double>(n);
  QuadratureRule rule;
  rule.nodes_.resize(num_nodes);
  rule.weights_.resize(num_nodes);

  for (std::size_t j = 0; j <= n; ++j) {
    // Evaluate as a sine of the offset angle so the rule is symmetric to rounding.
    const double theta = std::numbers::pi * static_cast<double>(j) / nd;
    rule.nodes_[j] = std::sin(std::numbers::pi * (nd - 2.0 * static_cast<double>(j)) / (2.0 * nd));
    if (j == 0 || j == n) {
      rule.weights_[j] = n % 2 == 0 ? 1.0 / (nd * nd - 1.0) : 1.0 / (nd * nd);
      continue;
    }
    double v = 1.0;
    if (n % 2 == 0) {
      for (std::size_t k = 1; k < n / 2; ++k) {
        const double kd = static_cast<double>(k);
        v -= 2.0 * std::cos(2.0 * kd * theta) / (4.0 * kd * kd - 1.0);
      }
      v -= std::cos(nd * theta) / (nd * nd - 1.0);
    } else {
      for (std::size_t k = 1; k <= (n - 1) / 2; ++k) {
        const double kd = static_cast<double>(k);
        v -= 2.0 * std::cos(2.0 * kd * theta) / (4.0 * kd * kd - 1.0);
      }
    }
    rule.weights_[j] = 2.0 * v / nd;
  }
  // Mirror the weights so w_j == w_{n-j} exactly.
  for (std::size_t j = 0; j < num_nodes / 2; ++j) {
    const double w = 0.5 * (rule.weights_[j] + rule.weights_[n - j]);
    rule.weights_[j] = rule.weights_[n - j] = w;
  }
  return rule;
}

std::vector<double> QuadratureRule::mapped_nodes(double upper) const {
  std::vector<double> out(nodes_.size());
  mapped_nodes(upper, out);
  return out;
}

void QuadratureRule::mapped_nodes(double upper, std::span<double> out) const {
  if (out.size() != nodes_.size()) throw ShapeError("mapped node buffer has the wrong length");
  const double half = 0.5 * upper;
  for (std::size_t j = 0; j < nodes_.size(); ++j) out[j] = half * (nodes_[j] + 1.0);
}

double integrate_on_interval(const QuadratureRule& rule, std::span<const double> f_at_nodes, double upper) {
  if (f_at_nodes.size() != rule.size())
    throw ShapeError("integrand has " + std::to_string(f_at_nodes.size()) + " values for a " +
                     std::to_string(rule.size()) + "-node rule");
  const auto w = rule.weights();
  return 0.5 * upper * simd::kernels().dot(w.size(), w.data(), f_at_nodes.data());
}

}  // namespace umc
