#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace umc {

/// Clenshaw-Curtis rule on [-1, 1] at the Chebyshev extrema
/// x_j = cos(j*pi/(T-1)), j = 0..T-1. Exact for polynomials of degree <= T-1.
class QuadratureRule {
 public:
  QuadratureRule() = default;

  std::size_t size() const { return nodes_.size(); }
  std::span<const double> nodes() const { return nodes_; }
  std::span<const double> weights() const { return weights_; }

  /// Points t_j = (b/2)(x_j + 1) covering [0, b] (reversed orientation when b < 0).
  std::vector<double> mapped_nodes(double upper) const;
  void mapped_nodes(double upper, std::span<double> out) const;

 private:
  friend QuadratureRule clenshaw_curtis_rule(std::size_t);
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

/// Throws ConfigError for T < 2.
QuadratureRule clenshaw_curtis_rule(std::size_t num_nodes);

/// (b/2) * sum_j w_j f(t_j): the integral of f over [0, b] given f at the
/// mapped nodes. Negative b yields the signed integral.
double integrate_on_interval(const QuadratureRule& rule, std::span<const double> f_at_nodes, double upper);

}  // namespace umc
