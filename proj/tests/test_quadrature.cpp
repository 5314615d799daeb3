#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "umc/error.hpp"
#include "umc/quadrature.hpp"

using namespace umc;

namespace {

double integrate_poly(const QuadratureRule& rule, const std::vector<double>& c, double b) {
  const auto t = rule.mapped_nodes(b);
  std::vector<double> f(t.size());
  for (std::size_t j = 0; j < t.size(); ++j) {
    double v = 0.0;
    for (std::size_t k = c.size(); k-- > 0;) v = v * t[j] + c[k];
    f[j] = v;
  }
  return integrate_on_interval(rule, f, b);
}

double analytic_poly(const std::vector<double>& c, double b) {
  double v = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) v += c[k] * std::pow(b, static_cast<double>(k + 1)) / (k + 1);
  return v;
}

}  // namespace

TEST_CASE("three-node rule is Simpson's rule") {
  const auto rule = clenshaw_curtis_rule(3);
  REQUIRE(rule.size() == 3);
  CHECK(rule.nodes()[0] == doctest::Approx(1.0));
  CHECK(rule.nodes()[1] == 0.0);
  CHECK(rule.nodes()[2] == doctest::Approx(-1.0));
  CHECK(rule.weights()[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(rule.weights()[1] == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
  CHECK(rule.weights()[2] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("weights sum to the interval length and are symmetric") {
  for (std::size_t n : {2, 3, 4, 7, 10, 50, 51, 200}) {
    const auto rule = clenshaw_curtis_rule(n);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      sum += rule.weights()[j];
      CHECK(rule.weights()[j] > 0.0);
      CHECK(rule.weights()[j] == rule.weights()[n - 1 - j]);
      CHECK(rule.nodes()[j] == -rule.nodes()[n - 1 - j]);
    }
    CHECK(sum == doctest::Approx(2.0).epsilon(1e-14));
  }
}

TEST_CASE("fewer than two nodes is a configuration error") {
  CHECK_THROWS_AS(clenshaw_curtis_rule(0), ConfigError);
  CHECK_THROWS_AS(clenshaw_curtis_rule(1), ConfigError);
}

TEST_CASE("constant integrand gives b, including negative and zero b") {
  const auto rule = clenshaw_curtis_rule(50);
  for (double b : {-7.5, -1.0, 0.0, 0.3, 10.0}) {
    std::vector<double> ones(rule.size(), 1.0);
    CHECK(integrate_on_interval(rule, ones, b) == doctest::Approx(b).epsilon(1e-14));
  }
}

TEST_CASE("polynomials up to degree T-1 are integrated exactly") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  for (std::size_t n : {5, 11, 20}) {
    const auto rule = clenshaw_curtis_rule(n);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> c(n);
      for (auto& v : c) v = coef(rng);
      const double b = 1.7 * coef(rng);
      CHECK(integrate_poly(rule, c, b) == doctest::Approx(analytic_poly(c, b)).epsilon(1e-12));
    }
  }
}

TEST_CASE("x squared on [0,2] is 8/3") {
  const auto rule = clenshaw_curtis_rule(50);
  CHECK(integrate_poly(rule, {0.0, 0.0, 1.0}, 2.0) == doctest::Approx(8.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("smooth non-polynomial integrand converges") {
  const auto rule = clenshaw_curtis_rule(50);
  const double b = 6.0;
  const auto t = rule.mapped_nodes(b);
  std::vector<double> f(t.size());
  for (std::size_t j = 0; j < t.size(); ++j) f[j] = 1.0 + std::tanh(t[j] - 2.0);
  const double exact = b + std::log(std::cosh(b - 2.0)) - std::log(std::cosh(-2.0));
  CHECK(std::abs(integrate_on_interval(rule, f, b) - exact) < 1e-10);
}

TEST_CASE("mapped nodes cover [0,b] in either orientation") {
  const auto rule = clenshaw_curtis_rule(9);
  const auto pos = rule.mapped_nodes(4.0);
  const auto neg = rule.mapped_nodes(-4.0);
  CHECK(pos.front() == doctest::Approx(4.0));
  CHECK(pos.back() == doctest::Approx(0.0));
  for (std::size_t j = 0; j < pos.size(); ++j) CHECK(neg[j] == -pos[j]);
}

TEST_CASE("two-node rule is the trapezoid") {
  const auto rule = clenshaw_curtis_rule(2);
  CHECK(rule.nodes()[0] == 1.0);
  CHECK(rule.nodes()[1] == -1.0);
  CHECK(rule.weights()[0] == 1.0);
  CHECK(rule.weights()[1] == 1.0);
}

TEST_CASE("x squared over [-1,1] with five nodes") {
  const auto rule = clenshaw_curtis_rule(5);
  double sum = 0.0;
  for (std::size_t j = 0; j < 5; ++j) sum += rule.weights()[j] * rule.nodes()[j] * rule.nodes()[j];
  CHECK(std::abs(sum - 2.0 / 3.0) < 1e-12);
}

TEST_CASE("interval integration examples") {
  const auto rule = clenshaw_curtis_rule(50);
  std::vector<double> ones(50, 1.0);
  CHECK(integrate_on_interval(rule, ones, 1.0) == 1.0);
  CHECK(integrate_on_interval(rule, ones, -1.0) == -1.0);
  CHECK(std::abs(integrate_on_interval(rule, rule.mapped_nodes(2.0), 2.0) - 2.0) < 1e-12);
  CHECK_THROWS_AS(integrate_on_interval(rule, std::vector<double>(49, 1.0), 1.0), ShapeError);
}
