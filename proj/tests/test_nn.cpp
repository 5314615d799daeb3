#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "umc/error.hpp"
#include "umc/nn.hpp"

using namespace umc;
using namespace umc::nn;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Matrix m(r, c);
  for (auto& v : m.values()) v = d(rng);
  return m;
}

double weighted_output(const Mlp& net, const Matrix& x, const Matrix& g) {
  const Matrix y = net.forward(x);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y.values()[i] * g.values()[i];
  return s;
}

}  // namespace

TEST_CASE("scalar activations") {
  CHECK(elu(2.0) == 2.0);
  CHECK(elu(0.0) == 0.0);
  CHECK(elu(-1.0) == doctest::Approx(std::exp(-1.0) - 1.0));
  CHECK(elu_derivative(3.0) == 1.0);
  CHECK(elu_derivative(-2.0) == doctest::Approx(std::exp(-2.0)));
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(sigmoid(-800.0) == 0.0);
  CHECK(sigmoid(-40.0) > 0.0);
  CHECK(logit(0.5) == 0.0);
  CHECK(logit(sigmoid(3.25)) == doctest::Approx(3.25).epsilon(1e-12));
  CHECK_THROWS_AS(logit(0.0), DomainError);
  CHECK_THROWS_AS(logit(1.0), DomainError);
  CHECK_THROWS_AS(logit(-0.1), DomainError);
  CHECK(apply_activation(ScalarActivation::sigmoid, 0.0) == 0.5);
  CHECK(apply_activation(ScalarActivation::logit, 0.5) == 0.0);
  CHECK(apply_activation(ScalarActivation::elu, -1.0) == doctest::Approx(std::exp(-1.0) - 1.0));
}

TEST_CASE("mlp backward matches central differences") {
  std::mt19937_64 rng(17);
  for (Activation act : {Activation::elu, Activation::identity}) {
    Mlp net({3, 5, 4, 2}, act);
    net.init_glorot(rng);
    for (auto& l : net.layers())
      for (auto& b : l.bias) b = 0.3 * std::uniform_real_distribution<double>(-1, 1)(rng);
    const Matrix x = random_matrix(6, 3, rng);
    const Matrix g = random_matrix(6, 2, rng);

    MlpCache cache;
    net.forward(x, &cache);
    GradientBundle grads;
    net.add_gradient_entries("net", grads);
    const Matrix dx = net.backward(cache, g, grads, "net");

    const double h = 1e-6;
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      auto& layer = net.layers()[l];
      const auto gw = grads.at(Mlp::weight_key("net", l));
      for (std::size_t i = 0; i < layer.weight.size(); ++i) {
        double& w = layer.weight.values()[i];
        const double saved = w;
        w = saved + h;
        const double up = weighted_output(net, x, g);
        w = saved - h;
        const double down = weighted_output(net, x, g);
        w = saved;
        CHECK(gw[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-6));
      }
      const auto gb = grads.at(Mlp::bias_key("net", l));
      for (std::size_t i = 0; i < layer.bias.size(); ++i) {
        const double saved = layer.bias[i];
        layer.bias[i] = saved + h;
        const double up = weighted_output(net, x, g);
        layer.bias[i] = saved - h;
        const double down = weighted_output(net, x, g);
        layer.bias[i] = saved;
        CHECK(gb[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-6));
      }
    }
    Matrix xp = x;
    for (std::size_t i = 0; i < xp.size(); ++i) {
      const double saved = xp.values()[i];
      xp.values()[i] = saved + h;
      const double up = weighted_output(net, xp, g);
      xp.values()[i] = saved - h;
      const double down = weighted_output(net, xp, g);
      xp.values()[i] = saved;
      CHECK(dx.values()[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-6));
    }
  }
}

TEST_CASE("mlp rejects mismatched widths") {
  Mlp net({3, 4, 1});
  CHECK_THROWS_AS(net.forward(Matrix(2, 5)), ShapeError);
  CHECK_THROWS_AS(Mlp({3}), ShapeError);
}

TEST_CASE("zeroed mlp outputs zero") {
  Mlp net({3, 4, 2});
  net.zero();
  std::mt19937_64 rng(1);
  const Matrix y = net.forward(random_matrix(5, 3, rng));
  for (double v : y.values()) CHECK(v == 0.0);
}

TEST_CASE("embedding lookup concatenates fields and scatter-adds gradients") {
  const FieldSchema schema({{"a", 3}, {"b", 2}});
  EmbeddingTable table(schema, 2);
  std::mt19937_64 rng(9);
  table.init_uniform(rng, 0.5);
  const std::vector<std::int32_t> ids{2, 1, 2, 0};  // two rows, same id 2 in field a
  const Matrix e = table.embed_rows(ids, 2);
  REQUIRE(e.cols() == 4);
  CHECK(e(0, 0) == table.tables()[0](2, 0));
  CHECK(e(0, 3) == table.tables()[1](1, 1));
  CHECK(e(1, 2) == table.tables()[1](0, 0));

  Matrix g(2, 4);
  for (std::size_t i = 0; i < g.size(); ++i) g.values()[i] = static_cast<double>(i + 1);
  GradientBundle grads;
  table.add_gradient_entries("embed", grads);
  table.backward(ids, g, grads, "embed");
  const auto ga = grads.at(EmbeddingTable::key("embed", "a"));
  // Rows 0 and 1 both used id 2 of field a: gradients add.
  CHECK(ga[4] == 1.0 + 5.0);
  CHECK(ga[5] == 2.0 + 6.0);
  CHECK(ga[0] == 0.0);
  const auto gb = grads.at(EmbeddingTable::key("embed", "b"));
  CHECK(gb[2] == 3.0);
  CHECK(gb[0] == 7.0);
}

TEST_CASE("embedding init stays within the requested scale") {
  EmbeddingTable table(FieldSchema({{"a", 50}}), 8);
  std::mt19937_64 rng(2);
  table.init_uniform(rng, 0.01);
  for (double v : table.tables()[0].values()) CHECK(std::abs(v) <= 0.01);
}

TEST_CASE("adam first step moves each parameter by lr against the gradient sign") {
  std::vector<double> w{1.0, -2.0, 0.5};
  ParameterList params{{"w", {3}, w}};
  GradientBundle grads = GradientBundle::zeros_like(params);
  auto g = grads.at("w");
  g[0] = 0.3;
  g[1] = -4.0;
  g[2] = 0.0;
  AdamState state;
  adam_step(params, grads, state, 0.01, 0.0);
  CHECK(w[0] == doctest::Approx(1.0 - 0.01 * 0.3 / (0.3 + 1e-8)));
  CHECK(w[1] == doctest::Approx(-2.0 + 0.01));
  CHECK(w[2] == 0.5);
  CHECK(state.step == 1);
}

TEST_CASE("adam two steps match the hand recurrence, with l2") {
  std::vector<double> w{2.0};
  ParameterList params{{"w", {1}, w}};
  GradientBundle grads = GradientBundle::zeros_like(params);
  AdamState state;
  const double lr = 0.1, l2 = 0.5;
  double m = 0.0, v = 0.0, ref = 2.0;
  for (int t = 1; t <= 2; ++t) {
    grads.at("w")[0] = 1.0 * t;
    adam_step(params, grads, state, lr, l2);
    const double gi = 1.0 * t + l2 * ref;
    m = 0.9 * m + 0.1 * gi;
    v = 0.999 * v + 0.001 * gi * gi;
    const double mh = m / (1 - std::pow(0.9, t));
    const double vh = v / (1 - std::pow(0.999, t));
    ref -= lr * mh / (std::sqrt(vh) + 1e-8);
    CHECK(w[0] == doctest::Approx(ref).epsilon(1e-14));
  }
}

TEST_CASE("adam refuses non-finite gradients before touching parameters") {
  std::vector<double> a{1.0}, b{2.0};
  ParameterList params{{"a", {1}, a}, {"b", {1}, b}};
  GradientBundle grads = GradientBundle::zeros_like(params);
  grads.at("a")[0] = 1.0;
  grads.at("b")[0] = std::numeric_limits<double>::quiet_NaN();
  AdamState state;
  try {
    adam_step(params, grads, state, 0.1, 0.0);
    FAIL("expected OptimizerError");
  } catch (const OptimizerError& e) {
    CHECK(std::string(e.what()).find("'b'") != std::string::npos);
  }
  CHECK(a[0] == 1.0);
  CHECK(state.step == 0);
}

TEST_CASE("gradient bundle bookkeeping") {
  GradientBundle g;
  g.add("x", {2, 2});
  CHECK(g.contains("x"));
  CHECK_FALSE(g.contains("y"));
  CHECK_THROWS_AS(g.add("x", {1}), ContractError);
  CHECK_THROWS_AS(g.at("y"), LookupError);
  g.at("x")[3] = -3.0;
  g.scale(2.0);
  CHECK(g.max_abs() == 6.0);
}

TEST_CASE("hand-set one-hidden-layer network") {
  Mlp net({2, 2, 1});
  auto& l0 = net.layers()[0];
  l0.weight(0, 0) = 1.0;
  l0.weight(1, 0) = -1.0;
  l0.weight(0, 1) = 0.5;
  l0.weight(1, 1) = 0.5;
  l0.bias = {0.0, 0.0};
  auto& l1 = net.layers()[1];
  l1.weight(0, 0) = 2.0;
  l1.weight(1, 0) = 3.0;
  l1.bias = {0.1};
  Matrix x(1, 2);
  x(0, 0) = 1.0;
  x(0, 1) = 2.0;
  // hidden = elu(1 - 2, 0.5 + 1) = (e^-1 - 1, 1.5)
  const double expect = 2.0 * (std::exp(-1.0) - 1.0) + 3.0 * 1.5 + 0.1;
  CHECK(net.forward(x)(0, 0) == doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("identity single layer passes non-negative input through") {
  Mlp net({3, 3});
  for (std::size_t i = 0; i < 3; ++i) net.layers()[0].weight(i, i) = 1.0;
  Matrix x(1, 3);
  x(0, 0) = 0.0;
  x(0, 1) = 2.0;
  x(0, 2) = 7.5;
  CHECK(net.forward(x) == x);
}

TEST_CASE("zero upstream gradient gives zero gradients") {
  std::mt19937_64 rng(3);
  Mlp net({3, 4, 2});
  net.init_glorot(rng);
  MlpCache cache;
  net.forward(random_matrix(5, 3, rng), &cache);
  GradientBundle grads;
  net.add_gradient_entries("n", grads);
  const Matrix dx = net.backward(cache, Matrix(5, 2), grads, "n");
  CHECK(grads.max_abs() == 0.0);
  for (double v : dx.values()) CHECK(v == 0.0);
}

TEST_CASE("embedding ids beyond the vocabulary are a lookup error") {
  EmbeddingTable table(FieldSchema({{"a", 3}}), 2);
  std::vector<double> out(2);
  CHECK_THROWS_AS(table.embed(std::vector<std::int32_t>{3}, out), LookupError);
  CHECK_THROWS_AS(table.embed(std::vector<std::int32_t>{-1}, out), LookupError);
}

TEST_CASE("adam with zero gradients is a fixed point") {
  std::vector<double> w{1.5, -0.25};
  ParameterList params{{"w", {2}, w}};
  const GradientBundle grads = GradientBundle::zeros_like(params);
  AdamState state;
  for (int i = 0; i < 5; ++i) adam_step(params, grads, state, 0.1, 0.0);
  CHECK(w[0] == 1.5);
  CHECK(w[1] == -0.25);
}

TEST_CASE("adam minimizes a quadratic") {
  std::vector<double> p{0.0};
  ParameterList params{{"p", {1}, p}};
  GradientBundle grads = GradientBundle::zeros_like(params);
  AdamState state;
  for (int i = 0; i < 200; ++i) {
    grads.at("p")[0] = 2.0 * (p[0] - 3.0);
    adam_step(params, grads, state, 0.1, 0.0);
  }
  CHECK(std::abs(p[0] - 3.0) < 0.1);
}
