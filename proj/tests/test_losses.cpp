#include <cmath>
#include <random>

#include "doctest.h"
#include "support/oracles.hpp"
#include "umc/error.hpp"
#include "umc/losses.hpp"
#include "umc/trainer.hpp"

using namespace umc;

TEST_CASE("bce on the symmetric case is ln 2") {
  const auto r = bce_loss(std::vector<double>{0.5, 0.5}, std::vector<double>{0.0, 1.0});
  CHECK(r.loss == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(r.grad[0] == doctest::Approx(1.0));
  CHECK(r.grad[1] == doctest::Approx(-1.0));
}

TEST_CASE("bce goes to zero as predictions approach labels") {
  const auto r = bce_loss(std::vector<double>{1e-12, 1 - 1e-12}, std::vector<double>{0.0, 1.0});
  CHECK(r.loss < 1e-11);
  CHECK_THROWS_AS(bce_loss(std::vector<double>{0.0}, std::vector<double>{0.0}), DomainError);
  CHECK_THROWS_AS(bce_loss(std::vector<double>{1.0}, std::vector<double>{1.0}), DomainError);
}

TEST_CASE("bce and mse gradients match central differences") {
  std::vector<double> s{0.1, 0.45, 0.8, 0.66}, y{0.0, 1.0, 1.0, 0.0};
  const auto b = bce_loss(s, y);
  const auto m = mse_loss(s, y);
  const double h = 1e-7;
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto up = s, down = s;
    up[i] += h;
    down[i] -= h;
    CHECK(b.grad[i] == doctest::Approx((bce_loss(up, y).loss - bce_loss(down, y).loss) / (2 * h)).epsilon(1e-6));
    CHECK(m.grad[i] == doctest::Approx((mse_loss(up, y).loss - mse_loss(down, y).loss) / (2 * h)).epsilon(1e-6));
  }
  CHECK(m.loss == doctest::Approx((0.01 + 0.3025 + 0.04 + 0.4356) / 4));
}

TEST_CASE("group assignment uses half-open bins with the top edge folded") {
  CHECK(assign_groups(std::vector<double>{0.05}, 10)[0] == 0);
  CHECK(assign_groups(std::vector<double>{1.0}, 10)[0] == 9);
  CHECK(assign_groups(std::vector<double>{0.0}, 10)[0] == 0);
  const auto g = assign_groups(std::vector<double>{0.1, 0.49, 0.5, 0.9}, 2);
  CHECK(g == std::vector<std::size_t>{0, 0, 1, 1});
}

TEST_CASE("ema moves toward the batch mean and skips empty groups") {
  EmaState st(2, 0.5);
  st.set_raw(0, 0.4, 0.3, 1);
  st.set_raw(1, 0.9, 0.7, 1);
  st.update(std::vector<std::size_t>{0, 0}, std::vector<double>{1.0, 0.6}, std::vector<double>{0.5, 0.7});
  CHECK(st.label_average(0) == doctest::Approx(0.6));
  CHECK(st.score_average(0) == doctest::Approx(0.45));
  CHECK(st.label_average(1) == 0.9);
  CHECK(st.score_average(1) == 0.7);
  CHECK(st.updates(0) == 2);
  CHECK(st.updates(1) == 1);
}

TEST_CASE("zero decay keeps only the current batch") {
  EmaState st(1, 0.0);
  st.set_raw(0, 0.123, 0.456, 7);
  st.update(std::vector<std::size_t>{0, 0, 0}, std::vector<double>{1.0, 0.0, 1.0}, std::vector<double>{0.2, 0.3, 0.4});
  CHECK(st.label_average(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(st.score_average(0) == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("first update marks a group as seen; reset clears everything") {
  EmaState st(3, 0.9);
  CHECK_FALSE(st.seen(1));
  st.update(std::vector<std::size_t>{1}, std::vector<double>{1.0}, std::vector<double>{0.5});
  CHECK(st.seen(1));
  CHECK_FALSE(st.seen(0));
  st.reset();
  CHECK_FALSE(st.seen(1));
  CHECK(st.raw_label_averages()[1] == 0.0);
}

TEST_CASE("bias correction divides by one minus decay to the update count") {
  EmaState st(1, 0.9, true);
  st.update(std::vector<std::size_t>{0}, std::vector<double>{1.0}, std::vector<double>{0.4});
  CHECK(st.label_average(0) == doctest::Approx(1.0));
  CHECK(st.score_average(0) == doctest::Approx(0.4));
  CHECK(st.current_batch_weight(0) == doctest::Approx(1.0));
}

TEST_CASE("scloss hand example with zero decay") {
  const std::vector<double> s{0.2, 0.4, 0.7, 0.9}, y{0.0, 1.0, 1.0, 1.0};
  const auto groups = assign_groups(s, 2);
  EmaState st(2, 0.0);
  st.update(groups, y, s);
  const auto r = sc_loss(groups, y, s, st);
  CHECK(r.loss == doctest::Approx(0.04).epsilon(1e-14));
  // 2(sbar - ybar)(1 - tau)/|B| per row.
  CHECK(r.grad[0] == doctest::Approx(2 * (0.3 - 0.5) / 4));
  CHECK(r.grad[3] == doctest::Approx(2 * (0.8 - 1.0) / 4));
}

TEST_CASE("scloss is exactly zero at the ideal state and positive after a perturbation") {
  const std::vector<double> y{0, 1, 0, 0, 1, 1, 0, 1};
  std::vector<double> s{0.2, 0.3, 0.25, 0.25, 0.7, 0.8, 0.75, 0.75};
  const auto groups = assign_groups(s, 2);
  REQUIRE(groups == std::vector<std::size_t>{0, 0, 0, 0, 1, 1, 1, 1});
  EmaState st(2, 0.0);
  st.update(groups, y, s);
  CHECK(sc_loss(groups, y, s, st).loss == 0.0);

  s[0] += 0.1;  // group 0 mean 0.275 against label mean 0.25
  st.reset();
  st.update(groups, y, s);
  CHECK(sc_loss(groups, y, s, st).loss == doctest::Approx(4 * 0.025 * 0.025 / 8).epsilon(1e-12));
}

TEST_CASE("total loss combines the terms per variant") {
  const std::vector<double> s{0.2, 0.4, 0.7, 0.9}, y{0.0, 1.0, 1.0, 1.0};
  const double bce = bce_loss(s, y).loss;
  LossConfig cfg;
  cfg.num_groups = 2;
  cfg.decay = 0.0;

  cfg.weight = 0.0;
  EmaState st(2, 0.0);
  CHECK(total_loss(cfg, s, y, st).total == bce);

  cfg.weight = 1.0;
  st.reset();
  const auto t = total_loss(cfg, s, y, st);
  CHECK(t.auxiliary == doctest::Approx(0.04));
  CHECK(t.total == doctest::Approx(bce + 0.04));

  cfg.variant = LossVariant::mse;
  cfg.weight = 0.5;
  const auto m = total_loss(cfg, s, y, st);
  CHECK(m.total == doctest::Approx(bce + 0.5 * mse_loss(s, y).loss));

  cfg.variant = LossVariant::none;
  CHECK(total_loss(cfg, s, y, st).total == bce);
}

TEST_CASE("loss variants parse and reject unknown names") {
  CHECK(parse_loss_variant("scloss") == LossVariant::scloss);
  CHECK(parse_loss_variant("mse") == LossVariant::mse);
  CHECK(parse_loss_variant("none") == LossVariant::none);
  CHECK(to_string(LossVariant::mse) == "mse");
  CHECK_THROWS_AS(parse_loss_variant("focal"), ConfigError);
}

TEST_CASE("loss config validation") {
  LossConfig c;
  c.num_groups = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = LossConfig{};
  c.decay = 1.0;
  CHECK_NOTHROW(c.validate());
  c.decay = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = LossConfig{};
  c.weight = -0.1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("total loss gradient through the calibrator matches finite differences") {
  for (double tau : {0.0, 0.95}) {
    CAPTURE(tau);
    UmnnCalibrator cal = test::random_small_calibrator(31);
    const Dataset data = test::random_dataset(12, 32);
    const Batch batch = make_batch(data, 0, data.size());
    LossConfig cfg;
    cfg.num_groups = 4;
    cfg.decay = tau;
    cfg.weight = 0.7;
    EmaState prior(4, tau);
    for (std::size_t k = 0; k < 4; ++k) prior.set_raw(k, 0.1 + 0.2 * k, 0.15 + 0.18 * k, 3);

    const auto fwd = cal.calibrate_batch(batch);
    const auto groups = assign_groups(fwd.scores, 4);
    EmaState st = prior;
    const auto loss = total_loss(cfg, fwd.scores, batch.labels, st, std::span<const std::size_t>(groups));
    const auto grads = cal.calibrate_backward(fwd.cache, loss.grad);
    const auto check = test::check_gradients(
        cal,
        [&](const UmnnCalibrator& m) {
          EmaState s = prior;
          return total_loss(cfg, m.calibrate_batch(batch).scores, batch.labels, s,
                            std::span<const std::size_t>(groups))
              .total;
        },
        grads);
    CAPTURE(check.worst_key);
    CHECK(check.max_relative_error < 1e-4);
  }
}
