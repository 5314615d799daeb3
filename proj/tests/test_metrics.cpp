#include <cmath>
#include <map>
#include <random>

#include "doctest.h"
#include "support/oracles.hpp"
#include "umc/error.hpp"
#include "umc/metrics.hpp"

using namespace umc;

namespace {

double brute_ece(const std::vector<double>& s, const std::vector<double>& y, std::size_t m) {
  double total = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const double lo = static_cast<double>(k) / m, hi = static_cast<double>(k + 1) / m;
    double sum = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const bool in = k + 1 == m ? (s[i] >= lo && s[i] <= hi) : (s[i] >= lo && s[i] < hi);
      if (in) sum += s[i] - y[i];
    }
    total += std::abs(sum);
  }
  return total / s.size();
}

}  // namespace

TEST_CASE("ece hand example") {
  const std::vector<double> s{0.2, 0.2, 0.8, 0.8}, y{0, 1, 1, 1};
  CHECK(ece(s, y, 2) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("ece is zero for exact labels and for the constant base rate") {
  CHECK(ece(std::vector<double>{0, 1, 1, 0}, std::vector<double>{0, 1, 1, 0}, 100) == 0.0);
  CHECK(ece(std::vector<double>{0.25, 0.25, 0.25, 0.25}, std::vector<double>{0, 1, 0, 0}, 100) == 0.0);
}

TEST_CASE("ece matches a bin-by-bin brute force") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> s(50), y(50);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = trial % 3 == 0 ? std::round(u(rng) * 10) / 10 : u(rng);  // exercise exact bin edges
      y[i] = u(rng) < 0.4 ? 1.0 : 0.0;
    }
    for (std::size_t m : {1, 2, 10, 100}) CHECK(std::abs(ece(s, y, m) - brute_ece(s, y, m)) < 1e-12);
  }
}

TEST_CASE("ece errors") {
  CHECK_THROWS_AS(ece(std::vector<double>{}, std::vector<double>{}, 10), MetricError);
  CHECK_THROWS_AS(ece(std::vector<double>{0.5}, std::vector<double>{1.0}, 0), MetricError);
}

TEST_CASE("frce hand example") {
  const std::vector<double> s{0.5, 0.5, 0.9, 0.9}, y{1, 0, 1, 1};
  const std::vector<std::int32_t> z{1, 1, 2, 2};
  const auto r = frce(s, y, z);
  CHECK(r.value == doctest::Approx(0.025).epsilon(1e-12));
  CHECK(r.used_values == 2);
  CHECK(r.skipped_values == 0);
}

TEST_CASE("frce skips values without positives and fails if all are skipped") {
  const std::vector<double> s{0.5, 0.5, 0.3, 0.9}, y{1, 0, 0, 1};
  const std::vector<std::int32_t> z{1, 1, 3, 2};
  const auto r = frce(s, y, z);
  CHECK(r.skipped_values == 1);
  CHECK(r.used_values == 2);
  CHECK(r.value == doctest::Approx((0.0 + 0.1 / 1.0) / 4).epsilon(1e-12));
  CHECK_THROWS_AS(frce(std::vector<double>{0.2}, std::vector<double>{0.0}, std::vector<std::int32_t>{0}), MetricError);
}

TEST_CASE("mfrce is the plain mean over fields") {
  const std::vector<double> s{0.5, 0.5, 0.9, 0.9}, y{1, 0, 1, 1};
  const std::vector<std::int32_t> a{1, 1, 2, 2}, constant{0, 0, 0, 0};
  CHECK(mfrce(s, y, {a}) == doctest::Approx(frce(s, y, a).value).epsilon(1e-15));
  // Constant column: |sum(s'-y)| / |sum y| / |D|.
  const double c = std::abs(2.8 - 3.0) / 3.0 / 4.0;
  CHECK(frce(s, y, constant).value == doctest::Approx(c).epsilon(1e-12));
  CHECK(mfrce(s, y, {a, constant}) == doctest::Approx((0.025 + c) / 2).epsilon(1e-12));
}

TEST_CASE("auc examples") {
  CHECK(auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<double>{0, 0, 1, 1}) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(auc(std::vector<double>{0.1, 0.2, 0.3, 0.4}, std::vector<double>{0, 0, 1, 1}) == 1.0);
  CHECK(auc(std::vector<double>{0.3, 0.3, 0.3}, std::vector<double>{0, 1, 0}) == 0.5);
  CHECK_THROWS_AS(auc(std::vector<double>{0.3, 0.4}, std::vector<double>{1, 1}), MetricError);
}

TEST_CASE("auc matches the pairwise brute force with ties") {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> level(0, 6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(40), y(40);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = level(rng) / 6.0;
      y[i] = u(rng) < 0.3 + 0.5 * s[i] ? 1.0 : 0.0;
    }
    y[0] = 1.0;
    y[1] = 0.0;
    CHECK(std::abs(auc(s, y) - test::brute_force_auc(s, y)) < 1e-12);
  }
}

TEST_CASE("gauc examples") {
  const std::vector<double> s{0.1, 0.9, 0.5, 0.5};
  const std::vector<double> y{0, 1, 0, 1};
  CHECK(gauc(s, y, std::vector<std::uint32_t>{0, 0, 0, 0}) == doctest::Approx(auc(s, y)).epsilon(1e-15));
  CHECK(gauc(s, y, std::vector<std::uint32_t>{0, 0, 1, 1}) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK_THROWS_AS(gauc(s, std::vector<double>{1, 1, 0, 0}, std::vector<std::uint32_t>{0, 0, 1, 1}), MetricError);
}

TEST_CASE("gauc matches a brute-force weighted mean and skips one-class groups") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (GaucWeighting w : {GaucWeighting::samples, GaucWeighting::positives})
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> s(60), y(60);
      std::vector<std::uint32_t> g(60);
      for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = std::round(u(rng) * 20) / 20;
        g[i] = static_cast<std::uint32_t>(i % 7);
        y[i] = g[i] == 6 ? 0.0 : (u(rng) < s[i] ? 1.0 : 0.0);
      }
      std::map<std::uint32_t, std::pair<std::vector<double>, std::vector<double>>> by;
      for (std::size_t i = 0; i < s.size(); ++i) {
        by[g[i]].first.push_back(s[i]);
        by[g[i]].second.push_back(y[i]);
      }
      double num = 0.0, den = 0.0;
      for (auto& [k, v] : by) {
        double pos = 0.0;
        for (double l : v.second) pos += l;
        if (pos == 0.0 || pos == static_cast<double>(v.second.size())) continue;
        const double weight = w == GaucWeighting::samples ? static_cast<double>(v.first.size()) : pos;
        num += weight * test::brute_force_auc(v.first, v.second);
        den += weight;
      }
      CHECK(std::abs(gauc(s, y, g, w) - num / den) < 1e-12);
    }
}

TEST_CASE("report covers every metric and round-trips through key=value text") {
  const Dataset data = test::random_dataset(300, 21, true);
  std::vector<double> s = data.scores();
  for (auto& v : s) v = 0.5 * v + 0.2;
  MetricConfig cfg;
  cfg.frce_field = "device";
  const MetricsReport r = compute_report(s, data, cfg);
  CHECK(r.samples == 300);
  CHECK(r.frce_field == "device");
  CHECK(r.gauc.has_value());
  CHECK_FALSE(r.oracle_mae.has_value());
  CHECK(r.field_frce.size() == 2);
  CHECK(r.ece == doctest::Approx(ece(s, data.labels(), 100)).epsilon(1e-15));
  CHECK(r.frce == r.field_frce[1].second);
  CHECK(r.mfrce == doctest::Approx((r.field_frce[0].second + r.field_frce[1].second) / 2).epsilon(1e-15));

  const MetricsReport back = parse_key_value(to_key_value(r));
  CHECK(back.ece == r.ece);
  CHECK(back.frce == r.frce);
  CHECK(back.mfrce == r.mfrce);
  CHECK(back.auc == r.auc);
  CHECK(back.gauc == r.gauc);
  CHECK(back.frce_field == r.frce_field);
  CHECK(back.field_frce == r.field_frce);
  CHECK(back.samples == r.samples);
  CHECK(to_table(r).find("MFRCE") != std::string::npos);
}

TEST_CASE("report rejects a length mismatch and an unknown frce field") {
  const Dataset data = test::random_dataset(10, 2);
  CHECK_THROWS(compute_report(std::vector<double>(9, 0.5), data));
  MetricConfig cfg;
  cfg.frce_field = "nope";
  CHECK_THROWS(compute_report(data.scores(), data, cfg));
}

TEST_CASE("metrics are bit-identical across calls") {
  const Dataset data = test::random_dataset(1000, 5, true);
  const auto a = compute_report(data.scores(), data), b = compute_report(data.scores(), data);
  CHECK(to_key_value(a) == to_key_value(b));
}
