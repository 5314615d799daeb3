#include <cstring>

#include "doctest.h"
#include "support/oracles.hpp"
#include "umc/checkpoint.hpp"
#include "umc/error.hpp"

using namespace umc;

TEST_CASE("calibrator checkpoints round-trip bit-exactly") {
  test::TempDir dir;
  CalibratorConfig cfg = test::small_config();
  cfg.use_rescaling = false;
  const UmnnCalibrator cal = test::random_small_calibrator(4, cfg);
  save_calibrator(cal, dir / "c.json");
  const UmnnCalibrator back = load_calibrator(dir / "c.json");
  CHECK(back.config() == cal.config());
  CHECK(back.schema() == cal.schema());
  const auto a = cal.parameters(), b = back.parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].key == b[i].key);
    CHECK(std::memcmp(a[i].values.data(), b[i].values.data(), a[i].values.size() * sizeof(double)) == 0);
  }
  CHECK(serialize_calibrator(back) == serialize_calibrator(cal));
  const Dataset data = test::random_dataset(100, 2);
  CHECK(back.predict(data) == cal.predict(data));
}

TEST_CASE("load_model dispatches on the format") {
  test::TempDir dir;
  save_model(CalibrationModel{test::random_small_calibrator(1)}, dir / "a.json");
  save_model(CalibrationModel{ScoreMapping{PlattParams{1.5, -0.2, 3, true}}}, dir / "b.json");
  CHECK(std::holds_alternative<UmnnCalibrator>(load_model(dir / "a.json")));
  const auto m = load_model(dir / "b.json");
  REQUIRE(std::holds_alternative<ScoreMapping>(m));
  CHECK(std::get<ScoreMapping>(m).kind() == "platt");
}

TEST_CASE("corrupt checkpoints are parse errors") {
  test::TempDir dir;
  const std::string good = serialize_calibrator(test::random_small_calibrator(1));
  CHECK_THROWS_AS(parse_calibrator("{}"), ParseError);
  CHECK_THROWS_AS(parse_calibrator("[1,2"), ParseError);
  std::string renamed = good;
  renamed.replace(renamed.find("\"beta\""), 6, "\"gamma\"");
  CHECK_THROWS_AS(parse_calibrator(renamed), ParseError);
  CHECK_THROWS_AS(load_model(dir / "nothing.json"), IoError);
}
