#pragma once

#include <filesystem>
#include <string>
#include <variant>

#include "umc/baselines.hpp"
#include "umc/calibrator.hpp"

namespace umc {

/// JSON document holding the schema, the architecture config and every
/// parameter. Doubles round-trip exactly.
std::string serialize_calibrator(const UmnnCalibrator& calibrator);
UmnnCalibrator parse_calibrator(const std::string& text);

void save_calibrator(const UmnnCalibrator& calibrator, const std::filesystem::path& path);
UmnnCalibrator load_calibrator(const std::filesystem::path& path);

/// Either a trained calibrator or a fitted univariate mapping.
using CalibrationModel = std::variant<UmnnCalibrator, ScoreMapping>;

void save_model(const CalibrationModel& model, const std::filesystem::path& path);
/// Dispatches on the document's "format" field.
CalibrationModel load_model(const std::filesystem::path& path);

/// Calibrated scores of `dataset` under either kind of model.
std::vector<double> apply_model(const CalibrationModel& model, const Dataset& dataset);

}  // namespace umc
