#include "umc/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "umc/error.hpp"

namespace umc {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "umc-checkpoint";
constexpr int kVersion = 1;

json schema_to_json(const FieldSchema& schema) {
  json fields = json::array();
  for (const auto& f : schema.fields()) fields.push_back({{"name", f.name}, {"vocab", f.vocabulary_size}});
  json j{{"fields", fields}};
  if (schema.group_field()) j["group_field"] = *schema.group_field();
  return j;
}

FieldSchema schema_from_json(const json& j) {
  std::vector<FieldSpec> fields;
  for (const auto& f : j.at("fields")) fields.push_back({f.at("name").get<std::string>(), f.at("vocab").get<std::size_t>()});
  std::optional<std::string> group;
  if (j.contains("group_field")) group = j.at("group_field").get<std::string>();
  return FieldSchema(std::move(fields), std::move(group));
}

std::string_view activation_name(nn::Activation a) { return a == nn::Activation::elu ? "elu" : "identity"; }

nn::Activation activation_from(const std::string& name) {
  if (name == "elu") return nn::Activation::elu;
  if (name == "identity") return nn::Activation::identity;
  throw ParseError("unknown activation '" + name + "' in checkpoint");
}

json config_to_json(const CalibratorConfig& c) {
  return {{"embed_dim", c.embed_dim},
          {"derivative_hidden", c.derivative_hidden},
          {"rescale_hidden", c.rescale_hidden},
          {"quadrature_nodes", c.quadrature_nodes},
          {"clamp_eps", c.clamp_eps},
          {"use_rescaling", c.use_rescaling},
          {"use_features", c.use_features},
          {"rescale_activation", activation_name(c.rescale_activation)}};
}

CalibratorConfig config_from_json(const json& j) {
  CalibratorConfig c;
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.derivative_hidden = j.at("derivative_hidden").get<std::vector<std::size_t>>();
  c.rescale_hidden = j.at("rescale_hidden").get<std::vector<std::size_t>>();
  c.quadrature_nodes = j.at("quadrature_nodes").get<std::size_t>();
  c.clamp_eps = j.at("clamp_eps").get<double>();
  c.use_rescaling = j.at("use_rescaling").get<bool>();
  c.use_features = j.at("use_features").get<bool>();
  c.rescale_activation = activation_from(j.at("rescale_activation").get<std::string>());
  return c;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

std::string serialize_calibrator(const UmnnCalibrator& calibrator) {
  json params = json::array();
  for (const auto& p : calibrator.parameters()) {
    params.push_back({{"key", p.key},
                      {"shape", p.shape},
                      {"values", std::vector<double>(p.values.begin(), p.values.end())}});
  }
  json j{{"format", kFormat},
         {"version", kVersion},
         {"schema", schema_to_json(calibrator.schema())},
         {"config", config_to_json(calibrator.config())},
         {"parameters", params}};
  return j.dump(1);
}

UmnnCalibrator parse_calibrator(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.value("format", "") != kFormat) throw ParseError("not a calibrator checkpoint");
    if (j.at("version").get<int>() != kVersion)
      throw ParseError("unsupported checkpoint version " + j.at("version").dump());
    UmnnCalibrator cal(schema_from_json(j.at("schema")), config_from_json(j.at("config")), 0);
    nn::ParameterList views = cal.parameters();
    const json& stored = j.at("parameters");
    if (stored.size() != views.size())
      throw ParseError("checkpoint has " + std::to_string(stored.size()) + " parameters, model expects " +
                       std::to_string(views.size()));
    for (std::size_t i = 0; i < views.size(); ++i) {
      const json& p = stored[i];
      const auto key = p.at("key").get<std::string>();
      if (key != views[i].key) throw ParseError("checkpoint parameter '" + key + "' where '" + views[i].key + "' expected");
      if (p.at("shape").get<std::vector<std::size_t>>() != views[i].shape)
        throw ParseError("shape mismatch for parameter '" + key + "'");
      const auto values = p.at("values").get<std::vector<double>>();
      if (values.size() != views[i].values.size()) throw ParseError("size mismatch for parameter '" + key + "'");
      std::copy(values.begin(), values.end(), views[i].values.begin());
    }
    return cal;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_calibrator(const UmnnCalibrator& calibrator, const std::filesystem::path& path) {
  write_file(path, serialize_calibrator(calibrator));
}

UmnnCalibrator load_calibrator(const std::filesystem::path& path) { return parse_calibrator(read_file(path)); }

void save_model(const CalibrationModel& model, const std::filesystem::path& path) {
  if (const auto* cal = std::get_if<UmnnCalibrator>(&model)) {
    save_calibrator(*cal, path);
  } else {
    write_file(path, std::get<ScoreMapping>(model).serialize());
  }
}

CalibrationModel load_model(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::string format;
  try {
    format = json::parse(text).value("format", "");
  } catch (const json::exception& e) {
    throw ParseError("model file " + path.string() + " is not valid JSON: " + e.what());
  }
  if (format == kFormat) return parse_calibrator(text);
  if (format == "umc-mapping") return ScoreMapping::parse(text);
  throw ParseError("model file " + path.string() + " has unknown format '" + format + "'");
}

std::vector<double> apply_model(const CalibrationModel& model, const Dataset& dataset) {
  if (const auto* cal = std::get_if<UmnnCalibrator>(&model)) return cal->predict(dataset);
  return std::get<ScoreMapping>(model).apply(dataset);
}

}  // namespace umc
