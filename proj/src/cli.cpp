#include "umc/cli.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "text_util.hpp"
#include "umc/baselines.hpp"
#include "umc/error.hpp"
#include "umc/synthgen.hpp"

namespace umc::cli {

namespace {

struct MethodName {
  Method method;
  std::string_view name;
};

constexpr MethodName kMethods[] = {
    {Method::umc, "umc"},           {Method::umc_no_rescale, "umc-no-rescale"},
    {Method::umc_no_feature, "umc-no-feature"}, {Method::umc_no_scloss, "umc-no-scloss"},
    {Method::umc_mse, "umc-mse"},   {Method::histbin, "histbin"},
    {Method::isotonic, "isotonic"}, {Method::sir, "sir"},
    {Method::platt, "platt"},       {Method::none, "none"},
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed for " + path);
}

Dataset load_input(const RunConfig& cfg, const std::vector<std::string>& ignore = {}) {
  if (cfg.data.empty()) throw ConfigError("--data is required");
  LoadOptions options;
  options.ignore_columns = ignore;
  if (!cfg.schema.empty()) return load_dataset(cfg.data, load_schema(cfg.schema), options);
  return load_dataset(cfg.data, options);
}

/// `key = value` lines become flags placed ahead of the command-line ones,
/// so explicit flags win.
std::vector<std::string> config_file_args(const std::string& path, const CLI::App& sub) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::vector<std::string> args;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string_view body = text::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key(text::trim(body.substr(0, eq)));
    const std::string value(text::trim(body.substr(eq + 1)));
    const CLI::Option* opt = key == "config" ? nullptr : sub.get_option_no_throw("--" + key);
    if (opt == nullptr)
      throw ConfigError(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "' for command " +
                        sub.get_name());
    if (opt->get_expected_min() == 0) {
      if (value == "true" || value == "1") {
        args.push_back("--" + key);
      } else if (value != "false" && value != "0") {
        throw ConfigError(path + ":" + std::to_string(line_no) + ": '" + key + "' expects true or false");
      }
    } else {
      args.push_back("--" + key);
      args.push_back(value);
    }
  }
  return args;
}

std::string fixed6(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(6) << v;
  return s.str();
}

}  // namespace

Method parse_method(std::string_view name) {
  for (const auto& m : kMethods)
    if (m.name == name) return m.method;
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

std::string_view to_string(Method method) {
  for (const auto& m : kMethods)
    if (m.method == method) return m.name;
  return "none";
}

bool is_neural(Method method) {
  switch (method) {
    case Method::umc:
    case Method::umc_no_rescale:
    case Method::umc_no_feature:
    case Method::umc_no_scloss:
    case Method::umc_mse:
      return true;
    default:
      return false;
  }
}

std::vector<Method> parse_method_list(std::string_view comma_separated) {
  std::vector<Method> out;
  for (auto part : text::split(comma_separated, ',')) {
    const auto name = text::trim(part);
    if (!name.empty()) out.push_back(parse_method(name));
  }
  if (out.empty()) throw ConfigError("no methods given");
  return out;
}

MetricConfig RunConfig::metric_config() const {
  MetricConfig m;
  m.ece_bins = ece_bins;
  m.frce_field = frce_field;
  return m;
}

CalibratorConfig RunConfig::calibrator_config(Method method) const {
  CalibratorConfig c;
  c.embed_dim = embed_dim;
  c.quadrature_nodes = steps;
  c.use_rescaling = !no_rescale && method != Method::umc_no_rescale;
  c.use_features = !no_features && method != Method::umc_no_feature;
  return c;
}

TrainConfig RunConfig::train_config(Method method) const {
  TrainConfig t;
  t.learning_rate = lr;
  t.l2 = l2;
  t.batch_size = batch;
  t.max_epochs = epochs;
  t.num_groups = groups;
  t.decay = tau;
  t.loss_weight = lambda;
  t.seed = seed;
  t.early_stop_patience = patience;
  t.eval_fraction = eval_fraction;
  t.early_stop_metric = parse_stop_metric(stop_metric);
  t.metrics = metric_config();
  if (method == Method::umc_no_scloss) {
    t.variant = LossVariant::none;
    t.loss_weight = 0.0;
  } else if (method == Method::umc_mse) {
    t.variant = LossVariant::mse;
  }
  if (variant) t.variant = parse_loss_variant(*variant);
  return t;
}

FitOutcome fit_method(Method method, const Dataset& calib, const RunConfig& config) {
  if (calib.empty()) throw ConfigError("calibration data is empty");
  switch (method) {
    case Method::none: return {ScoreMapping{}, std::nullopt};
    case Method::histbin: return {fit_histogram_binning(calib, config.bins), std::nullopt};
    case Method::isotonic: return {fit_isotonic(calib), std::nullopt};
    case Method::sir: return {fit_sir(calib), std::nullopt};
    case Method::platt: return {fit_platt(calib), std::nullopt};
    default: break;
  }
  UmnnCalibrator cal(calib.schema(), config.calibrator_config(method), config.seed);
  TrainResult r = train(std::move(cal), calib, nullptr, config.train_config(method));
  return {std::move(r.calibrator), std::move(r.history)};
}

std::vector<ComparisonRow> run_comparison(const Dataset& data, const std::vector<Method>& methods,
                                          const RunConfig& config) {
  if (!(config.split > 0.0 && config.split < 1.0)) throw ConfigError("--split must lie in (0,1)");
  const double ratios[] = {config.split, 1.0 - config.split};
  const auto parts = split_by_ratios(data, ratios);
  if (parts[0].empty() || parts[1].empty()) throw ConfigError("data too small to split");
  std::vector<ComparisonRow> rows;
  for (Method m : methods) {
    const FitOutcome fit = fit_method(m, parts[0], config);
    rows.push_back({std::string(to_string(m)),
                    compute_report(apply_model(fit.model, parts[1]), parts[1], config.metric_config())});
  }
  return rows;
}

std::string comparison_table(const std::vector<ComparisonRow>& rows) {
  bool oracle = !rows.empty();
  for (const auto& r : rows) oracle = oracle && r.report.oracle_mae.has_value();
  std::ostringstream out;
  out << "method\tAUC\tGAUC\tECE\tFRCE\tMFRCE" << (oracle ? "\toracle_mae" : "") << '\n';
  for (const auto& r : rows) {
    out << r.method << '\t' << fixed6(r.report.auc) << '\t' << (r.report.gauc ? fixed6(*r.report.gauc) : "-")
        << '\t' << fixed6(r.report.ece) << '\t' << fixed6(r.report.frce) << '\t' << fixed6(r.report.mfrce);
    if (oracle) out << '\t' << fixed6(*r.report.oracle_mae);
    out << '\n';
  }
  return out.str();
}

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  std::string variant;
  std::string frce_field;
  std::string config_path;

  CLI::App app{"Monotonic neural calibration of ranking-model scores", "umc"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value file; flags override it");
  };
  auto add_metric_flags = [&](CLI::App* sub) {
    sub->add_option("--frce-field", frce_field, "Field for the single-field FRCE (default: first field)");
    sub->add_option("--ece-bins", cfg.ece_bins, "Equal-width ECE bins")->check(CLI::PositiveNumber);
  };
  auto add_training_flags = [&](CLI::App* sub) {
    sub->add_option("--lr", cfg.lr, "Adam learning rate");
    sub->add_option("--l2", cfg.l2, "L2 regularization weight");
    sub->add_option("--batch", cfg.batch, "Mini-batch size")->check(CLI::PositiveNumber);
    sub->add_option("--epochs", cfg.epochs, "Maximum epochs");
    sub->add_option("--groups", cfg.groups, "SCLoss groups N")->check(CLI::PositiveNumber);
    sub->add_option("--tau", cfg.tau, "EMA decay");
    sub->add_option("--lambda", cfg.lambda, "Auxiliary loss weight");
    sub->add_option("--variant", variant, "Auxiliary loss: scloss, mse or none");
    sub->add_option("--patience", cfg.patience, "Early-stopping patience in epochs (0 disables)");
    sub->add_option("--eval-fraction", cfg.eval_fraction, "Held-out tail for early stopping");
    sub->add_option("--stop-metric", cfg.stop_metric, "Early-stopping metric: ece, mfrce or logloss");
    sub->add_option("--steps", cfg.steps, "Quadrature nodes T")->check(CLI::Range(2, 100000));
    sub->add_option("--embed-dim", cfg.embed_dim, "Embedding width per field");
    sub->add_flag("--no-rescale", cfg.no_rescale, "Drop the rescaling network");
    sub->add_flag("--no-features", cfg.no_features, "Ignore the field features");
    sub->add_option("--bins", cfg.bins, "Histogram-binning bins")->check(CLI::PositiveNumber);
    sub->add_option("--seed", cfg.seed, "Random seed");
  };

  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic prediction log");
  synth->add_option("--preset", cfg.preset, "identity, temperature, field-shift or mixed");
  synth->add_option("--n", cfg.n, "Number of samples")->check(CLI::PositiveNumber);
  synth->add_option("--seed", cfg.seed, "Random seed");
  synth->add_option("--out", cfg.out, "Output data file")->required();
  synth->add_option("--schema", cfg.schema, "Also write the schema here");
  add_config(synth);

  CLI::App* train_cmd = app.add_subcommand("train", "Fit a calibration method");
  train_cmd->add_option("--data", cfg.data, "Calibration data")->required();
  train_cmd->add_option("--schema", cfg.schema, "Schema file (inferred when omitted)");
  train_cmd->add_option("--method", cfg.method, "Method to fit");
  train_cmd->add_option("--out", cfg.out, "Model output path")->required();
  train_cmd->add_option("--history", cfg.history, "Training history (default: <out>.history.csv)");
  add_training_flags(train_cmd);
  add_metric_flags(train_cmd);
  add_config(train_cmd);

  CLI::App* calibrate = app.add_subcommand("calibrate", "Append calibrated scores to a data file");
  calibrate->add_option("--data", cfg.data, "Input data")->required();
  calibrate->add_option("--model", cfg.model, "Model from train")->required();
  calibrate->add_option("--out", cfg.out, "Output data file")->required();
  calibrate->add_option("--column", cfg.column, "Name of the added column");
  calibrate->add_option("--schema", cfg.schema, "Schema file (default: the model's)");
  add_config(calibrate);

  CLI::App* eval = app.add_subcommand("eval", "Compute calibration and ranking metrics");
  eval->add_option("--data", cfg.data, "Data file")->required();
  eval->add_option("--model", cfg.model, "Score with this model instead of reading --column");
  eval->add_option("--column", cfg.column, "Calibrated-score column");
  eval->add_option("--schema", cfg.schema, "Schema file");
  eval->add_option("--out", cfg.out, "Write key=value metrics here");
  add_metric_flags(eval);
  add_config(eval);

  CLI::App* compare = app.add_subcommand("compare", "Fit and score several methods on one split");
  compare->add_option("--data", cfg.data, "Data file")->required();
  compare->add_option("--schema", cfg.schema, "Schema file");
  compare->add_option("--methods", cfg.methods, "Comma-separated methods");
  compare->add_option("--split", cfg.split, "Fit share of the chronological split");
  compare->add_option("--out", cfg.out, "Also write the table here");
  add_training_flags(compare);
  add_metric_flags(compare);
  add_config(compare);

  try {
    // Splice config-file values in ahead of the explicit flags.
    std::vector<std::string> argv = args;
    std::string file;
    for (std::size_t i = 0; i < argv.size(); ++i) {
      if (argv[i] == "--config" && i + 1 < argv.size()) {
        file = argv[i + 1];
        argv.erase(argv.begin() + static_cast<std::ptrdiff_t>(i), argv.begin() + static_cast<std::ptrdiff_t>(i) + 2);
        break;
      }
      if (argv[i].rfind("--config=", 0) == 0) {
        file = argv[i].substr(9);
        argv.erase(argv.begin() + static_cast<std::ptrdiff_t>(i));
        break;
      }
    }
    if (!file.empty() && !argv.empty()) {
      const CLI::App* sub = app.get_subcommand_no_throw(argv[0]);
      if (sub == nullptr) throw CLI::ExtrasError({argv[0]});
      auto extra = config_file_args(file, *sub);
      argv.insert(argv.begin() + 1, extra.begin(), extra.end());
    }
    std::vector<std::string> reversed(argv.rbegin(), argv.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  if (!variant.empty()) cfg.variant = variant;
  if (!frce_field.empty()) cfg.frce_field = frce_field;

  try {
    if (synth->parsed()) {
      const SyntheticData data = generate_synthetic_with_truth(synth_preset(cfg.preset, cfg.n, cfg.seed));
      save_dataset(data.dataset, cfg.out);
      if (!cfg.schema.empty()) save_schema(data.dataset.schema(), cfg.schema);
      out << "wrote " << data.dataset.size() << " rows to " << cfg.out << '\n';
    } else if (train_cmd->parsed()) {
      const Method method = parse_method(cfg.method);
      const Dataset data = load_input(cfg);
      FitOutcome fit = fit_method(method, data, cfg);
      save_model(fit.model, cfg.out);
      out << "method " << to_string(method) << ": model written to " << cfg.out << '\n';
      if (fit.history) {
        const std::string history_path = cfg.history.empty() ? cfg.out + ".history.csv" : cfg.history;
        write_text(history_path, fit.history->to_text());
        out << "epochs " << fit.history->epochs.size() << ", best epoch " << fit.history->best_epoch
            << ", history written to " << history_path << '\n';
      }
    } else if (calibrate->parsed()) {
      const CalibrationModel model = load_model(cfg.model);
      Dataset data;
      if (cfg.schema.empty() && std::holds_alternative<UmnnCalibrator>(model))
        data = load_dataset(cfg.data, std::get<UmnnCalibrator>(model).schema());
      else
        data = load_input(cfg);
      const std::vector<double> scores = apply_model(model, data);
      append_column(cfg.data, cfg.out, cfg.column, scores);
      out << "wrote " << scores.size() << " calibrated scores to " << cfg.out << '\n';
    } else if (eval->parsed()) {
      Dataset data;
      std::vector<double> scores;
      if (!cfg.model.empty()) {
        const CalibrationModel model = load_model(cfg.model);
        if (cfg.schema.empty() && std::holds_alternative<UmnnCalibrator>(model))
          data = load_dataset(cfg.data, std::get<UmnnCalibrator>(model).schema());
        else
          data = load_input(cfg, {cfg.column});
        scores = apply_model(model, data);
      } else {
        data = load_input(cfg, {cfg.column});
        scores = load_column(cfg.data, cfg.column);
      }
      const MetricsReport report = compute_report(scores, data, cfg.metric_config());
      if (!cfg.out.empty()) {
        write_text(cfg.out, to_key_value(report));
        out << to_table(report);
      } else {
        out << to_key_value(report);
      }
    } else if (compare->parsed()) {
      const Dataset data = load_input(cfg);
      const auto rows = run_comparison(data, parse_method_list(cfg.methods), cfg);
      const std::string table = comparison_table(rows);
      if (!cfg.out.empty()) write_text(cfg.out, table);
      out << table;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace umc::cli
