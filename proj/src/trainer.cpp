#include "umc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "text_util.hpp"
#include "umc/error.hpp"

namespace umc {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double mean_logloss(std::span<const double> s, std::span<const double> y) {
  constexpr double eps = 1e-15;
  double sum = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double p = std::clamp(s[i], eps, 1.0 - eps);
    sum -= y[i] > 0.5 ? std::log(p) : std::log1p(-p);
  }
  return s.empty() ? 0.0 : sum / static_cast<double>(s.size());
}

double safe_mfrce(std::span<const double> s, std::span<const double> y, const Dataset& data) {
  std::vector<std::vector<std::int32_t>> columns;
  for (std::size_t f = 0; f < data.schema().size(); ++f) columns.push_back(data.field_column(f));
  if (columns.empty()) return std::numeric_limits<double>::quiet_NaN();
  try {
    return mfrce(s, y, columns);
  } catch (const MetricError&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

void fill_eval(EpochRecord& rec, const UmnnCalibrator& model, const Dataset& eval, const TrainConfig& config) {
  const std::vector<double> s = model.predict(eval);
  const std::vector<double> y = eval.labels();
  rec.eval_ece = ece(s, y, config.metrics.ece_bins);
  rec.eval_logloss = mean_logloss(s, y);
  rec.eval_mfrce = safe_mfrce(s, y, eval);
  switch (config.early_stop_metric) {
    case StopMetric::ece: rec.stop_value = rec.eval_ece; break;
    case StopMetric::mfrce: rec.stop_value = rec.eval_mfrce; break;
    case StopMetric::logloss: rec.stop_value = rec.eval_logloss; break;
  }
}

}  // namespace

StopMetric parse_stop_metric(std::string_view name) {
  if (name == "ece") return StopMetric::ece;
  if (name == "mfrce") return StopMetric::mfrce;
  if (name == "logloss") return StopMetric::logloss;
  throw ConfigError("unknown early-stopping metric '" + std::string(name) + "' (expected ece, mfrce or logloss)");
}

std::string_view to_string(StopMetric metric) {
  switch (metric) {
    case StopMetric::ece: return "ece";
    case StopMetric::mfrce: return "mfrce";
    case StopMetric::logloss: return "logloss";
  }
  return "ece";
}

LossConfig TrainConfig::loss_config() const {
  LossConfig c;
  c.weight = loss_weight;
  c.num_groups = num_groups;
  c.decay = decay;
  c.variant = variant;
  c.ema_bias_correction = ema_bias_correction;
  return c;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be positive");
  if (!(l2 >= 0.0) || !std::isfinite(l2)) throw ConfigError("l2 must be non-negative");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(eval_fraction >= 0.0 && eval_fraction < 1.0)) throw ConfigError("eval fraction must be in [0,1)");
  if (metrics.ece_bins == 0) throw ConfigError("ece bins must be positive");
  loss_config().validate();
}

std::string TrainHistory::to_text() const {
  std::ostringstream out;
  out << "epoch,batches,total,bce,auxiliary,eval_ece,eval_mfrce,eval_logloss,stop_value,best\n";
  for (const auto& r : epochs) {
    out << r.epoch << ',' << r.batches << ',' << text::format_double(r.total) << ','
        << text::format_double(r.bce) << ',' << text::format_double(r.auxiliary) << ','
        << text::format_double(r.eval_ece) << ',' << text::format_double(r.eval_mfrce) << ','
        << text::format_double(r.eval_logloss) << ',' << text::format_double(r.stop_value) << ','
        << (r.epoch == best_epoch ? 1 : 0) << '\n';
  }
  return out.str();
}

nn::GradientBundle batch_gradients(const UmnnCalibrator& calibrator, const Batch& batch, const TrainConfig& config,
                                   EmaState& ema, TotalLoss* loss_out) {
  const CalibrationResult fwd = calibrator.calibrate_batch(batch);
  TotalLoss loss = total_loss(config.loss_config(), fwd.scores, batch.labels, ema);
  nn::GradientBundle grads = calibrator.calibrate_backward(fwd.cache, loss.grad);
  if (loss_out) *loss_out = std::move(loss);
  return grads;
}

TrainResult train(UmnnCalibrator calibrator, const Dataset& calib_set, const Dataset* eval_set,
                  const TrainConfig& config) {
  config.validate();
  if (calib_set.empty()) throw TrainingError("calibration set is empty");

  Dataset fit_part = calib_set;
  Dataset held_out;
  if (eval_set) {
    held_out = *eval_set;
  } else {
    const auto n_eval = static_cast<std::size_t>(std::floor(config.eval_fraction * calib_set.size()));
    if (n_eval > 0 && n_eval < calib_set.size()) {
      fit_part = calib_set.slice(0, calib_set.size() - n_eval);
      held_out = calib_set.slice(calib_set.size() - n_eval, calib_set.size());
    }
  }
  const bool has_eval = !held_out.empty();

  TrainResult result{calibrator, {}};
  if (config.max_epochs == 0) return result;

  nn::AdamState adam;
  EmaState ema(config.num_groups, config.decay, config.ema_bias_correction);
  double best_value = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    if (config.reset_ema_each_epoch || epoch == 1) ema.reset();
    const std::uint64_t shuffle_seed = splitmix64(config.seed ^ splitmix64(epoch));
    const auto order = batch_indices(fit_part.size(), config.batch_size, shuffle_seed);

    EpochRecord rec;
    rec.epoch = epoch;
    for (std::size_t b = 0; b < order.size(); ++b) {
      const Batch batch = make_batch(fit_part, order[b]);
      TotalLoss loss;
      try {
        const nn::GradientBundle grads = batch_gradients(calibrator, batch, config, ema, &loss);
        if (!std::isfinite(loss.total)) throw NumericError("loss is not finite");
        nn::adam_step(calibrator.parameters(), grads, adam, config.learning_rate, config.l2);
      } catch (const TrainingError&) {
        throw;
      } catch (const Error& e) {
        throw TrainingError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(b + 1) + ": " + e.what());
      }
      rec.total += loss.total;
      rec.bce += loss.bce;
      rec.auxiliary += loss.auxiliary;
      ++rec.batches;
    }
    if (rec.batches > 0) {
      const auto nb = static_cast<double>(rec.batches);
      rec.total /= nb;
      rec.bce /= nb;
      rec.auxiliary /= nb;
    }

    if (has_eval) {
      fill_eval(rec, calibrator, held_out, config);
    } else {
      rec.eval_ece = rec.eval_mfrce = rec.eval_logloss = std::numeric_limits<double>::quiet_NaN();
      rec.stop_value = rec.total;
    }
    result.history.epochs.push_back(rec);

    if (rec.stop_value < best_value || result.history.best_epoch == 0) {
      best_value = rec.stop_value;
      result.history.best_epoch = epoch;
      result.calibrator = calibrator;
      since_best = 0;
    } else if (config.early_stop_patience > 0 && ++since_best >= config.early_stop_patience) {
      break;
    }
  }
  return result;
}

MetricsReport evaluate_model(const UmnnCalibrator& calibrator, const Dataset& dataset, const MetricConfig& config) {
  if (dataset.empty()) throw MetricError("cannot evaluate on an empty dataset");
  return compute_report(calibrator.predict(dataset), dataset, config);
}

MetricsReport evaluate_model(const ScoreMapping& mapping, const Dataset& dataset, const MetricConfig& config) {
  if (dataset.empty()) throw MetricError("cannot evaluate on an empty dataset");
  return compute_report(mapping.apply(dataset), dataset, config);
}

std::vector<SearchOutcome> grid_search(const std::function<UmnnCalibrator()>& make_calibrator,
                                       const Dataset& calib_set, const Dataset* eval_set, const TrainConfig& base,
                                       const SearchGrid& grid) {
  auto axis = [](const auto& values, auto fallback) {
    using T = decltype(fallback);
    return values.empty() ? std::vector<T>{fallback} : std::vector<T>(values.begin(), values.end());
  };
  std::vector<SearchOutcome> out;
  for (double lr : axis(grid.learning_rates, base.learning_rate))
    for (double l2 : axis(grid.l2s, base.l2))
      for (std::size_t n : axis(grid.num_groups, base.num_groups))
        for (double tau : axis(grid.decays, base.decay))
          for (double lambda : axis(grid.loss_weights, base.loss_weight)) {
            TrainConfig c = base;
            c.learning_rate = lr;
            c.l2 = l2;
            c.num_groups = n;
            c.decay = tau;
            c.loss_weight = lambda;
            TrainResult r = train(make_calibrator(), calib_set, eval_set, c);
            double best = std::numeric_limits<double>::quiet_NaN();
            for (const auto& e : r.history.epochs)
              if (e.epoch == r.history.best_epoch) best = e.stop_value;
            out.push_back({c, best});
          }
  return out;
}

}  // namespace umc
