#include "umc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "text_util.hpp"
#include "umc/error.hpp"

namespace umc {
namespace {

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw MetricError(std::string(what) + ": input lengths differ");
  if (a == 0) throw MetricError(std::string(what) + ": empty input");
}

}  // namespace

double ece(std::span<const double> calibrated, std::span<const double> labels, std::size_t num_bins) {
  check_lengths(calibrated.size(), labels.size(), "ece");
  if (num_bins < 1) throw MetricError("ece: number of bins must be >= 1");
  std::vector<double> residual(num_bins, 0.0);
  const double m = static_cast<double>(num_bins);
  for (std::size_t i = 0; i < calibrated.size(); ++i) {
    const double s = calibrated[i];
    if (!(s >= 0.0 && s <= 1.0)) throw MetricError("ece: calibrated score outside [0,1]");
    const std::size_t bin = std::min(static_cast<std::size_t>(std::floor(s * m)), num_bins - 1);
    residual[bin] += s - labels[i];
  }
  double total = 0.0;
  for (double r : residual) total += std::abs(r);
  return total / static_cast<double>(calibrated.size());
}

FrceResult frce(std::span<const double> calibrated, std::span<const double> labels,
                std::span<const std::int32_t> field_values) {
  check_lengths(calibrated.size(), labels.size(), "frce");
  if (field_values.size() != calibrated.size()) throw MetricError("frce: field column length differs");
  // Ordered map: the summation order is fixed by field value.
  std::map<std::int32_t, std::pair<double, double>> sums;
  for (std::size_t i = 0; i < calibrated.size(); ++i) {
    auto& [residual, positives] = sums[field_values[i]];
    residual += calibrated[i] - labels[i];
    positives += labels[i];
  }
  FrceResult out;
  double total = 0.0;
  for (const auto& [value, sum] : sums) {
    if (sum.second == 0.0) {
      ++out.skipped_values;
      continue;
    }
    total += std::abs(sum.first) / std::abs(sum.second);
    ++out.used_values;
  }
  if (out.used_values == 0) throw MetricError("frce: every field value has zero positives");
  out.value = total / static_cast<double>(calibrated.size());
  return out;
}

double mfrce(std::span<const double> calibrated, std::span<const double> labels,
             const std::vector<std::vector<std::int32_t>>& field_columns) {
  if (field_columns.empty()) throw MetricError("mfrce: at least one field is required");
  double total = 0.0;
  for (const auto& column : field_columns) total += frce(calibrated, labels, column).value;
  return total / static_cast<double>(field_columns.size());
}

double auc(std::span<const double> scores, std::span<const double> labels) {
  check_lengths(scores.size(), labels.size(), "auc");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positives = 0.0, negatives = 0.0, positive_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    // Ranks i+1..j share their average.
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] > 0.5) {
        positives += 1.0;
        positive_rank_sum += avg_rank;
      } else {
        negatives += 1.0;
      }
    }
    i = j;
  }
  if (positives == 0.0 || negatives == 0.0) throw MetricError("auc: both classes must be present");
  return (positive_rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

double gauc(std::span<const double> scores, std::span<const double> labels, std::span<const std::uint32_t> groups,
            GaucWeighting weighting) {
  check_lengths(scores.size(), labels.size(), "gauc");
  if (groups.size() != scores.size()) throw MetricError("gauc: group column length differs");
  std::map<std::uint32_t, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < groups.size(); ++i) members[groups[i]].push_back(i);
  double weighted = 0.0, total_weight = 0.0;
  std::vector<double> s, y;
  for (const auto& [group, rows] : members) {
    s.clear();
    y.clear();
    double pos = 0.0;
    for (auto r : rows) {
      s.push_back(scores[r]);
      y.push_back(labels[r]);
      pos += labels[r] > 0.5 ? 1.0 : 0.0;
    }
    if (pos == 0.0 || pos == static_cast<double>(rows.size())) continue;
    const double w = weighting == GaucWeighting::samples ? static_cast<double>(rows.size()) : pos;
    weighted += w * auc(s, y);
    total_weight += w;
  }
  if (total_weight == 0.0) throw MetricError("gauc: no group contains both classes");
  return weighted / total_weight;
}

MetricsReport compute_report(std::span<const double> calibrated, const Dataset& dataset, const MetricConfig& config) {
  if (dataset.empty()) throw MetricError("cannot evaluate an empty dataset");
  if (calibrated.size() != dataset.size()) throw MetricError("score count does not match the dataset");
  const auto& schema = dataset.schema();
  if (schema.size() == 0) throw MetricError("FRCE needs at least one categorical field");
  const std::vector<double> labels = dataset.labels();

  MetricsReport r;
  r.samples = dataset.size();
  r.ece = ece(calibrated, labels, config.ece_bins);
  r.auc = auc(calibrated, labels);

  std::size_t frce_index = 0;
  if (config.frce_field) {
    const auto idx = schema.index_of(*config.frce_field);
    if (!idx) throw MetricError("unknown FRCE field '" + *config.frce_field + "'");
    frce_index = *idx;
  }
  double sum = 0.0;
  for (std::size_t f = 0; f < schema.size(); ++f) {
    const FrceResult fr = frce(calibrated, labels, dataset.field_column(f));
    r.field_frce.emplace_back(schema.field(f).name, fr.value);
    r.skipped_field_values += fr.skipped_values;
    sum += fr.value;
    if (f == frce_index) {
      r.frce = fr.value;
      r.frce_field = schema.field(f).name;
    }
  }
  r.mfrce = sum / static_cast<double>(schema.size());

  if (dataset.has_groups()) r.gauc = gauc(calibrated, labels, dataset.group_column(), config.gauc_weighting);
  if (dataset.has_true_p()) {
    const auto truth = dataset.true_p_column();
    double mae = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) mae += std::abs(calibrated[i] - truth[i]);
    r.oracle_mae = mae / static_cast<double>(truth.size());
  }
  return r;
}

std::string to_key_value(const MetricsReport& r) {
  std::ostringstream out;
  out << "samples=" << r.samples << '\n';
  out << "auc=" << text::format_double(r.auc) << '\n';
  if (r.gauc) out << "gauc=" << text::format_double(*r.gauc) << '\n';
  out << "ece=" << text::format_double(r.ece) << '\n';
  out << "frce=" << text::format_double(r.frce) << '\n';
  out << "frce_field=" << r.frce_field << '\n';
  out << "mfrce=" << text::format_double(r.mfrce) << '\n';
  for (const auto& [name, value] : r.field_frce) out << "frce." << name << '=' << text::format_double(value) << '\n';
  out << "skipped_field_values=" << r.skipped_field_values << '\n';
  if (r.oracle_mae) out << "oracle_mae=" << text::format_double(*r.oracle_mae) << '\n';
  return out.str();
}

std::string to_table(const MetricsReport& r) {
  std::ostringstream out;
  char buf[128];
  auto row = [&](const std::string& name, double v) {
    std::snprintf(buf, sizeof(buf), "%-22s %.6f\n", name.c_str(), v);
    out << buf;
  };
  row("AUC", r.auc);
  if (r.gauc) row("GAUC", *r.gauc);
  row("ECE", r.ece);
  row("FRCE (" + r.frce_field + ")", r.frce);
  row("MFRCE", r.mfrce);
  for (const auto& [name, value] : r.field_frce) row("  FRCE " + name, value);
  if (r.oracle_mae) row("oracle MAE", *r.oracle_mae);
  std::snprintf(buf, sizeof(buf), "%-22s %zu\n", "samples", r.samples);
  out << buf;
  if (r.skipped_field_values > 0) {
    std::snprintf(buf, sizeof(buf), "%-22s %zu\n", "skipped field values", r.skipped_field_values);
    out << buf;
  }
  return out.str();
}

MetricsReport parse_key_value(const std::string& text_in) {
  MetricsReport r;
  std::istringstream in(text_in);
  std::string line;
  auto number = [](std::string_view v) {
    const auto d = text::parse_double(v);
    if (!d) throw ParseError("metrics report: bad number '" + std::string(v) + "'");
    return *d;
  };
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string_view value = text::trim(std::string_view(line).substr(eq + 1));
    if (key == "samples") r.samples = static_cast<std::size_t>(number(value));
    else if (key == "auc") r.auc = number(value);
    else if (key == "gauc") r.gauc = number(value);
    else if (key == "ece") r.ece = number(value);
    else if (key == "frce") r.frce = number(value);
    else if (key == "frce_field") r.frce_field = std::string(value);
    else if (key == "mfrce") r.mfrce = number(value);
    else if (key.rfind("frce.", 0) == 0) r.field_frce.emplace_back(key.substr(5), number(value));
    else if (key == "skipped_field_values") r.skipped_field_values = static_cast<std::size_t>(number(value));
    else if (key == "oracle_mae") r.oracle_mae = number(value);
    else throw ParseError("metrics report: unknown key '" + key + "'");
  }
  return r;
}

}  // namespace umc
