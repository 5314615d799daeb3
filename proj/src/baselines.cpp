#include "umc/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "umc/error.hpp"
#include "umc/nn.hpp"

namespace umc {
namespace {

void check_inputs(std::span<const double> scores, std::span<const double> labels, const char* what) {
  if (scores.size() != labels.size()) throw FitError(std::string(what) + ": scores and labels differ in length");
  if (scores.empty()) throw FitError(std::string(what) + ": empty calibration set");
}

std::vector<std::size_t> sorted_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  return order;
}

IsotonicSteps isotonic_steps(std::span<const double> scores, std::span<const double> labels) {
  check_inputs(scores, labels, "isotonic");
  const auto order = sorted_order(scores);
  // Collapse ties into weighted points.
  std::vector<double> xs, ys, ws;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) sum += labels[order[j++]];
    xs.push_back(scores[order[i]]);
    ws.push_back(static_cast<double>(j - i));
    ys.push_back(sum / static_cast<double>(j - i));
    i = j;
  }
  const std::vector<double> fitted = pool_adjacent_violators(ys, ws);
  IsotonicSteps steps;
  for (std::size_t i = 0; i < xs.size();) {
    std::size_t j = i;
    double weight = 0.0;
    while (j < xs.size() && fitted[j] == fitted[i]) weight += ws[j++];
    steps.lower.push_back(xs[i]);
    steps.upper.push_back(xs[j - 1]);
    steps.values.push_back(fitted[i]);
    steps.weights.push_back(weight);
    i = j;
  }
  return steps;
}

double clamp_unit(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

std::vector<double> pool_adjacent_violators(std::span<const double> y, std::span<const double> w) {
  if (y.size() != w.size()) throw FitError("pool_adjacent_violators: y and w differ in length");
  struct Block {
    double weight;
    double weighted_sum;
    std::size_t count;
    double mean() const { return weighted_sum / weight; }
  };
  std::vector<Block> blocks;
  blocks.reserve(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(w[i] > 0.0)) throw FitError("pool_adjacent_violators: weights must be positive");
    blocks.push_back({w[i], w[i] * y[i], 1});
    while (blocks.size() >= 2 && blocks[blocks.size() - 2].mean() > blocks.back().mean()) {
      Block last = blocks.back();
      blocks.pop_back();
      blocks.back().weight += last.weight;
      blocks.back().weighted_sum += last.weighted_sum;
      blocks.back().count += last.count;
    }
  }
  std::vector<double> out;
  out.reserve(y.size());
  for (const auto& b : blocks) out.insert(out.end(), b.count, b.mean());
  return out;
}

std::string_view ScoreMapping::kind() const {
  struct Visitor {
    std::string_view operator()(const IdentityMap&) const { return "none"; }
    std::string_view operator()(const HistogramBins&) const { return "histbin"; }
    std::string_view operator()(const IsotonicSteps&) const { return "isotonic"; }
    std::string_view operator()(const InterpolationKnots&) const { return "sir"; }
    std::string_view operator()(const PlattParams&) const { return "platt"; }
  };
  return std::visit(Visitor{}, data_);
}

double ScoreMapping::apply(double s) const {
  struct Visitor {
    double s;
    double operator()(const IdentityMap&) const { return clamp_unit(s); }
    double operator()(const HistogramBins& h) const {
      const auto it = std::lower_bound(h.upper_edges.begin(), h.upper_edges.end(), s);
      const std::size_t bin =
          it == h.upper_edges.end() ? h.values.size() - 1 : static_cast<std::size_t>(it - h.upper_edges.begin());
      return h.values[bin];
    }
    double operator()(const IsotonicSteps& st) const {
      const auto it = std::upper_bound(st.lower.begin(), st.lower.end(), s);
      const std::size_t block = it == st.lower.begin() ? 0 : static_cast<std::size_t>(it - st.lower.begin()) - 1;
      return st.values[block];
    }
    double operator()(const InterpolationKnots& k) const {
      if (s <= k.knot_x.front()) return k.knot_y.front();
      if (s >= k.knot_x.back()) return k.knot_y.back();
      const auto it = std::upper_bound(k.knot_x.begin(), k.knot_x.end(), s);
      const std::size_t hi = static_cast<std::size_t>(it - k.knot_x.begin());
      const std::size_t lo = hi - 1;
      const double frac = (s - k.knot_x[lo]) / (k.knot_x[hi] - k.knot_x[lo]);
      return clamp_unit(k.knot_y[lo] + frac * (k.knot_y[hi] - k.knot_y[lo]));
    }
    double operator()(const PlattParams& p) const {
      if (s <= 0.0) return p.a > 0.0 ? 0.0 : (p.a < 0.0 ? 1.0 : nn::sigmoid(p.b));
      if (s >= 1.0) return p.a > 0.0 ? 1.0 : (p.a < 0.0 ? 0.0 : nn::sigmoid(p.b));
      return nn::sigmoid(p.a * nn::logit(s) + p.b);
    }
  };
  return std::visit(Visitor{s}, data_);
}

std::vector<double> ScoreMapping::apply(std::span<const double> s) const {
  std::vector<double> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = apply(s[i]);
  return out;
}

std::vector<double> ScoreMapping::apply(const Dataset& dataset) const { return apply(dataset.scores()); }

std::string ScoreMapping::serialize() const {
  nlohmann::json j;
  j["format"] = "umc-mapping";
  j["version"] = 1;
  j["kind"] = std::string(kind());
  struct Visitor {
    nlohmann::json& j;
    void operator()(const IdentityMap&) const {}
    void operator()(const HistogramBins& h) const {
      j["upper_edges"] = h.upper_edges;
      j["values"] = h.values;
    }
    void operator()(const IsotonicSteps& st) const {
      j["lower"] = st.lower;
      j["upper"] = st.upper;
      j["values"] = st.values;
      j["weights"] = st.weights;
    }
    void operator()(const InterpolationKnots& k) const {
      j["knot_x"] = k.knot_x;
      j["knot_y"] = k.knot_y;
    }
    void operator()(const PlattParams& p) const {
      j["a"] = p.a;
      j["b"] = p.b;
      j["iterations"] = p.iterations;
      j["converged"] = p.converged;
    }
  };
  std::visit(Visitor{j}, data_);
  return j.dump(1) + "\n";
}

ScoreMapping ScoreMapping::parse(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("mapping artifact is not valid JSON: ") + e.what());
  }
  if (j.value("format", "") != "umc-mapping") throw ParseError("not a score-mapping artifact");
  try {
    const std::string kind = j.at("kind");
    if (kind == "none") return ScoreMapping(IdentityMap{});
    if (kind == "histbin") return ScoreMapping(HistogramBins{j.at("upper_edges"), j.at("values")});
    if (kind == "isotonic")
      return ScoreMapping(IsotonicSteps{j.at("lower"), j.at("upper"), j.at("values"), j.at("weights")});
    if (kind == "sir") return ScoreMapping(InterpolationKnots{j.at("knot_x"), j.at("knot_y")});
    if (kind == "platt") return ScoreMapping(PlattParams{j.at("a"), j.at("b"), j.at("iterations"), j.at("converged")});
    throw ParseError("unknown mapping kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed mapping artifact: ") + e.what());
  }
}

ScoreMapping fit_histogram_binning(std::span<const double> scores, std::span<const double> labels,
                                   std::size_t num_bins) {
  check_inputs(scores, labels, "histogram binning");
  if (num_bins < 1) throw ConfigError("histogram binning needs at least one bin");
  const std::size_t n = scores.size();
  if (num_bins > n) throw ConfigError("histogram binning: more bins than samples");
  const auto order = sorted_order(scores);

  std::vector<std::size_t> cuts{0};
  for (std::size_t b = 1; b < num_bins; ++b) {
    std::size_t cut = std::max(b * n / num_bins, cuts.back());
    while (cut > 0 && cut < n && scores[order[cut - 1]] == scores[order[cut]]) ++cut;
    if (cut > cuts.back() && cut < n) cuts.push_back(cut);
  }
  cuts.push_back(n);

  HistogramBins bins;
  for (std::size_t b = 0; b + 1 < cuts.size(); ++b) {
    double positives = 0.0;
    for (std::size_t i = cuts[b]; i < cuts[b + 1]; ++i) positives += labels[order[i]];
    bins.upper_edges.push_back(scores[order[cuts[b + 1] - 1]]);
    bins.values.push_back(positives / static_cast<double>(cuts[b + 1] - cuts[b]));
  }
  return ScoreMapping(std::move(bins));
}

ScoreMapping fit_histogram_binning(const Dataset& calib, std::size_t num_bins) {
  return fit_histogram_binning(calib.scores(), calib.labels(), num_bins);
}

ScoreMapping fit_isotonic(std::span<const double> scores, std::span<const double> labels) {
  return ScoreMapping(isotonic_steps(scores, labels));
}

ScoreMapping fit_isotonic(const Dataset& calib) { return fit_isotonic(calib.scores(), calib.labels()); }

ScoreMapping smooth_isotonic(const IsotonicSteps& steps) {
  if (steps.values.empty()) throw FitError("smoothed isotonic: no blocks");
  InterpolationKnots knots;
  for (std::size_t i = 0; i < steps.values.size(); ++i) {
    knots.knot_x.push_back(0.5 * (steps.lower[i] + steps.upper[i]));
    knots.knot_y.push_back(steps.values[i]);
  }
  return ScoreMapping(std::move(knots));
}

ScoreMapping fit_sir(std::span<const double> scores, std::span<const double> labels) {
  return smooth_isotonic(isotonic_steps(scores, labels));
}

ScoreMapping fit_sir(const Dataset& calib) { return fit_sir(calib.scores(), calib.labels()); }

ScoreMapping fit_platt(std::span<const double> scores, std::span<const double> labels, std::size_t max_iters,
                       double tol) {
  check_inputs(scores, labels, "platt");
  double positives = 0.0;
  for (double y : labels) positives += y;
  if (positives == 0.0 || positives == static_cast<double>(labels.size()))
    throw FitError("platt scaling needs both classes in the calibration set");

  const std::size_t n = scores.size();
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = nn::logit(std::clamp(scores[i], 1e-15, 1.0 - 1e-15));

  auto loss_at = [&](double a, double b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = a * z[i] + b;
      // log(1 + e^u) - y u, computed without overflow
      sum += (u > 0.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u))) - labels[i] * u;
    }
    return sum / static_cast<double>(n);
  };

  PlattParams p;
  double loss = loss_at(p.a, p.b);
  for (p.iterations = 0; p.iterations < max_iters; ++p.iterations) {
    double ga = 0.0, gb = 0.0, haa = 0.0, hab = 0.0, hbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double q = nn::sigmoid(p.a * z[i] + p.b);
      const double r = q - labels[i];
      const double c = q * (1.0 - q);
      ga += r * z[i];
      gb += r;
      haa += c * z[i] * z[i];
      hab += c * z[i];
      hbb += c;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    ga *= inv_n, gb *= inv_n, haa *= inv_n, hab *= inv_n, hbb *= inv_n;
    if (std::max(std::abs(ga), std::abs(gb)) < tol) {
      p.converged = true;
      break;
    }
    const double ridge = 1e-12;
    haa += ridge;
    hbb += ridge;
    const double det = haa * hbb - hab * hab;
    double da = -(hbb * ga - hab * gb) / det;
    double db = -(haa * gb - hab * ga) / det;
    if (!std::isfinite(da) || !std::isfinite(db)) {
      da = -ga;
      db = -gb;
    }
    double step = 1.0;
    double next = loss_at(p.a + da, p.b + db);
    while (next > loss && step > 1e-10) {
      step *= 0.5;
      next = loss_at(p.a + step * da, p.b + step * db);
    }
    if (next > loss) break;
    p.a += step * da;
    p.b += step * db;
    loss = next;
  }
  return ScoreMapping(p);
}

ScoreMapping fit_platt(const Dataset& calib, std::size_t max_iters, double tol) {
  return fit_platt(calib.scores(), calib.labels(), max_iters, tol);
}

}  // namespace umc
