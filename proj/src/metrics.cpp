#include "pemnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "pemnet/error.hpp"
#include "pemnet/rng.hpp"

namespace pemnet::metrics {

double rrmse(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw ShapeError("rrmse: prediction and truth lengths differ");
  if (truth.empty()) throw ShapeError("rrmse: empty input");
  double sq = 0.0, sum = 0.0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const double r = pred[k] - truth[k];
    sq += r * r;
    sum += truth[k];
  }
  const double n = static_cast<double>(truth.size());
  const double mean = sum / n;
  if (!(mean > 0)) throw DomainError("rrmse: mean of the true values must be positive");
  return 100.0 * std::sqrt(sq / n) / mean;
}

std::vector<PolarizationPoint> predict_curve(const net::NetworkModel& model, const physics::CellDesign& design,
                                             std::span<const double> currents) {
  if (!std::is_sorted(currents.begin(), currents.end())) throw ConfigError("current grid must be ascending");
  std::vector<dataset::FeatureVector> features;
  features.reserve(currents.size());
  for (double i : currents) features.push_back(dataset::make_features(design, i));
  const auto volts = net::predict(model, features);
  std::vector<PolarizationPoint> curve;
  curve.reserve(currents.size());
  for (std::size_t k = 0; k < currents.size(); ++k) {
    if (!std::isfinite(volts[k])) {
      std::ostringstream os;
      os << "non-finite prediction at current " << currents[k] << " A/cm2, T=" << design.temperature << " K";
      throw NumericError(os.str());
    }
    curve.push_back({currents[k], volts[k]});
  }
  return curve;
}

std::vector<double> linear_grid(double lo, double hi, std::size_t n) {
  if (n == 0) return {};
  if (n == 1) return {lo};
  std::vector<double> g(n);
  for (std::size_t k = 0; k < n; ++k) g[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
  return g;
}

namespace {

EvalReport score(const std::string& id, double condition, bool holdout, std::vector<PolarizationPoint> measured,
                 std::vector<PolarizationPoint> predicted) {
  EvalReport r;
  r.dataset_id = id;
  r.condition = condition;
  r.holdout = holdout;
  r.n_points = measured.size();
  std::vector<double> truth, pred;
  for (const auto& p : measured) truth.push_back(p.voltage);
  for (const auto& p : predicted) pred.push_back(p.voltage);
  r.rrmse_percent = rrmse(pred, truth);
  r.measured = std::move(measured);
  r.predicted = std::move(predicted);
  return r;
}

EvalReport evaluate_condition(const net::NetworkModel& model, const dataset::ExperimentalSet& set, std::size_t c) {
  const auto& measured = set.points.at(c);
  if (measured.empty()) throw ConfigError(set.id + ": no points to evaluate");
  std::vector<double> currents;
  for (const auto& p : measured) currents.push_back(p.current_density);
  auto predicted = predict_curve(model, set.design_at(c), currents);
  const bool holdout = std::abs(set.conditions[c] - set.holdout_condition) < 1e-6;
  EvalReport r = score(set.id, set.conditions[c], holdout, measured, std::move(predicted));
  r.provenance = model.provenance;
  return r;
}

}  // namespace

EvalReport evaluate_holdout(const net::NetworkModel& model, const dataset::ExperimentalSet& set) {
  return evaluate_condition(model, set, set.condition_index(set.holdout_condition));
}

std::vector<EvalReport> evaluate_conditions(const net::NetworkModel& model, const dataset::ExperimentalSet& set) {
  std::vector<EvalReport> out;
  for (std::size_t c = 0; c < set.conditions.size(); ++c) out.push_back(evaluate_condition(model, set, c));
  return out;
}

EvalReport evaluate_eem(const physics::PhysicsParams& params, const dataset::ExperimentalSet& set,
                        std::size_t condition) {
  const auto design = set.design_at(condition);
  const auto& measured = set.points.at(condition);
  std::vector<PolarizationPoint> predicted;
  for (const auto& p : measured)
    predicted.push_back({p.current_density, physics::cell_voltage(design, p.current_density, params)});
  const bool holdout = std::abs(set.conditions[condition] - set.holdout_condition) < 1e-6;
  EvalReport r = score(set.id, set.conditions[condition], holdout, measured, std::move(predicted));
  r.provenance = "eem";
  return r;
}

Dispersion cosine_dispersion(std::span<const dataset::SampleRecord> records, std::uint64_t seed) {
  if (records.size() < 2) throw ConfigError("dispersion needs at least 2 records");
  std::vector<std::size_t> idx(records.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Dispersion d;
  if (records.size() > kDispersionExactLimit) {
    SplitMix64 rng(seed);
    rng.shuffle(std::span(idx));
    idx.resize(kDispersionExactLimit);
    std::sort(idx.begin(), idx.end());
    d.subsampled = true;
  }
  std::vector<double> norms(idx.size());
  for (std::size_t a = 0; a < idx.size(); ++a) {
    const auto& f = records[idx[a]].features;
    norms[a] = std::sqrt(std::inner_product(f.begin(), f.end(), f.begin(), 0.0));
  }
  double sum = 0.0;
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      if (norms[a] == 0.0 || norms[b] == 0.0) {
        ++d.skipped_pairs;
        continue;
      }
      const auto& fa = records[idx[a]].features;
      const auto& fb = records[idx[b]].features;
      const double cos = std::inner_product(fa.begin(), fa.end(), fb.begin(), 0.0) / (norms[a] * norms[b]);
      sum += 1.0 - std::clamp(cos, -1.0, 1.0);
      ++d.pairs;
    }
  }
  d.mean_distance = d.pairs ? sum / static_cast<double>(d.pairs) : 0.0;
  return d;
}

namespace {

nlohmann::json curve_json(std::span<const PolarizationPoint> pts) {
  auto arr = nlohmann::json::array();
  for (const auto& p : pts) arr.push_back({p.current_density, p.voltage});
  return arr;
}

}  // namespace

std::string report_json(const EvalReport& report, const std::optional<EvalReport>& eem) {
  nlohmann::json j;
  j["dataset_id"] = report.dataset_id;
  j["condition_c"] = report.condition - dataset::kCelsiusOffset;
  j["holdout"] = report.holdout;
  j["rrmse_percent"] = report.rrmse_percent;
  j["rrmse_normalization"] = report.normalization;
  j["n_points"] = report.n_points;
  j["measured"] = curve_json(report.measured);
  j["predicted"] = curve_json(report.predicted);
  j["provenance"] = report.provenance;
  if (eem) j["eem_baseline_rrmse_percent"] = eem->rrmse_percent;
  return j.dump(2) + "\n";
}

std::string curve_svg(const std::string& title, std::span<const PolarizationPoint> measured,
                      std::span<const PolarizationPoint> model, std::span<const PolarizationPoint> eem) {
  constexpr double kW = 640, kH = 420, kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;
  double x_max = 0, y_min = 1e300, y_max = -1e300;
  for (auto series : {measured, model, eem})
    for (const auto& p : series) {
      x_max = std::max(x_max, p.current_density);
      y_min = std::min(y_min, p.voltage);
      y_max = std::max(y_max, p.voltage);
    }
  if (x_max <= 0) x_max = 1;
  if (!(y_max > y_min)) {
    y_min -= 0.5;
    y_max += 0.5;
  }
  const double pad = 0.05 * (y_max - y_min);
  y_min -= pad;
  y_max += pad;
  auto px = [&](double x) { return kLeft + x / x_max * (kW - kLeft - kRight); };
  auto py = [&](double y) { return kH - kBottom - (y - y_min) / (y_max - y_min) * (kH - kTop - kBottom); };

  std::ostringstream os;
  os.precision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title << "</text>\n"
     << "<line x1=\"" << kLeft << "\" y1=\"" << kH - kBottom << "\" x2=\"" << kW - kRight << "\" y2=\""
     << kH - kBottom << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kH - kBottom
     << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x_max * k / 4.0, yv = y_min + (y_max - y_min) * k / 4.0;
    os << "<text x=\"" << px(xv) << "\" y=\"" << kH - kBottom + 18 << "\" text-anchor=\"middle\" font-size=\"11\">"
       << xv << "</text>\n"
       << "<text x=\"" << kLeft - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\" font-size=\"11\">" << yv
       << "</text>\n";
  }
  os << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 10
     << "\" text-anchor=\"middle\" font-size=\"13\">current density (A/cm2)</text>\n"
     << "<text x=\"18\" y=\"" << kH / 2 << "\" transform=\"rotate(-90 18 " << kH / 2
     << ")\" text-anchor=\"middle\" font-size=\"13\">voltage (V)</text>\n";
  auto polyline = [&](std::span<const PolarizationPoint> pts, const char* color, const char* dash) {
    if (pts.empty()) return;
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"" << dash << " points=\"";
    for (const auto& p : pts) os << px(p.current_density) << ',' << py(p.voltage) << ' ';
    os << "\"/>\n";
  };
  polyline(model, "#1f77b4", "");
  polyline(eem, "#7f7f7f", " stroke-dasharray=\"6 4\"");
  for (const auto& p : measured)
    os << "<circle cx=\"" << px(p.current_density) << "\" cy=\"" << py(p.voltage)
       << "\" r=\"3.5\" fill=\"#d62728\"/>\n";
  os << "</svg>\n";
  return os.str();
}

std::string curve_csv(std::span<const PolarizationPoint> measured, std::span<const PolarizationPoint> model,
                      std::span<const PolarizationPoint> eem) {
  std::ostringstream os;
  os.precision(17);
  os << "series,current_a_cm2,voltage_v\n";
  for (const auto& p : measured) os << "measured," << p.current_density << ',' << p.voltage << '\n';
  for (const auto& p : model) os << "model," << p.current_density << ',' << p.voltage << '\n';
  for (const auto& p : eem) os << "eem," << p.current_density << ',' << p.voltage << '\n';
  return os.str();
}

}  // namespace pemnet::metrics
