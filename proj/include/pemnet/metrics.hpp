#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pemnet/dataset.hpp"
#include "pemnet/netcore.hpp"

namespace pemnet::metrics {

using physics::PolarizationPoint;

/// 100 * RMSE / mean(truth), in percent.
double rrmse(std::span<const double> pred, std::span<const double> truth);

struct EvalReport {
  std::string dataset_id;
  double condition = 0.0;  // K
  bool holdout = false;
  double rrmse_percent = 0.0;
  std::size_t n_points = 0;
  std::vector<PolarizationPoint> measured;
  std::vector<PolarizationPoint> predicted;
  std::string provenance;
  std::string normalization = "mean";
};

/// Scores the model on the held-out condition of `set`.
EvalReport evaluate_holdout(const net::NetworkModel& model, const dataset::ExperimentalSet& set);
/// One report per condition, holdout flagged.
std::vector<EvalReport> evaluate_conditions(const net::NetworkModel& model, const dataset::ExperimentalSet& set);

/// The explicit-equation model itself scored against the measurements of one condition.
EvalReport evaluate_eem(const physics::PhysicsParams& params, const dataset::ExperimentalSet& set,
                        std::size_t condition);

/// Model predictions on an ascending current grid, in volts.
std::vector<PolarizationPoint> predict_curve(const net::NetworkModel& model, const physics::CellDesign& design,
                                             std::span<const double> currents);

/// Evenly spaced grid of `n` points on [lo, hi].
std::vector<double> linear_grid(double lo, double hi, std::size_t n);

struct Dispersion {
  double mean_distance = 0.0;
  std::size_t pairs = 0;
  std::size_t skipped_pairs = 0;  // pairs involving a zero vector
  bool subsampled = false;
};

inline constexpr std::size_t kDispersionExactLimit = 2000;

/// Mean pairwise cosine distance of the feature vectors. Exact up to 2000
/// records, over a seeded 2000-record subsample above that.
Dispersion cosine_dispersion(std::span<const dataset::SampleRecord> records, std::uint64_t seed = 0);

std::string report_json(const EvalReport& report, const std::optional<EvalReport>& eem = std::nullopt);

/// Standalone SVG overlay of measured points, model curve and optional EEM curve.
std::string curve_svg(const std::string& title, std::span<const PolarizationPoint> measured,
                      std::span<const PolarizationPoint> model, std::span<const PolarizationPoint> eem);

/// CSV of the plotted series: series,current_a_cm2,voltage_v.
std::string curve_csv(std::span<const PolarizationPoint> measured, std::span<const PolarizationPoint> model,
                      std::span<const PolarizationPoint> eem);

}  // namespace pemnet::metrics
