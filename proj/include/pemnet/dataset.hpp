#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pemnet/config.hpp"
#include "pemnet/physics.hpp"

namespace pemnet::dataset {

using physics::CellDesign;
using physics::DeviceMode;
using physics::PhysicsParams;
using physics::PolarizationPoint;

/// The 11 design variables followed by current density.
inline constexpr std::size_t kFeatureWidth = physics::kDesignVariables + 1;

using FeatureVector = std::array<double, kFeatureWidth>;

struct SampleRecord {
  FeatureVector features{};
  double label = 0.0;  // voltage, V

  bool operator==(const SampleRecord&) const = default;
};

FeatureVector make_features(const CellDesign& design, double current_density);

/// Ordered levels for every design variable of a full factorial sweep.
struct FactorialSpec {
  std::array<std::vector<double>, physics::kDesignVariables> levels;
  DeviceMode mode = DeviceMode::FuelCell;

  /// Three levels per variable as used for the simulated source data.
  static FactorialSpec default_levels();
  /// `levels.<name> = a,b,c` entries override the defaults.
  static FactorialSpec from_config(const KeyValueConfig& cfg);

  std::size_t design_count() const;
  void validate() const;
};

/// Full Cartesian product, lexicographic with the first variable slowest.
std::vector<CellDesign> generate_factorial(const FactorialSpec& spec);

/// |designs| * n_points records ordered by design then ascending current.
std::vector<SampleRecord> build_source_dataset(std::span<const CellDesign> designs, std::size_t n_points,
                                               const PhysicsParams& params);

/// Seeded selection of `count` records, returned in their original order.
std::vector<SampleRecord> subsample(std::span<const SampleRecord> records, std::size_t count,
                                    std::uint64_t seed);

/// Seeded split into (train, held-out); both keep original relative order.
std::pair<std::vector<SampleRecord>, std::vector<SampleRecord>> split_fraction(
    std::span<const SampleRecord> records, double heldout_fraction, std::uint64_t seed);

/// Per-feature z-scoring with population statistics. Zero-variance columns
/// keep std = 1 so they map to 0.
struct Standardizer {
  FeatureVector mean{};
  FeatureVector std{};
  double label_mean = 0.0;
  double label_std = 1.0;

  static Standardizer identity();

  FeatureVector apply(const FeatureVector& x) const;
  FeatureVector invert(const FeatureVector& z) const;
  /// Dynamic-width overloads; throw ShapeError on a width other than 12.
  std::vector<double> apply(std::span<const double> x) const;
  std::vector<double> invert(std::span<const double> z) const;

  double apply_label(double y) const { return (y - label_mean) / label_std; }
  double invert_label(double z) const { return z * label_std + label_mean; }

  bool operator==(const Standardizer&) const = default;
};

Standardizer fit_standardizer(std::span<const SampleRecord> records);
std::vector<SampleRecord> apply_standardizer(const Standardizer& s, std::span<const SampleRecord> records);
std::vector<SampleRecord> invert_standardizer(const Standardizer& s, std::span<const SampleRecord> records);

std::string standardizer_to_json(const Standardizer& s);
Standardizer standardizer_from_json(const std::string& text);

/// Framed little-endian binary dataset file.
void write_dataset(const std::filesystem::path& path, std::span<const SampleRecord> records);
std::vector<SampleRecord> read_dataset(const std::filesystem::path& path);
void write_dataset_csv(const std::filesystem::path& path, std::span<const SampleRecord> records);

/// Measured (or synthetic) polarization curves for one device at several temperatures.
struct ExperimentalSet {
  std::string id;
  CellDesign design_base;  // temperature overridden per condition
  std::vector<double> conditions;  // K, ascending
  std::vector<std::vector<PolarizationPoint>> points;  // parallel to conditions
  double holdout_condition = 0.0;  // K

  void validate() const;
  std::size_t total_points() const;
  /// Index of a condition; throws ConfigError if absent.
  std::size_t condition_index(double temperature) const;
  CellDesign design_at(std::size_t condition) const;
  std::vector<SampleRecord> records_at(std::size_t condition) const;
  std::vector<SampleRecord> all_records() const;
};

inline constexpr double kCelsiusOffset = 273.15;

ExperimentalSet parse_experimental_csv(const std::string& text);
ExperimentalSet load_experimental_csv(const std::filesystem::path& path);
std::string format_experimental_csv(const ExperimentalSet& set);
void write_experimental_csv(const std::filesystem::path& path, const ExperimentalSet& set);

struct HoldoutSplit {
  std::vector<SampleRecord> train;
  std::vector<SampleRecord> test;
};

/// Leave-one-condition-out partition. An empty training side is an error.
HoldoutSplit split_holdout(const ExperimentalSet& set);

/// Device metadata without measurements.
struct DeviceDescriptor {
  std::string id;
  CellDesign design;
  std::vector<double> temps_c;
  double holdout_c = 0.0;
};

/// The MEA and pump devices used as few-shot targets; "n/a" IEC entries are 0.
std::vector<DeviceDescriptor> reference_devices();

/// Samples `points_per_condition` points per temperature from the given EEM
/// parameters, giving a synthetic stand-in for a measured set.
ExperimentalSet make_synthetic_set(const DeviceDescriptor& device, std::size_t points_per_condition,
                                   const PhysicsParams& params);

/// Order-sensitive content hash of a record list.
std::string records_hash(std::span<const SampleRecord> records);

}  // namespace pemnet::dataset
