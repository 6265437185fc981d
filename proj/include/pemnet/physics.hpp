#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "pemnet/config.hpp"

namespace pemnet::physics {

inline constexpr double kGasConstant = 8.314462618;  // J/(mol K)
inline constexpr double kFaraday = 96485.33212;      // C/mol
inline constexpr double kStandardTemperature = 298.15;

enum class DeviceMode { FuelCell, HydrogenPump };

std::string_view to_string(DeviceMode mode);
DeviceMode parse_mode(std::string_view text);

inline constexpr std::size_t kDesignVariables = 11;

/// Column names of the design variables, in factorial order.
inline constexpr std::array<std::string_view, kDesignVariables> kDesignVariableNames = {
    "s_h2",   "s_o2",         "temperature_k", "pressure_atm", "iec_mem", "iec_io",
    "delta_mem_cm", "delta_io_cm", "co_h2_ratio", "load_an",     "load_cat"};

/// One point in the design space. IEC values of 0 encode "not applicable".
struct CellDesign {
  double s_h2 = 1.0;
  double s_o2 = 2.0;         // 0 for hydrogen pumps
  double temperature = 463;  // K
  double pressure = 1.0;     // atm
  double iec_mem = 2.25;     // mequiv/g
  double iec_io = 2.25;      // mequiv/g
  double delta_mem = 0.005;  // cm
  double delta_io = 1e-4;    // cm
  double co_h2_ratio = 0.0;
  double load_anode = 0.35;    // mg_PGM/cm^2
  double load_cathode = 0.35;  // mg_PGM/cm^2
  DeviceMode mode = DeviceMode::FuelCell;

  /// Throws DomainError when an invariant is violated.
  void validate() const;

  std::array<double, kDesignVariables> values() const;
  static CellDesign from_values(const std::array<double, kDesignVariables>& v, DeviceMode mode);

  bool operator==(const CellDesign&) const = default;
};

/// Constants of the explicit-equation model.
struct PhysicsParams {
  double alpha_an = 1.0;
  double alpha_cat = 1.0;
  double i0_ref_an = 0.1;    // A/cm^2 per mg/cm^2 at t_ref
  double i0_ref_cat = 1e-4;  // A/cm^2 per mg/cm^2 at t_ref
  double ea_act = 40e3;      // J/mol
  double sigma0 = 0.1;       // S/cm per mequiv/g
  double ea_cond = 15e3;     // J/mol
  double t_ref = 433.15;     // K
  double i_l0 = 0.5;         // A/cm^2
  double k_co = 1e-3;
  double dh_co = -50e3;      // J/mol
  double r_contact = 0.02;   // Ohm cm^2
  double i_max_pump = 2.0;   // A/cm^2, top of the pump sampling range

  void validate() const;

  /// Reads `name = value` overrides on top of the defaults. Unknown names are errors.
  static PhysicsParams from_config(const KeyValueConfig& cfg);
  KeyValueConfig to_config() const;

  bool operator==(const PhysicsParams&) const = default;
};

struct PolarizationPoint {
  double current_density = 0.0;  // A/cm^2
  double voltage = 0.0;          // V
};

/// Individual loss terms at one operating point, all >= 0.
struct Overpotentials {
  double activation_anode = 0.0;
  double activation_cathode = 0.0;
  double ohmic = 0.0;
  double concentration = 0.0;  // fuel cells only
};

/// Nernst open-circuit potential with p_H2 = p_O2 = pressure. Fuel cells only.
double reversible_voltage(const CellDesign& design);

/// Langmuir CO coverage of the anode catalyst.
double co_coverage(double co_h2_ratio, double temperature, const PhysicsParams& params);

double exchange_current_anode(const CellDesign& design, const PhysicsParams& params);
double exchange_current_cathode(const CellDesign& design, const PhysicsParams& params);

/// Ionic conductivity of a film with the given IEC, S/cm.
double conductivity(double iec, double temperature, const PhysicsParams& params);

/// Area specific resistance in Ohm cm^2; films with IEC = 0 contribute nothing.
double ohmic_resistance(const CellDesign& design, const PhysicsParams& params);

double limiting_current(const CellDesign& design, const PhysicsParams& params);

Overpotentials overpotentials(const CellDesign& design, double current_density,
                              const PhysicsParams& params);

/// Cell voltage. Fuel cell: E_rev minus losses. Hydrogen pump: sum of losses
/// (electrolytic convention, no Nernst term at equal pressures).
double cell_voltage(const CellDesign& design, double current_density, const PhysicsParams& params);

/// Fractions of the sampling range used for an n-point curve. For n = 5 this
/// is {0.05, 0.25, 0.45, 0.65, 0.85}.
std::vector<double> current_fractions(std::size_t n_points);

/// Top of the sampled current range: i_L for fuel cells, i_max_pump for pumps.
double sampling_range(const CellDesign& design, const PhysicsParams& params);

std::vector<PolarizationPoint> sample_curve(const CellDesign& design, std::size_t n_points,
                                            const PhysicsParams& params);

/// Multiplicative/additive changes applied to a parameter set to build a
/// "different device" from the same equations.
struct Perturbation {
  double ohmic_scale = 1.0;      // multiplies every ohmic resistance term
  double i0_cathode_scale = 1.0;
  double ea_cond_shift = 0.0;    // J/mol
};

PhysicsParams perturb(const PhysicsParams& params, const Perturbation& p);

}  // namespace pemnet::physics
