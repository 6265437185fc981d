#include "pemnet/physics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pemnet/error.hpp"

namespace pemnet::physics {
namespace {

double arrhenius(double activation_energy, double temperature, double t_ref) {
  return std::exp(-activation_energy / kGasConstant * (1.0 / temperature - 1.0 / t_ref));
}

double activation_loss(double current_density, double i0, double alpha, double temperature) {
  return kGasConstant * temperature / (alpha * kFaraday) * std::asinh(current_density / (2.0 * i0));
}

void require_fuel_cell(const CellDesign& design, const char* what) {
  if (design.mode != DeviceMode::FuelCell)
    throw DomainError(std::string(what) + " is only defined for fuel cells");
}

std::string format_design(const CellDesign& d) {
  std::ostringstream os;
  os.precision(6);
  const auto v = d.values();
  os << '(' << to_string(d.mode);
  for (std::size_t k = 0; k < v.size(); ++k) os << ", " << kDesignVariableNames[k] << '=' << v[k];
  os << ')';
  return os.str();
}

}  // namespace

std::string_view to_string(DeviceMode mode) {
  return mode == DeviceMode::FuelCell ? "fuelcell" : "pump";
}

DeviceMode parse_mode(std::string_view text) {
  if (text == "fuelcell") return DeviceMode::FuelCell;
  if (text == "pump") return DeviceMode::HydrogenPump;
  throw ConfigError("unknown device mode '" + std::string(text) + "' (expected fuelcell|pump)");
}

void CellDesign::validate() const {
  auto fail = [this](const std::string& why) { throw DomainError(why + " in design " + format_design(*this)); };
  for (double v : values())
    if (!std::isfinite(v)) fail("non-finite field");
  if (temperature <= 0) fail("temperature must be > 0");
  if (pressure <= 0) fail("pressure must be > 0");
  if (delta_mem <= 0) fail("delta_mem must be > 0");
  if (delta_io < 0) fail("delta_io must be >= 0");
  if (iec_mem < 0 || iec_io < 0) fail("IEC must be >= 0");
  if (co_h2_ratio < 0 || co_h2_ratio >= 1) fail("co_h2_ratio must lie in [0, 1)");
  if (load_anode <= 0 || load_cathode <= 0) fail("catalyst loadings must be > 0");
  if (s_h2 < 1) fail("s_h2 must be >= 1");
  if (s_o2 < 0) fail("s_o2 must be >= 0");
  if (mode == DeviceMode::FuelCell && s_o2 < 1) fail("fuel cells need s_o2 >= 1");
}

std::array<double, kDesignVariables> CellDesign::values() const {
  return {s_h2,    s_o2,      temperature, pressure,    iec_mem,     iec_io,
          delta_mem, delta_io, co_h2_ratio, load_anode, load_cathode};
}

CellDesign CellDesign::from_values(const std::array<double, kDesignVariables>& v, DeviceMode mode) {
  return CellDesign{v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9], v[10], mode};
}

void PhysicsParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be > 0");
  };
  positive(i0_ref_an, "i0_ref_an");
  positive(i0_ref_cat, "i0_ref_cat");
  positive(ea_act, "ea_act");
  positive(sigma0, "sigma0");
  positive(ea_cond, "ea_cond");
  positive(t_ref, "t_ref");
  positive(i_l0, "i_l0");
  positive(k_co, "k_co");
  positive(r_contact, "r_contact");
  positive(i_max_pump, "i_max_pump");
  for (double a : {alpha_an, alpha_cat})
    if (!(a > 0 && a <= 2)) throw ConfigError("alpha values must lie in (0, 2]");
  if (!(dh_co < 0)) throw ConfigError("dh_co must be < 0");
}

PhysicsParams PhysicsParams::from_config(const KeyValueConfig& cfg) {
  PhysicsParams p;
  const std::pair<const char*, double*> fields[] = {
      {"alpha_an", &p.alpha_an},   {"alpha_cat", &p.alpha_cat}, {"i0_ref_an", &p.i0_ref_an},
      {"i0_ref_cat", &p.i0_ref_cat}, {"ea_act", &p.ea_act},     {"sigma0", &p.sigma0},
      {"ea_cond", &p.ea_cond},     {"t_ref", &p.t_ref},         {"i_l0", &p.i_l0},
      {"k_co", &p.k_co},           {"dh_co", &p.dh_co},         {"r_contact", &p.r_contact},
      {"i_max_pump", &p.i_max_pump}};
  for (const auto& [key, value] : cfg.entries()) {
    bool known = false;
    for (const auto& [name, target] : fields) {
      if (key == name) {
        *target = parse_real(value, key);
        known = true;
      }
    }
    if (!known) throw ConfigError("unknown physics parameter '" + key + "'");
  }
  p.validate();
  return p;
}

KeyValueConfig PhysicsParams::to_config() const {
  KeyValueConfig cfg;
  auto put = [&cfg](const char* k, double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    cfg.set(k, os.str());
  };
  put("alpha_an", alpha_an);
  put("alpha_cat", alpha_cat);
  put("i0_ref_an", i0_ref_an);
  put("i0_ref_cat", i0_ref_cat);
  put("ea_act", ea_act);
  put("sigma0", sigma0);
  put("ea_cond", ea_cond);
  put("t_ref", t_ref);
  put("i_l0", i_l0);
  put("k_co", k_co);
  put("dh_co", dh_co);
  put("r_contact", r_contact);
  put("i_max_pump", i_max_pump);
  return cfg;
}

double reversible_voltage(const CellDesign& design) {
  require_fuel_cell(design, "reversible voltage");
  const double t = design.temperature;
  const double p = design.pressure;
  return 1.229 - 0.9e-3 * (t - kStandardTemperature) +
         kGasConstant * t / (2.0 * kFaraday) * std::log(p * std::sqrt(p));
}

double co_coverage(double co_h2_ratio, double temperature, const PhysicsParams& params) {
  if (!(co_h2_ratio >= 0 && co_h2_ratio < 1)) throw DomainError("co_h2_ratio must lie in [0, 1)");
  if (!(temperature > 0)) throw DomainError("temperature must be > 0");
  const double k = params.k_co * std::exp(-params.dh_co / (kGasConstant * temperature));
  const double kx = k * co_h2_ratio;
  return kx / (1.0 + kx);
}

double exchange_current_anode(const CellDesign& design, const PhysicsParams& params) {
  const double theta = co_coverage(design.co_h2_ratio, design.temperature, params);
  return params.i0_ref_an * design.load_anode * (1.0 - theta) *
         arrhenius(params.ea_act, design.temperature, params.t_ref);
}

double exchange_current_cathode(const CellDesign& design, const PhysicsParams& params) {
  return params.i0_ref_cat * design.load_cathode *
         arrhenius(params.ea_act, design.temperature, params.t_ref);
}

double conductivity(double iec, double temperature, const PhysicsParams& params) {
  return params.sigma0 * iec * arrhenius(params.ea_cond, temperature, params.t_ref);
}

double ohmic_resistance(const CellDesign& design, const PhysicsParams& params) {
  double r = params.r_contact;
  if (design.iec_mem > 0) r += design.delta_mem / conductivity(design.iec_mem, design.temperature, params);
  if (design.iec_io > 0) r += design.delta_io / conductivity(design.iec_io, design.temperature, params);
  return r;
}

double limiting_current(const CellDesign& design, const PhysicsParams& params) {
  require_fuel_cell(design, "limiting current");
  const double stoich = std::min(design.s_h2, design.s_o2);
  return std::max(params.i_l0 * design.pressure * stoich, 0.5 * params.i_l0);
}

Overpotentials overpotentials(const CellDesign& design, double current_density,
                              const PhysicsParams& params) {
  if (std::isnan(current_density) || current_density < 0)
    throw DomainError("current density must be a non-negative number");
  design.validate();
  const double t = design.temperature;
  Overpotentials eta;
  eta.activation_anode =
      activation_loss(current_density, exchange_current_anode(design, params), params.alpha_an, t);
  eta.activation_cathode =
      activation_loss(current_density, exchange_current_cathode(design, params), params.alpha_cat, t);
  eta.ohmic = current_density * ohmic_resistance(design, params);
  if (design.mode == DeviceMode::FuelCell) {
    const double i_l = limiting_current(design, params);
    if (current_density >= i_l) {
      std::ostringstream os;
      os << "current density " << current_density << " A/cm2 at or above limiting current " << i_l;
      throw OutOfRangeError(os.str());
    }
    eta.concentration = kGasConstant * t / (2.0 * kFaraday) * std::abs(std::log1p(-current_density / i_l));
  }
  return eta;
}

double cell_voltage(const CellDesign& design, double current_density, const PhysicsParams& params) {
  const Overpotentials eta = overpotentials(design, current_density, params);
  if (design.mode == DeviceMode::HydrogenPump)
    return eta.activation_anode + eta.activation_cathode + eta.ohmic;
  return reversible_voltage(design) - eta.activation_anode - eta.activation_cathode - eta.ohmic -
         eta.concentration;
}

std::vector<double> current_fractions(std::size_t n_points) {
  if (n_points < 2) throw ConfigError("a polarization curve needs at least 2 points");
  std::vector<double> f(n_points);
  for (std::size_t k = 0; k < n_points; ++k)
    f[k] = 0.05 + 0.8 * static_cast<double>(k) / static_cast<double>(n_points - 1);
  return f;
}

double sampling_range(const CellDesign& design, const PhysicsParams& params) {
  return design.mode == DeviceMode::FuelCell ? limiting_current(design, params) : params.i_max_pump;
}

std::vector<PolarizationPoint> sample_curve(const CellDesign& design, std::size_t n_points,
                                            const PhysicsParams& params) {
  const auto fractions = current_fractions(n_points);
  const double top = sampling_range(design, params);
  std::vector<PolarizationPoint> curve;
  curve.reserve(n_points);
  for (double f : fractions) {
    const double i = f * top;
    curve.push_back({i, cell_voltage(design, i, params)});
  }
  return curve;
}

PhysicsParams perturb(const PhysicsParams& params, const Perturbation& p) {
  PhysicsParams out = params;
  // Dividing sigma0 and multiplying r_contact by the same factor scales the
  // whole area specific resistance at every temperature.
  out.sigma0 /= p.ohmic_scale;
  out.r_contact *= p.ohmic_scale;
  out.i0_ref_cat *= p.i0_cathode_scale;
  out.ea_cond += p.ea_cond_shift;
  out.validate();
  return out;
}

}  // namespace pemnet::physics
