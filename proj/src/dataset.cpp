#include "pemnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "binary_io.hpp"
#include "pemnet/error.hpp"
#include "pemnet/hash.hpp"
#include "pemnet/rng.hpp"

namespace pemnet::dataset {
namespace {

constexpr std::string_view kDatasetMagic("PEMDSET\0", 8);
constexpr std::uint32_t kDatasetVersion = 1;

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& cell, std::size_t line, const std::string& what, bool allow_na) {
  std::string lower = cell;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (allow_na && (lower == "n/a" || lower == "na" || lower == "-")) return 0.0;
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (cell.empty() || end != cell.c_str() + cell.size() || !std::isfinite(v))
    throw ParseError("non-numeric value '" + cell + "' for " + what, line);
  return v;
}

bool same_temperature(double a, double b) { return std::abs(a - b) < 1e-6; }

std::string format_real(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

FeatureVector make_features(const CellDesign& design, double current_density) {
  FeatureVector f{};
  const auto v = design.values();
  std::copy(v.begin(), v.end(), f.begin());
  f[physics::kDesignVariables] = current_density;
  return f;
}

// ---------------------------------------------------------------------------
// Factorial design

FactorialSpec FactorialSpec::default_levels() {
  FactorialSpec s;
  s.levels = {{
      {1.0, 1.5, 2.0},         // s_h2
      {2.0, 2.5, 3.0},         // s_o2
      {423.0, 463.0, 503.0},   // T, K
      {1.0, 1.5, 2.0},         // P, atm
      {1.5, 2.25, 3.0},        // IEC_mem
      {1.5, 2.25, 3.0},        // IEC_io
      {0.001, 0.005, 0.01},    // delta_mem, cm
      {5e-5, 1e-4, 2e-4},      // delta_io, cm
      {0.0, 0.05, 0.1},        // CO/H2
      {0.1, 0.35, 0.6},        // anode loading
      {0.1, 0.35, 0.6},        // cathode loading
  }};
  return s;
}

FactorialSpec FactorialSpec::from_config(const KeyValueConfig& cfg) {
  FactorialSpec s = default_levels();
  for (std::size_t k = 0; k < physics::kDesignVariables; ++k) {
    const std::string key = "levels." + std::string(physics::kDesignVariableNames[k]);
    if (cfg.has(key)) s.levels[k] = cfg.get_doubles(key);
  }
  for (const auto& [key, value] : cfg.entries()) {
    if (key.rfind("levels.", 0) != 0) continue;
    const auto name = key.substr(7);
    if (std::find(physics::kDesignVariableNames.begin(), physics::kDesignVariableNames.end(), name) ==
        physics::kDesignVariableNames.end())
      throw ConfigError("unknown factorial variable '" + name + "'");
  }
  if (cfg.has("mode")) s.mode = physics::parse_mode(cfg.get_string("mode"));
  s.validate();
  return s;
}

std::size_t FactorialSpec::design_count() const {
  std::size_t n = 1;
  for (const auto& l : levels) {
    if (!l.empty() && n > std::numeric_limits<std::size_t>::max() / l.size())
      throw ConfigError("factorial design too large");
    n *= l.size();
  }
  return n;
}

void FactorialSpec::validate() const {
  for (std::size_t k = 0; k < levels.size(); ++k) {
    if (levels[k].empty())
      throw ConfigError("factorial variable '" + std::string(physics::kDesignVariableNames[k]) +
                        "' has no levels");
    for (double v : levels[k])
      if (!std::isfinite(v))
        throw ConfigError("non-finite level for '" + std::string(physics::kDesignVariableNames[k]) + "'");
  }
  // Check every level against the design invariants once, one variable at a time.
  std::array<double, physics::kDesignVariables> base{};
  for (std::size_t k = 0; k < levels.size(); ++k) base[k] = levels[k].front();
  for (std::size_t k = 0; k < levels.size(); ++k) {
    for (double v : levels[k]) {
      auto probe = base;
      probe[k] = v;
      try {
        CellDesign::from_values(probe, mode).validate();
      } catch (const DomainError& e) {
        throw ConfigError(std::string("invalid level: ") + e.what());
      }
    }
  }
  (void)design_count();
}

std::vector<CellDesign> generate_factorial(const FactorialSpec& spec) {
  spec.validate();
  const std::size_t total = spec.design_count();
  std::vector<CellDesign> designs;
  designs.reserve(total);
  std::array<std::size_t, physics::kDesignVariables> idx{};
  for (std::size_t n = 0; n < total; ++n) {
    std::array<double, physics::kDesignVariables> v{};
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = spec.levels[k][idx[k]];
    designs.push_back(CellDesign::from_values(v, spec.mode));
    // Odometer increment, last variable fastest.
    for (std::size_t k = v.size(); k-- > 0;) {
      if (++idx[k] < spec.levels[k].size()) break;
      idx[k] = 0;
    }
  }
  return designs;
}

std::vector<SampleRecord> build_source_dataset(std::span<const CellDesign> designs, std::size_t n_points,
                                               const PhysicsParams& params) {
  if (n_points < 2) throw ConfigError("n_points must be >= 2");
  params.validate();
  std::vector<SampleRecord> records;
  records.reserve(designs.size() * n_points);
  for (const auto& design : designs) {
    const auto curve = physics::sample_curve(design, n_points, params);
    for (const auto& p : curve) {
      if (!std::isfinite(p.voltage)) {
        std::ostringstream os;
        os << "non-finite voltage at i=" << p.current_density << " for design";
        const auto v = design.values();
        for (std::size_t k = 0; k < v.size(); ++k) os << ' ' << physics::kDesignVariableNames[k] << '=' << v[k];
        throw NumericError(os.str());
      }
      records.push_back({make_features(design, p.current_density), p.voltage});
    }
  }
  return records;
}

std::vector<SampleRecord> subsample(std::span<const SampleRecord> records, std::size_t count,
                                    std::uint64_t seed) {
  if (count > records.size())
    throw ConfigError("subsample size " + std::to_string(count) + " exceeds dataset size " +
                      std::to_string(records.size()));
  std::vector<std::size_t> idx(records.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  SplitMix64 rng(seed);
  // Partial Fisher-Yates: the first `count` slots become a uniform sample.
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(records.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  std::vector<SampleRecord> out;
  out.reserve(count);
  for (std::size_t i : idx) out.push_back(records[i]);
  return out;
}

std::pair<std::vector<SampleRecord>, std::vector<SampleRecord>> split_fraction(
    std::span<const SampleRecord> records, double heldout_fraction, std::uint64_t seed) {
  if (!(heldout_fraction > 0 && heldout_fraction < 1))
    throw ConfigError("held-out fraction must lie in (0, 1)");
  const auto n_held = static_cast<std::size_t>(std::llround(heldout_fraction * static_cast<double>(records.size())));
  if (n_held == 0 || n_held == records.size()) throw ConfigError("too few records to split");
  std::vector<std::size_t> idx(records.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  SplitMix64 rng(seed);
  rng.shuffle(std::span(idx));
  std::vector<bool> held(records.size(), false);
  for (std::size_t k = 0; k < n_held; ++k) held[idx[k]] = true;
  std::vector<SampleRecord> train, test;
  train.reserve(records.size() - n_held);
  test.reserve(n_held);
  for (std::size_t i = 0; i < records.size(); ++i) (held[i] ? test : train).push_back(records[i]);
  return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// Standardization

Standardizer Standardizer::identity() {
  Standardizer s;
  s.mean.fill(0.0);
  s.std.fill(1.0);
  return s;
}

FeatureVector Standardizer::apply(const FeatureVector& x) const {
  FeatureVector z{};
  for (std::size_t k = 0; k < kFeatureWidth; ++k) z[k] = (x[k] - mean[k]) / std[k];
  return z;
}

FeatureVector Standardizer::invert(const FeatureVector& z) const {
  FeatureVector x{};
  for (std::size_t k = 0; k < kFeatureWidth; ++k) x[k] = z[k] * std[k] + mean[k];
  return x;
}

std::vector<double> Standardizer::apply(std::span<const double> x) const {
  if (x.size() != kFeatureWidth)
    throw ShapeError("standardizer expects " + std::to_string(kFeatureWidth) + " features, got " +
                     std::to_string(x.size()));
  std::vector<double> z(kFeatureWidth);
  for (std::size_t k = 0; k < kFeatureWidth; ++k) z[k] = (x[k] - mean[k]) / std[k];
  return z;
}

std::vector<double> Standardizer::invert(std::span<const double> z) const {
  if (z.size() != kFeatureWidth)
    throw ShapeError("standardizer expects " + std::to_string(kFeatureWidth) + " features, got " +
                     std::to_string(z.size()));
  std::vector<double> x(kFeatureWidth);
  for (std::size_t k = 0; k < kFeatureWidth; ++k) x[k] = z[k] * std[k] + mean[k];
  return x;
}

Standardizer fit_standardizer(std::span<const SampleRecord> records) {
  if (records.size() < 2) throw ConfigError("fitting a standardizer needs at least 2 records");
  // Welford accumulation per column.
  std::array<double, kFeatureWidth + 1> mean{}, m2{};
  double n = 0;
  for (const auto& r : records) {
    n += 1;
    for (std::size_t k = 0; k <= kFeatureWidth; ++k) {
      const double x = k < kFeatureWidth ? r.features[k] : r.label;
      const double delta = x - mean[k];
      mean[k] += delta / n;
      m2[k] += delta * (x - mean[k]);
    }
  }
  auto to_std = [n](double m2k) {
    const double sd = std::sqrt(m2k / n);
    return sd > 0 ? sd : 1.0;
  };
  Standardizer s;
  for (std::size_t k = 0; k < kFeatureWidth; ++k) {
    s.mean[k] = mean[k];
    s.std[k] = to_std(m2[k]);
  }
  s.label_mean = mean[kFeatureWidth];
  s.label_std = to_std(m2[kFeatureWidth]);
  return s;
}

std::vector<SampleRecord> apply_standardizer(const Standardizer& s, std::span<const SampleRecord> records) {
  std::vector<SampleRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({s.apply(r.features), s.apply_label(r.label)});
  return out;
}

std::vector<SampleRecord> invert_standardizer(const Standardizer& s, std::span<const SampleRecord> records) {
  std::vector<SampleRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({s.invert(r.features), s.invert_label(r.label)});
  return out;
}

std::string standardizer_to_json(const Standardizer& s) {
  nlohmann::json j;
  j["feature_names"] = nlohmann::json::array();
  for (auto name : physics::kDesignVariableNames) j["feature_names"].push_back(name);
  j["feature_names"].push_back("current_a_cm2");
  j["mean"] = s.mean;
  j["std"] = s.std;
  j["label_mean"] = s.label_mean;
  j["label_std"] = s.label_std;
  return j.dump(2) + "\n";
}

Standardizer standardizer_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    Standardizer s;
    s.mean = j.at("mean").get<FeatureVector>();
    s.std = j.at("std").get<FeatureVector>();
    s.label_mean = j.at("label_mean").get<double>();
    s.label_std = j.at("label_std").get<double>();
    for (double v : s.std)
      if (!(v > 0)) throw LoadError("standardizer std must be > 0");
    if (!(s.label_std > 0)) throw LoadError("standardizer label_std must be > 0");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("bad standardizer json: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Dataset files

void write_dataset(const std::filesystem::path& path, std::span<const SampleRecord> records) {
  io::ByteWriter w;
  w.raw(kDatasetMagic);
  w.u32(kDatasetVersion);
  w.u64(records.size());
  w.u32(static_cast<std::uint32_t>(kFeatureWidth));
  for (const auto& r : records) {
    for (double f : r.features) w.f64(f);
    w.f64(r.label);
  }
  io::write_file_atomic(path, w.bytes());
}

std::vector<SampleRecord> read_dataset(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  io::ByteReader r(bytes, path.string());
  if (r.raw(kDatasetMagic.size()) != kDatasetMagic) throw LoadError(path.string() + ": not a dataset file");
  if (const auto v = r.u32(); v != kDatasetVersion)
    throw LoadError(path.string() + ": unsupported dataset version " + std::to_string(v));
  const auto rows = r.u64();
  const auto width = r.u32();
  if (width != kFeatureWidth) throw LoadError(path.string() + ": unexpected feature width");
  if (rows > r.remaining() / (8 * (kFeatureWidth + 1))) throw LoadError(path.string() + ": truncated file");
  std::vector<SampleRecord> records(static_cast<std::size_t>(rows));
  for (auto& rec : records) {
    for (double& f : rec.features) f = r.f64();
    rec.label = r.f64();
  }
  if (r.remaining() != 0) throw LoadError(path.string() + ": trailing bytes");
  return records;
}

void write_dataset_csv(const std::filesystem::path& path, std::span<const SampleRecord> records) {
  std::string out;
  for (auto name : physics::kDesignVariableNames) {
    out += name;
    out += ',';
  }
  out += "current_a_cm2,voltage_v\n";
  for (const auto& r : records) {
    for (double f : r.features) out += format_real(f) + ',';
    out += format_real(r.label) + '\n';
  }
  io::write_file_atomic(path, out);
}

// ---------------------------------------------------------------------------
// Experimental sets

void ExperimentalSet::validate() const {
  design_base.validate();
  if (conditions.empty()) throw ConfigError(id + ": no conditions");
  if (conditions.size() != points.size()) throw ConfigError(id + ": conditions/points mismatch");
  for (std::size_t c = 0; c < conditions.size(); ++c) {
    if (points[c].size() < 3)
      throw ConfigError(id + ": condition " + format_real(conditions[c] - kCelsiusOffset) +
                        " C has fewer than 3 points");
    if (c > 0 && !(conditions[c] > conditions[c - 1])) throw ConfigError(id + ": conditions not ascending");
  }
  (void)condition_index(holdout_condition);
}

std::size_t ExperimentalSet::total_points() const {
  std::size_t n = 0;
  for (const auto& p : points) n += p.size();
  return n;
}

std::size_t ExperimentalSet::condition_index(double temperature) const {
  for (std::size_t c = 0; c < conditions.size(); ++c)
    if (same_temperature(conditions[c], temperature)) return c;
  throw ConfigError(id + ": no condition at " + format_real(temperature - kCelsiusOffset) + " C");
}

CellDesign ExperimentalSet::design_at(std::size_t condition) const {
  CellDesign d = design_base;
  d.temperature = conditions.at(condition);
  return d;
}

std::vector<SampleRecord> ExperimentalSet::records_at(std::size_t condition) const {
  const CellDesign d = design_at(condition);
  std::vector<SampleRecord> out;
  for (const auto& p : points.at(condition)) out.push_back({make_features(d, p.current_density), p.voltage});
  return out;
}

std::vector<SampleRecord> ExperimentalSet::all_records() const {
  std::vector<SampleRecord> out;
  for (std::size_t c = 0; c < conditions.size(); ++c) {
    auto r = records_at(c);
    out.insert(out.end(), r.begin(), r.end());
  }
  return out;
}

ExperimentalSet parse_experimental_csv(const std::string& text) {
  static const std::vector<std::string> kKeys = {
      "id",           "mode",        "s_h2",        "s_o2",    "pressure_atm", "iec_mem",       "iec_io",
      "delta_mem_cm", "delta_io_cm", "co_h2_ratio", "load_an", "load_cat",     "holdout_temp_c"};
  std::map<std::string, std::pair<std::string, std::size_t>> meta;
  std::map<double, std::vector<PolarizationPoint>> curves;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool in_data = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (!in_data) {
      if (cells.size() == 3 && cells[0] == "temp_c") {
        if (cells[1] != "current_a_cm2" || cells[2] != "voltage_v")
          throw ParseError("data header must be temp_c,current_a_cm2,voltage_v", lineno);
        in_data = true;
        continue;
      }
      if (cells.size() != 2) throw ParseError("expected a 'key,value' metadata line", lineno);
      if (std::find(kKeys.begin(), kKeys.end(), cells[0]) == kKeys.end())
        throw ParseError("unknown metadata key '" + cells[0] + "'", lineno);
      if (meta.count(cells[0])) throw ParseError("duplicate metadata key '" + cells[0] + "'", lineno);
      meta[cells[0]] = {cells[1], lineno};
      continue;
    }
    if (cells.size() != 3) throw ParseError("expected 3 columns temp_c,current_a_cm2,voltage_v", lineno);
    const double t_c = parse_cell(cells[0], lineno, "temp_c", false);
    const double i = parse_cell(cells[1], lineno, "current_a_cm2", false);
    const double v = parse_cell(cells[2], lineno, "voltage_v", false);
    if (i < 0) throw ParseError("negative current density", lineno);
    curves[t_c + kCelsiusOffset].push_back({i, v});
  }
  for (const auto& key : kKeys)
    if (!meta.count(key)) throw ParseError("missing metadata column '" + key + "'", lineno);
  if (!in_data) throw ParseError("missing data header temp_c,current_a_cm2,voltage_v", lineno);
  if (curves.empty()) throw ParseError("empty points section", lineno);

  auto num = [&meta](const std::string& key, bool allow_na) {
    const auto& [value, at] = meta.at(key);
    return parse_cell(value, at, key, allow_na);
  };
  ExperimentalSet set;
  set.id = meta.at("id").first;
  if (set.id.empty()) throw ParseError("empty id", meta.at("id").second);
  CellDesign& d = set.design_base;
  try {
    d.mode = physics::parse_mode(meta.at("mode").first);
  } catch (const ConfigError& e) {
    throw ParseError(e.what(), meta.at("mode").second);
  }
  d.s_h2 = num("s_h2", false);
  d.s_o2 = num("s_o2", true);
  d.pressure = num("pressure_atm", false);
  d.iec_mem = num("iec_mem", true);
  d.iec_io = num("iec_io", true);
  d.delta_mem = num("delta_mem_cm", false);
  d.delta_io = num("delta_io_cm", true);
  d.co_h2_ratio = num("co_h2_ratio", true);
  d.load_anode = num("load_an", false);
  d.load_cathode = num("load_cat", false);
  set.holdout_condition = num("holdout_temp_c", false) + kCelsiusOffset;
  for (auto& [t, pts] : curves) {
    std::stable_sort(pts.begin(), pts.end(),
                     [](const auto& a, const auto& b) { return a.current_density < b.current_density; });
    set.conditions.push_back(t);
    set.points.push_back(std::move(pts));
  }
  d.temperature = set.conditions.front();
  try {
    set.validate();
  } catch (const std::exception& e) {
    throw ParseError(e.what(), 0);
  }
  return set;
}

ExperimentalSet load_experimental_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_experimental_csv(ss.str());
}

std::string format_experimental_csv(const ExperimentalSet& set) {
  const CellDesign& d = set.design_base;
  std::ostringstream os;
  os << "id," << set.id << '\n'
     << "mode," << physics::to_string(d.mode) << '\n'
     << "s_h2," << format_real(d.s_h2) << '\n'
     << "s_o2," << format_real(d.s_o2) << '\n'
     << "pressure_atm," << format_real(d.pressure) << '\n'
     << "iec_mem," << format_real(d.iec_mem) << '\n'
     << "iec_io," << format_real(d.iec_io) << '\n'
     << "delta_mem_cm," << format_real(d.delta_mem) << '\n'
     << "delta_io_cm," << format_real(d.delta_io) << '\n'
     << "co_h2_ratio," << format_real(d.co_h2_ratio) << '\n'
     << "load_an," << format_real(d.load_anode) << '\n'
     << "load_cat," << format_real(d.load_cathode) << '\n'
     << "holdout_temp_c," << format_real(set.holdout_condition - kCelsiusOffset) << '\n'
     << "temp_c,current_a_cm2,voltage_v\n";
  for (std::size_t c = 0; c < set.conditions.size(); ++c)
    for (const auto& p : set.points[c])
      os << format_real(set.conditions[c] - kCelsiusOffset) << ',' << format_real(p.current_density) << ','
         << format_real(p.voltage) << '\n';
  return os.str();
}

void write_experimental_csv(const std::filesystem::path& path, const ExperimentalSet& set) {
  io::write_file_atomic(path, format_experimental_csv(set));
}

HoldoutSplit split_holdout(const ExperimentalSet& set) {
  const std::size_t held = set.condition_index(set.holdout_condition);
  HoldoutSplit split;
  for (std::size_t c = 0; c < set.conditions.size(); ++c) {
    auto r = set.records_at(c);
    auto& side = c == held ? split.test : split.train;
    side.insert(side.end(), r.begin(), r.end());
  }
  if (split.train.empty()) throw ConfigError(set.id + ": holding out the only condition leaves no training data");
  return split;
}

std::vector<DeviceDescriptor> reference_devices() {
  auto fc = [](double s_h2, double s_o2, double p, double iec_mem, double iec_io, double d_mem, double d_io,
               double l_an, double l_cat) {
    CellDesign d;
    d.s_h2 = s_h2;
    d.s_o2 = s_o2;
    d.pressure = p;
    d.iec_mem = iec_mem;
    d.iec_io = iec_io;
    d.delta_mem = d_mem;
    d.delta_io = d_io;
    d.co_h2_ratio = 0.0;
    d.load_anode = l_an;
    d.load_cathode = l_cat;
    d.mode = DeviceMode::FuelCell;
    return d;
  };
  auto pump = [&fc](double iec_io) {
    CellDesign d = fc(1, 0, 1, 7.9, iec_io, 0.005, 0.0001, 0.5, 0.5);
    d.mode = DeviceMode::HydrogenPump;
    return d;
  };
  std::vector<DeviceDescriptor> devices = {
      {"MEA0", fc(1.2, 2.2, 1.59, 7.9, 8.9, 0.005, 0.0001, 0.5, 0.5), {160, 200, 220}, 200},
      {"MEA1", fc(1, 1, 1.47, 9.1, 0.0, 0.005, 0.0001, 1.0, 0.75), {120, 160, 200}, 160},
      {"MEA2", fc(1, 1, 1.47, 9.1, 2.2, 0.005, 0.0001, 0.5, 0.6), {120, 160, 200}, 160},
      {"MEA3", fc(1, 1, 1.47, 7.1, 1.9, 0.004, 0.0001, 0.5, 0.6), {120, 160, 200, 240}, 200},
      {"MEA4", fc(1, 1, 1.47, 7.1, 2.2, 0.004, 0.0001, 0.5, 0.6), {120, 160, 200, 240}, 200},
      {"MEA5", fc(1, 1, 1.47, 0.0, 1.9, 0.008, 0.0001, 0.5, 0.6), {120, 160, 200, 240}, 200},
      {"ECHP1", pump(8.9), {160, 180, 200, 220}, 180},
      {"ECHP2", pump(2.2), {160, 180, 200, 220}, 200},
  };
  for (auto& dev : devices) dev.design.temperature = dev.temps_c.front() + kCelsiusOffset;
  return devices;
}

ExperimentalSet make_synthetic_set(const DeviceDescriptor& device, std::size_t points_per_condition,
                                   const PhysicsParams& params) {
  ExperimentalSet set;
  set.id = device.id;
  set.design_base = device.design;
  set.holdout_condition = device.holdout_c + kCelsiusOffset;
  std::vector<double> temps = device.temps_c;
  std::sort(temps.begin(), temps.end());
  for (double t_c : temps) {
    CellDesign d = device.design;
    d.temperature = t_c + kCelsiusOffset;
    set.conditions.push_back(d.temperature);
    set.points.push_back(physics::sample_curve(d, points_per_condition, params));
  }
  set.design_base.temperature = set.conditions.front();
  set.validate();
  return set;
}

std::string records_hash(std::span<const SampleRecord> records) {
  Sha256 h;
  for (const auto& r : records) {
    for (double f : r.features) h.update(f);
    h.update(r.label);
  }
  return h.hex();
}

}  // namespace pemnet::dataset
