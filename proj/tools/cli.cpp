#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "manifest.hpp"
#include "pemnet/config.hpp"
#include "pemnet/dataset.hpp"
#include "pemnet/error.hpp"
#include "pemnet/hash.hpp"
#include "pemnet/metrics.hpp"
#include "pemnet/netcore.hpp"
#include "pemnet/physics.hpp"
#include "pemnet/rng.hpp"
#include "pemnet/transfer.hpp"

namespace pemnet::cli {
namespace fs = std::filesystem;
namespace {

struct Options {
  std::string command;
  std::string config;
  std::string out;
  std::string dataset;
  std::string standardizer;
  std::string source;
  std::string manifest;
  std::vector<std::string> targets;
  std::vector<std::string> models;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> subsample;
  std::size_t jobs = 1;
};

std::string absolute(const std::string& p) { return p.empty() ? p : fs::absolute(p).lexically_normal().string(); }

/// argv for the manifest: every path made absolute, --out omitted.
std::vector<std::string> recorded_args(const Options& o) {
  std::vector<std::string> a{o.command};
  auto put = [&a](const char* flag, const std::string& v) {
    if (!v.empty()) {
      a.push_back(flag);
      a.push_back(v);
    }
  };
  put("--config", absolute(o.config));
  put("--dataset", absolute(o.dataset));
  put("--standardizer", absolute(o.standardizer));
  put("--source", absolute(o.source));
  for (const auto& t : o.targets) put("--target", absolute(t));
  for (const auto& m : o.models) put("--model", absolute(m));
  if (o.seed) put("--seed", std::to_string(*o.seed));
  if (o.subsample) put("--subsample", std::to_string(*o.subsample));
  return a;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  auto tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + p.string());
    out << text;
    if (!out) throw ConfigError("write failed: " + p.string());
  }
  fs::rename(tmp, p);
}

/// Accepts only the listed keys and anything under the listed prefixes.
void require_known(const KeyValueConfig& cfg, const std::set<std::string>& keys,
                   const std::vector<std::string>& prefixes) {
  for (const auto& [key, value] : cfg.entries()) {
    if (keys.count(key)) continue;
    bool ok = false;
    for (const auto& p : prefixes) ok = ok || key.rfind(p, 0) == 0;
    if (!ok) throw ConfigError("unknown config key '" + key + "'");
  }
}

std::size_t positive_count(const KeyValueConfig& cfg, const std::string& key, std::int64_t fallback) {
  const auto v = cfg.get_int(key, fallback);
  if (v < 1) throw ConfigError(key + " must be >= 1");
  return static_cast<std::size_t>(v);
}

bool get_bool(const KeyValueConfig& cfg, const std::string& key, bool fallback) {
  if (!cfg.has(key)) return fallback;
  const auto& v = cfg.get_string(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + " must be true or false");
}

/// A run directory being assembled; files are hashed as they are written.
class RunDir {
 public:
  RunDir(const Options& o, fs::path dir, std::string config_text)
      : dir_(std::move(dir)), start_(std::chrono::steady_clock::now()) {
    manifest_.command = o.command;
    manifest_.config_path = absolute(o.config);
    manifest_.config_text = std::move(config_text);
    manifest_.args = recorded_args(o);
  }

  const fs::path& path() const noexcept { return dir_; }

  void open() {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_)) throw ConfigError("cannot create output directory " + dir_.string());
    const auto probe = dir_ / ".write-probe";
    {
      std::ofstream p(probe);
      if (!p) throw ConfigError("output directory is not writable: " + dir_.string());
    }
    fs::remove(probe, ec);
  }

  void add_input(const fs::path& p) {
    verify_input(p);
    manifest_.inputs.push_back(input_entry(p));
  }
  void add_seed(const std::string& name, std::uint64_t seed) { manifest_.seeds[name] = seed; }

  /// Registers a file already written inside the run directory.
  void record(const std::string& name) { manifest_.outputs.push_back({name, sha256_file(dir_ / name)}); }
  void write(const std::string& name, const std::string& text) {
    write_text(dir_ / name, text);
    record(name);
  }

  void finish() {
    manifest_.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    write_text(dir_ / kManifestName, manifest_.to_json());
  }

  const RunManifest& manifest() const noexcept { return manifest_; }

 private:
  fs::path dir_;
  std::chrono::steady_clock::time_point start_;
  RunManifest manifest_;
};

struct LoadedConfig {
  KeyValueConfig cfg;
  std::string text;
};

LoadedConfig load_config(const Options& o, bool required) {
  if (o.config.empty()) {
    if (required) throw ConfigError("--config is required for " + o.command);
    return {};
  }
  const auto text = read_text(o.config);
  return {KeyValueConfig::parse(text), text};
}

physics::PhysicsParams physics_from(const KeyValueConfig& cfg) {
  return physics::PhysicsParams::from_config(cfg.subset("physics."));
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::string csv_real(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------

int cmd_generate(const Options& o, std::ostream& out) {
  const auto [cfg, text] = load_config(o, false);
  require_known(cfg, {"n_points", "mode", "export_csv"}, {"levels.", "physics."});
  const auto spec = dataset::FactorialSpec::from_config(cfg);
  const auto params = physics_from(cfg);
  const auto n_points = static_cast<std::size_t>(cfg.get_int("n_points", 5));
  if (n_points < 2) throw ConfigError("n_points must be >= 2");
  const bool export_csv = get_bool(cfg, "export_csv", false);
  if (o.subsample && *o.subsample == 0) throw ConfigError("--subsample must be >= 1");

  RunDir run(o, o.out, text);
  const auto designs = dataset::generate_factorial(spec);
  auto records = dataset::build_source_dataset(designs, n_points, params);
  const std::size_t full = records.size();
  if (o.subsample) {
    const std::uint64_t seed = o.seed.value_or(0);
    records = dataset::subsample(records, *o.subsample, seed);
    run.add_seed("subsample", seed);
  }
  const auto standardizer = dataset::fit_standardizer(records);

  run.open();
  run.write("config.cfg", text);
  dataset::write_dataset(run.path() / "dataset.bin", records);
  run.record("dataset.bin");
  run.write("standardizer.json", dataset::standardizer_to_json(standardizer));
  run.write("physics.cfg", params.to_config().to_string());
  if (export_csv) {
    dataset::write_dataset_csv(run.path() / "dataset.csv", records);
    run.record("dataset.csv");
  }
  run.finish();
  out << "designs: " << designs.size() << "\nrecords: " << records.size();
  if (o.subsample) out << " (subsampled from " << full << ")";
  out << "\nwritten: " << run.path().string() << "\n";
  return kExitOk;
}

// Box-Muller on the project RNG so noise is reproducible everywhere.
double gaussian(SplitMix64& rng) {
  const double u1 = 1.0 - rng.uniform();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

int cmd_synth(const Options& o, std::ostream& out) {
  const auto [cfg, text] = load_config(o, true);
  require_known(cfg, {"device", "id", "temps_c", "holdout_c", "points_per_condition", "noise_std_v", "mode"},
                {"design.", "perturb.", "physics."});
  const auto devices = dataset::reference_devices();
  const auto name = cfg.get_string("device");
  auto it = std::find_if(devices.begin(), devices.end(), [&](const auto& d) { return d.id == name; });
  if (it == devices.end()) throw ConfigError("unknown reference device '" + name + "'");
  dataset::DeviceDescriptor device = *it;
  device.id = cfg.get_string("id", device.id);
  if (cfg.has("temps_c")) device.temps_c = cfg.get_doubles("temps_c");
  device.holdout_c = cfg.get_double("holdout_c", device.holdout_c);
  if (cfg.has("mode")) device.design.mode = physics::parse_mode(cfg.get_string("mode"));
  auto values = device.design.values();
  const auto overrides = cfg.subset("design.");
  for (const auto& [key, value] : overrides.entries()) {
    auto pos = std::find(physics::kDesignVariableNames.begin(), physics::kDesignVariableNames.end(), key);
    if (pos == physics::kDesignVariableNames.end() || key == "temperature_k")
      throw ConfigError("unknown design field '" + key + "'");
    values[static_cast<std::size_t>(pos - physics::kDesignVariableNames.begin())] = parse_real(value, key);
  }
  device.design = physics::CellDesign::from_values(values, device.design.mode);
  device.design.temperature = device.temps_c.front() + dataset::kCelsiusOffset;

  physics::Perturbation perturbation;
  const auto pcfg = cfg.subset("perturb.");
  require_known(pcfg, {"ohmic_scale", "i0_cathode_scale", "ea_cond_shift"}, {});
  perturbation.ohmic_scale = pcfg.get_double("ohmic_scale", 1.0);
  perturbation.i0_cathode_scale = pcfg.get_double("i0_cathode_scale", 1.0);
  perturbation.ea_cond_shift = pcfg.get_double("ea_cond_shift", 0.0);
  const auto params = physics::perturb(physics_from(cfg), perturbation);
  const auto n = positive_count(cfg, "points_per_condition", 17);
  const double noise = cfg.get_double("noise_std_v", 0.0);
  if (!(noise >= 0)) throw ConfigError("noise_std_v must be >= 0");

  auto set = dataset::make_synthetic_set(device, n, params);
  RunDir run(o, o.out, text);
  if (noise > 0) {
    const std::uint64_t seed = o.seed.value_or(0);
    run.add_seed("noise", seed);
    SplitMix64 rng(seed);
    for (auto& curve : set.points)
      for (auto& p : curve) p.voltage += noise * gaussian(rng);
  }
  run.open();
  run.write("config.cfg", text);
  run.write(set.id + ".csv", dataset::format_experimental_csv(set));
  run.finish();
  out << set.id << ": " << set.conditions.size() << " conditions, " << set.total_points() << " points -> "
      << (run.path() / (set.id + ".csv")).string() << "\n";
  return kExitOk;
}

int cmd_pretrain(const Options& o, std::ostream& out) {
  const auto [cfg, text] = load_config(o, true);
  require_known(cfg, {"arch", "lr0", "batch_size", "epochs", "heldout_fraction", "seed"}, {});
  if (o.dataset.empty()) throw ConfigError("--dataset is required");
  transfer::PretrainOptions opts;
  opts.arch = net::parse_architecture(cfg.get_string("arch", "convnet"));
  opts.lr0 = cfg.get_double("lr0", 1e-3);
  if (!(opts.lr0 >= 0)) throw ConfigError("lr0 must be >= 0");
  opts.batch_size = positive_count(cfg, "batch_size", 64);
  opts.epochs = positive_count(cfg, "epochs", 30);
  opts.seed = o.seed.value_or(static_cast<std::uint64_t>(cfg.get_int("seed", 0)));
  const double heldout_fraction = cfg.get_double("heldout_fraction", 0.1);
  const fs::path dataset_path = o.dataset;
  const fs::path std_path = o.standardizer.empty() ? dataset_path.parent_path() / "standardizer.json"
                                                   : fs::path(o.standardizer);

  RunDir run(o, o.out, text);
  run.add_input(dataset_path);
  run.add_input(std_path);
  run.add_seed("init", opts.seed);
  const auto records = dataset::read_dataset(dataset_path);
  const auto standardizer = dataset::standardizer_from_json(read_text(std_path));
  const auto data = transfer::prepare_source_data(records, standardizer, heldout_fraction, opts.seed);
  run.open();
  const auto result = transfer::pretrain_source(opts, data);

  std::vector<dataset::FeatureVector> feats;
  std::vector<double> truth;
  for (const auto& r : dataset::invert_standardizer(standardizer, data.heldout)) {
    feats.push_back(r.features);
    truth.push_back(r.label);
  }
  const double held_rrmse = metrics::rrmse(net::predict(result.model, feats), truth);

  run.write("config.cfg", text);
  net::save_model(result.model, run.path() / "model.bin");
  run.record("model.bin");
  std::string losses = "epoch,train_loss,heldout_loss\n";
  for (std::size_t e = 0; e < result.train_loss.size(); ++e)
    losses += std::to_string(e + 1) + "," + csv_real(result.train_loss[e]) + "," + csv_real(result.heldout_loss[e]) + "\n";
  run.write("losses.csv", losses);
  nlohmann::json m;
  m["heldout_rrmse_percent"] = held_rrmse;
  m["final_train_loss"] = result.train_loss.back();
  m["final_heldout_loss"] = result.heldout_loss.back();
  m["train_records"] = data.train.size();
  m["heldout_records"] = data.heldout.size();
  run.write("metrics.json", m.dump(2) + "\n");
  run.finish();
  out << net::to_string(opts.arch) << " pretrained: train loss " << result.train_loss.back() << ", held-out loss "
      << result.heldout_loss.back() << ", held-out rRMSE " << fixed(held_rrmse, 2) << "%\n"
      << "written: " << run.path().string() << "\n";
  return kExitOk;
}

int cmd_transfer(const Options& o, std::ostream& out, transfer::Strategy strategy) {
  const auto [cfg, text] = load_config(o, true);
  const std::set<std::string> run_keys = {"scheme", "batch_size", "epochs", "seed", "hidden_width",
                                          "early_stop_window", "early_stop_delta"};
  require_known(cfg, run_keys, {"run."});
  if (o.source.empty()) throw ConfigError("--source is required");
  if (o.targets.empty()) throw ConfigError("at least one --target is required");
  if (o.jobs < 1) throw ConfigError("--jobs must be >= 1");

  RunDir run(o, o.out, text);
  run.add_input(o.source);
  const auto source_hash = sha256_file(o.source);
  const auto source = net::load_model(o.source);

  struct Job {
    dataset::ExperimentalSet target;
    transfer::TransferRun spec;
    std::optional<transfer::TransferResult> result;
    double holdout_rrmse = 0.0;
    std::exception_ptr error;
  };
  std::vector<Job> jobs;
  std::set<std::string> ids;
  for (const auto& t : o.targets) {
    run.add_input(t);
    Job job;
    job.target = dataset::load_experimental_csv(t);
    if (!ids.insert(job.target.id).second) throw ConfigError("duplicate target id " + job.target.id);
    const auto over = cfg.subset("run." + job.target.id + ".");
    require_known(over, run_keys, {});
    auto get = [&](const std::string& key) -> std::optional<std::string> {
      if (over.has(key)) return over.get_string(key);
      if (cfg.has(key)) return cfg.get_string(key);
      return std::nullopt;
    };
    KeyValueConfig merged;
    for (const auto& key : run_keys)
      if (auto v = get(key)) merged.set(key, *v);
    transfer::TransferRun& spec = job.spec;
    spec.strategy = strategy;
    spec.scheme = transfer::LRScheme::parse(merged.get_string("scheme"));
    spec.batch_size = positive_count(merged, "batch_size", strategy == transfer::Strategy::Finetune ? 5 : 80);
    spec.epochs = positive_count(merged, "epochs", 2000);
    spec.seed = o.seed.value_or(static_cast<std::uint64_t>(merged.get_int("seed", 0)));
    spec.hidden_width = positive_count(merged, "hidden_width", 32);
    spec.early_stop_window = static_cast<std::size_t>(std::max<std::int64_t>(0, merged.get_int("early_stop_window", 100)));
    spec.early_stop_delta = merged.get_double("early_stop_delta", 1e-7);
    spec.validate();
    // Catch scheme/model mismatches before any work starts.
    if (strategy == transfer::Strategy::Finetune) (void)spec.scheme.rates_for(source);
    run.add_seed(job.target.id, spec.seed);
    jobs.push_back(std::move(job));
  }
  run.open();

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      Job& job = jobs[k];
      try {
        job.result = strategy == transfer::Strategy::Finetune
                         ? transfer::finetune(source, job.target, job.spec)
                         : transfer::new_task_train(source, job.target, job.spec);
        job.holdout_rrmse = metrics::evaluate_holdout(job.result->model, job.target).rrmse_percent;
      } catch (...) {
        job.error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::min(o.jobs, jobs.size()); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& job : jobs)
    if (job.error) std::rethrow_exception(job.error);

  run.write("config.cfg", text);
  std::string provenance;
  for (const auto& job : jobs) {
    const auto name = job.target.id + ".model";
    net::save_model(job.result->model, run.path() / name);
    run.record(name);
    auto rec = nlohmann::json::parse(
        transfer::provenance_record(job.spec, job.target.id, source_hash, *job.result));
    rec["model_file"] = name;
    rec["holdout_rrmse_percent"] = job.holdout_rrmse;
    provenance += rec.dump() + "\n";
    out << job.target.id << ": " << transfer::to_string(strategy) << " " << job.spec.scheme.to_string() << " batch "
        << job.spec.batch_size << ", " << job.result->loss_history.size() << " epochs, holdout rRMSE "
        << fixed(job.holdout_rrmse, 2) << "%\n";
  }
  run.write("provenance.jsonl", provenance);
  run.finish();
  out << "written: " << run.path().string() << "\n";
  return kExitOk;
}

std::string format_temp(double kelvin) {
  std::ostringstream os;
  os << std::round((kelvin - dataset::kCelsiusOffset) * 100) / 100;
  return os.str();
}

int cmd_evaluate(const Options& o, std::ostream& out) {
  const auto [cfg, text] = load_config(o, false);
  require_known(cfg, {"eem_baseline", "curve_points"}, {"physics."});
  if (o.models.empty() || o.models.size() != o.targets.size())
    throw ConfigError("evaluate needs matching --model/--target pairs");
  const bool with_eem = get_bool(cfg, "eem_baseline", true);
  const auto params = physics_from(cfg);
  const auto curve_points = positive_count(cfg, "curve_points", 100);

  // The run directory is named by a hash of everything that determines the output.
  Sha256 h;
  h.update(std::string_view("evaluate\n"));
  h.update(std::string_view(cfg.to_string()));
  for (std::size_t k = 0; k < o.models.size(); ++k) {
    verify_input(o.models[k]);
    verify_input(o.targets[k]);
    h.update(std::string_view(sha256_file(o.models[k])));
    h.update(std::string_view(sha256_file(o.targets[k])));
  }
  const auto run_hash = h.hex().substr(0, 16);
  RunDir run(o, fs::path(o.out) / run_hash, text);
  for (std::size_t k = 0; k < o.models.size(); ++k) {
    run.add_input(o.models[k]);
    run.add_input(o.targets[k]);
  }

  struct Row {
    std::string dataset, base, scheme, batch;
    std::map<double, std::pair<double, bool>> cells;  // K -> (rRMSE %, holdout)
  };
  std::vector<Row> rows;
  std::set<double> temps;
  std::set<std::string> eem_done;
  auto reports = nlohmann::json::array();
  struct Artifact {
    std::string name, svg, csv;
  };
  std::vector<Artifact> artifacts;

  for (std::size_t k = 0; k < o.models.size(); ++k) {
    const auto model = net::load_model(o.models[k]);
    const auto set = dataset::load_experimental_csv(o.targets[k]);
    Row row;
    row.dataset = set.id;
    row.base = std::string(net::to_string(model.arch));
    row.scheme = "-";
    row.batch = "-";
    try {
      const auto prov = nlohmann::json::parse(model.provenance);
      if (prov.contains("scheme")) row.scheme = transfer::LRScheme::parse(prov["scheme"].dump()).to_string();
      if (prov.contains("batch_size")) row.batch = std::to_string(prov["batch_size"].get<std::size_t>());
      if (prov.value("stage", "") == "pretrain") row.scheme = "(source)";
    } catch (const std::exception&) {
    }
    Row eem_row{set.id, "EEM", "-", "-", {}};
    const std::string stem = fs::path(o.models[k]).stem().string();
    const auto per_condition = metrics::evaluate_conditions(model, set);
    for (std::size_t c = 0; c < set.conditions.size(); ++c) {
      const auto& rep = per_condition[c];
      std::optional<metrics::EvalReport> eem;
      if (with_eem) {
        try {
          eem = metrics::evaluate_eem(params, set, c);
        } catch (const OutOfRangeError&) {
          // Measured currents beyond the EEM's limiting current: no baseline.
        }
      }
      temps.insert(set.conditions[c]);
      row.cells[set.conditions[c]] = {rep.rrmse_percent, rep.holdout};
      if (eem) eem_row.cells[set.conditions[c]] = {eem->rrmse_percent, eem->holdout};
      auto j = nlohmann::json::parse(metrics::report_json(rep, eem));
      j["model_file"] = absolute(o.models[k]);
      reports.push_back(j);

      const auto design = set.design_at(c);
      const double top = set.points[c].back().current_density;
      const auto grid = metrics::linear_grid(0.0, top, curve_points);
      const auto curve = metrics::predict_curve(model, design, grid);
      std::vector<physics::PolarizationPoint> eem_curve;
      if (eem) {
        for (double i : grid) {
          try {
            eem_curve.push_back({i, physics::cell_voltage(design, i, params)});
          } catch (const OutOfRangeError&) {
          }
        }
      }
      const auto name = set.id + "_" + stem + "_" + format_temp(set.conditions[c]) + "C";
      const auto title = set.id + " at " + format_temp(set.conditions[c]) + " C" + (rep.holdout ? " (test)" : "");
      artifacts.push_back({name, metrics::curve_svg(title, rep.measured, curve, eem_curve),
                           metrics::curve_csv(rep.measured, curve, eem_curve)});
    }
    rows.push_back(std::move(row));
    if (with_eem && !eem_row.cells.empty() && eem_done.insert(set.id).second) rows.push_back(std::move(eem_row));
  }

  std::ostringstream table;
  table << std::left << std::setw(10) << "Dataset" << std::setw(12) << "Base model" << std::setw(28) << "Scheme"
        << std::setw(7) << "Batch";
  for (double t : temps) table << std::setw(11) << (format_temp(t) + " C");
  table << "\n";
  for (const auto& row : rows) {
    table << std::setw(10) << row.dataset << std::setw(12) << row.base << std::setw(28) << row.scheme << std::setw(7)
          << row.batch;
    for (double t : temps) {
      const auto it = row.cells.find(t);
      std::string cell = "-";
      if (it != row.cells.end()) {
        cell = fixed(it->second.first, 2) + "%";
        if (it->second.second) cell = "[" + cell + "]";
      }
      table << std::setw(11) << cell;
    }
    table << "\n";
  }
  table << "rRMSE = 100 * RMSE / mean(measured voltage); [..] marks the held-out testing condition\n";

  run.open();
  run.write("config.cfg", text);
  run.write("report.json", reports.dump(2) + "\n");
  for (const auto& a : artifacts) {
    run.write(a.name + ".svg", a.svg);
    run.write(a.name + ".csv", a.csv);
  }
  run.write("table.txt", table.str());
  run.finish();
  out << table.str() << "written: " << run.path().string() << "\n";
  return kExitOk;
}

int cmd_dispersion(const Options& o, std::ostream& out) {
  const auto [cfg, text] = load_config(o, false);
  require_known(cfg, {"seed"}, {});
  if (o.targets.empty()) throw ConfigError("at least one --target is required");
  if (o.standardizer.empty()) throw ConfigError("--standardizer is required");
  const std::uint64_t seed = o.seed.value_or(static_cast<std::uint64_t>(cfg.get_int("seed", 0)));
  RunDir run(o, o.out, text);
  run.add_input(o.standardizer);
  run.add_seed("subsample", seed);
  const auto standardizer = dataset::standardizer_from_json(read_text(o.standardizer));
  auto results = nlohmann::json::array();
  std::ostringstream table;
  table << std::left << std::setw(10) << "Dataset" << std::setw(8) << "Mode" << std::setw(8) << "Points"
        << "Cosine dispersion\n";
  for (const auto& t : o.targets) {
    run.add_input(t);
    const auto set = dataset::load_experimental_csv(t);
    const auto records = dataset::apply_standardizer(standardizer, set.all_records());
    const auto d = metrics::cosine_dispersion(records, seed);
    results.push_back({{"dataset_id", set.id},
                       {"mode", physics::to_string(set.design_base.mode)},
                       {"n_points", records.size()},
                       {"mean_cosine_distance", d.mean_distance},
                       {"pairs", d.pairs},
                       {"skipped_pairs", d.skipped_pairs},
                       {"subsampled", d.subsampled}});
    table << std::setw(10) << set.id << std::setw(8) << physics::to_string(set.design_base.mode) << std::setw(8)
          << records.size() << fixed(d.mean_distance, 4) << "\n";
  }
  run.open();
  run.write("config.cfg", text);
  run.write("dispersion.json", results.dump(2) + "\n");
  run.finish();
  out << table.str() << "written: " << run.path().string() << "\n";
  return kExitOk;
}

int dispatch(const Options& o, std::ostream& out, std::ostream& err);

int cmd_reproduce(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.manifest.empty()) throw ConfigError("--manifest is required");
  const auto m = RunManifest::load(o.manifest);
  if (m.args.empty() || m.args.front() == "reproduce") throw ConfigError("manifest has no reproducible command");
  const fs::path out_dir = o.out;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + out_dir.string());

  std::vector<std::string> args = m.args;
  if (!m.config_path.empty()) {
    // Use the recorded config text, not whatever the file holds now.
    const auto cfg_copy = out_dir / "config.cfg";
    write_text(cfg_copy, m.config_text);
    for (std::size_t k = 0; k + 1 < args.size(); ++k)
      if (args[k] == "--config") args[k + 1] = cfg_copy.string();
  }
  args.push_back("--out");
  args.push_back(out_dir.string());
  std::ostringstream inner;
  const int code = run(args, inner, err);
  if (code != kExitOk) return code;

  // Evaluate nests its artifacts one level down under the run hash.
  fs::path produced = out_dir;
  if (m.command == "evaluate") produced = out_dir / fs::absolute(o.manifest).parent_path().filename();
  std::size_t mismatches = 0;
  for (const auto& f : m.outputs) {
    const auto regenerated = produced / f.path;
    const bool same = fs::is_regular_file(regenerated) && sha256_file(regenerated) == f.sha256;
    out << (same ? "identical  " : "DIFFERENT  ") << f.path << "\n";
    if (!same) ++mismatches;
  }
  out << (mismatches ? "reproduction FAILED: " + std::to_string(mismatches) + " file(s) differ\n"
                     : "reproduction OK: all " + std::to_string(m.outputs.size()) + " artifacts byte-identical\n");
  return mismatches ? kExitRuntime : kExitOk;
}

int dispatch(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.command == "generate") return cmd_generate(o, out);
  if (o.command == "synth") return cmd_synth(o, out);
  if (o.command == "pretrain") return cmd_pretrain(o, out);
  if (o.command == "finetune") return cmd_transfer(o, out, transfer::Strategy::Finetune);
  if (o.command == "newtask") return cmd_transfer(o, out, transfer::Strategy::NewTask);
  if (o.command == "evaluate") return cmd_evaluate(o, out);
  if (o.command == "dispersion") return cmd_dispersion(o, out);
  if (o.command == "reproduce") return cmd_reproduce(o, out, err);
  throw ConfigError("unknown command " + o.command);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"pemnet: few-shot transfer learning for HT-PEM polarization curves"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;
  std::size_t subsample = 0;

  auto common = [&](CLI::App* sub, bool config_required) {
    auto* c = sub->add_option("--config", o.config, "key-value config file");
    if (config_required) c->required();
    sub->add_option("--out", o.out, "output run directory")->required();
  };
  auto* gen = app.add_subcommand("generate", "simulate the factorial source dataset");
  common(gen, false);
  gen->add_option("--subsample", subsample, "keep a seeded random subset of N records");
  gen->add_option("--seed", seed, "subsample seed");

  auto* synth = app.add_subcommand("synth", "write a synthetic experimental CSV from a (perturbed) EEM");
  common(synth, true);
  synth->add_option("--seed", seed, "noise seed");

  auto* pre = app.add_subcommand("pretrain", "pretrain a source model on simulated data");
  common(pre, true);
  pre->add_option("--dataset", o.dataset, "dataset.bin from generate")->required();
  pre->add_option("--standardizer", o.standardizer, "standardizer.json (default: next to the dataset)");
  pre->add_option("--seed", seed, "initialization/shuffling seed");

  for (const char* name : {"finetune", "newtask"}) {
    auto* sub = app.add_subcommand(name, std::string(name) == "finetune"
                                             ? "differential-learning-rate finetuning"
                                             : "new-task learning with two added layers");
    common(sub, true);
    sub->add_option("--source", o.source, "source model")->required();
    sub->add_option("--target", o.targets, "experimental CSV (repeatable)")->required();
    sub->add_option("--seed", seed, "training seed for every run");
    sub->add_option("--jobs", o.jobs, "parallel runs");
  }

  auto* eval = app.add_subcommand("evaluate", "rRMSE per condition, curves and report");
  common(eval, false);
  eval->add_option("--model", o.models, "model file (repeatable, paired with --target)")->required();
  eval->add_option("--target", o.targets, "experimental CSV (repeatable)")->required();

  auto* disp = app.add_subcommand("dispersion", "mean pairwise cosine distance per dataset");
  common(disp, false);
  disp->add_option("--target", o.targets, "experimental CSV (repeatable)")->required();
  disp->add_option("--standardizer", o.standardizer, "standardizer.json")->required();
  disp->add_option("--seed", seed, "subsample seed");

  auto* repro = app.add_subcommand("reproduce", "re-run a manifest and compare artifacts byte for byte");
  repro->add_option("--manifest", o.manifest, "manifest.json of the run to reproduce")->required();
  repro->add_option("--out", o.out, "fresh output directory")->required();

  std::vector<std::string> argv_store{"pemnet"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    for (auto* sub : app.get_subcommands()) out << sub->help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  o.command = app.get_subcommands().front()->get_name();
  auto* sub = app.get_subcommands().front();
  if (sub->get_option_no_throw("--seed") && sub->count("--seed")) o.seed = seed;
  if (sub->get_option_no_throw("--subsample") && sub->count("--subsample")) o.subsample = subsample;

  try {
    return dispatch(o, out, err);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParseError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace pemnet::cli
