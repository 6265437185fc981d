#include "pemnet/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "pemnet/error.hpp"
#include "pemnet/rng.hpp"

namespace pemnet::transfer {
namespace {

constexpr std::uint64_t kNewHeadStream = 0x4E45575441534BULL;

std::string real_string(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

LRScheme LRScheme::parse(const std::string& text) {
  const auto v = parse_real_list(text);
  LRScheme s;
  if (v.size() == 2) {
    s.input = v[0];
    s.task = v[1];
  } else if (v.size() == 3) {
    s.input = v[0];
    s.general = v[1];
    s.task = v[2];
  } else {
    throw ConfigError("learning-rate scheme needs 2 or 3 entries, got " + std::to_string(v.size()));
  }
  s.validate();
  return s;
}

std::vector<double> LRScheme::values() const {
  if (general) return {input, *general, task};
  return {input, task};
}

std::string LRScheme::to_string() const {
  std::string out = "[";
  const auto v = values();
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? ", " : "") + real_string(v[k]);
  return out + "]";
}

void LRScheme::validate() const {
  for (double r : values())
    if (!(r >= 0) || !std::isfinite(r)) throw ConfigError("learning rates must be finite and >= 0");
}

net::GroupRates LRScheme::rates_for(const net::NetworkModel& model) const {
  validate();
  net::GroupRates rates{{net::ParamGroup::Input, input}, {net::ParamGroup::Task, task}};
  const auto groups = model.groups();
  const bool has_general = std::find(groups.begin(), groups.end(), net::ParamGroup::General) != groups.end();
  if (general) {
    rates[net::ParamGroup::General] = *general;
  } else if (has_general) {
    // In a fully connected net the hidden layers belong to the task section.
    if (model.arch != net::Architecture::FCNet)
      throw ConfigError("scheme " + to_string() + " has no general rate but the " +
                        std::string(net::to_string(model.arch)) + " model has general layers");
    rates[net::ParamGroup::General] = task;
  }
  return rates;
}

std::string_view to_string(Strategy s) { return s == Strategy::Finetune ? "finetune" : "newtask"; }

void TransferRun::validate() const {
  scheme.validate();
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (strategy == Strategy::NewTask && hidden_width < 1) throw ConfigError("hidden width must be >= 1");
}

SourceData prepare_source_data(std::span<const dataset::SampleRecord> raw, const dataset::Standardizer& standardizer,
                               double heldout_fraction, std::uint64_t seed) {
  auto [train, held] = dataset::split_fraction(raw, heldout_fraction, seed);
  return {standardizer, dataset::apply_standardizer(standardizer, train),
          dataset::apply_standardizer(standardizer, held)};
}

PretrainResult pretrain_source(const PretrainOptions& options, const SourceData& data) {
  if (!(options.lr0 >= 0)) throw ConfigError("lr0 must be >= 0");
  if (data.train.empty() || data.heldout.empty()) throw ConfigError("pretraining needs train and held-out records");
  PretrainResult result;
  result.model = net::build_network(options.arch, options.seed);
  result.model.standardizer = data.standardizer;

  net::TrainOptions train;
  train.batch_size = options.batch_size;
  train.epochs = options.epochs;
  train.seed = derive_seed(options.seed, 1);
  auto on_epoch = [&](std::size_t epoch, double, const net::NetworkModel& m) {
    const double held = net::evaluate_loss(m, data.heldout);
    if (!std::isfinite(held))
      throw NumericError("pretraining diverged: non-finite held-out loss in epoch " + std::to_string(epoch + 1));
    result.heldout_loss.push_back(held);
  };
  result.train_loss =
      net::train_epochs(result.model, data.train, net::uniform_rates(options.lr0), train, on_epoch).loss;

  nlohmann::json prov;
  prov["stage"] = "pretrain";
  prov["arch"] = net::to_string(options.arch);
  prov["lr0"] = options.lr0;
  prov["batch_size"] = options.batch_size;
  prov["epochs"] = options.epochs;
  prov["seed"] = options.seed;
  prov["train_records"] = data.train.size();
  prov["heldout_records"] = data.heldout.size();
  prov["labels_standardized"] = true;
  result.model.provenance = prov.dump();
  return result;
}

namespace {

TransferResult train_on_target(net::NetworkModel model, const dataset::ExperimentalSet& target,
                               const TransferRun& run, const net::GroupRates& rates) {
  if (!model.standardizer) throw ConfigError("source model has no embedded standardizer");
  const auto split = dataset::split_holdout(target);
  TransferResult result;
  result.train_hash = dataset::records_hash(split.train);
  result.train_points = split.train.size();
  const auto train = dataset::apply_standardizer(*model.standardizer, split.train);

  net::TrainOptions options;
  options.batch_size = std::min(run.batch_size, train.size());
  options.epochs = run.epochs;
  options.seed = run.seed;
  options.early_stop_window = run.early_stop_window;
  options.early_stop_delta = run.early_stop_delta;
  result.loss_history = net::train_epochs(model, train, rates, options).loss;

  nlohmann::json prov;
  prov["stage"] = to_string(run.strategy);
  prov["arch"] = net::to_string(model.arch);
  prov["target"] = target.id;
  prov["scheme"] = run.scheme.values();
  prov["batch_size"] = run.batch_size;
  prov["epochs"] = run.epochs;
  prov["seed"] = run.seed;
  prov["holdout_c"] = target.holdout_condition - dataset::kCelsiusOffset;
  prov["train_hash"] = result.train_hash;
  if (run.strategy == Strategy::NewTask) prov["hidden_width"] = run.hidden_width;
  model.provenance = prov.dump();
  result.model = std::move(model);
  return result;
}

}  // namespace

TransferResult finetune(const net::NetworkModel& source, const dataset::ExperimentalSet& target,
                        const TransferRun& run) {
  run.validate();
  const auto rates = run.scheme.rates_for(source);
  return train_on_target(source, target, run, rates);
}

net::NetworkModel extend_for_new_task(const net::NetworkModel& source, std::size_t hidden_width) {
  if (source.head_extended) throw ConfigError("model head was already extended for a new task");
  if (hidden_width < 1) throw ConfigError("hidden width must be >= 1");
  if (source.layers.empty() || source.layers.back().kind != net::LayerKind::Dense || source.layers.back().out != 1)
    throw ConfigError("new-task extension needs a Dense(k -> 1) output layer");
  net::NetworkModel m = source;
  const std::size_t width = m.layers.back().in;
  m.layers.pop_back();
  const std::size_t first_new = m.layers.size();
  m.layers.push_back(net::Layer::dense(width, hidden_width, net::ParamGroup::Task));
  m.layers.push_back(net::Layer::relu());
  m.layers.push_back(net::Layer::dense(hidden_width, 1, net::ParamGroup::Task));
  net::initialize_parameters(std::span(m.layers).subspan(first_new), derive_seed(source.seed, kNewHeadStream));
  m.head_extended = true;
  m.validate();
  return m;
}

TransferResult new_task_train(const net::NetworkModel& source, const dataset::ExperimentalSet& target,
                              const TransferRun& run) {
  if (target.design_base.mode != physics::DeviceMode::HydrogenPump)
    throw ConfigError(target.id + ": new-task training expects a hydrogen pump dataset");
  TransferRun r = run;
  r.strategy = Strategy::NewTask;
  r.validate();
  auto extended = extend_for_new_task(source, r.hidden_width);
  const auto rates = r.scheme.rates_for(extended);
  return train_on_target(std::move(extended), target, r, rates);
}

std::map<net::ParamGroup, double> group_displacement(const net::NetworkModel& before,
                                                     const net::NetworkModel& after) {
  if (before.layers.size() != after.layers.size()) throw ShapeError("models have different layer counts");
  std::map<net::ParamGroup, double> sq;
  for (std::size_t k = 0; k < before.layers.size(); ++k) {
    const auto& a = before.layers[k];
    const auto& b = after.layers[k];
    if (a.kind != b.kind || a.weights.size() != b.weights.size() || a.bias.size() != b.bias.size())
      throw ShapeError("models have different layouts at layer " + std::to_string(k));
    if (!a.has_params()) continue;
    double& acc = sq[a.group];
    for (std::size_t i = 0; i < a.weights.size(); ++i) acc += (b.weights[i] - a.weights[i]) * (b.weights[i] - a.weights[i]);
    for (std::size_t i = 0; i < a.bias.size(); ++i) acc += (b.bias[i] - a.bias[i]) * (b.bias[i] - a.bias[i]);
  }
  for (auto& [g, v] : sq) v = std::sqrt(v);
  return sq;
}

std::string provenance_record(const TransferRun& run, const std::string& target_id, const std::string& source_hash,
                              const TransferResult& result) {
  nlohmann::json j;
  j["strategy"] = to_string(run.strategy);
  j["target"] = target_id;
  j["scheme"] = run.scheme.values();
  j["batch_size"] = run.batch_size;
  j["epochs"] = run.epochs;
  j["epochs_run"] = result.loss_history.size();
  j["seed"] = run.seed;
  j["source_model_hash"] = source_hash;
  j["dataset_hash"] = result.train_hash;
  j["train_points"] = result.train_points;
  j["final_train_loss"] = result.loss_history.empty() ? 0.0 : result.loss_history.back();
  if (run.strategy == Strategy::NewTask) j["hidden_width"] = run.hidden_width;
  return j.dump();
}

}  // namespace pemnet::transfer
