#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pemnet/dataset.hpp"
#include "pemnet/netcore.hpp"

namespace pemnet::transfer {

/// Ordered learning rates [input, general, task]. Two-entry schemes
/// [input, task] are for networks whose general layers follow the task rate.
struct LRScheme {
  double input = 0.0;
  std::optional<double> general;
  double task = 0.0;

  /// Accepts "1e-8,8e-6,2e-4" or "[1e-8, 8e-6, 2e-4]" (2 or 3 entries).
  static LRScheme parse(const std::string& text);
  std::string to_string() const;
  std::vector<double> values() const;
  void validate() const;

  /// Group rates for a concrete model; ConfigError if the scheme cannot cover it.
  net::GroupRates rates_for(const net::NetworkModel& model) const;

  bool operator==(const LRScheme&) const = default;
};

enum class Strategy { Finetune, NewTask };

std::string_view to_string(Strategy s);

/// Everything that determines a transfer result apart from the two inputs.
struct TransferRun {
  Strategy strategy = Strategy::Finetune;
  LRScheme scheme;
  std::size_t batch_size = 5;
  std::size_t epochs = 2000;
  std::uint64_t seed = 0;
  std::size_t hidden_width = 32;        // NewTask only
  std::size_t early_stop_window = 100;  // 0 disables
  double early_stop_delta = 1e-7;

  void validate() const;
};

struct SourceData {
  dataset::Standardizer standardizer;
  std::vector<dataset::SampleRecord> train;    // standardized
  std::vector<dataset::SampleRecord> heldout;  // standardized
};

/// Splits raw simulated records into train/held-out parts and standardizes
/// both with `standardizer`.
SourceData prepare_source_data(std::span<const dataset::SampleRecord> raw, const dataset::Standardizer& standardizer,
                               double heldout_fraction, std::uint64_t seed);

struct PretrainOptions {
  net::Architecture arch = net::Architecture::ConvNet;
  double lr0 = 1e-3;
  std::size_t batch_size = 64;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
};

struct PretrainResult {
  net::NetworkModel model;
  std::vector<double> train_loss;
  std::vector<double> heldout_loss;
};

/// Fresh init, one uniform rate for all groups. Throws NumericError on divergence.
PretrainResult pretrain_source(const PretrainOptions& options, const SourceData& data);

struct TransferResult {
  net::NetworkModel model;
  std::vector<double> loss_history;
  std::string train_hash;  // hash of the (raw) training records actually used
  std::size_t train_points = 0;
};

/// Copies the source and trains every parameter at its group's rate on the
/// non-held-out conditions of `target`. The source is never modified.
TransferResult finetune(const net::NetworkModel& source, const dataset::ExperimentalSet& target,
                        const TransferRun& run);

/// Replaces the scalar output layer with Dense(k -> hidden) . ReLU . Dense(hidden -> 1),
/// both tagged Task and freshly initialized. Retained layers are copied bitwise.
net::NetworkModel extend_for_new_task(const net::NetworkModel& source, std::size_t hidden_width);

/// extend_for_new_task followed by finetuning; the target must be a hydrogen pump.
TransferResult new_task_train(const net::NetworkModel& source, const dataset::ExperimentalSet& target,
                              const TransferRun& run);

/// L2 norm of the parameter change per group between two models of identical layout.
std::map<net::ParamGroup, double> group_displacement(const net::NetworkModel& before, const net::NetworkModel& after);

/// Deterministic JSON line describing a run (no wall-clock fields).
std::string provenance_record(const TransferRun& run, const std::string& target_id, const std::string& source_hash,
                              const TransferResult& result);

}  // namespace pemnet::transfer
