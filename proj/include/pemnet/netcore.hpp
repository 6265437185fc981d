#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pemnet/dataset.hpp"

namespace pemnet::net {

/// Row-major dense array. The first dimension is the batch.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  std::size_t size() const noexcept { return data.size(); }
  std::size_t rows() const noexcept { return shape.empty() ? 0 : shape.front(); }
  /// Elements per batch row.
  std::size_t row_size() const noexcept { return rows() ? data.size() / rows() : 0; }
  std::span<double> row(std::size_t n) { return {data.data() + n * row_size(), row_size()}; }
  std::span<const double> row(std::size_t n) const { return {data.data() + n * row_size(), row_size()}; }

  bool operator==(const Tensor&) const = default;
};

/// Section of the network a parameterized layer belongs to for
/// differential learning rates.
enum class ParamGroup : std::uint8_t { Input = 0, General = 1, Task = 2 };

std::string_view to_string(ParamGroup g);

enum class LayerKind : std::uint8_t { Dense = 0, Conv1d = 1, ReLU = 2, AdaptiveMaxPool1d = 3, Flatten = 4 };

std::string_view to_string(LayerKind k);

struct Layer {
  LayerKind kind = LayerKind::ReLU;
  ParamGroup group = ParamGroup::Input;
  // Dense: in -> out. Conv1d: in = channels in, out = channels out.
  // AdaptiveMaxPool1d: out = output length.
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::vector<double> weights;  // Dense: out x in. Conv1d: out x in x kernel.
  std::vector<double> bias;

  static Layer dense(std::size_t in, std::size_t out, ParamGroup group);
  static Layer conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
                      ParamGroup group);
  static Layer relu();
  static Layer adaptive_max_pool(std::size_t out_len);
  static Layer flatten();

  bool has_params() const noexcept { return kind == LayerKind::Dense || kind == LayerKind::Conv1d; }
  std::size_t parameter_count() const noexcept { return weights.size() + bias.size(); }
  std::size_t fan_in() const noexcept { return kind == LayerKind::Conv1d ? in * kernel : in; }

  bool operator==(const Layer&) const = default;
};

/// Per-sample output shape of a layer; throws ShapeError when the input does not fit.
std::vector<std::size_t> output_shape(const Layer& layer, const std::vector<std::size_t>& sample_shape);

enum class Architecture : std::uint8_t { Custom = 0, FCNet = 1, ConvNet = 2 };

std::string_view to_string(Architecture a);
Architecture parse_architecture(std::string_view text);

struct NetworkModel {
  Architecture arch = Architecture::Custom;
  std::vector<std::size_t> input_shape{dataset::kFeatureWidth};
  std::vector<Layer> layers;
  std::uint64_t seed = 0;
  bool head_extended = false;
  std::optional<dataset::Standardizer> standardizer;
  std::string provenance;

  std::size_t parameter_count() const;
  /// Throws ShapeError if the layer chain does not compose to a scalar output.
  void validate() const;
  /// Groups carried by parameterized layers.
  std::vector<ParamGroup> groups() const;

  bool operator==(const NetworkModel&) const = default;
};

/// He-uniform weights in +-sqrt(6 / fan_in), zero biases, drawn layer by layer.
void initialize_parameters(std::span<Layer> layers, std::uint64_t seed);

/// 12 -> 200 -> 50 -> 1 with ReLU.
NetworkModel build_fcnet(std::uint64_t seed);
/// Three k=3 convolutions (1->16->32->64), pooling to length 4, dense head 256 -> 50 -> 1.
NetworkModel build_convnet(std::uint64_t seed);
NetworkModel build_network(Architecture arch, std::uint64_t seed);

/// Per-layer gradient blocks mirroring the parameter layout.
struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> bias;

  static Gradients zeros_like(const NetworkModel& model);
};

Tensor forward_layer(const Layer& layer, const Tensor& x);
/// Returns dL/dx and accumulates parameter gradients into `dw` / `db` when the layer has parameters.
Tensor backward_layer(const Layer& layer, const Tensor& x, const Tensor& grad_out, std::vector<double>* dw,
                      std::vector<double>* db);

/// Output of the first `n_layers` layers.
Tensor forward_prefix(const NetworkModel& model, const Tensor& batch, std::size_t n_layers);
Tensor forward(const NetworkModel& model, const Tensor& batch);

struct LossValue {
  double loss = 0.0;
  Tensor grad;
};

/// Mean squared error over all elements and its gradient 2 (pred - label) / n.
LossValue mse_loss(const Tensor& pred, const Tensor& labels);

struct LossAndGradients {
  double loss = 0.0;
  Gradients grads;
};

/// Reverse-mode gradients of the mean squared error. ReLU'(0) = 0.
LossAndGradients backward(const NetworkModel& model, const Tensor& batch, const Tensor& labels);

using GroupRates = std::map<ParamGroup, double>;

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m_weights, v_weights, m_bias, v_bias;

  static AdamState for_model(const NetworkModel& model);
};

/// One bias-corrected Adam update. Each layer moves at its group's rate; a
/// zero rate leaves that layer's parameters untouched.
void adam_step(NetworkModel& model, const Gradients& grads, AdamState& state, const GroupRates& rates);

/// Rates for every group present in the model; throws ConfigError otherwise.
void check_rates(const NetworkModel& model, const GroupRates& rates);
GroupRates uniform_rates(double rate);

struct TrainOptions {
  std::size_t batch_size = 32;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;
  /// Stop once the best loss improved by less than `early_stop_delta` over
  /// this many epochs. 0 disables early stopping.
  std::size_t early_stop_window = 0;
  double early_stop_delta = 1e-7;
};

struct TrainHistory {
  std::vector<double> loss;  // mean training loss per epoch
};

using EpochCallback = std::function<void(std::size_t epoch, double train_loss, const NetworkModel& model)>;

/// Seeded shuffled mini-batch Adam. The last batch of an epoch may be short.
TrainHistory train_epochs(NetworkModel& model, const Tensor& inputs, const Tensor& targets, const GroupRates& rates,
                          const TrainOptions& options, const EpochCallback& on_epoch = {});
TrainHistory train_epochs(NetworkModel& model, std::span<const dataset::SampleRecord> records,
                          const GroupRates& rates, const TrainOptions& options, const EpochCallback& on_epoch = {});

/// (N, 12) features and (N, 1) labels.
std::pair<Tensor, Tensor> to_tensors(std::span<const dataset::SampleRecord> records);

/// Mean squared error of the model over records (already standardized).
double evaluate_loss(const NetworkModel& model, std::span<const dataset::SampleRecord> records);

/// Physical-unit voltages for raw (unstandardized) feature vectors using the
/// embedded standardizer.
std::vector<double> predict(const NetworkModel& model, std::span<const dataset::FeatureVector> raw_features);

std::vector<char> serialize_model(const NetworkModel& model);
NetworkModel deserialize_model(const std::vector<char>& bytes, const std::string& source = "model");
void save_model(const NetworkModel& model, const std::filesystem::path& path);
NetworkModel load_model(const std::filesystem::path& path);

}  // namespace pemnet::net
