#include "pemnet/netcore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "binary_io.hpp"
#include "pemnet/error.hpp"
#include "pemnet/rng.hpp"

namespace pemnet::net {
namespace {

constexpr std::string_view kModelMagic("PEMMODEL", 8);
constexpr std::uint32_t kModelVersion = 1;

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t k = 0; k < shape.size(); ++k) os << (k ? ", " : "") << shape[k];
  os << ')';
  return os.str();
}

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

// (channels, length) view of a per-sample shape.
std::pair<std::size_t, std::size_t> channels_length(const std::vector<std::size_t>& s) {
  if (s.size() == 1) return {1, s[0]};
  if (s.size() == 2) return {s[0], s[1]};
  throw ShapeError("expected a (length) or (channels, length) sample, got " + shape_string(s));
}

std::vector<std::size_t> sample_shape_of(const Tensor& x) {
  if (x.shape.size() < 2) throw ShapeError("tensor needs a batch dimension, got " + shape_string(x.shape));
  return {x.shape.begin() + 1, x.shape.end()};
}

Tensor with_batch(std::size_t n, const std::vector<std::size_t>& sample) {
  std::vector<std::size_t> shape{n};
  shape.insert(shape.end(), sample.begin(), sample.end());
  return Tensor(std::move(shape));
}

std::size_t pool_begin(std::size_t j, std::size_t len, std::size_t out) { return j * len / out; }

void check_param_sizes(const Layer& l) {
  std::size_t w = 0, b = 0;
  if (l.kind == LayerKind::Dense) {
    w = l.in * l.out;
    b = l.out;
  } else if (l.kind == LayerKind::Conv1d) {
    w = l.out * l.in * l.kernel;
    b = l.out;
  }
  if (l.weights.size() != w || l.bias.size() != b)
    throw ShapeError(std::string(to_string(l.kind)) + " layer has " + std::to_string(l.weights.size()) + "+" +
                     std::to_string(l.bias.size()) + " parameters, expected " + std::to_string(w) + "+" +
                     std::to_string(b));
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> s) : shape(std::move(s)), data(product(shape), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
  if (product(shape) != data.size())
    throw ShapeError("shape " + shape_string(shape) + " does not match " + std::to_string(data.size()) +
                     " elements");
}

std::string_view to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::Input: return "input";
    case ParamGroup::General: return "general";
    case ParamGroup::Task: return "task";
  }
  return "?";
}

std::string_view to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Dense: return "Dense";
    case LayerKind::Conv1d: return "Conv1d";
    case LayerKind::ReLU: return "ReLU";
    case LayerKind::AdaptiveMaxPool1d: return "AdaptiveMaxPool1d";
    case LayerKind::Flatten: return "Flatten";
  }
  return "?";
}

std::string_view to_string(Architecture a) {
  switch (a) {
    case Architecture::Custom: return "custom";
    case Architecture::FCNet: return "fcnet";
    case Architecture::ConvNet: return "convnet";
  }
  return "?";
}

Architecture parse_architecture(std::string_view text) {
  if (text == "fcnet") return Architecture::FCNet;
  if (text == "convnet") return Architecture::ConvNet;
  throw ConfigError("unknown architecture '" + std::string(text) + "' (expected fcnet|convnet)");
}

// ---------------------------------------------------------------------------
// Layers

Layer Layer::dense(std::size_t in, std::size_t out, ParamGroup group) {
  if (in == 0 || out == 0) throw ShapeError("dense layer dimensions must be positive");
  Layer l;
  l.kind = LayerKind::Dense;
  l.group = group;
  l.in = in;
  l.out = out;
  l.weights.assign(in * out, 0.0);
  l.bias.assign(out, 0.0);
  return l;
}

Layer Layer::conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
                    ParamGroup group) {
  if (in_channels == 0 || out_channels == 0 || kernel == 0 || stride == 0)
    throw ShapeError("conv1d dimensions must be positive");
  Layer l;
  l.kind = LayerKind::Conv1d;
  l.group = group;
  l.in = in_channels;
  l.out = out_channels;
  l.kernel = kernel;
  l.stride = stride;
  l.weights.assign(out_channels * in_channels * kernel, 0.0);
  l.bias.assign(out_channels, 0.0);
  return l;
}

Layer Layer::relu() {
  Layer l;
  l.kind = LayerKind::ReLU;
  return l;
}

Layer Layer::adaptive_max_pool(std::size_t out_len) {
  if (out_len == 0) throw ShapeError("pool output length must be positive");
  Layer l;
  l.kind = LayerKind::AdaptiveMaxPool1d;
  l.out = out_len;
  return l;
}

Layer Layer::flatten() {
  Layer l;
  l.kind = LayerKind::Flatten;
  return l;
}

std::vector<std::size_t> output_shape(const Layer& layer, const std::vector<std::size_t>& s) {
  switch (layer.kind) {
    case LayerKind::Dense:
      if (product(s) != layer.in)
        throw ShapeError("dense layer expects " + std::to_string(layer.in) + " inputs, got sample " +
                         shape_string(s));
      return {layer.out};
    case LayerKind::Conv1d: {
      const auto [c, len] = channels_length(s);
      if (c != layer.in)
        throw ShapeError("conv1d expects " + std::to_string(layer.in) + " channels, got " + shape_string(s));
      if (len < layer.kernel) throw ShapeError("conv1d input shorter than kernel: " + shape_string(s));
      return {layer.out, (len - layer.kernel) / layer.stride + 1};
    }
    case LayerKind::ReLU: return s;
    case LayerKind::AdaptiveMaxPool1d: {
      const auto [c, len] = channels_length(s);
      if (len < layer.out) throw ShapeError("pool input shorter than output: " + shape_string(s));
      if (s.size() == 1) return {layer.out};
      return {c, layer.out};
    }
    case LayerKind::Flatten: return {product(s)};
  }
  throw ShapeError("unknown layer kind");
}

Tensor forward_layer(const Layer& layer, const Tensor& x) {
  const auto in_shape = sample_shape_of(x);
  const auto out_shape = output_shape(layer, in_shape);
  const std::size_t n = x.rows();
  Tensor y = with_batch(n, out_shape);
  const std::size_t in_size = x.row_size();
  const std::size_t out_size = y.row_size();

  switch (layer.kind) {
    case LayerKind::Dense: {
      for (std::size_t b = 0; b < n; ++b) {
        const double* xi = x.data.data() + b * in_size;
        double* yo = y.data.data() + b * out_size;
        for (std::size_t o = 0; o < layer.out; ++o) {
          const double* w = layer.weights.data() + o * layer.in;
          double acc = layer.bias[o];
          for (std::size_t i = 0; i < layer.in; ++i) acc += w[i] * xi[i];
          yo[o] = acc;
        }
      }
      break;
    }
    case LayerKind::Conv1d: {
      const std::size_t len = channels_length(in_shape).second;
      const std::size_t out_len = out_shape[1];
      for (std::size_t b = 0; b < n; ++b) {
        const double* xs = x.data.data() + b * in_size;
        double* ys = y.data.data() + b * out_size;
        for (std::size_t oc = 0; oc < layer.out; ++oc) {
          double* yrow = ys + oc * out_len;
          std::fill(yrow, yrow + out_len, layer.bias[oc]);
          for (std::size_t ic = 0; ic < layer.in; ++ic) {
            const double* xrow = xs + ic * len;
            const double* w = layer.weights.data() + (oc * layer.in + ic) * layer.kernel;
            for (std::size_t k = 0; k < layer.kernel; ++k) {
              const double wk = w[k];
              for (std::size_t t = 0; t < out_len; ++t) yrow[t] += wk * xrow[t * layer.stride + k];
            }
          }
        }
      }
      break;
    }
    case LayerKind::ReLU:
      for (std::size_t k = 0; k < x.size(); ++k) y.data[k] = x.data[k] > 0 ? x.data[k] : 0.0;
      break;
    case LayerKind::AdaptiveMaxPool1d: {
      const auto [c, len] = channels_length(in_shape);
      for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          const double* xrow = x.data.data() + b * in_size + ch * len;
          double* yrow = y.data.data() + b * out_size + ch * layer.out;
          for (std::size_t j = 0; j < layer.out; ++j) {
            const std::size_t lo = pool_begin(j, len, layer.out), hi = pool_begin(j + 1, len, layer.out);
            yrow[j] = *std::max_element(xrow + lo, xrow + hi);
          }
        }
      }
      break;
    }
    case LayerKind::Flatten: y.data = x.data; break;
  }
  return y;
}

Tensor backward_layer(const Layer& layer, const Tensor& x, const Tensor& grad_out, std::vector<double>* dw,
                      std::vector<double>* db) {
  const auto in_shape = sample_shape_of(x);
  const auto out_shape = output_shape(layer, in_shape);
  const std::size_t n = x.rows();
  if (grad_out.rows() != n || grad_out.row_size() != product(out_shape))
    throw ShapeError("gradient shape " + shape_string(grad_out.shape) + " does not match layer output");
  Tensor dx(x.shape);
  const std::size_t in_size = x.row_size();
  const std::size_t out_size = grad_out.row_size();

  switch (layer.kind) {
    case LayerKind::Dense: {
      for (std::size_t b = 0; b < n; ++b) {
        const double* xi = x.data.data() + b * in_size;
        const double* g = grad_out.data.data() + b * out_size;
        double* dxi = dx.data.data() + b * in_size;
        for (std::size_t o = 0; o < layer.out; ++o) {
          const double go = g[o];
          if (go == 0.0) continue;
          const double* w = layer.weights.data() + o * layer.in;
          double* dwo = dw->data() + o * layer.in;
          for (std::size_t i = 0; i < layer.in; ++i) {
            dwo[i] += go * xi[i];
            dxi[i] += w[i] * go;
          }
          (*db)[o] += go;
        }
      }
      break;
    }
    case LayerKind::Conv1d: {
      const std::size_t len = channels_length(in_shape).second;
      const std::size_t out_len = out_shape[1];
      for (std::size_t b = 0; b < n; ++b) {
        const double* xs = x.data.data() + b * in_size;
        const double* gs = grad_out.data.data() + b * out_size;
        double* dxs = dx.data.data() + b * in_size;
        for (std::size_t oc = 0; oc < layer.out; ++oc) {
          const double* grow = gs + oc * out_len;
          double gsum = 0.0;
          for (std::size_t t = 0; t < out_len; ++t) gsum += grow[t];
          (*db)[oc] += gsum;
          for (std::size_t ic = 0; ic < layer.in; ++ic) {
            const double* xrow = xs + ic * len;
            double* dxrow = dxs + ic * len;
            const std::size_t woff = (oc * layer.in + ic) * layer.kernel;
            for (std::size_t k = 0; k < layer.kernel; ++k) {
              const double wk = layer.weights[woff + k];
              double acc = 0.0;
              for (std::size_t t = 0; t < out_len; ++t) {
                acc += grow[t] * xrow[t * layer.stride + k];
                dxrow[t * layer.stride + k] += wk * grow[t];
              }
              (*dw)[woff + k] += acc;
            }
          }
        }
      }
      break;
    }
    case LayerKind::ReLU:
      for (std::size_t k = 0; k < x.size(); ++k) dx.data[k] = x.data[k] > 0 ? grad_out.data[k] : 0.0;
      break;
    case LayerKind::AdaptiveMaxPool1d: {
      const auto [c, len] = channels_length(in_shape);
      for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          const double* xrow = x.data.data() + b * in_size + ch * len;
          double* dxrow = dx.data.data() + b * in_size + ch * len;
          const double* grow = grad_out.data.data() + b * out_size + ch * layer.out;
          for (std::size_t j = 0; j < layer.out; ++j) {
            const std::size_t lo = pool_begin(j, len, layer.out), hi = pool_begin(j + 1, len, layer.out);
            const auto arg = static_cast<std::size_t>(std::max_element(xrow + lo, xrow + hi) - xrow);
            dxrow[arg] += grow[j];
          }
        }
      }
      break;
    }
    case LayerKind::Flatten: dx.data = grad_out.data; break;
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Models

std::size_t NetworkModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.parameter_count();
  return n;
}

void NetworkModel::validate() const {
  auto shape = input_shape;
  for (const auto& l : layers) {
    check_param_sizes(l);
    shape = output_shape(l, shape);
  }
  if (product(shape) != 1) throw ShapeError("network output must be scalar, got " + shape_string(shape));
}

std::vector<ParamGroup> NetworkModel::groups() const {
  std::set<ParamGroup> g;
  for (const auto& l : layers)
    if (l.has_params()) g.insert(l.group);
  return {g.begin(), g.end()};
}

void initialize_parameters(std::span<Layer> layers, std::uint64_t seed) {
  SplitMix64 rng(seed);
  for (auto& l : layers) {
    if (!l.has_params()) continue;
    const double limit = std::sqrt(6.0 / static_cast<double>(l.fan_in()));
    for (double& w : l.weights) w = rng.uniform(-limit, limit);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
}

NetworkModel build_fcnet(std::uint64_t seed) {
  NetworkModel m;
  m.arch = Architecture::FCNet;
  m.seed = seed;
  m.layers = {Layer::dense(dataset::kFeatureWidth, 200, ParamGroup::Input), Layer::relu(),
              Layer::dense(200, 50, ParamGroup::General), Layer::relu(), Layer::dense(50, 1, ParamGroup::Task)};
  initialize_parameters(m.layers, seed);
  m.validate();
  return m;
}

NetworkModel build_convnet(std::uint64_t seed) {
  NetworkModel m;
  m.arch = Architecture::ConvNet;
  m.seed = seed;
  m.layers = {Layer::conv1d(1, 16, 3, 1, ParamGroup::Input),
              Layer::relu(),
              Layer::conv1d(16, 32, 3, 1, ParamGroup::General),
              Layer::relu(),
              Layer::conv1d(32, 64, 3, 1, ParamGroup::General),
              Layer::relu(),
              Layer::adaptive_max_pool(4),
              Layer::flatten(),
              Layer::dense(256, 50, ParamGroup::Task),
              Layer::relu(),
              Layer::dense(50, 1, ParamGroup::Task)};
  initialize_parameters(m.layers, seed);
  m.validate();
  return m;
}

NetworkModel build_network(Architecture arch, std::uint64_t seed) {
  switch (arch) {
    case Architecture::FCNet: return build_fcnet(seed);
    case Architecture::ConvNet: return build_convnet(seed);
    case Architecture::Custom: break;
  }
  throw ConfigError("cannot build a custom architecture by name");
}

Gradients Gradients::zeros_like(const NetworkModel& model) {
  Gradients g;
  for (const auto& l : model.layers) {
    g.weights.emplace_back(l.weights.size(), 0.0);
    g.bias.emplace_back(l.bias.size(), 0.0);
  }
  return g;
}

Tensor forward_prefix(const NetworkModel& model, const Tensor& batch, std::size_t n_layers) {
  if (sample_shape_of(batch) != model.input_shape && product(sample_shape_of(batch)) != product(model.input_shape))
    throw ShapeError("batch shape " + shape_string(batch.shape) + " does not match model input " +
                     shape_string(model.input_shape));
  if (n_layers > model.layers.size()) throw ShapeError("prefix longer than the network");
  Tensor x = batch;
  x.shape = {batch.rows()};
  x.shape.insert(x.shape.end(), model.input_shape.begin(), model.input_shape.end());
  for (std::size_t k = 0; k < n_layers; ++k) x = forward_layer(model.layers[k], x);
  return x;
}

Tensor forward(const NetworkModel& model, const Tensor& batch) {
  Tensor y = forward_prefix(model, batch, model.layers.size());
  y.shape = {y.rows(), 1};
  return y;
}

LossValue mse_loss(const Tensor& pred, const Tensor& labels) {
  if (pred.shape != labels.shape)
    throw ShapeError("prediction shape " + shape_string(pred.shape) + " vs label shape " +
                     shape_string(labels.shape));
  if (pred.size() == 0) throw ShapeError("empty batch");
  LossValue out;
  out.grad = Tensor(pred.shape);
  const double n = static_cast<double>(pred.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double r = pred.data[k] - labels.data[k];
    sum += r * r;
    out.grad.data[k] = 2.0 * r / n;
  }
  out.loss = sum / n;
  return out;
}

LossAndGradients backward(const NetworkModel& model, const Tensor& batch, const Tensor& labels) {
  std::vector<Tensor> acts;
  acts.reserve(model.layers.size() + 1);
  acts.push_back(forward_prefix(model, batch, 0));
  for (const auto& l : model.layers) acts.push_back(forward_layer(l, acts.back()));
  Tensor pred = acts.back();
  pred.shape = {pred.rows(), 1};
  LossValue lv = mse_loss(pred, labels);

  LossAndGradients out;
  out.loss = lv.loss;
  out.grads = Gradients::zeros_like(model);
  Tensor g = std::move(lv.grad);
  g.shape = acts.back().shape;
  for (std::size_t k = model.layers.size(); k-- > 0;) {
    const Layer& l = model.layers[k];
    // The input gradient of the first layer is not needed.
    if (k == 0 && l.has_params()) {
      backward_layer(l, acts[k], g, &out.grads.weights[k], &out.grads.bias[k]);
      break;
    }
    g = backward_layer(l, acts[k], g, &out.grads.weights[k], &out.grads.bias[k]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Adam

AdamState AdamState::for_model(const NetworkModel& model) {
  AdamState s;
  for (const auto& l : model.layers) {
    s.m_weights.emplace_back(l.weights.size(), 0.0);
    s.v_weights.emplace_back(l.weights.size(), 0.0);
    s.m_bias.emplace_back(l.bias.size(), 0.0);
    s.v_bias.emplace_back(l.bias.size(), 0.0);
  }
  return s;
}

GroupRates uniform_rates(double rate) {
  return {{ParamGroup::Input, rate}, {ParamGroup::General, rate}, {ParamGroup::Task, rate}};
}

void check_rates(const NetworkModel& model, const GroupRates& rates) {
  for (const auto& [g, r] : rates)
    if (!(r >= 0) || !std::isfinite(r))
      throw ConfigError("learning rate for group " + std::string(to_string(g)) + " must be finite and >= 0");
  for (ParamGroup g : model.groups())
    if (!rates.count(g)) throw ConfigError("no learning rate for parameter group " + std::string(to_string(g)));
}

void adam_step(NetworkModel& model, const Gradients& grads, AdamState& state, const GroupRates& rates) {
  check_rates(model, rates);
  const std::size_t n = model.layers.size();
  if (grads.weights.size() != n || grads.bias.size() != n || state.m_weights.size() != n)
    throw ShapeError("gradient/optimizer state does not match the model");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);

  auto update = [&](std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                    std::vector<double>& v, double lr) {
    if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size())
      throw ShapeError("gradient block does not match parameter block");
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g[k];
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g[k] * g[k];
      if (lr == 0.0) continue;
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      p[k] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  };
  for (std::size_t k = 0; k < n; ++k) {
    Layer& l = model.layers[k];
    if (!l.has_params()) continue;
    const double lr = rates.at(l.group);
    update(l.weights, grads.weights[k], state.m_weights[k], state.v_weights[k], lr);
    update(l.bias, grads.bias[k], state.m_bias[k], state.v_bias[k], lr);
  }
}

// ---------------------------------------------------------------------------
// Training

std::pair<Tensor, Tensor> to_tensors(std::span<const dataset::SampleRecord> records) {
  Tensor x({records.size(), dataset::kFeatureWidth});
  Tensor y({records.size(), 1});
  for (std::size_t n = 0; n < records.size(); ++n) {
    std::copy(records[n].features.begin(), records[n].features.end(), x.data.begin() + n * dataset::kFeatureWidth);
    y.data[n] = records[n].label;
  }
  return {std::move(x), std::move(y)};
}

TrainHistory train_epochs(NetworkModel& model, const Tensor& inputs, const Tensor& targets, const GroupRates& rates,
                          const TrainOptions& options, const EpochCallback& on_epoch) {
  const std::size_t total = inputs.rows();
  if (total == 0) throw ConfigError("cannot train on an empty record set");
  if (targets.rows() != total || targets.row_size() != 1) throw ShapeError("targets must be (N, 1)");
  if (options.batch_size == 0) throw ConfigError("batch size must be >= 1");
  check_rates(model, rates);

  AdamState state = AdamState::for_model(model);
  SplitMix64 rng(options.seed);
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t width = inputs.row_size();
  const std::size_t batch = std::min(options.batch_size, total);

  TrainHistory history;
  std::vector<double> best_so_far;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    double sum = 0.0;
    for (std::size_t start = 0; start < total; start += batch) {
      const std::size_t nb = std::min(batch, total - start);
      std::vector<std::size_t> shape{nb};
      shape.insert(shape.end(), inputs.shape.begin() + 1, inputs.shape.end());
      Tensor xb(std::move(shape));
      Tensor yb({nb, 1});
      for (std::size_t k = 0; k < nb; ++k) {
        const std::size_t src = order[start + k];
        std::copy_n(inputs.data.begin() + src * width, width, xb.data.begin() + k * width);
        yb.data[k] = targets.data[src];
      }
      const auto lg = backward(model, xb, yb);
      if (!std::isfinite(lg.loss))
        throw NumericError("training diverged: non-finite loss in epoch " + std::to_string(epoch + 1));
      adam_step(model, lg.grads, state, rates);
      sum += lg.loss * static_cast<double>(nb);
    }
    const double epoch_loss = sum / static_cast<double>(total);
    history.loss.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch, epoch_loss, model);

    best_so_far.push_back(best_so_far.empty() ? epoch_loss : std::min(best_so_far.back(), epoch_loss));
    const std::size_t w = options.early_stop_window;
    if (w > 0 && best_so_far.size() > w &&
        best_so_far[best_so_far.size() - 1 - w] - best_so_far.back() < options.early_stop_delta)
      break;
  }
  return history;
}

TrainHistory train_epochs(NetworkModel& model, std::span<const dataset::SampleRecord> records,
                          const GroupRates& rates, const TrainOptions& options, const EpochCallback& on_epoch) {
  const auto [x, y] = to_tensors(records);
  return train_epochs(model, x, y, rates, options, on_epoch);
}

double evaluate_loss(const NetworkModel& model, std::span<const dataset::SampleRecord> records) {
  if (records.empty()) throw ConfigError("cannot evaluate on an empty record set");
  constexpr std::size_t kChunk = 4096;
  double sum = 0.0;
  for (std::size_t start = 0; start < records.size(); start += kChunk) {
    const auto part = records.subspan(start, std::min(kChunk, records.size() - start));
    const auto [x, y] = to_tensors(part);
    const Tensor pred = forward(model, x);
    for (std::size_t k = 0; k < part.size(); ++k) {
      const double r = pred.data[k] - y.data[k];
      sum += r * r;
    }
  }
  return sum / static_cast<double>(records.size());
}

std::vector<double> predict(const NetworkModel& model, std::span<const dataset::FeatureVector> raw_features) {
  if (!model.standardizer) throw ConfigError("model has no embedded standardizer");
  const auto& s = *model.standardizer;
  constexpr std::size_t kChunk = 4096;
  std::vector<double> out;
  out.reserve(raw_features.size());
  for (std::size_t start = 0; start < raw_features.size(); start += kChunk) {
    const std::size_t nb = std::min(kChunk, raw_features.size() - start);
    Tensor x({nb, dataset::kFeatureWidth});
    for (std::size_t k = 0; k < nb; ++k) {
      const auto z = s.apply(raw_features[start + k]);
      std::copy(z.begin(), z.end(), x.data.begin() + k * dataset::kFeatureWidth);
    }
    const Tensor y = forward(model, x);
    for (double v : y.data) out.push_back(s.invert_label(v));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

std::vector<char> serialize_model(const NetworkModel& model) {
  model.validate();
  io::ByteWriter w;
  w.raw(kModelMagic);
  w.u32(kModelVersion);
  w.u8(static_cast<std::uint8_t>(model.arch));
  w.u64(model.seed);
  w.u8(model.head_extended ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(model.input_shape.size()));
  for (auto d : model.input_shape) w.u64(d);
  w.u32(static_cast<std::uint32_t>(model.layers.size()));
  for (const auto& l : model.layers) {
    w.u8(static_cast<std::uint8_t>(l.kind));
    w.u8(static_cast<std::uint8_t>(l.group));
    w.u64(l.in);
    w.u64(l.out);
    w.u64(l.kernel);
    w.u64(l.stride);
    w.u64(l.weights.size());
    for (double v : l.weights) w.f64(v);
    w.u64(l.bias.size());
    for (double v : l.bias) w.f64(v);
  }
  w.u8(model.standardizer ? 1 : 0);
  if (model.standardizer) {
    for (double v : model.standardizer->mean) w.f64(v);
    for (double v : model.standardizer->std) w.f64(v);
    w.f64(model.standardizer->label_mean);
    w.f64(model.standardizer->label_std);
  }
  w.str(model.provenance);
  return w.bytes();
}

NetworkModel deserialize_model(const std::vector<char>& bytes, const std::string& source) {
  io::ByteReader r(bytes, source);
  if (r.raw(kModelMagic.size()) != kModelMagic) throw LoadError(source + ": not a model file (bad magic)");
  if (const auto v = r.u32(); v != kModelVersion)
    throw LoadError(source + ": unsupported model version " + std::to_string(v));
  NetworkModel m;
  const auto arch = r.u8();
  if (arch > 2) throw LoadError(source + ": unknown architecture tag");
  m.arch = static_cast<Architecture>(arch);
  m.seed = r.u64();
  m.head_extended = r.u8() != 0;
  const auto rank = r.u32();
  if (rank == 0 || rank > 4) throw LoadError(source + ": bad input rank");
  m.input_shape.clear();
  for (std::uint32_t k = 0; k < rank; ++k) m.input_shape.push_back(static_cast<std::size_t>(r.u64()));
  const auto n_layers = r.u32();
  for (std::uint32_t k = 0; k < n_layers; ++k) {
    Layer l;
    const auto kind = r.u8();
    const auto group = r.u8();
    if (kind > 4 || group > 2) throw LoadError(source + ": bad layer tag");
    l.kind = static_cast<LayerKind>(kind);
    l.group = static_cast<ParamGroup>(group);
    l.in = static_cast<std::size_t>(r.u64());
    l.out = static_cast<std::size_t>(r.u64());
    l.kernel = static_cast<std::size_t>(r.u64());
    l.stride = static_cast<std::size_t>(r.u64());
    auto read_block = [&r, &source](std::vector<double>& block) {
      const auto count = r.u64();
      if (count > r.remaining() / 8) throw LoadError(source + ": truncated file");
      block.resize(static_cast<std::size_t>(count));
      for (double& v : block) v = r.f64();
    };
    read_block(l.weights);
    read_block(l.bias);
    m.layers.push_back(std::move(l));
  }
  if (r.u8()) {
    dataset::Standardizer s;
    for (double& v : s.mean) v = r.f64();
    for (double& v : s.std) v = r.f64();
    s.label_mean = r.f64();
    s.label_std = r.f64();
    m.standardizer = s;
  }
  m.provenance = r.str();
  if (r.remaining() != 0) throw LoadError(source + ": trailing bytes");
  try {
    m.validate();
  } catch (const ShapeError& e) {
    throw LoadError(source + ": inconsistent architecture: " + e.what());
  }
  return m;
}

void save_model(const NetworkModel& model, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_model(model));
}

NetworkModel load_model(const std::filesystem::path& path) {
  return deserialize_model(io::read_file(path), path.string());
}

}  // namespace pemnet::net
