#include <algorithm>
#include <cmath>
#include <numeric>

#include "mlsmo/error.hpp"
#include "mlsmo/kernels.hpp"
#include "mlsmo/random.hpp"
#include "mlsmo/surrogate.hpp"

namespace mlsmo {
namespace {

Scaler identity_scaler(std::size_t width) {
  Scaler s;
  s.shift.assign(width, 0.0);
  s.scale.assign(width, 1.0);
  return s;
}

double activate(Activation a, double z) {
  return a == Activation::kRelu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

// Derivative expressed through the activation output where possible.
double activation_slope(Activation a, double z, double out) {
  return a == Activation::kRelu ? (z > 0.0 ? 1.0 : 0.0) : 1.0 - out * out;
}

// Z = A W^T + b for one layer.
Matrix dense(const DenseLayer& layer, const Matrix& inputs) {
  Matrix out(inputs.rows(), layer.outputs);
  const auto& k = kernels::active();
  for (std::size_t b = 0; b < inputs.rows(); ++b) {
    const double* a = inputs.row(b).data();
    auto z = out.row(b);
    for (std::size_t o = 0; o < layer.outputs; ++o) {
      z[o] = k.dot(layer.weights.data() + o * layer.inputs, a, layer.inputs) + layer.bias[o];
    }
  }
  return out;
}

std::size_t parameter_count(const MlpModel& model) {
  std::size_t count = 0;
  for (const auto& l : model.layers) count += l.weights.size() + l.bias.size();
  return count;
}

}  // namespace

MlpModel init_mlp(std::size_t inputs, std::size_t outputs, std::span<const std::size_t> hidden,
                  Activation activation, std::uint64_t seed) {
  if (inputs == 0 || outputs == 0) {
    throw Error(ErrorCode::kInvalidArgument, "mlp needs non-empty input and output layers");
  }
  MlpModel model;
  model.activation = activation;
  model.input_scaler = identity_scaler(inputs);
  model.output_scaler = identity_scaler(outputs);
  Rng rng = make_rng(seed, {0x1417});
  std::size_t fan_in = inputs;
  std::vector<std::size_t> sizes(hidden.begin(), hidden.end());
  sizes.push_back(outputs);
  for (std::size_t width : sizes) {
    if (width == 0) throw Error(ErrorCode::kInvalidArgument, "zero-width layer");
    DenseLayer layer;
    layer.inputs = fan_in;
    layer.outputs = width;
    layer.weights.resize(fan_in * width);
    layer.bias.assign(width, 0.0);
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + width));
    for (double& w : layer.weights) w = (2.0 * uniform01(rng) - 1.0) * limit;
    model.layers.push_back(std::move(layer));
    fan_in = width;
  }
  return model;
}

Matrix MlpModel::forward(const Matrix& scaled_inputs) const {
  if (scaled_inputs.cols() != n_inputs()) {
    throw Error(ErrorCode::kDimensionMismatch, "mlp input width");
  }
  Matrix a = scaled_inputs;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Matrix z = dense(layers[l], a);
    if (l + 1 < layers.size()) {
      for (double& v : z.data()) v = activate(activation, v);
    }
    a = std::move(z);
  }
  return a;
}

Matrix MlpModel::predict(const Matrix& designs) const {
  return output_scaler.invert(forward(input_scaler.apply(designs)));
}

std::vector<double> mlp_parameters(const MlpModel& model) {
  std::vector<double> out;
  out.reserve(parameter_count(model));
  for (const auto& l : model.layers) {
    out.insert(out.end(), l.weights.begin(), l.weights.end());
    out.insert(out.end(), l.bias.begin(), l.bias.end());
  }
  return out;
}

void set_mlp_parameters(MlpModel& model, std::span<const double> params) {
  if (params.size() != parameter_count(model)) {
    throw Error(ErrorCode::kDimensionMismatch, "parameter vector length");
  }
  std::size_t offset = 0;
  for (auto& l : model.layers) {
    std::copy_n(params.begin() + static_cast<std::ptrdiff_t>(offset), l.weights.size(),
                l.weights.begin());
    offset += l.weights.size();
    std::copy_n(params.begin() + static_cast<std::ptrdiff_t>(offset), l.bias.size(),
                l.bias.begin());
    offset += l.bias.size();
  }
}

LossAndGradient mlp_loss_and_gradient(const MlpModel& model, const Matrix& scaled_inputs,
                                      const Matrix& scaled_targets, double weight_decay) {
  const std::size_t n_layers = model.layers.size();
  const std::size_t batch = scaled_inputs.rows();
  if (scaled_targets.rows() != batch || scaled_targets.cols() != model.n_outputs() ||
      scaled_inputs.cols() != model.n_inputs()) {
    throw Error(ErrorCode::kDimensionMismatch, "mlp batch shapes");
  }
  const auto& k = kernels::active();

  // pre[l] = pre-activation of layer l, post[l] = its output (post[-1] = input).
  std::vector<Matrix> pre(n_layers), post(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    pre[l] = dense(model.layers[l], l == 0 ? scaled_inputs : post[l - 1]);
    post[l] = pre[l];
    if (l + 1 < n_layers) {
      for (double& v : post[l].data()) v = activate(model.activation, v);
    }
  }

  const Matrix& out = post.back();
  const double denom = static_cast<double>(batch * model.n_outputs());
  LossAndGradient result;
  Matrix delta(batch, model.n_outputs());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < model.n_outputs(); ++o) {
      const double err = out(b, o) - scaled_targets(b, o);
      result.loss += err * err;
      delta(b, o) = 2.0 * err / denom;
    }
  }
  result.loss /= denom;

  std::vector<std::size_t> offsets(n_layers);
  std::size_t total = 0;
  for (std::size_t l = 0; l < n_layers; ++l) {
    offsets[l] = total;
    total += model.layers[l].weights.size() + model.layers[l].bias.size();
    result.loss += weight_decay * k.dot(model.layers[l].weights.data(),
                                        model.layers[l].weights.data(),
                                        model.layers[l].weights.size());
  }
  result.gradient.assign(total, 0.0);

  for (std::size_t l = n_layers; l-- > 0;) {
    const DenseLayer& layer = model.layers[l];
    const Matrix& inputs = l == 0 ? scaled_inputs : post[l - 1];
    double* grad_w = result.gradient.data() + offsets[l];
    double* grad_b = grad_w + layer.weights.size();
    for (std::size_t b = 0; b < batch; ++b) {
      const double* a = inputs.row(b).data();
      for (std::size_t o = 0; o < layer.outputs; ++o) {
        const double d = delta(b, o);
        if (d == 0.0) continue;
        k.axpy(d, a, grad_w + o * layer.inputs, layer.inputs);
        grad_b[o] += d;
      }
    }
    if (weight_decay != 0.0) k.axpy(2.0 * weight_decay, layer.weights.data(), grad_w, layer.weights.size());
    if (l == 0) break;

    Matrix prev(batch, layer.inputs);
    for (std::size_t b = 0; b < batch; ++b) {
      double* p = prev.row(b).data();
      for (std::size_t o = 0; o < layer.outputs; ++o) {
        const double d = delta(b, o);
        if (d != 0.0) k.axpy(d, layer.weights.data() + o * layer.inputs, p, layer.inputs);
      }
      for (std::size_t i = 0; i < layer.inputs; ++i) {
        p[i] *= activation_slope(model.activation, pre[l - 1](b, i), post[l - 1](b, i));
      }
    }
    delta = std::move(prev);
  }
  return result;
}

MlpModel train_mlp(const TabularDataset& train, const Hyperparameters& hp, std::uint64_t seed) {
  validate_hyperparameters(ModelKind::kMlp, hp);
  const std::size_t n = train.rows();
  if (n < 2) throw Error(ErrorCode::kDatasetTooSmall, "mlp needs at least 2 rows");
  const Hyperparameters defaults = default_hyperparameters(ModelKind::kMlp);
  const auto param = [&](const char* key) { return hp.get_or(key, defaults.get(key)); };

  std::vector<std::size_t> hidden{static_cast<std::size_t>(param("hidden_1"))};
  if (const auto second = static_cast<std::size_t>(param("hidden_2")); second > 0) {
    hidden.push_back(second);
  }
  const Activation activation =
      static_cast<int>(param("activation")) == 1 ? Activation::kTanh : Activation::kRelu;
  const double learning_rate = param("learning_rate");
  const auto epochs = static_cast<std::size_t>(param("epochs"));
  const double weight_decay = param("weight_decay");
  auto batch_size = static_cast<std::size_t>(param("batch_size"));
  if (batch_size == 0) batch_size = n < 1024 ? n : 256;
  batch_size = std::min(batch_size, n);

  MlpModel model = init_mlp(train.n_features(), train.n_targets(), hidden, activation, seed);
  model.input_scaler = fit_scaler(train.features(), ScalerKind::kStandard);
  model.output_scaler = fit_scaler(train.targets(), ScalerKind::kStandard);
  const Matrix xs = model.input_scaler.apply(train.features());
  const Matrix ys = model.output_scaler.apply(train.targets());

  std::vector<double> params = mlp_parameters(model);
  std::vector<double> m1(params.size(), 0.0), m2(params.size(), 0.0);
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  double beta1_t = 1.0, beta2_t = 1.0;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(seed, {0xba7c4});
  const bool full_batch = batch_size == n;
  Matrix xb, yb;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    if (!full_batch) shuffle_indices(order, rng);
    for (std::size_t start = 0; start < n; start += batch_size) {
      const Matrix* bx = &xs;
      const Matrix* by = &ys;
      if (!full_batch) {
        const std::span<const std::size_t> idx =
            std::span<const std::size_t>(order).subspan(start, std::min(batch_size, n - start));
        xb = xs.select_rows(idx);
        yb = ys.select_rows(idx);
        bx = &xb;
        by = &yb;
      }
      const LossAndGradient lg = mlp_loss_and_gradient(model, *bx, *by, weight_decay);
      if (!std::isfinite(lg.loss)) {
        throw Error(ErrorCode::kTrainingDiverged,
                    "non-finite loss at epoch " + std::to_string(epoch));
      }
      beta1_t *= kBeta1;
      beta2_t *= kBeta2;
      for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = lg.gradient[i];
        m1[i] = kBeta1 * m1[i] + (1.0 - kBeta1) * g;
        m2[i] = kBeta2 * m2[i] + (1.0 - kBeta2) * g * g;
        const double m_hat = m1[i] / (1.0 - beta1_t);
        const double v_hat = m2[i] / (1.0 - beta2_t);
        params[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + kEps);
      }
      set_mlp_parameters(model, params);
    }
  }
  if (!std::all_of(params.begin(), params.end(), [](double v) { return std::isfinite(v); })) {
    throw Error(ErrorCode::kTrainingDiverged, "non-finite parameters after training");
  }
  return model;
}

}  // namespace mlsmo
