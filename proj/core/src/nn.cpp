#include "energyate/nn.hpp"

#include <cmath>
#include <random>
#include <string>

#include "energyate/error.hpp"

namespace energyate::nn {

namespace {

void relu_inplace(Eigen::MatrixXd& m) { m = m.cwiseMax(0.0); }

void check_input_rows(const ParameterSet& params, Eigen::Index rows) {
  if (params.depth() == 0) throw ShapeError("network has no layers");
  if (rows != params.in_dim()) {
    throw ShapeError("input dimension " + std::to_string(rows) + " does not match network input " +
                     std::to_string(params.in_dim()));
  }
}

}  // namespace

LayerStack::LayerStack(std::vector<Layer> layers) : layers_(std::move(layers)) {
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    if (layers_[k].bias.size() != layers_[k].weight.rows()) {
      throw ShapeError("layer " + std::to_string(k) + ": bias length does not match weight rows");
    }
    if (k > 0 && layers_[k].weight.cols() != layers_[k - 1].weight.rows()) {
      throw ShapeError("layer " + std::to_string(k) + ": input width does not match previous layer");
    }
  }
}

int LayerStack::in_dim() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.front().weight.cols());
}

int LayerStack::out_dim() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.back().weight.rows());
}

std::vector<int> LayerStack::dims() const {
  std::vector<int> d;
  if (layers_.empty()) return d;
  d.push_back(in_dim());
  for (const auto& l : layers_) d.push_back(static_cast<int>(l.weight.rows()));
  return d;
}

std::size_t LayerStack::size() const {
  std::size_t total = 0;
  for (const auto& l : layers_) total += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return total;
}

bool LayerStack::same_shape(const LayerStack& other) const {
  if (layers_.size() != other.layers_.size()) return false;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    if (layers_[k].weight.rows() != other.layers_[k].weight.rows() ||
        layers_[k].weight.cols() != other.layers_[k].weight.cols()) {
      return false;
    }
  }
  return true;
}

bool LayerStack::all_finite() const {
  for (const auto& l : layers_) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

std::vector<double> LayerStack::flatten() const {
  std::vector<double> out;
  out.reserve(size());
  for (const auto& l : layers_) {
    out.insert(out.end(), l.weight.data(), l.weight.data() + l.weight.size());
    out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
  }
  return out;
}

void LayerStack::assign_flat(std::span<const double> values) {
  if (values.size() != size()) throw ShapeError("flat parameter length mismatch");
  std::size_t pos = 0;
  for (auto& l : layers_) {
    std::copy_n(values.data() + pos, l.weight.size(), l.weight.data());
    pos += static_cast<std::size_t>(l.weight.size());
    std::copy_n(values.data() + pos, l.bias.size(), l.bias.data());
    pos += static_cast<std::size_t>(l.bias.size());
  }
}

double& LayerStack::value_at(std::size_t flat_index) {
  for (auto& l : layers_) {
    const auto nw = static_cast<std::size_t>(l.weight.size());
    if (flat_index < nw) return l.weight.data()[flat_index];
    flat_index -= nw;
    const auto nb = static_cast<std::size_t>(l.bias.size());
    if (flat_index < nb) return l.bias.data()[flat_index];
    flat_index -= nb;
  }
  throw IndexError("flat parameter index out of range");
}

void LayerStack::set_zero() {
  for (auto& l : layers_) {
    l.weight.setZero();
    l.bias.setZero();
  }
}

GradientSet GradientSet::zeros_like(const LayerStack& shape) {
  std::vector<Layer> layers;
  layers.reserve(shape.depth());
  for (const auto& l : shape.layers()) {
    layers.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                      Eigen::VectorXd::Zero(l.bias.size())});
  }
  return GradientSet(std::move(layers));
}

ParameterSet init_params(std::span<const int> layer_dims, std::uint64_t seed) {
  if (layer_dims.size() < 2) {
    throw InvalidArchitectureError("a network needs at least an input and an output dimension");
  }
  for (int d : layer_dims) {
    if (d <= 0) throw InvalidArchitectureError("layer dimensions must be positive");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Layer> layers;
  layers.reserve(layer_dims.size() - 1);
  for (std::size_t k = 0; k + 1 < layer_dims.size(); ++k) {
    const int fan_in = layer_dims[k];
    const int fan_out = layer_dims[k + 1];
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Layer layer{Eigen::MatrixXd(fan_out, fan_in), Eigen::VectorXd::Zero(fan_out)};
    // Fill in a fixed (row, col) order so the draw sequence is independent of
    // Eigen's storage order.
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) layer.weight(r, c) = scale * normal(rng);
    }
    layers.push_back(std::move(layer));
  }
  return ParameterSet(std::move(layers));
}

Eigen::MatrixXd forward_batch(const ParameterSet& params, const Eigen::MatrixXd& inputs,
                              ForwardCache& cache) {
  check_input_rows(params, inputs.rows());
  const auto& layers = params.layers();
  cache.activations.resize(layers.size() + 1);
  cache.activations[0] = inputs;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    Eigen::MatrixXd z = layers[k].weight * cache.activations[k];
    z.colwise() += layers[k].bias;
    if (k + 1 < layers.size()) relu_inplace(z);
    cache.activations[k + 1] = std::move(z);
  }
  return cache.activations.back();
}

Eigen::MatrixXd forward_batch(const ParameterSet& params, const Eigen::MatrixXd& inputs) {
  check_input_rows(params, inputs.rows());
  const auto& layers = params.layers();
  Eigen::MatrixXd a = inputs;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    Eigen::MatrixXd z = layers[k].weight * a;
    z.colwise() += layers[k].bias;
    if (k + 1 < layers.size()) relu_inplace(z);
    a = std::move(z);
  }
  return a;
}

double forward(const ParameterSet& params, std::span<const double> input) {
  if (params.out_dim() != 1) throw ShapeError("scalar forward requires a single output unit");
  const Eigen::Map<const Eigen::VectorXd> x(input.data(), static_cast<Eigen::Index>(input.size()));
  return forward_batch(params, Eigen::MatrixXd(x))(0, 0);
}

void backward_batch(const ParameterSet& params, const ForwardCache& cache,
                    const Eigen::MatrixXd& output_grad, GradientSet& grads,
                    Eigen::MatrixXd* input_grad) {
  const auto& layers = params.layers();
  if (cache.activations.size() != layers.size() + 1) {
    throw ShapeError("forward cache does not belong to this network");
  }
  const Eigen::MatrixXd& out = cache.activations.back();
  if (output_grad.rows() != out.rows() || output_grad.cols() != out.cols()) {
    throw ShapeError("output gradient shape does not match network output");
  }
  if (!grads.same_shape(params)) grads = GradientSet::zeros_like(params);

  Eigen::MatrixXd delta = output_grad;
  for (std::size_t k = layers.size(); k-- > 0;) {
    const Eigen::MatrixXd& a_in = cache.activations[k];
    auto& g = grads.layers()[k];
    g.weight.noalias() = delta * a_in.transpose();
    g.bias = delta.rowwise().sum();
    if (k > 0 || input_grad != nullptr) {
      Eigen::MatrixXd prev = layers[k].weight.transpose() * delta;
      if (k > 0) {
        // ReLU derivative taken as 0 at the kink.
        prev.array() *= (a_in.array() > 0.0).cast<double>();
        delta = std::move(prev);
      } else {
        *input_grad = std::move(prev);
      }
    }
  }
}

LossAndGradient backward(const ParameterSet& params, const Eigen::MatrixXd& inputs,
                         const Eigen::VectorXd& targets) {
  if (inputs.cols() == 0) throw EmptyBatchError("backward called with an empty batch");
  if (params.out_dim() != 1) throw ShapeError("squared-error loss requires a single output unit");
  if (targets.size() != inputs.cols()) throw ShapeError("target count does not match batch size");
  ForwardCache cache;
  const Eigen::MatrixXd out = forward_batch(params, inputs, cache);
  const Eigen::RowVectorXd residual = out.row(0) - targets.transpose();
  const double b = static_cast<double>(inputs.cols());
  LossAndGradient result;
  result.loss = residual.squaredNorm() / b;
  const Eigen::MatrixXd out_grad = (2.0 / b) * residual;
  backward_batch(params, cache, out_grad, result.gradient);
  return result;
}

LossAndGradient backward(const ParameterSet& params,
                         std::span<const std::pair<std::vector<double>, double>> batch) {
  if (batch.empty()) throw EmptyBatchError("backward called with an empty batch");
  const auto in = static_cast<Eigen::Index>(batch.front().first.size());
  Eigen::MatrixXd inputs(in, static_cast<Eigen::Index>(batch.size()));
  Eigen::VectorXd targets(static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (static_cast<Eigen::Index>(batch[i].first.size()) != in) {
      throw ShapeError("inconsistent input lengths within a batch");
    }
    for (Eigen::Index r = 0; r < in; ++r) {
      inputs(r, static_cast<Eigen::Index>(i)) = batch[i].first[static_cast<std::size_t>(r)];
    }
    targets(static_cast<Eigen::Index>(i)) = batch[i].second;
  }
  return backward(params, inputs, targets);
}

OptimizerState make_optimizer(const LayerStack& shape, double learning_rate, double momentum,
                              std::uint64_t seed) {
  if (!(learning_rate > 0.0)) throw InvalidDataError("learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidDataError("momentum must lie in [0, 1)");
  return OptimizerState{GradientSet::zeros_like(shape), learning_rate, momentum, seed};
}

void sgd_step(ParameterSet& params, const GradientSet& grads, OptimizerState& state) {
  if (!params.same_shape(grads)) throw ShapeError("gradient shape does not match parameters");
  if (!state.velocity.same_shape(params)) throw ShapeError("optimizer state shape mismatch");
  auto& pl = params.layers();
  auto& vl = state.velocity.layers();
  const auto& gl = grads.layers();
  for (std::size_t k = 0; k < pl.size(); ++k) {
    vl[k].weight = state.momentum * vl[k].weight + gl[k].weight;
    vl[k].bias = state.momentum * vl[k].bias + gl[k].bias;
    pl[k].weight -= state.learning_rate * vl[k].weight;
    pl[k].bias -= state.learning_rate * vl[k].bias;
  }
}

}  // namespace energyate::nn
