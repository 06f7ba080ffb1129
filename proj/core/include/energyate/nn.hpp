#pragma once

// Small deterministic feed-forward network engine: dense layers, ReLU hidden
// activations, identity output, reverse-mode gradients and momentum SGD.
//
// Batched routines use column-major batches: an input batch is an
// (in_dim x batch) matrix, one sample per column.

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace energyate::nn {

struct Layer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

/// Ordered list of dense layers. Shared by parameters and their gradients.
class LayerStack {
 public:
  LayerStack() = default;
  explicit LayerStack(std::vector<Layer> layers);

  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::vector<Layer>& layers() noexcept { return layers_; }
  std::size_t depth() const noexcept { return layers_.size(); }

  int in_dim() const;
  int out_dim() const;
  std::vector<int> dims() const;

  /// Total number of scalar values (weights + biases).
  std::size_t size() const;
  bool same_shape(const LayerStack& other) const;
  bool all_finite() const;

  /// Values in layer order; within a layer the column-major weight first,
  /// then the bias.
  std::vector<double> flatten() const;
  void assign_flat(std::span<const double> values);
  double& value_at(std::size_t flat_index);

  void set_zero();

 protected:
  std::vector<Layer> layers_;
};

class ParameterSet : public LayerStack {
 public:
  using LayerStack::LayerStack;
};

class GradientSet : public LayerStack {
 public:
  using LayerStack::LayerStack;
  static GradientSet zeros_like(const LayerStack& shape);
};

struct OptimizerState {
  GradientSet velocity;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 0;
};

/// Activations retained by a batched forward pass for the backward pass.
/// activations[0] is the input batch, activations.back() the output.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> activations;
};

struct LossAndGradient {
  double loss = 0.0;
  GradientSet gradient;
};

/// Gaussian N(0, 1/fan_in) weights, zero biases. Throws
/// InvalidArchitectureError for fewer than two dims or a non-positive dim.
ParameterSet init_params(std::span<const int> layer_dims, std::uint64_t seed);

/// Scalar network output. The network must have out_dim() == 1.
double forward(const ParameterSet& params, std::span<const double> input);

Eigen::MatrixXd forward_batch(const ParameterSet& params, const Eigen::MatrixXd& inputs);
Eigen::MatrixXd forward_batch(const ParameterSet& params, const Eigen::MatrixXd& inputs,
                              ForwardCache& cache);

/// Backpropagates d(loss)/d(output) (out_dim x batch) through a cached
/// forward pass. Accumulates nothing: `grads` is overwritten. When
/// `input_grad` is non-null it receives d(loss)/d(input).
void backward_batch(const ParameterSet& params, const ForwardCache& cache,
                    const Eigen::MatrixXd& output_grad, GradientSet& grads,
                    Eigen::MatrixXd* input_grad = nullptr);

/// Mean squared error over a batch of (input column, target) pairs and its
/// exact gradient. Requires out_dim() == 1.
LossAndGradient backward(const ParameterSet& params, const Eigen::MatrixXd& inputs,
                         const Eigen::VectorXd& targets);

/// Convenience overload for a list of (input, target) pairs.
LossAndGradient backward(const ParameterSet& params,
                         std::span<const std::pair<std::vector<double>, double>> batch);

OptimizerState make_optimizer(const LayerStack& shape, double learning_rate, double momentum,
                              std::uint64_t seed = 0);

/// Classical momentum: v <- m*v + g; theta <- theta - lr*v.
void sgd_step(ParameterSet& params, const GradientSet& grads, OptimizerState& state);

/// Scalar variant of the same update rule, for parameters that live outside
/// a layer stack.
inline void sgd_step_scalar(double& value, double grad, double& velocity, double learning_rate,
                            double momentum) {
  velocity = momentum * velocity + grad;
  value -= learning_rate * velocity;
}

}  // namespace energyate::nn
