#pragma once

// Outcome models Q(x, a): a fully-connected network taking the treatment
// indicator as an extra input, and a neural additive model with one subnet
// per covariate whose last hidden layer is shared by two treatment heads.

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "energyate/nn.hpp"

namespace energyate::models {

enum class ModelKind { fcnn, nam };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

struct FcnnModel {
  nn::ParameterSet params;  // input p + 1, output 1
  int p = 0;
};

/// Each subnet maps x_j through the trunk to a shared representation z_j and
/// then to a 2-vector whose entry a is q_j(x_j, a).
struct NamModel {
  std::vector<nn::ParameterSet> subnets;  // dims 1 -> trunk... -> 2
  double bias = 0.0;
  int p = 0;
};

using OutcomeModel = std::variant<FcnnModel, NamModel>;

/// Hidden widths from the Table-1 style architecture: three layers of 100.
inline const std::vector<int> kDefaultFcnnHidden{100, 100, 100};
inline const std::vector<int> kDefaultNamTrunk{32, 32};

FcnnModel make_fcnn(int p, std::span<const int> hidden, std::uint64_t seed);
NamModel make_nam(int p, std::span<const int> trunk, std::uint64_t seed);
OutcomeModel make_model(ModelKind kind, int p, std::uint64_t seed);

ModelKind kind_of(const OutcomeModel& m);
int input_dim(const OutcomeModel& m);

double fcnn_predict(const FcnnModel& model, std::span<const double> x, int a);
double nam_predict(const NamModel& model, std::span<const double> x, int a);
/// q_j(x_j, a) for the 0-based feature index j.
double nam_feature_contribution(const NamModel& model, int j, double xj, int a);

double predict(const OutcomeModel& model, std::span<const double> x, int a);

/// Predictions for every row of x under the per-row arms in `a`.
Eigen::VectorXd predict_batch(const OutcomeModel& model, const Eigen::MatrixXd& x,
                              const Eigen::VectorXi& a);
/// Predictions for every row of x with all rows assigned to `arm`.
Eigen::VectorXd predict_arm(const OutcomeModel& model, const Eigen::MatrixXd& x, int arm);

// ---------------------------------------------------------------------------
// Training interface: a model is a list of layer stacks plus free scalars.

struct ModelGradient {
  std::vector<nn::GradientSet> blocks;
  std::vector<double> scalars;
};

struct ModelOptimizer {
  std::vector<nn::OptimizerState> blocks;
  std::vector<double> scalar_velocity;
  double learning_rate = 0.01;
  double momentum = 0.9;
};

/// Retained state of a batched forward pass.
struct ModelForward {
  Eigen::VectorXd prediction;
  std::vector<nn::ForwardCache> caches;
  Eigen::VectorXi arms;
};

ModelForward forward_train(const OutcomeModel& model, const Eigen::MatrixXd& x,
                           const Eigen::VectorXi& a);
/// Gradient of a loss given d(loss)/d(prediction_i) for every row.
ModelGradient backward_train(const OutcomeModel& model, const ModelForward& fwd,
                             const Eigen::VectorXd& prediction_grad);

ModelOptimizer make_optimizer(const OutcomeModel& model, double learning_rate, double momentum);
void sgd_step(OutcomeModel& model, const ModelGradient& grad, ModelOptimizer& opt);

/// Flat view of every trainable value, in block order then scalars.
std::vector<double> flatten(const OutcomeModel& model);
std::vector<double> flatten(const ModelGradient& grad);
void assign_flat(OutcomeModel& model, std::span<const double> values);
bool all_finite(const OutcomeModel& model);

// ---------------------------------------------------------------------------
// Shape functions.

struct ShapeFunctionTable {
  int feature = 0;
  std::vector<double> grid;
  /// q_j(x, 1) - q_j(x, 0) minus its training-sample mean.
  std::vector<double> delta;
  /// The subtracted training mean.
  double training_mean = 0.0;
};

struct ShapeExtraction {
  std::vector<ShapeFunctionTable> tables;
  /// Sum of the subtracted means: the mean predicted effect carried by the
  /// centred tables.
  double ate_offset = 0.0;
};

/// Per-feature tables on an equispaced grid over the feature's training
/// range, in model-input units. A constant feature yields a single-point
/// table with zero contribution.
ShapeExtraction extract_shape_functions(const NamModel& model, const Eigen::MatrixXd& train_x,
                                        int grid_size);

}  // namespace energyate::models
