#pragma once

// Composite training objectives and the staged fit:
//   stage 1  solve the energy balancing weights on standardised covariates;
//   stage 2  momentum gradient descent on the outcome model (and the
//            calibration parameter epsilon when beta > 0) with w frozen;
//            epsilon is finally set to its closed-form minimiser at the
//            returned model.
//
//   base   = MSE + alpha * (sqrt E1 + sqrt E0)
//   wreg   = base + beta * mean_i (y_i - Q(x_i, a_i) - epsilon h_i)^2

#include <cstdint>
#include <optional>
#include <vector>

#include "energyate/data.hpp"
#include "energyate/energy.hpp"
#include "energyate/models.hpp"

namespace energyate::training {

struct ObjectiveConfig {
  double alpha = 0.05;
  double beta = 1.0;
  /// Weight the squared errors by w. Unset: on when beta > 0.
  std::optional<bool> weighted_mse;
  /// Skip stage 1 and use uniform weights.
  bool use_weights = true;
  int epochs = 1000;
  double learning_rate = 0.01;
  double momentum = 0.9;
  /// 0 selects full-batch gradient descent.
  int batch_size = 0;
  /// Early-stopping patience (epochs) on validation MSE.
  int patience = 20;
  std::uint64_t seed = 0;
  models::ModelKind kind = models::ModelKind::fcnn;
  std::vector<int> fcnn_hidden = models::kDefaultFcnnHidden;
  std::vector<int> nam_trunk = models::kDefaultNamTrunk;
  energy::SolverConfig solver;

  bool resolved_weighted_mse() const { return weighted_mse.value_or(beta > 0.0); }
};

/// Throws InvalidDataError on negative alpha/beta, epochs < 1, or beta > 0
/// without balancing weights.
void validate(const ObjectiveConfig& cfg);

struct ObjectiveComponents {
  double mse = 0.0;
  /// sqrt(E1) + sqrt(E0) at the current weights.
  double energy = 0.0;
  /// mean_i gamma_i; zero for the base objective.
  double gamma = 0.0;
  double total = 0.0;
};

struct EpochRecord {
  int epoch = 0;
  ObjectiveComponents components;
  std::optional<double> validation_mse;
};

ObjectiveComponents base_objective(const data::Dataset& d, const models::OutcomeModel& model,
                                   const energy::BalancingWeights& w, const ObjectiveConfig& cfg);

/// gamma_i = (y_i - Q(x_i, a_i) - epsilon h_i)^2.
Eigen::VectorXd gamma_term(const data::Dataset& d, const models::OutcomeModel& model,
                           const energy::BalancingWeights& w, double epsilon);

ObjectiveComponents wreg_objective(const data::Dataset& d, const models::OutcomeModel& model,
                                   const energy::BalancingWeights& w, double epsilon,
                                   const ObjectiveConfig& cfg);

struct ObjectiveGradient {
  ObjectiveComponents components;
  models::ModelGradient model;
  double epsilon = 0.0;
};

/// Value and exact gradient of the wreg objective (the base objective when
/// beta = 0). `energy_sqrt_sum` is the precomputed penalty at w, which does
/// not depend on the model or epsilon.
ObjectiveGradient objective_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXi& a,
                                     const Eigen::VectorXd& y, const models::OutcomeModel& model,
                                     const energy::BalancingWeights& w, double epsilon,
                                     double energy_sqrt_sum, const ObjectiveConfig& cfg);

struct FitResult {
  models::OutcomeModel model;
  energy::BalancingWeights weights;
  energy::SolveResult solver;
  double epsilon = 0.0;
  data::Standardizer standardizer;
  std::vector<EpochRecord> trace;
  ObjectiveComponents final_components;
  int best_epoch = 0;
  bool early_stopped = false;
};

/// Staged fit on `train`; `validation` (when present and non-empty) drives
/// early stopping. Throws DivergenceError when the objective turns
/// non-finite.
FitResult fit(const data::Dataset& train, const ObjectiveConfig& cfg,
              const data::Dataset* validation = nullptr);

}  // namespace energyate::training
