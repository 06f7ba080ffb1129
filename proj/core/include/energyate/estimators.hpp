#pragma once

// Downstream ATE estimators: plug-in, balancing-weighted difference of
// means, the calibrated ("wreg") plug-in and the estimating-equation
// residual used to diagnose it.

#include <optional>

#include <Eigen/Dense>

#include "energyate/energy.hpp"
#include "energyate/models.hpp"

namespace energyate::estimators {

struct AteReport {
  double tau_plugin = 0.0;
  double tau_weighted = 0.0;
  double tau_wreg = 0.0;
  double ee_residual = 0.0;
  std::optional<double> tau_true;
  std::optional<double> abs_err_plugin;
  std::optional<double> abs_err_weighted;
  std::optional<double> abs_err_wreg;
};

/// Per-unit calibration covariate h_i = w_i A_i n/n1 - w_i (1 - A_i) n/n0.
/// Throws InvalidDataError when an arm is empty.
Eigen::VectorXd calibration_covariate(const Eigen::VectorXi& a, const energy::BalancingWeights& w);

double ate_plugin(const models::OutcomeModel& model, const Eigen::MatrixXd& x);

double ate_weighted(const Eigen::VectorXd& y, const Eigen::VectorXi& a, const energy::BalancingWeights& w);

/// Plug-in average of the calibrated model with the counterfactual arm
/// substituted into the calibration term:
///   tau_plugin + epsilon * mean_i w_i (n/n1 + n/n0).
double ate_wreg(const models::OutcomeModel& model, const Eigen::MatrixXd& x, const energy::BalancingWeights& w,
                const Eigen::VectorXi& a, double epsilon);

/// Mean of Q~(x,1) - Q~(x,0) + h_i (y_i - Q~(x_i, a_i)) - tau.
double estimating_equation_residual(const models::OutcomeModel& model, const Eigen::MatrixXd& x,
                                    const Eigen::VectorXi& a, const Eigen::VectorXd& y,
                                    const energy::BalancingWeights& w, double epsilon, double tau);

double abs_error(double tau_hat, double tau_true);

/// Difference of arm means (uniform-weight ate_weighted).
double difference_in_means(const Eigen::VectorXd& y, const Eigen::VectorXi& a);

AteReport make_report(const models::OutcomeModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXi& a,
                      const Eigen::VectorXd& y, const energy::BalancingWeights& w, double epsilon,
                      std::optional<double> tau_true);

}  // namespace energyate::estimators
