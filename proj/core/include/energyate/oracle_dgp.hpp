#pragma once

// Data-generating processes with analytically known response surfaces. Used
// both to simulate datasets and as ground truth for the Monte-Carlo checks.

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>

#include <Eigen/Dense>

namespace energyate::verify {

using Rng = std::mt19937_64;

struct OracleDgp {
  std::string name;
  int p = 0;
  std::function<Eigen::VectorXd(Rng&)> sample_covariates;
  /// P(A = 1 | x); must stay strictly inside (0, 1).
  std::function<double(const Eigen::VectorXd&)> propensity;
  std::function<double(const Eigen::VectorXd&)> mu0;
  /// Conditional effect mu1(x) - mu0(x).
  std::function<double(const Eigen::VectorXd&)> effect;
  /// Standard deviation of the Gaussian outcome noise of arm a at x.
  std::function<double(const Eigen::VectorXd&, int)> noise_sd;
  /// Population average effect when known in closed form.
  std::optional<double> true_tau;

  double mu1(const Eigen::VectorXd& x) const { return mu0(x) + effect(x); }
  double mu(const Eigen::VectorXd& x, int arm) const { return arm == 1 ? mu1(x) : mu0(x); }
};

struct DefaultDgpSpec {
  int p = 10;
  double propensity_x1 = 0.6;
  double propensity_x2 = -0.6;
  double propensity_intercept = 0.0;
  double linear_x1 = 1.0;
  double quadratic_x2 = 0.5;
  double sine_x3 = 1.0;
  double tau = 1.0;
  double noise_sd = 1.0;
};

/// p standard-Gaussian covariates, logistic propensity in (x1, x2),
/// mu0 = x1 + 0.5 x2^2 + sin(x3), constant effect tau, unit Gaussian noise.
OracleDgp default_dgp(const DefaultDgpSpec& spec = {});

/// Same outcome surfaces as default_dgp with a constant propensity of 1/2.
OracleDgp randomized_dgp(const DefaultDgpSpec& spec = {});

/// One covariate; A ~ Bernoulli(1/2) and X | A ~ N(shift * A, 1), written as
/// the equivalent mixture marginal with propensity logistic(shift*x - shift^2/2).
OracleDgp shift_dgp(double shift = 1.0, double tau = 1.0, double noise_sd = 1.0);

/// Linear surfaces and logistic propensity with coefficients drawn from
/// `seed`; arm-specific noise levels. Used for randomised identity sweeps.
OracleDgp random_linear_dgp(std::uint64_t seed, int p = 3);

/// Builds a DGP by name: "default", "randomized", "shift".
OracleDgp dgp_by_name(const std::string& name, int p = 10);

double logistic(double z);

}  // namespace energyate::verify
