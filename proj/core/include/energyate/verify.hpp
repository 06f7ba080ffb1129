#pragma once

// Monte-Carlo estimates of the factual / counterfactual / ATE losses and
// checks of the decomposition identities that link them:
//
//   int |mu^_a - mu_a|^2 dF_a da     = R_F  - sigma^2(factual)
//   int |mu^_a - mu_a|^2 dF_{1-a} da = R_CF - sigma^2(counterfactual)
//   R_ATE <= 2 (R_F + R_CF - 2 sigma_Y^2)
//
// Integrals "da" are taken under the joint law of (X, A), i.e. P_a-weighted
// mixtures of the arm-conditional covariate laws F_a.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "energyate/energy.hpp"
#include "energyate/models.hpp"
#include "energyate/oracle_dgp.hpp"

namespace energyate::verify {

/// mu^_a(x): any outcome model evaluated at a covariate vector and arm.
using OutcomeFunction = std::function<double(const Eigen::VectorXd&, int)>;

OutcomeFunction as_outcome_function(const models::OutcomeModel& model);

/// The DGP's own surfaces shifted by a constant per arm.
OutcomeFunction biased_oracle(const OracleDgp& dgp, double bias_treated, double bias_control);

/// A random linear model c_a + g_a'x drawn from `seed`.
OutcomeFunction random_linear_model(std::uint64_t seed, int p);

inline constexpr int kMinDraws = 100;

struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

struct LossEstimates {
  Estimate r_f;
  Estimate r_f_arm[2];
  Estimate r_cf;
  Estimate r_cf_arm[2];
  Estimate r_ate;
  /// sigma^2_{Y(a)}(p(x, b)) = E_{F_b}[Var(Y(a) | x)], indexed [a][b].
  Estimate sigma2[2][2];
  Estimate sigma2_factual;
  Estimate sigma2_counterfactual;
  /// min over the four sigma2 entries.
  double sigma2_y = 0.0;
  double p_treated = 0.0;
  int draws = 0;
  std::uint64_t seed = 0;
};

struct CheckResult {
  std::string check;
  bool pass = false;
  double lhs = 0.0;
  double rhs = 0.0;
  double se = 0.0;
  /// rhs - lhs.
  double slack = 0.0;
  double threshold_se = 3.0;
  int draws = 0;
  std::uint64_t seed = 0;
};

struct Claim1Report {
  CheckResult factual;
  CheckResult counterfactual;
  bool pass() const { return factual.pass && counterfactual.pass; }
};

struct WeightLimitReport {
  std::vector<int> n_grid;
  std::vector<std::uint64_t> seeds;
  /// [grid index][seed index]
  std::vector<std::vector<double>> e_treated;
  std::vector<std::vector<double>> e_control;
  std::vector<double> median_treated;
  std::vector<double> median_control;
  bool pass = false;
  bool solver_warning = false;
  std::string note;
};

/// Throws InvalidDataError when draws < kMinDraws.
LossEstimates mc_losses(const OracleDgp& dgp, const OutcomeFunction& model, int draws, std::uint64_t seed);

/// Both sides from independent draw streams; pass iff |lhs - rhs| is within
/// `threshold_se` combined standard errors.
Claim1Report check_claim1(const OracleDgp& dgp, const OutcomeFunction& model, int draws, std::uint64_t seed,
                          double threshold_se = 3.0);

/// Pass iff lhs <= rhs + threshold_se * se.
CheckResult check_claim2(const OracleDgp& dgp, const OutcomeFunction& model, int draws, std::uint64_t seed,
                         double threshold_se = 3.0);

/// Median over seeds of E(F_{n,a,w*}, F_n) per n; pass iff the treated-arm
/// medians strictly decrease along the grid. Covariates are standardised
/// before the distance computation.
WeightLimitReport check_weight_limit(const OracleDgp& dgp, const std::vector<int>& n_grid,
                                     const std::vector<std::uint64_t>& seeds,
                                     const energy::SolverConfig& solver = {});

struct SweepSummary {
  int pairs = 0;
  int failures_at_primary = 0;  // at 3 SE
  int failures_at_fallback = 0;  // of those, still failing at 5 SE
  bool pass = false;
  std::vector<Claim1Report> claim1;
  std::vector<CheckResult> claim2;
};

/// Claims 1 and 2 over `pairs` random linear model / DGP pairs. Passes when
/// at most `max_borderline` pairs fail at 3 SE and all of those pass at 5 SE.
SweepSummary sweep_claims(int pairs, int draws, std::uint64_t seed, int max_borderline = 2);

}  // namespace energyate::verify
