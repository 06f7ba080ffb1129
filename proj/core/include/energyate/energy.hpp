#pragma once

// Energy distance, the weighted energy distance of an arm against the full
// sample, and the constrained solver for energy-distance balancing weights.
//
// All within-sample means use 1/n^2 normalisation over ordered pairs
// (diagonal included), so the empirical statistic is nonnegative and
// vanishes when the two samples coincide.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace energyate::energy {

/// Treatment indicators, one 0/1 entry per unit.
using Treatment = Eigen::VectorXi;

class PairwiseDistances {
 public:
  PairwiseDistances() = default;
  explicit PairwiseDistances(Eigen::MatrixXd d) : d_(std::move(d)) {}

  Eigen::Index n() const noexcept { return d_.rows(); }
  const Eigen::MatrixXd& matrix() const noexcept { return d_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return d_(i, j); }

 private:
  Eigen::MatrixXd d_;
};

struct BalancingWeights {
  Eigen::VectorXd w;
  double treated_sum = 0.0;
  double control_sum = 0.0;
};

/// Uniform weights (all ones): feasible for any treatment vector.
BalancingWeights uniform_weights(const Treatment& a);

/// Recomputes the arm sums of `w` against `a`.
BalancingWeights make_weights(Eigen::VectorXd w, const Treatment& a);

/// Throws InvalidDataError unless w >= 0 and each arm sums to its size
/// within `rel_tol` (relative).
void validate_weights(const BalancingWeights& w, const Treatment& a, double rel_tol = 1e-9);

struct EnergyBreakdown {
  double cross = 0.0;
  double within_group = 0.0;
  double within_reference = 0.0;
  double total = 0.0;
};

enum class ObjectiveForm { sum, sqrt_sum };

std::string to_string(ObjectiveForm form);
ObjectiveForm objective_form_from_string(const std::string& s);

struct SolverConfig {
  int max_iterations = 5000;
  /// Fixed step size; 0 selects 1/L from the distance row sums.
  double step_size = 0.0;
  /// Stop once the objective decrease stays below this for a few steps.
  double tolerance = 1e-12;
  ObjectiveForm form = ObjectiveForm::sum;
  std::uint64_t seed = 0;
};

struct TracePoint {
  int iteration = 0;
  double objective = 0.0;
  double sqrt_sum = 0.0;
};

struct SolveResult {
  BalancingWeights weights;
  std::vector<TracePoint> trace;
  double uniform_objective = 0.0;
  double uniform_sqrt_sum = 0.0;
  double objective = 0.0;
  double sqrt_sum = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Set when max_iterations was reached before the stopping rule fired.
  bool warning = false;
};

PairwiseDistances pairwise_distances(const Eigen::MatrixXd& x);

/// Two-sample energy distance between the rows of `g` and the rows of `h`.
double energy_distance(const Eigen::MatrixXd& g, const Eigen::MatrixXd& h);

EnergyBreakdown weighted_energy_distance(const PairwiseDistances& d, const Treatment& a,
                                         const BalancingWeights& w, int arm);
EnergyBreakdown weighted_energy_distance(const Eigen::MatrixXd& x, const Treatment& a,
                                         const BalancingWeights& w, int arm);

/// E1 + E0 (sum form) or sqrt(max(E1,0)) + sqrt(max(E0,0)) (sqrt-sum form).
double balance_objective(const PairwiseDistances& d, const Treatment& a,
                         const BalancingWeights& w, ObjectiveForm form);
double balance_objective(const Eigen::MatrixXd& x, const Treatment& a, const BalancingWeights& w,
                         ObjectiveForm form);

/// Exact gradient of the sum-form objective with respect to w.
Eigen::VectorXd objective_gradient(const PairwiseDistances& d, const Treatment& a,
                                   const BalancingWeights& w);
Eigen::VectorXd objective_gradient(const Eigen::MatrixXd& x, const Treatment& a,
                                   const BalancingWeights& w);

/// Euclidean projection of v onto {u >= 0, sum(u) = total}.
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v, double total);

SolveResult solve_balancing_weights(const PairwiseDistances& d, const Treatment& a,
                                    const SolverConfig& cfg = {});
SolveResult solve_balancing_weights(const Eigen::MatrixXd& x, const Treatment& a,
                                    const SolverConfig& cfg = {});

}  // namespace energyate::energy
