#include "energyate/estimators.hpp"

#include <cmath>

#include "energyate/error.hpp"

namespace energyate::estimators {

namespace {

struct ArmCounts {
  double n = 0.0;
  double n1 = 0.0;
  double n0 = 0.0;
};

ArmCounts counts(const Eigen::VectorXi& a) {
  ArmCounts c;
  c.n = static_cast<double>(a.size());
  c.n1 = static_cast<double>((a.array() == 1).count());
  c.n0 = c.n - c.n1;
  if (c.n1 == 0.0 || c.n0 == 0.0) throw InvalidDataError("both treatment arms must be non-empty");
  return c;
}

void check_lengths(Eigen::Index n, const Eigen::VectorXi& a, const energy::BalancingWeights& w) {
  if (a.size() != n || w.w.size() != n) throw ShapeError("estimator inputs have inconsistent lengths");
}

}  // namespace

Eigen::VectorXd calibration_covariate(const Eigen::VectorXi& a, const energy::BalancingWeights& w) {
  if (w.w.size() != a.size()) throw ShapeError("weights and treatment lengths differ");
  const ArmCounts c = counts(a);
  Eigen::VectorXd h(a.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    h(i) = a(i) == 1 ? w.w(i) * c.n / c.n1 : -w.w(i) * c.n / c.n0;
  }
  return h;
}

double ate_plugin(const models::OutcomeModel& model, const Eigen::MatrixXd& x) {
  if (x.rows() == 0) throw InvalidDataError("plug-in estimate needs at least one row");
  return (models::predict_arm(model, x, 1) - models::predict_arm(model, x, 0)).mean();
}

double ate_weighted(const Eigen::VectorXd& y, const Eigen::VectorXi& a, const energy::BalancingWeights& w) {
  check_lengths(y.size(), a, w);
  const ArmCounts c = counts(a);
  double treated = 0.0;
  double control = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    (a(i) == 1 ? treated : control) += w.w(i) * y(i);
  }
  return treated / c.n1 - control / c.n0;
}

double ate_wreg(const models::OutcomeModel& model, const Eigen::MatrixXd& x, const energy::BalancingWeights& w,
                const Eigen::VectorXi& a, double epsilon) {
  check_lengths(x.rows(), a, w);
  const ArmCounts c = counts(a);
  const double shift = (w.w.array() * (c.n / c.n1 + c.n / c.n0)).mean();
  return ate_plugin(model, x) + epsilon * shift;
}

double estimating_equation_residual(const models::OutcomeModel& model, const Eigen::MatrixXd& x,
                                    const Eigen::VectorXi& a, const Eigen::VectorXd& y,
                                    const energy::BalancingWeights& w, double epsilon, double tau) {
  check_lengths(x.rows(), a, w);
  if (y.size() != x.rows()) throw ShapeError("outcome length does not match covariates");
  const ArmCounts c = counts(a);
  const Eigen::VectorXd h = calibration_covariate(a, w);
  const Eigen::VectorXd q1 = models::predict_arm(model, x, 1).array() + epsilon * w.w.array() * (c.n / c.n1);
  const Eigen::VectorXd q0 = models::predict_arm(model, x, 0).array() - epsilon * w.w.array() * (c.n / c.n0);
  double total = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double factual = a(i) == 1 ? q1(i) : q0(i);
    total += q1(i) - q0(i) + h(i) * (y(i) - factual) - tau;
  }
  return total / static_cast<double>(y.size());
}

double abs_error(double tau_hat, double tau_true) { return std::abs(tau_hat - tau_true); }

double difference_in_means(const Eigen::VectorXd& y, const Eigen::VectorXi& a) {
  return ate_weighted(y, a, energy::uniform_weights(a));
}

AteReport make_report(const models::OutcomeModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXi& a,
                      const Eigen::VectorXd& y, const energy::BalancingWeights& w, double epsilon,
                      std::optional<double> tau_true) {
  AteReport r;
  r.tau_plugin = ate_plugin(model, x);
  r.tau_weighted = ate_weighted(y, a, w);
  r.tau_wreg = ate_wreg(model, x, w, a, epsilon);
  r.ee_residual = estimating_equation_residual(model, x, a, y, w, epsilon, r.tau_wreg);
  if (tau_true) {
    r.tau_true = tau_true;
    r.abs_err_plugin = abs_error(r.tau_plugin, *tau_true);
    r.abs_err_weighted = abs_error(r.tau_weighted, *tau_true);
    r.abs_err_wreg = abs_error(r.tau_wreg, *tau_true);
  }
  return r;
}

}  // namespace energyate::estimators
