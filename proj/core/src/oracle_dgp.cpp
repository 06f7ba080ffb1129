#include "energyate/oracle_dgp.hpp"

#include <cmath>

#include "energyate/error.hpp"

namespace energyate::verify {

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

std::function<Eigen::VectorXd(Rng&)> gaussian_covariates(int p) {
  return [p](Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd x(p);
    for (int j = 0; j < p; ++j) x(j) = normal(rng);
    return x;
  };
}

OracleDgp default_surfaces(const DefaultDgpSpec& spec) {
  if (spec.p < 3) throw InvalidDataError("the default DGP needs at least 3 covariates");
  OracleDgp dgp;
  dgp.p = spec.p;
  dgp.sample_covariates = gaussian_covariates(spec.p);
  dgp.mu0 = [spec](const Eigen::VectorXd& x) {
    return spec.linear_x1 * x(0) + spec.quadratic_x2 * x(1) * x(1) + spec.sine_x3 * std::sin(x(2));
  };
  dgp.effect = [tau = spec.tau](const Eigen::VectorXd&) { return tau; };
  dgp.noise_sd = [sd = spec.noise_sd](const Eigen::VectorXd&, int) { return sd; };
  dgp.true_tau = spec.tau;
  return dgp;
}

}  // namespace

OracleDgp default_dgp(const DefaultDgpSpec& spec) {
  OracleDgp dgp = default_surfaces(spec);
  dgp.name = "default";
  dgp.propensity = [spec](const Eigen::VectorXd& x) {
    return logistic(spec.propensity_intercept + spec.propensity_x1 * x(0) +
                    spec.propensity_x2 * x(1));
  };
  return dgp;
}

OracleDgp randomized_dgp(const DefaultDgpSpec& spec) {
  OracleDgp dgp = default_surfaces(spec);
  dgp.name = "randomized";
  dgp.propensity = [](const Eigen::VectorXd&) { return 0.5; };
  return dgp;
}

OracleDgp shift_dgp(double shift, double tau, double noise_sd) {
  OracleDgp dgp;
  dgp.name = "shift";
  dgp.p = 1;
  dgp.sample_covariates = [shift](Rng& rng) {
    std::bernoulli_distribution coin(0.5);
    std::normal_distribution<double> normal(0.0, 1.0);
    const bool shifted = coin(rng);
    Eigen::VectorXd x(1);
    x(0) = normal(rng) + (shifted ? shift : 0.0);
    return x;
  };
  dgp.propensity = [shift](const Eigen::VectorXd& x) {
    return logistic(shift * x(0) - 0.5 * shift * shift);
  };
  dgp.mu0 = [](const Eigen::VectorXd& x) { return x(0); };
  dgp.effect = [tau](const Eigen::VectorXd&) { return tau; };
  dgp.noise_sd = [noise_sd](const Eigen::VectorXd&, int) { return noise_sd; };
  dgp.true_tau = tau;
  return dgp;
}

OracleDgp random_linear_dgp(std::uint64_t seed, int p) {
  if (p < 1) throw InvalidDataError("random linear DGP needs p >= 1");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd beta(p), delta(p), gamma(p);
  for (int j = 0; j < p; ++j) beta(j) = normal(rng);
  for (int j = 0; j < p; ++j) delta(j) = 0.5 * normal(rng);
  for (int j = 0; j < p; ++j) gamma(j) = 0.7 * normal(rng);
  const double b0 = normal(rng);
  const double tau0 = normal(rng);
  const double g0 = 0.3 * normal(rng);
  // Zero noise in some draws exercises the degenerate-variance path.
  const double sd0 = unit(rng) < 0.1 ? 0.0 : 0.2 + 1.3 * unit(rng);
  const double sd1 = unit(rng) < 0.1 ? 0.0 : 0.2 + 1.3 * unit(rng);

  OracleDgp dgp;
  dgp.name = "random-linear-" + std::to_string(seed);
  dgp.p = p;
  dgp.sample_covariates = gaussian_covariates(p);
  dgp.propensity = [gamma, g0](const Eigen::VectorXd& x) { return logistic(g0 + gamma.dot(x)); };
  dgp.mu0 = [beta, b0](const Eigen::VectorXd& x) { return b0 + beta.dot(x); };
  dgp.effect = [delta, tau0](const Eigen::VectorXd& x) { return tau0 + delta.dot(x); };
  dgp.noise_sd = [sd0, sd1](const Eigen::VectorXd&, int a) { return a == 1 ? sd1 : sd0; };
  dgp.true_tau = tau0;  // covariates are centred
  return dgp;
}

OracleDgp dgp_by_name(const std::string& name, int p) {
  DefaultDgpSpec spec;
  spec.p = p;
  if (name == "default") return default_dgp(spec);
  if (name == "randomized") return randomized_dgp(spec);
  if (name == "shift") return shift_dgp();
  throw InvalidDataError("unknown DGP '" + name + "' (expected default, randomized or shift)");
}

}  // namespace energyate::verify
