#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "energyate/data.hpp"
#include "energyate/energy.hpp"
#include "energyate/error.hpp"
#include "energyate/estimators.hpp"
#include "energyate/models.hpp"
#include "energyate/oracle_dgp.hpp"
#include "energyate/training.hpp"
#include "test_util.hpp"

using namespace energyate;
using namespace energyate::estimators;

namespace {

// Single-feature NAM with heads slope[a] * x + offset[a], built from the
// identity relu(x) - relu(-x) = x.
models::NamModel linear_nam(double slope0, double slope1, double offset0, double offset1) {
  nn::Layer hidden{Eigen::MatrixXd(2, 1), Eigen::VectorXd::Zero(2)};
  hidden.weight << 1.0, -1.0;
  nn::Layer out{Eigen::MatrixXd(2, 2), Eigen::VectorXd(2)};
  out.weight << slope0, -slope0, slope1, -slope1;
  out.bias << offset0, offset1;
  models::NamModel m;
  m.p = 1;
  m.subnets = {nn::ParameterSet({hidden, out})};
  return m;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double e : v) out(i++) = e;
  return out;
}

Eigen::VectorXi arms(std::initializer_list<int> v) {
  Eigen::VectorXi out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (int e : v) out(i++) = e;
  return out;
}

energy::BalancingWeights random_weights(const Eigen::VectorXi& a, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  Eigen::VectorXd w(a.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) w(i) = 0.1 + e(rng);
  const double n1 = static_cast<double>((a.array() == 1).count());
  const double n0 = static_cast<double>(a.size()) - n1;
  double s1 = 0.0, s0 = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) (a(i) == 1 ? s1 : s0) += w(i);
  for (Eigen::Index i = 0; i < a.size(); ++i) w(i) *= a(i) == 1 ? n1 / s1 : n0 / s0;
  return energy::make_weights(w, a);
}

}  // namespace

TEST_CASE("plug-in estimate examples") {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd x = testutil::gaussian_matrix(rng, 20, 1);
  CHECK(ate_plugin(linear_nam(0.0, 0.0, 0.25, 1.75), x) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(ate_plugin(linear_nam(0.7, 0.7, 0.1, 0.1), x) == 0.0);

  Eigen::MatrixXd x4(4, 1);
  x4 << 0.0, 0.25, 0.75, 1.0;
  CHECK(ate_plugin(linear_nam(0.0, 1.0, 0.0, 0.0), x4) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(ate_plugin(linear_nam(0.0, 1.0, 0.0, 0.0), Eigen::MatrixXd::Zero(3, 2)), ShapeError);
}

TEST_CASE("weighted estimate examples") {
  const Eigen::VectorXi a = arms({1, 1, 0, 0});
  const energy::BalancingWeights w = energy::uniform_weights(a);
  CHECK(ate_weighted(vec({2, 4, 1, 3}), a, w) == 1.0);
  CHECK(ate_weighted(Eigen::VectorXd::Zero(4), a, w) == 0.0);

  const Eigen::VectorXi one_arm = arms({1, 1, 1});
  CHECK_THROWS_AS(ate_weighted(vec({1, 2, 3}), one_arm, energy::make_weights(Eigen::VectorXd::Ones(3), one_arm)),
                  InvalidDataError);
  CHECK_THROWS_AS(ate_weighted(vec({1, 2, 3}), a, w), ShapeError);
}

TEST_CASE("uniform weights recover the difference of arm means") {
  std::mt19937_64 rng(4);
  std::bernoulli_distribution coin(0.4);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index n = 30;
    Eigen::VectorXi a(n);
    do {
      for (Eigen::Index i = 0; i < n; ++i) a(i) = coin(rng) ? 1 : 0;
    } while (a.sum() == 0 || a.sum() == n);
    const Eigen::VectorXd y = testutil::gaussian_matrix(rng, n, 1).col(0);
    double s1 = 0.0, s0 = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) (a(i) == 1 ? s1 : s0) += y(i);
    const double n1 = static_cast<double>(a.sum());
    const double dim = s1 / n1 - s0 / (static_cast<double>(n) - n1);
    CHECK(std::abs(ate_weighted(y, a, energy::uniform_weights(a)) - dim) <= 1e-12);
    CHECK(std::abs(difference_in_means(y, a) - dim) <= 1e-12);
  }
}

TEST_CASE("wreg estimate examples") {
  std::mt19937_64 rng(6);
  const Eigen::MatrixXd x = testutil::gaussian_matrix(rng, 10, 1);
  const Eigen::VectorXi a = arms({1, 0, 1, 0, 1, 0, 1, 0, 1, 0});
  const models::OutcomeModel m = models::make_nam(1, models::kDefaultNamTrunk, 3);
  const double plugin = ate_plugin(m, x);

  const energy::BalancingWeights uw = energy::uniform_weights(a);
  CHECK(ate_wreg(m, x, uw, a, 0.0) == plugin);
  CHECK(ate_wreg(m, x, uw, a, 0.3) == doctest::Approx(plugin + 4.0 * 0.3).epsilon(1e-14));

  // Direct per-unit evaluation of the calibrated heads.
  const energy::BalancingWeights w = random_weights(a, rng);
  const double eps = -0.45;
  const double n = 10.0, n1 = 5.0, n0 = 5.0;
  double direct = 0.0;
  for (Eigen::Index i = 0; i < 10; ++i) {
    const std::vector<double> xi{x(i, 0)};
    const double q1 = models::predict(m, xi, 1) + eps * w.w(i) * n / n1;
    const double q0 = models::predict(m, xi, 0) - eps * w.w(i) * n / n0;
    direct += q1 - q0;
  }
  direct /= n;
  CHECK(std::abs(ate_wreg(m, x, w, a, eps) - direct) <= 1e-12);
}

TEST_CASE("epsilon zero collapses wreg to the plug-in estimate exactly") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd x = testutil::gaussian_matrix(rng, 12, 2);
    const Eigen::VectorXi a = arms({1, 0, 0, 1, 1, 0, 1, 0, 0, 1, 1, 0});
    const models::OutcomeModel m = models::make_fcnn(2, std::vector<int>{8, 8}, static_cast<std::uint64_t>(trial));
    const energy::BalancingWeights w = random_weights(a, rng);
    CHECK(ate_wreg(m, x, w, a, 0.0) == ate_plugin(m, x));
    const Eigen::VectorXd y = testutil::gaussian_matrix(rng, 12, 1).col(0);
    const AteReport r = make_report(m, x, a, y, w, 0.0, std::nullopt);
    CHECK(r.tau_wreg == r.tau_plugin);
    CHECK_FALSE(r.tau_true.has_value());
    CHECK_FALSE(r.abs_err_wreg.has_value());
  }
}

TEST_CASE("estimating equation residual") {
  std::mt19937_64 rng(10);
  const Eigen::MatrixXd x = testutil::gaussian_matrix(rng, 16, 2);
  const Eigen::VectorXi a = arms({1, 0, 0, 1, 1, 0, 1, 0, 0, 1, 1, 0, 1, 1, 0, 0});
  const Eigen::VectorXd y = testutil::gaussian_matrix(rng, 16, 1).col(0);
  const models::OutcomeModel m = models::make_fcnn(2, std::vector<int>{8}, 5);
  const energy::BalancingWeights w = random_weights(a, rng);
  const double eps = 0.2;

  // Doubly-robust mean as tau gives zero residual.
  const double r0 = estimating_equation_residual(m, x, a, y, w, eps, 0.0);
  CHECK(std::abs(estimating_equation_residual(m, x, a, y, w, eps, r0)) <= 1e-12);
  // The residual is affine in tau with slope -1.
  CHECK(estimating_equation_residual(m, x, a, y, w, eps, r0 + 1.0) == doctest::Approx(-1.0).epsilon(1e-12));

  // A perfect model with tau at its plug-in value.
  const models::NamModel lin = linear_nam(1.0, 2.0, 0.0, 1.0);
  const Eigen::MatrixXd x1 = x.leftCols(1);
  Eigen::VectorXd y_perfect(16);
  for (Eigen::Index i = 0; i < 16; ++i) y_perfect(i) = a(i) == 1 ? 2.0 * x1(i, 0) + 1.0 : x1(i, 0);
  const double tau = ate_plugin(lin, x1);
  CHECK(std::abs(estimating_equation_residual(lin, x1, a, y_perfect, w, 0.0, tau)) <= 1e-12);
}

TEST_CASE("absolute error") {
  CHECK(abs_error(1.0, 1.0) == 0.0);
  CHECK(abs_error(2.0, -1.0) == 3.0);
  CHECK(abs_error(-1.0, 2.0) == 3.0);
}

TEST_CASE("report fills the error fields against a known effect") {
  Eigen::MatrixXd x(4, 1);
  x << 0.0, 0.25, 0.75, 1.0;
  const Eigen::VectorXi a = arms({1, 1, 0, 0});
  const models::OutcomeModel m = linear_nam(0.0, 1.0, 0.0, 0.0);
  const AteReport r = make_report(m, x, a, vec({2, 4, 1, 3}), energy::uniform_weights(a), 0.0, 0.75);
  CHECK(r.tau_plugin == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(r.tau_weighted == 1.0);
  CHECK(*r.abs_err_plugin == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(*r.abs_err_weighted == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(*r.tau_true == 0.75);
}

TEST_CASE("estimators agree on randomized data") {
  verify::DefaultDgpSpec spec;
  spec.p = 3;
  const verify::OracleDgp dgp = verify::randomized_dgp(spec);
  training::ObjectiveConfig cfg;
  cfg.fcnn_hidden = {32, 32};
  const int reps = 50;
  std::vector<double> plugin, weighted, wreg;
  for (int r = 0; r < reps; ++r) {
    const data::Dataset d = data::simulate(dgp, 200, 1000 + static_cast<std::uint64_t>(r));
    cfg.seed = static_cast<std::uint64_t>(r);
    const training::FitResult f = training::fit(d, cfg);
    const Eigen::MatrixXd xs = f.standardizer.apply(d.x);
    plugin.push_back(ate_plugin(f.model, xs));
    weighted.push_back(ate_weighted(d.y, d.a, f.weights));
    wreg.push_back(ate_wreg(f.model, xs, f.weights, d.a, f.epsilon));
  }
  auto compare = [&](const std::vector<double>& u, const std::vector<double>& v, const std::string& label) {
    Eigen::VectorXd diff(reps);
    for (int r = 0; r < reps; ++r) diff(r) = u[static_cast<std::size_t>(r)] - v[static_cast<std::size_t>(r)];
    const double se = testutil::sample_sd(diff) / std::sqrt(static_cast<double>(reps));
    MESSAGE(label << ": mean difference " << diff.mean() << ", se " << se);
    CHECK(std::abs(diff.mean()) <= 3.0 * se);
  };
  for (const auto* v : {&plugin, &weighted, &wreg}) {
    const Eigen::Map<const Eigen::VectorXd> m(v->data(), reps);
    MESSAGE("mean " << m.mean() << ", se " << testutil::sample_sd(m) / std::sqrt(static_cast<double>(reps)));
  }
  compare(plugin, weighted, "plugin - weighted");
  compare(plugin, wreg, "plugin - wreg");
  compare(weighted, wreg, "weighted - wreg");
}
