#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "energyate/error.hpp"
#include "energyate/estimators.hpp"
#include "energyate/models.hpp"
#include "energyate/nn.hpp"
#include "test_util.hpp"

using namespace energyate;
using namespace energyate::models;

namespace {

// Subnet 1 -> 2 -> 2 computing head a = slope[a] * x + offset[a] exactly via
// relu(x) - relu(-x) = x.
nn::ParameterSet linear_subnet(double slope0, double slope1, double offset0 = 0.0, double offset1 = 0.0) {
  nn::Layer hidden{Eigen::MatrixXd(2, 1), Eigen::VectorXd::Zero(2)};
  hidden.weight << 1.0, -1.0;
  nn::Layer out{Eigen::MatrixXd(2, 2), Eigen::VectorXd(2)};
  out.weight << slope0, -slope0, slope1, -slope1;
  out.bias << offset0, offset1;
  return nn::ParameterSet({hidden, out});
}

NamModel zero_nam(int p, double bias) {
  NamModel m = make_nam(p, kDefaultNamTrunk, 7);
  for (auto& s : m.subnets) s.set_zero();
  m.bias = bias;
  return m;
}

}  // namespace

TEST_CASE("fcnn with zero weights predicts its output bias") {
  FcnnModel m = make_fcnn(3, kDefaultFcnnHidden, 1);
  m.params.set_zero();
  m.params.layers().back().bias(0) = 0.75;
  const std::vector<double> x{1.0, -2.0, 3.0};
  CHECK(fcnn_predict(m, x, 0) == 0.75);
  CHECK(fcnn_predict(m, x, 1) == 0.75);
  CHECK(m.params.in_dim() == 4);
  CHECK(input_dim(OutcomeModel{m}) == 3);
}

TEST_CASE("fcnn treatment input changes the prediction") {
  const FcnnModel m = make_fcnn(4, kDefaultFcnnHidden, 11);
  CHECK(m.params.layers().front().weight.col(4).norm() > 0.0);
  const std::vector<double> x{0.3, -0.1, 1.2, 0.5};
  CHECK(fcnn_predict(m, x, 1) != fcnn_predict(m, x, 0));
}

TEST_CASE("fcnn prediction delegates to the network forward pass") {
  const FcnnModel m = make_fcnn(2, kDefaultFcnnHidden, 3);
  const std::vector<double> x{0.4, -0.9};
  for (int a : {0, 1}) {
    const std::vector<double> in{0.4, -0.9, static_cast<double>(a)};
    CHECK(fcnn_predict(m, x, a) == nn::forward(m.params, in));
    CHECK(predict(OutcomeModel{m}, x, a) == nn::forward(m.params, in));
  }
}

TEST_CASE("predictions reject bad inputs") {
  const FcnnModel f = make_fcnn(2, kDefaultFcnnHidden, 3);
  const NamModel n = make_nam(2, kDefaultNamTrunk, 3);
  const std::vector<double> short_x{1.0};
  CHECK_THROWS_AS(fcnn_predict(f, short_x, 0), ShapeError);
  CHECK_THROWS_AS(nam_predict(n, short_x, 0), ShapeError);
  CHECK_THROWS_AS(nam_feature_contribution(n, 2, 0.0, 0), IndexError);
  CHECK_THROWS_AS(nam_feature_contribution(n, -1, 0.0, 0), IndexError);
}

TEST_CASE("nam with zero subnets predicts its bias") {
  const NamModel m = zero_nam(3, -1.25);
  const std::vector<double> x{5.0, -3.0, 0.1};
  CHECK(nam_predict(m, x, 0) == -1.25);
  CHECK(nam_predict(m, x, 1) == -1.25);
  CHECK(nam_feature_contribution(m, 1, 2.0, 1) == 0.0);
}

TEST_CASE("zero trunk leaves the head bias") {
  NamModel m = zero_nam(1, 0.0);
  m.subnets[0].layers().back().bias << 0.3, -0.7;
  CHECK(nam_feature_contribution(m, 0, 4.0, 0) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(nam_feature_contribution(m, 0, 4.0, 1) == doctest::Approx(-0.7).epsilon(1e-15));
}

TEST_CASE("hand-built linear nam adds its heads") {
  NamModel m;
  m.p = 2;
  m.subnets = {linear_subnet(1.0, 1.0), linear_subnet(2.0, 2.0)};
  m.bias = 1.0;
  const std::vector<double> x{1.0, 1.0};
  CHECK(nam_predict(m, x, 0) == 4.0);
  CHECK(nam_predict(m, x, 1) == 4.0);
}

TEST_CASE("nam additivity over random inputs") {
  const NamModel m = make_nam(5, kDefaultNamTrunk, 21);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 2.0);
  std::bernoulli_distribution coin(0.5);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> x(5);
    for (auto& v : x) v = g(rng);
    const int a = coin(rng) ? 1 : 0;
    double sum = m.bias;
    for (int j = 0; j < 5; ++j) sum += nam_feature_contribution(m, j, x[static_cast<std::size_t>(j)], a);
    const double pred = nam_predict(m, x, a);
    worst = std::max(worst, std::abs(pred - sum) / (1.0 + std::abs(pred)));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("batched predictions match single predictions") {
  std::mt19937_64 rng(9);
  const Eigen::MatrixXd x = testutil::gaussian_matrix(rng, 30, 3);
  Eigen::VectorXi a(30);
  for (Eigen::Index i = 0; i < 30; ++i) a(i) = static_cast<int>(i % 2);
  for (const OutcomeModel& m : {OutcomeModel{make_fcnn(3, kDefaultFcnnHidden, 1)},
                                OutcomeModel{make_nam(3, kDefaultNamTrunk, 1)}}) {
    const Eigen::VectorXd batch = predict_batch(m, x, a);
    const Eigen::VectorXd arm1 = predict_arm(m, x, 1);
    for (Eigen::Index i = 0; i < 30; ++i) {
      const Eigen::VectorXd row = x.row(i).transpose();
      const std::vector<double> xi(row.data(), row.data() + row.size());
      CHECK(batch(i) == doctest::Approx(predict(m, xi, a(i))).epsilon(1e-12));
      CHECK(arm1(i) == doctest::Approx(predict(m, xi, 1)).epsilon(1e-12));
    }
  }
}

TEST_CASE("monotone hand-built subnet gives a monotone contribution") {
  NamModel m;
  m.p = 1;
  m.subnets = {linear_subnet(1.0, 3.0, 0.5, -0.5)};
  double prev0 = -1e300, prev1 = -1e300;
  for (int k = 0; k <= 40; ++k) {
    const double xv = -2.0 + 0.1 * k;
    const double c0 = nam_feature_contribution(m, 0, xv, 0);
    const double c1 = nam_feature_contribution(m, 0, xv, 1);
    CHECK(c0 > prev0);
    CHECK(c1 > prev1);
    CHECK(c1 == doctest::Approx(3.0 * xv - 0.5).epsilon(1e-14));
    prev0 = c0;
    prev1 = c1;
  }
}

TEST_CASE("identical heads give zero shape tables") {
  NamModel m = make_nam(3, kDefaultNamTrunk, 4);
  for (auto& s : m.subnets) {
    auto& last = s.layers().back();
    last.weight.row(1) = last.weight.row(0);
    last.bias(1) = last.bias(0);
  }
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd x = testutil::gaussian_matrix(rng, 50, 3);
  const ShapeExtraction s = extract_shape_functions(m, x, 100);
  REQUIRE(s.tables.size() == 3);
  for (const auto& t : s.tables) {
    CHECK(t.grid.size() == 100);
    for (double d : t.delta) CHECK(d == 0.0);
  }
  CHECK(s.ate_offset == 0.0);
  CHECK(estimators::ate_plugin(OutcomeModel{m}, x) == 0.0);
}

TEST_CASE("hand-built effect x gives table grid minus the training mean") {
  NamModel m;
  m.p = 1;
  m.subnets = {linear_subnet(0.0, 1.0)};
  Eigen::MatrixXd x(4, 1);
  x << 0.0, 0.25, 0.75, 1.0;  // mean 0.5
  const ShapeExtraction s = extract_shape_functions(m, x, 5);
  const auto& t = s.tables.at(0);
  CHECK(t.training_mean == doctest::Approx(0.5).epsilon(1e-15));
  REQUIRE(t.grid.size() == 5);
  CHECK(t.grid.front() == 0.0);
  CHECK(t.grid.back() == 1.0);
  for (std::size_t k = 0; k < t.grid.size(); ++k) {
    CHECK(t.grid[k] == doctest::Approx(0.25 * static_cast<double>(k)).epsilon(1e-15));
    CHECK(t.delta[k] == doctest::Approx(t.grid[k] - 0.5).epsilon(1e-14));
  }
  CHECK(estimators::ate_plugin(OutcomeModel{m}, x) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("shape tables are centred and the offset carries the plug-in effect") {
  const NamModel m = make_nam(4, kDefaultNamTrunk, 33);
  std::mt19937_64 rng(8);
  const Eigen::MatrixXd x = testutil::gaussian_matrix(rng, 200, 4);
  const ShapeExtraction s = extract_shape_functions(m, x, 100);
  double sum_means = 0.0;
  for (const auto& t : s.tables) {
    sum_means += t.training_mean;
    // Centred contribution evaluated at the training rows.
    double centred = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double xi = x(i, t.feature);
      centred += nam_feature_contribution(m, t.feature, xi, 1) - nam_feature_contribution(m, t.feature, xi, 0) -
                 t.training_mean;
    }
    CHECK(std::abs(centred / static_cast<double>(x.rows())) <= 1e-10);
    CHECK(t.grid.front() == x.col(t.feature).minCoeff());
    CHECK(t.grid.back() == x.col(t.feature).maxCoeff());
  }
  CHECK(std::abs(sum_means - s.ate_offset) <= 1e-12);
  CHECK(std::abs(s.ate_offset - estimators::ate_plugin(OutcomeModel{m}, x)) <= 1e-10);
}

TEST_CASE("constant feature yields a single zero point") {
  const NamModel m = make_nam(2, kDefaultNamTrunk, 5);
  Eigen::MatrixXd x(10, 2);
  for (Eigen::Index i = 0; i < 10; ++i) {
    x(i, 0) = 3.0;
    x(i, 1) = static_cast<double>(i);
  }
  const ShapeExtraction s = extract_shape_functions(m, x, 100);
  REQUIRE(s.tables[0].grid.size() == 1);
  CHECK(s.tables[0].grid[0] == 3.0);
  CHECK(s.tables[0].delta[0] == 0.0);
  CHECK(s.tables[1].grid.size() == 100);
}

TEST_CASE("shape extraction validates its inputs") {
  const NamModel m = make_nam(2, kDefaultNamTrunk, 5);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(4, 2);
  CHECK_THROWS_AS(extract_shape_functions(m, x, 1), InvalidDataError);
  CHECK_THROWS_AS(extract_shape_functions(m, Eigen::MatrixXd::Ones(4, 3), 10), ShapeError);
}

TEST_CASE("fcnn treatment gradient matches finite differences") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g(0.0, 1.0);
  int checked = 0;
  for (int t = 0; t < 50; ++t) {
    const FcnnModel m = make_fcnn(3, std::vector<int>{16, 16}, 100 + static_cast<std::uint64_t>(t));
    std::vector<double> in{g(rng), g(rng), g(rng), t % 2 == 0 ? 0.3 : 0.7};
    Eigen::MatrixXd col(4, 1);
    for (int k = 0; k < 4; ++k) col(k, 0) = in[static_cast<std::size_t>(k)];
    nn::ForwardCache cache;
    nn::forward_batch(m.params, col, cache);
    nn::GradientSet grads = nn::GradientSet::zeros_like(m.params);
    Eigen::MatrixXd input_grad;
    nn::backward_batch(m.params, cache, Eigen::MatrixXd::Ones(1, 1), grads, &input_grad);
    const double analytic = input_grad(3, 0);
    const double numeric =
        testutil::central_difference([&] { return nn::forward(m.params, in); }, in[3], 1e-6);
    if (std::abs(analytic) < 1e-8) continue;  // treatment path switched off by ReLUs
    CHECK(testutil::rel_err(analytic, numeric) <= 1e-4);
    ++checked;
  }
  CHECK(checked >= 25);
}

TEST_CASE("model kind strings round trip") {
  CHECK(model_kind_from_string("fcnn") == ModelKind::fcnn);
  CHECK(model_kind_from_string("nam") == ModelKind::nam);
  CHECK(to_string(ModelKind::nam) == "nam");
  CHECK_THROWS(model_kind_from_string("tarnet"));
}

TEST_CASE("flatten and assign round trip the parameters") {
  OutcomeModel m = make_nam(2, kDefaultNamTrunk, 1);
  std::vector<double> v = flatten(m);
  for (auto& e : v) e *= 2.0;
  assign_flat(m, v);
  CHECK(flatten(m) == v);
  CHECK(all_finite(m));
}
