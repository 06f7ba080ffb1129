#include <cmath>
#include <vector>

#include "doctest.h"
#include "energyate/error.hpp"
#include "energyate/oracle_dgp.hpp"
#include "energyate/verify.hpp"

using namespace energyate;
using namespace energyate::verify;

namespace {

OracleDgp noiseless_default() {
  OracleDgp dgp = default_dgp();
  dgp.noise_sd = [](const Eigen::VectorXd&, int) { return 0.0; };
  return dgp;
}

OutcomeFunction perfect(const OracleDgp& dgp) { return biased_oracle(dgp, 0.0, 0.0); }

bool within(double value, double target, double se, double k = 3.0) {
  return std::abs(value - target) <= k * se + 1e-12;
}

}  // namespace

TEST_CASE("losses of a perfect model without noise vanish") {
  const OracleDgp dgp = noiseless_default();
  const LossEstimates l = mc_losses(dgp, perfect(dgp), 2000, 1);
  CHECK(l.r_f.value == 0.0);
  CHECK(l.r_cf.value == 0.0);
  CHECK(l.r_ate.value == 0.0);
  CHECK(l.sigma2_y == 0.0);
  CHECK(l.draws == 2000);
  CHECK(l.seed == 1);
}

TEST_CASE("a perfect model's factual loss is the noise variance") {
  const OracleDgp dgp = default_dgp();
  const LossEstimates l = mc_losses(dgp, perfect(dgp), 20000, 2);
  CHECK(within(l.r_f.value, 1.0, l.r_f.se));
  CHECK(within(l.r_cf.value, 1.0, l.r_cf.se));
  CHECK(l.r_ate.value == 0.0);
  CHECK(l.r_f.se > 0.0);
  CHECK(l.sigma2_y == doctest::Approx(1.0));
  CHECK(within(l.p_treated, 0.5, std::sqrt(0.25 / 20000.0)));

  const OracleDgp dgp2 = shift_dgp(1.0, 1.0, 2.0);
  const LossEstimates l2 = mc_losses(dgp2, perfect(dgp2), 20000, 3);
  CHECK(within(l2.r_f.value, 4.0, l2.r_f.se));
}

TEST_CASE("a constant treated bias shows up as its square in the effect loss") {
  const OracleDgp dgp = default_dgp();
  for (double c : {0.5, -1.5}) {
    const LossEstimates l = mc_losses(dgp, biased_oracle(dgp, c, 0.0), 5000, 4);
    CHECK(within(l.r_ate.value, c * c, l.r_ate.se));
    CHECK(std::abs(l.r_ate.value - c * c) <= 1e-12);
  }
}

TEST_CASE("loss estimates validate the draw count and reproduce") {
  const OracleDgp dgp = default_dgp();
  const OutcomeFunction m = random_linear_model(3, dgp.p);
  CHECK_THROWS_AS(mc_losses(dgp, m, 99, 1), InvalidDataError);
  CHECK_THROWS_AS(check_claim1(dgp, m, 10, 1), InvalidDataError);
  CHECK_THROWS_AS(check_claim2(dgp, m, 10, 1), InvalidDataError);
  const LossEstimates a = mc_losses(dgp, m, 1000, 9);
  const LossEstimates b = mc_losses(dgp, m, 1000, 9);
  CHECK(a.r_f.value == b.r_f.value);
  CHECK(a.r_cf.se == b.r_cf.se);
  CHECK(a.r_ate.value == b.r_ate.value);
  CHECK(mc_losses(dgp, m, 1000, 10).r_f.value != a.r_f.value);
  for (const Estimate& e : {a.r_f, a.r_cf, a.r_ate}) {
    CHECK(std::isfinite(e.value));
    CHECK(e.se > 0.0);
  }
  // Constant noise gives a constant variance integrand.
  CHECK(a.sigma2_factual.value == doctest::Approx(1.0));
  CHECK(a.sigma2_factual.se == 0.0);
}

TEST_CASE("claim 1 examples") {
  const OracleDgp dgp = default_dgp();
  const Claim1Report p = check_claim1(dgp, perfect(dgp), 20000, 5);
  CHECK(p.pass());
  CHECK(p.factual.lhs == 0.0);
  CHECK(p.counterfactual.lhs == 0.0);
  CHECK(within(p.factual.rhs, 0.0, p.factual.se));
  CHECK(p.factual.draws == 20000);

  // Treated-arm bias c: the factual side weights c^2 by P(A = 1) = 1/2, the
  // counterfactual side by P(A = 0) = 1/2.
  const double c = 0.8;
  const Claim1Report b = check_claim1(dgp, biased_oracle(dgp, c, 0.0), 20000, 6);
  CHECK(b.pass());
  const double half_se = std::sqrt(0.25 / 20000.0) * c * c;
  CHECK(within(b.factual.lhs, 0.5 * c * c, half_se));
  CHECK(within(b.counterfactual.lhs, 0.5 * c * c, half_se));
  CHECK(within(b.factual.rhs, b.factual.lhs, b.factual.se));
}

TEST_CASE("claim 2 examples") {
  const OracleDgp quiet = noiseless_default();
  const CheckResult z = check_claim2(quiet, perfect(quiet), 2000, 7);
  CHECK(z.pass);
  CHECK(z.lhs == 0.0);
  CHECK(z.rhs == 0.0);
  CHECK(z.slack == 0.0);

  const OracleDgp dgp = default_dgp();
  const CheckResult b = check_claim2(dgp, biased_oracle(dgp, 0.6, -0.3), 20000, 8);
  CHECK(b.pass);
  CHECK(b.lhs == doctest::Approx(0.81));
  CHECK(b.slack > 0.0);
  CHECK(b.slack == doctest::Approx(b.rhs - b.lhs));
  CHECK(b.threshold_se == 3.0);

  const CheckResult r = check_claim2(dgp, random_linear_model(4, dgp.p), 20000, 8);
  CHECK(r.pass);
}

TEST_CASE("fitted models plug into the checks") {
  const OracleDgp dgp = default_dgp();
  const OutcomeFunction m = as_outcome_function(models::make_nam(dgp.p, models::kDefaultNamTrunk, 2));
  CHECK(check_claim1(dgp, m, 5000, 1).pass());
  CHECK(check_claim2(dgp, m, 5000, 1).pass);
}

TEST_CASE("weight limit on the confounded shift design") {
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const WeightLimitReport r = check_weight_limit(shift_dgp(), {100, 200, 400, 800}, seeds);
  CHECK(r.pass);
  REQUIRE(r.median_treated.size() == 4);
  for (std::size_t k = 1; k < 4; ++k) CHECK(r.median_treated[k] < r.median_treated[k - 1]);
  CHECK(r.e_treated.size() == 4);
  CHECK(r.e_treated[0].size() == 10);
  CHECK(r.seeds == seeds);
}

TEST_CASE("weight limit on an unconfounded design stays small") {
  DefaultDgpSpec spec;
  spec.p = 3;
  const WeightLimitReport r = check_weight_limit(randomized_dgp(spec), {100, 200}, {1, 2, 3});
  for (double m : r.median_treated) CHECK(m < 0.02);
  for (double m : r.median_control) CHECK(m < 0.02);
}

TEST_CASE("weight limit grid handling") {
  const WeightLimitReport one = check_weight_limit(shift_dgp(), {150}, {1, 2});
  CHECK(one.pass);
  CHECK_FALSE(one.note.empty());
  CHECK_THROWS_AS(check_weight_limit(shift_dgp(), {200, 100}, {1}), InvalidDataError);
  CHECK_THROWS_AS(check_weight_limit(shift_dgp(), {}, {1}), InvalidDataError);
  CHECK_THROWS_AS(check_weight_limit(shift_dgp(), {100}, {}), InvalidDataError);
}

TEST_CASE("claims hold across random linear model and design pairs") {
  const SweepSummary s = sweep_claims(30, 10000, 3);
  CHECK(s.pairs == 30);
  CHECK(s.claim1.size() == 30);
  CHECK(s.claim2.size() == 30);
  CHECK(s.pass);
  CHECK(s.failures_at_fallback == 0);
  const SweepSummary again = sweep_claims(30, 10000, 3);
  CHECK(again.failures_at_primary == s.failures_at_primary);
  CHECK(again.claim2[7].lhs == s.claim2[7].lhs);
}
