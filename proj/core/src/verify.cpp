#include "energyate/verify.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "energyate/data.hpp"
#include "energyate/error.hpp"
#include "energyate/seed.hpp"

namespace energyate::verify {

namespace {

// Running mean / variance (Welford).
class Accumulator {
 public:
  void add(double v) {
    ++n_;
    const double delta = v - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (v - mean_);
  }
  long count() const { return n_; }
  Estimate estimate() const {
    Estimate e;
    e.value = mean_;
    // Rounding can leave m2 slightly negative for constant integrands.
    e.se = n_ >= 2 ? std::sqrt(std::max(m2_, 0.0) / static_cast<double>(n_ - 1) / static_cast<double>(n_)) : 0.0;
    return e;
  }

 private:
  long n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct Draw {
  Eigen::VectorXd x;
  int a = 0;
  double y[2] = {0.0, 0.0};   // both potential outcomes
  double mu[2] = {0.0, 0.0};
  double var[2] = {0.0, 0.0};  // conditional outcome variances
};

class DrawStream {
 public:
  DrawStream(const OracleDgp& dgp, std::uint64_t seed) : dgp_(dgp), rng_(seed) {}

  Draw next() {
    Draw d;
    d.x = dgp_.sample_covariates(rng_);
    const double e = dgp_.propensity(d.x);
    if (!(e > 0.0 && e < 1.0)) throw PositivityError("propensity outside (0, 1) in oracle DGP " + dgp_.name);
    d.a = unit_(rng_) < e ? 1 : 0;
    for (int arm = 0; arm <= 1; ++arm) {
      d.mu[arm] = dgp_.mu(d.x, arm);
      const double sd = dgp_.noise_sd(d.x, arm);
      d.var[arm] = sd * sd;
      d.y[arm] = d.mu[arm] + sd * normal_(rng_);
    }
    return d;
  }

 private:
  const OracleDgp& dgp_;
  Rng rng_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

void check_draws(int draws) {
  if (draws < kMinDraws) {
    throw InvalidDataError("Monte-Carlo checks need at least " + std::to_string(kMinDraws) + " draws (got " +
                           std::to_string(draws) + ")");
  }
}

double sq(double v) { return v * v; }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size();
  if (m == 0) return 0.0;
  return m % 2 == 1 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

CheckResult equality_check(const std::string& name, const Accumulator& lhs, const Accumulator& rhs,
                           double threshold_se, int draws, std::uint64_t seed) {
  const Estimate l = lhs.estimate();
  const Estimate r = rhs.estimate();
  CheckResult c;
  c.check = name;
  c.lhs = l.value;
  c.rhs = r.value;
  c.se = std::sqrt(l.se * l.se + r.se * r.se);
  c.slack = r.value - l.value;
  c.threshold_se = threshold_se;
  c.pass = std::abs(c.slack) <= threshold_se * c.se + 1e-12;
  c.draws = draws;
  c.seed = seed;
  return c;
}

}  // namespace

OutcomeFunction as_outcome_function(const models::OutcomeModel& model) {
  auto owned = std::make_shared<const models::OutcomeModel>(model);
  return [owned](const Eigen::VectorXd& x, int a) {
    return models::predict(*owned, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), a);
  };
}

OutcomeFunction biased_oracle(const OracleDgp& dgp, double bias_treated, double bias_control) {
  return [dgp, bias_treated, bias_control](const Eigen::VectorXd& x, int a) {
    return dgp.mu(x, a) + (a == 1 ? bias_treated : bias_control);
  };
}

OutcomeFunction random_linear_model(std::uint64_t seed, int p) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd g0(p), g1(p);
  for (int j = 0; j < p; ++j) g0(j) = normal(rng);
  for (int j = 0; j < p; ++j) g1(j) = normal(rng);
  const double c0 = normal(rng);
  const double c1 = normal(rng);
  return [g0, g1, c0, c1](const Eigen::VectorXd& x, int a) { return a == 1 ? c1 + g1.dot(x) : c0 + g0.dot(x); };
}

LossEstimates mc_losses(const OracleDgp& dgp, const OutcomeFunction& model, int draws, std::uint64_t seed) {
  check_draws(draws);
  DrawStream stream(dgp, seed);
  Accumulator rf, rcf, rate, s2f, s2cf;
  Accumulator rf_arm[2], rcf_arm[2], s2[2][2];
  long treated = 0;
  for (int k = 0; k < draws; ++k) {
    const Draw d = stream.next();
    const int a = d.a;
    const int b = 1 - a;
    const double pred[2] = {model(d.x, 0), model(d.x, 1)};
    const double loss_f = sq(pred[a] - d.y[a]);
    const double loss_cf = sq(pred[b] - d.y[b]);
    rf.add(loss_f);
    rcf.add(loss_cf);
    rate.add(sq((pred[1] - pred[0]) - (d.mu[1] - d.mu[0])));
    // R_F(mu^_a) integrates over F_a; R_CF(mu^_b) integrates mu^_b over F_a.
    rf_arm[a].add(loss_f);
    rcf_arm[b].add(loss_cf);
    s2[0][a].add(d.var[0]);
    s2[1][a].add(d.var[1]);
    s2f.add(d.var[a]);
    s2cf.add(d.var[b]);
    treated += a;
  }
  LossEstimates out;
  out.r_f = rf.estimate();
  out.r_cf = rcf.estimate();
  out.r_ate = rate.estimate();
  for (int a = 0; a <= 1; ++a) {
    out.r_f_arm[a] = rf_arm[a].estimate();
    out.r_cf_arm[a] = rcf_arm[a].estimate();
    for (int b = 0; b <= 1; ++b) out.sigma2[a][b] = s2[a][b].estimate();
  }
  out.sigma2_factual = s2f.estimate();
  out.sigma2_counterfactual = s2cf.estimate();
  double smin = std::numeric_limits<double>::infinity();
  for (int a = 0; a <= 1; ++a) {
    for (int b = 0; b <= 1; ++b) {
      if (s2[a][b].count() > 0) smin = std::min(smin, out.sigma2[a][b].value);
    }
  }
  out.sigma2_y = std::isfinite(smin) ? smin : 0.0;
  out.p_treated = static_cast<double>(treated) / static_cast<double>(draws);
  out.draws = draws;
  out.seed = seed;
  return out;
}

Claim1Report check_claim1(const OracleDgp& dgp, const OutcomeFunction& model, int draws, std::uint64_t seed,
                          double threshold_se) {
  check_draws(draws);
  DrawStream lhs_stream(dgp, derive_seed(seed, "claim1-lhs"));
  DrawStream rhs_stream(dgp, derive_seed(seed, "claim1-rhs"));
  Accumulator lhs_f, lhs_cf, rhs_f, rhs_cf;
  for (int k = 0; k < draws; ++k) {
    const Draw d = lhs_stream.next();
    const int a = d.a;
    const int b = 1 - a;
    lhs_f.add(sq(model(d.x, a) - d.mu[a]));
    lhs_cf.add(sq(model(d.x, b) - d.mu[b]));
  }
  for (int k = 0; k < draws; ++k) {
    const Draw d = rhs_stream.next();
    const int a = d.a;
    const int b = 1 - a;
    // Pointwise loss minus the conditional variance it integrates.
    rhs_f.add(sq(model(d.x, a) - d.y[a]) - d.var[a]);
    rhs_cf.add(sq(model(d.x, b) - d.y[b]) - d.var[b]);
  }
  Claim1Report r;
  r.factual = equality_check("claim1_factual", lhs_f, rhs_f, threshold_se, draws, seed);
  r.counterfactual = equality_check("claim1_counterfactual", lhs_cf, rhs_cf, threshold_se, draws, seed);
  return r;
}

CheckResult check_claim2(const OracleDgp& dgp, const OutcomeFunction& model, int draws, std::uint64_t seed,
                         double threshold_se) {
  check_draws(draws);
  DrawStream lhs_stream(dgp, derive_seed(seed, "claim2-lhs"));
  Accumulator lhs;
  for (int k = 0; k < draws; ++k) {
    const Draw d = lhs_stream.next();
    lhs.add(sq((model(d.x, 1) - model(d.x, 0)) - (d.mu[1] - d.mu[0])));
  }
  const LossEstimates losses = mc_losses(dgp, model, draws, derive_seed(seed, "claim2-rhs"));
  // R_F and R_CF come from the same draws; their combined integrand has SE
  // bounded by the sum of the individual SEs.
  const double rhs_se = 2.0 * (losses.r_f.se + losses.r_cf.se);
  const Estimate l = lhs.estimate();
  CheckResult c;
  c.check = "claim2";
  c.lhs = l.value;
  c.rhs = 2.0 * (losses.r_f.value + losses.r_cf.value - 2.0 * losses.sigma2_y);
  c.se = std::sqrt(l.se * l.se + rhs_se * rhs_se);
  c.slack = c.rhs - c.lhs;
  c.threshold_se = threshold_se;
  c.pass = c.lhs <= c.rhs + threshold_se * c.se + 1e-12;
  c.draws = draws;
  c.seed = seed;
  return c;
}

WeightLimitReport check_weight_limit(const OracleDgp& dgp, const std::vector<int>& n_grid,
                                     const std::vector<std::uint64_t>& seeds, const energy::SolverConfig& solver) {
  if (n_grid.empty()) throw InvalidDataError("weight-limit check needs a non-empty n grid");
  if (seeds.empty()) throw InvalidDataError("weight-limit check needs at least one seed");
  for (std::size_t k = 1; k < n_grid.size(); ++k) {
    if (n_grid[k] <= n_grid[k - 1]) throw InvalidDataError("n grid must be strictly increasing");
  }
  WeightLimitReport r;
  r.n_grid = n_grid;
  r.seeds = seeds;
  for (int n : n_grid) {
    std::vector<double> e1, e0;
    for (std::uint64_t s : seeds) {
      const data::Dataset d = data::simulate(dgp, n, derive_seed(s, "weight-limit:" + std::to_string(n)));
      const Eigen::MatrixXd xs = data::Standardizer::fit(d.x).apply(d.x);
      const energy::PairwiseDistances dist = energy::pairwise_distances(xs);
      const energy::SolveResult sol = energy::solve_balancing_weights(dist, d.a, solver);
      r.solver_warning = r.solver_warning || sol.warning;
      e1.push_back(energy::weighted_energy_distance(dist, d.a, sol.weights, 1).total);
      e0.push_back(energy::weighted_energy_distance(dist, d.a, sol.weights, 0).total);
    }
    r.median_treated.push_back(median(e1));
    r.median_control.push_back(median(e0));
    r.e_treated.push_back(std::move(e1));
    r.e_control.push_back(std::move(e0));
  }
  if (n_grid.size() == 1) {
    r.pass = true;
    r.note = "single-point grid: trend is vacuous";
    return r;
  }
  r.pass = true;
  for (std::size_t k = 1; k < n_grid.size(); ++k) {
    if (!(r.median_treated[k] < r.median_treated[k - 1])) r.pass = false;
  }
  r.note = r.pass ? "treated-arm medians strictly decrease" : "treated-arm medians do not strictly decrease";
  return r;
}

SweepSummary sweep_claims(int pairs, int draws, std::uint64_t seed, int max_borderline) {
  SweepSummary s;
  s.pairs = pairs;
  for (int k = 0; k < pairs; ++k) {
    const std::uint64_t pair_seed = derive_seed(seed, "pair:" + std::to_string(k));
    const OracleDgp dgp = random_linear_dgp(derive_seed(pair_seed, "dgp"), 3);
    OutcomeFunction model;
    if (k % 2 == 0) {
      model = random_linear_model(derive_seed(pair_seed, "model"), 3);
    } else {
      Rng rng(derive_seed(pair_seed, "bias"));
      std::normal_distribution<double> normal(0.0, 0.5);
      const double b1 = normal(rng);
      const double b0 = normal(rng);
      model = biased_oracle(dgp, b1, b0);
    }
    Claim1Report c1 = check_claim1(dgp, model, draws, pair_seed, 3.0);
    CheckResult c2 = check_claim2(dgp, model, draws, pair_seed, 3.0);
    if (!c1.pass() || !c2.pass) {
      ++s.failures_at_primary;
      const Claim1Report c1b = check_claim1(dgp, model, draws, pair_seed, 5.0);
      const CheckResult c2b = check_claim2(dgp, model, draws, pair_seed, 5.0);
      if (!c1b.pass() || !c2b.pass) ++s.failures_at_fallback;
    }
    s.claim1.push_back(std::move(c1));
    s.claim2.push_back(std::move(c2));
  }
  s.pass = s.failures_at_primary <= max_borderline && s.failures_at_fallback == 0;
  return s;
}

}  // namespace energyate::verify
