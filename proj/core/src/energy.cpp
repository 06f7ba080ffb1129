#include "energyate/energy.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "energyate/error.hpp"

namespace energyate::energy {

namespace {

void check_treatment(const Treatment& a, Eigen::Index n) {
  if (a.size() != n) throw ShapeError("treatment vector length does not match the sample size");
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i) != 0 && a(i) != 1) throw InvalidDataError("treatment entries must be 0 or 1");
  }
}

Eigen::Index arm_size(const Treatment& a, int arm) {
  return static_cast<Eigen::Index>((a.array() == arm).count());
}

std::vector<Eigen::Index> arm_indices(const Treatment& a, int arm) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i) == arm) idx.push_back(i);
  }
  return idx;
}

// One arm's block of the sum-form objective:
//   E(v) = c_cross * r'v - c_within * v' D v - ref
// where v holds the arm's weights, r the full-sample distance row sums of
// the arm's units and D the arm's distance sub-matrix.
struct ArmProblem {
  std::vector<Eigen::Index> index;
  Eigen::MatrixXd d;
  Eigen::VectorXd row_sums;
  double c_cross = 0.0;
  double c_within = 0.0;
  double reference = 0.0;
  double total = 0.0;  // required sum of the arm weights

  ArmProblem(const PairwiseDistances& pd, const Treatment& a, int arm, double ref) {
    index = arm_indices(a, arm);
    const auto k = static_cast<Eigen::Index>(index.size());
    const auto n = static_cast<double>(pd.n());
    d.resize(k, k);
    row_sums.resize(k);
    for (Eigen::Index r = 0; r < k; ++r) {
      row_sums(r) = pd.matrix().row(index[static_cast<std::size_t>(r)]).sum();
      for (Eigen::Index c = 0; c < k; ++c) {
        d(r, c) = pd(index[static_cast<std::size_t>(r)], index[static_cast<std::size_t>(c)]);
      }
    }
    const auto na = static_cast<double>(k);
    c_cross = 2.0 / (na * n);
    c_within = 1.0 / (na * na);
    reference = ref;
    total = na;
  }

  double value(const Eigen::VectorXd& v, const Eigen::VectorXd& dv) const {
    return c_cross * row_sums.dot(v) - c_within * v.dot(dv) - reference;
  }
  Eigen::VectorXd gradient(const Eigen::VectorXd& dv) const {
    return c_cross * row_sums - 2.0 * c_within * dv;
  }
  // Curvature bound of the quadratic part: 2/n_a^2 times the largest row sum.
  double lipschitz() const {
    const double m = d.size() ? d.rowwise().sum().maxCoeff() : 0.0;
    return 2.0 * c_within * m;
  }
};

// Accelerated projected gradient with a monotone safeguard. Each call to
// step() either accepts a point with objective no larger than the current
// one or halves the step size.
class ArmSolver {
 public:
  ArmSolver(const ArmProblem& prob, double step) : prob_(prob), step_(step) {
    w_ = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(prob.index.size()));
    dw_ = prob_.d * w_;
    f_ = prob_.value(w_, dw_);
    y_ = w_;
  }

  double value() const { return f_; }
  const Eigen::VectorXd& weights() const { return w_; }

  void step() {
    if (w_.size() == 0) return;
    for (int attempt = 0; attempt < 60; ++attempt) {
      Eigen::VectorXd dy = prob_.d * y_;
      Eigen::VectorXd cand = project_to_simplex(y_ - step_ * prob_.gradient(dy), prob_.total);
      Eigen::VectorXd dcand = prob_.d * cand;
      const double fc = prob_.value(cand, dcand);
      if (fc <= f_) {
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_ * t_));
        y_ = cand + ((t_ - 1.0) / t_next) * (cand - w_);
        t_ = t_next;
        w_ = std::move(cand);
        dw_ = std::move(dcand);
        f_ = fc;
        return;
      }
      if (t_ > 1.0 || (y_ - w_).squaredNorm() > 0.0) {
        // Momentum overshot: restart from the current iterate.
        t_ = 1.0;
        y_ = w_;
      } else {
        step_ *= 0.5;
      }
    }
  }

 private:
  const ArmProblem& prob_;
  double step_;
  Eigen::VectorXd w_;
  Eigen::VectorXd dw_;
  Eigen::VectorXd y_;
  double f_ = 0.0;
  double t_ = 1.0;
};

double reference_term(const PairwiseDistances& d) {
  const auto n = static_cast<double>(d.n());
  return d.matrix().sum() / (n * n);
}

}  // namespace

std::string to_string(ObjectiveForm form) {
  return form == ObjectiveForm::sum ? "sum" : "sqrt-sum";
}

ObjectiveForm objective_form_from_string(const std::string& s) {
  if (s == "sum") return ObjectiveForm::sum;
  if (s == "sqrt-sum" || s == "sqrt_sum") return ObjectiveForm::sqrt_sum;
  throw InvalidDataError("unknown objective form '" + s + "'");
}

BalancingWeights uniform_weights(const Treatment& a) {
  return make_weights(Eigen::VectorXd::Ones(a.size()), a);
}

BalancingWeights make_weights(Eigen::VectorXd w, const Treatment& a) {
  if (w.size() != a.size()) throw ShapeError("weight vector length does not match treatment");
  BalancingWeights out;
  out.treated_sum = 0.0;
  out.control_sum = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    (a(i) == 1 ? out.treated_sum : out.control_sum) += w(i);
  }
  out.w = std::move(w);
  return out;
}

void validate_weights(const BalancingWeights& w, const Treatment& a, double rel_tol) {
  check_treatment(a, w.w.size());
  if (!w.w.allFinite()) throw InvalidDataError("weights must be finite");
  if ((w.w.array() < 0.0).any()) throw InvalidDataError("weights must be nonnegative");
  const auto recomputed = make_weights(w.w, a);
  const auto n1 = static_cast<double>(arm_size(a, 1));
  const auto n0 = static_cast<double>(arm_size(a, 0));
  if (std::abs(recomputed.treated_sum - n1) > rel_tol * std::max(1.0, n1) ||
      std::abs(recomputed.control_sum - n0) > rel_tol * std::max(1.0, n0)) {
    throw InvalidDataError("weights violate the per-arm sum constraints");
  }
}

PairwiseDistances pairwise_distances(const Eigen::MatrixXd& x) {
  if (x.rows() < 1) throw InvalidDataError("pairwise distances need at least one row");
  if (!x.allFinite()) throw InvalidDataError("covariates contain non-finite values");
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  const Eigen::MatrixXd xt = x.transpose();  // column access per unit
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double v = (xt.col(i) - xt.col(j)).norm();
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return PairwiseDistances(std::move(d));
}

double energy_distance(const Eigen::MatrixXd& g, const Eigen::MatrixXd& h) {
  if (g.rows() < 1 || h.rows() < 1) throw InvalidDataError("energy distance needs non-empty samples");
  if (g.cols() != h.cols()) throw ShapeError("samples have different dimensions");
  const auto n = static_cast<double>(g.rows());
  const auto m = static_cast<double>(h.rows());
  auto mean_dist = [](const Eigen::MatrixXd& u, const Eigen::MatrixXd& v) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
      for (Eigen::Index j = 0; j < v.rows(); ++j) s += (u.row(i) - v.row(j)).norm();
    }
    return s;
  };
  // Cross term accumulated as the average of both orientations so the
  // statistic is symmetric in (g, h) to the last bit.
  const double cross = 0.5 * (mean_dist(g, h) + mean_dist(h, g)) / (n * m);
  return 2.0 * cross - mean_dist(g, g) / (n * n) - mean_dist(h, h) / (m * m);
}

EnergyBreakdown weighted_energy_distance(const PairwiseDistances& d, const Treatment& a,
                                         const BalancingWeights& w, int arm) {
  check_treatment(a, d.n());
  if (w.w.size() != d.n()) throw ShapeError("weight vector length does not match the sample size");
  if (arm != 0 && arm != 1) throw InvalidDataError("arm must be 0 or 1");
  const Eigen::Index na_count = arm_size(a, arm);
  if (na_count == 0) throw InvalidDataError("arm " + std::to_string(arm) + " has no units");
  const auto n = static_cast<double>(d.n());
  const auto na = static_cast<double>(na_count);

  Eigen::VectorXd wa = Eigen::VectorXd::Zero(d.n());
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    if (a(i) == arm) wa(i) = w.w(i);
  }
  const Eigen::VectorXd dwa = d.matrix() * wa;
  EnergyBreakdown out;
  out.cross = 2.0 / (na * n) * dwa.sum();
  out.within_group = wa.dot(dwa) / (na * na);
  out.within_reference = reference_term(d);
  out.total = out.cross - out.within_group - out.within_reference;
  return out;
}

EnergyBreakdown weighted_energy_distance(const Eigen::MatrixXd& x, const Treatment& a,
                                         const BalancingWeights& w, int arm) {
  return weighted_energy_distance(pairwise_distances(x), a, w, arm);
}

double balance_objective(const PairwiseDistances& d, const Treatment& a,
                         const BalancingWeights& w, ObjectiveForm form) {
  const double e1 = weighted_energy_distance(d, a, w, 1).total;
  const double e0 = weighted_energy_distance(d, a, w, 0).total;
  if (form == ObjectiveForm::sum) return e1 + e0;
  return std::sqrt(std::max(e1, 0.0)) + std::sqrt(std::max(e0, 0.0));
}

double balance_objective(const Eigen::MatrixXd& x, const Treatment& a, const BalancingWeights& w,
                         ObjectiveForm form) {
  return balance_objective(pairwise_distances(x), a, w, form);
}

Eigen::VectorXd objective_gradient(const PairwiseDistances& d, const Treatment& a,
                                   const BalancingWeights& w) {
  check_treatment(a, d.n());
  if (w.w.size() != d.n()) throw ShapeError("weight vector length does not match the sample size");
  const auto n = static_cast<double>(d.n());
  Eigen::VectorXd grad(d.n());
  for (int arm = 0; arm <= 1; ++arm) {
    const auto na = static_cast<double>(arm_size(a, arm));
    if (na == 0.0) continue;
    Eigen::VectorXd wa = Eigen::VectorXd::Zero(d.n());
    for (Eigen::Index i = 0; i < d.n(); ++i) {
      if (a(i) == arm) wa(i) = w.w(i);
    }
    const Eigen::VectorXd dwa = d.matrix() * wa;
    for (Eigen::Index i = 0; i < d.n(); ++i) {
      if (a(i) != arm) continue;
      grad(i) = 2.0 / (na * n) * d.matrix().row(i).sum() - 2.0 / (na * na) * dwa(i);
    }
  }
  return grad;
}

Eigen::VectorXd objective_gradient(const Eigen::MatrixXd& x, const Treatment& a,
                                   const BalancingWeights& w) {
  return objective_gradient(pairwise_distances(x), a, w);
}

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v, double total) {
  const Eigen::Index k = v.size();
  if (k == 0) return v;
  std::vector<double> sorted(v.data(), v.data() + k);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (Eigen::Index j = 0; j < k; ++j) {
    cumulative += sorted[static_cast<std::size_t>(j)];
    const double candidate = (cumulative - total) / static_cast<double>(j + 1);
    if (sorted[static_cast<std::size_t>(j)] - candidate > 0.0) theta = candidate;
  }
  Eigen::VectorXd out = (v.array() - theta).cwiseMax(0.0);
  // Renormalise the rounding residue onto the support.
  const double s = out.sum();
  if (s > 0.0) out *= total / s;
  return out;
}

SolveResult solve_balancing_weights(const PairwiseDistances& d, const Treatment& a,
                                    const SolverConfig& cfg) {
  check_treatment(a, d.n());
  if (cfg.max_iterations < 1) throw InvalidDataError("solver needs at least one iteration");
  if (!(cfg.tolerance > 0.0)) throw InvalidDataError("solver tolerance must be positive");
  if (cfg.step_size < 0.0) throw InvalidDataError("solver step size must be nonnegative");
  if (arm_size(a, 1) == 0 || arm_size(a, 0) == 0) {
    throw InvalidDataError("balancing weights need both arms to be non-empty");
  }

  const double ref = reference_term(d);
  const ArmProblem treated(d, a, 1, ref);
  const ArmProblem control(d, a, 0, ref);
  auto step_for = [&](const ArmProblem& p) {
    if (cfg.step_size > 0.0) return cfg.step_size;
    const double lip = p.lipschitz();
    return lip > 0.0 ? 1.0 / lip : 1.0;
  };
  ArmSolver s1(treated, step_for(treated));
  ArmSolver s0(control, step_for(control));

  auto assemble = [&]() {
    Eigen::VectorXd w(d.n());
    for (std::size_t k = 0; k < treated.index.size(); ++k) w(treated.index[k]) = s1.weights()(static_cast<Eigen::Index>(k));
    for (std::size_t k = 0; k < control.index.size(); ++k) w(control.index[k]) = s0.weights()(static_cast<Eigen::Index>(k));
    return make_weights(std::move(w), a);
  };
  auto sqrt_sum = [&]() {
    return std::sqrt(std::max(s1.value(), 0.0)) + std::sqrt(std::max(s0.value(), 0.0));
  };
  auto reported = [&]() {
    return cfg.form == ObjectiveForm::sum ? s1.value() + s0.value() : sqrt_sum();
  };

  SolveResult result;
  result.uniform_objective = s1.value() + s0.value();
  result.uniform_sqrt_sum = sqrt_sum();
  result.trace.push_back({0, reported(), sqrt_sum()});

  // The sum and sqrt-sum objectives are both separable across arms and
  // monotone in each arm's energy, so they share minimisers; each arm's
  // quadratic is minimised on its own scaled simplex.
  constexpr int kPatience = 10;
  int quiet = 0;
  double previous = s1.value() + s0.value();
  int it = 0;
  for (it = 1; it <= cfg.max_iterations; ++it) {
    s1.step();
    s0.step();
    const double current = s1.value() + s0.value();
    result.trace.push_back({it, reported(), sqrt_sum()});
    quiet = (previous - current < cfg.tolerance) ? quiet + 1 : 0;
    previous = current;
    if (quiet >= kPatience) {
      result.converged = true;
      break;
    }
  }
  result.iterations = std::min(it, cfg.max_iterations);
  result.warning = !result.converged;
  result.weights = assemble();
  result.objective = s1.value() + s0.value();
  result.sqrt_sum = sqrt_sum();
  return result;
}

SolveResult solve_balancing_weights(const Eigen::MatrixXd& x, const Treatment& a,
                                    const SolverConfig& cfg) {
  return solve_balancing_weights(pairwise_distances(x), a, cfg);
}

}  // namespace energyate::energy
