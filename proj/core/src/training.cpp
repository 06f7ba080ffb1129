#include "energyate/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "energyate/error.hpp"
#include "energyate/estimators.hpp"
#include "energyate/seed.hpp"

namespace energyate::training {

namespace {

double energy_penalty(const Eigen::MatrixXd& x, const Eigen::VectorXi& a, const energy::BalancingWeights& w) {
  return energy::balance_objective(x, a, w, energy::ObjectiveForm::sqrt_sum);
}

models::OutcomeModel build_model(const ObjectiveConfig& cfg, int p) {
  const std::uint64_t seed = derive_seed(cfg.seed, "model-init");
  if (cfg.kind == models::ModelKind::fcnn) return models::make_fcnn(p, cfg.fcnn_hidden, seed);
  return models::make_nam(p, cfg.nam_trunk, seed);
}

ObjectiveComponents evaluate(const Eigen::MatrixXd& x, const Eigen::VectorXi& a, const Eigen::VectorXd& y,
                             const models::OutcomeModel& model, const energy::BalancingWeights& w,
                             double epsilon, double energy_sqrt_sum, const ObjectiveConfig& cfg) {
  return objective_gradient(x, a, y, model, w, epsilon, energy_sqrt_sum, cfg).components;
}

}  // namespace

void validate(const ObjectiveConfig& cfg) {
  if (!(cfg.alpha >= 0.0)) throw InvalidDataError("alpha must be nonnegative");
  if (!(cfg.beta >= 0.0)) throw InvalidDataError("beta must be nonnegative");
  if (cfg.epochs < 1) throw InvalidDataError("epochs must be at least 1");
  if (cfg.batch_size < 0) throw InvalidDataError("batch size must be nonnegative");
  if (!(cfg.learning_rate > 0.0)) throw InvalidDataError("learning rate must be positive");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) throw InvalidDataError("momentum must lie in [0, 1)");
  if (cfg.beta > 0.0 && !cfg.use_weights) {
    throw InvalidDataError("weighted regularisation (beta > 0) requires balancing weights");
  }
}

ObjectiveGradient objective_gradient(const Eigen::MatrixXd& x, const Eigen::VectorXi& a,
                                     const Eigen::VectorXd& y, const models::OutcomeModel& model,
                                     const energy::BalancingWeights& w, double epsilon,
                                     double energy_sqrt_sum, const ObjectiveConfig& cfg) {
  const Eigen::Index n = x.rows();
  if (n == 0) throw EmptyBatchError("objective needs at least one unit");
  if (y.size() != n || w.w.size() != n) throw ShapeError("objective inputs have inconsistent lengths");
  const double nd = static_cast<double>(n);

  const models::ModelForward fwd = models::forward_train(model, x, a);
  const Eigen::VectorXd resid = fwd.prediction - y;  // Q - y
  const bool weighted = cfg.resolved_weighted_mse();

  ObjectiveGradient out;
  Eigen::VectorXd dpred(n);
  if (weighted) {
    out.components.mse = (w.w.array() * resid.array().square()).sum() / nd;
    dpred = (2.0 / nd) * (w.w.array() * resid.array()).matrix();
  } else {
    out.components.mse = resid.squaredNorm() / nd;
    dpred = (2.0 / nd) * resid;
  }
  out.components.energy = energy_sqrt_sum;

  if (cfg.beta > 0.0) {
    const Eigen::VectorXd h = estimators::calibration_covariate(a, w);
    const Eigen::VectorXd calibrated = resid + epsilon * h;  // Q~ - y
    out.components.gamma = calibrated.squaredNorm() / nd;
    dpred += (2.0 * cfg.beta / nd) * calibrated;
    out.epsilon = (2.0 * cfg.beta / nd) * calibrated.dot(h);
  }
  out.components.total = out.components.mse + cfg.alpha * out.components.energy + cfg.beta * out.components.gamma;
  out.model = models::backward_train(model, fwd, dpred);
  return out;
}

ObjectiveComponents base_objective(const data::Dataset& d, const models::OutcomeModel& model,
                                   const energy::BalancingWeights& w, const ObjectiveConfig& cfg) {
  ObjectiveConfig base = cfg;
  base.beta = 0.0;
  base.weighted_mse = cfg.resolved_weighted_mse();
  return evaluate(d.x, d.a, d.y, model, w, 0.0, energy_penalty(d.x, d.a, w), base);
}

Eigen::VectorXd gamma_term(const data::Dataset& d, const models::OutcomeModel& model,
                           const energy::BalancingWeights& w, double epsilon) {
  const Eigen::VectorXd h = estimators::calibration_covariate(d.a, w);
  const Eigen::VectorXd q = models::predict_batch(model, d.x, d.a);
  return (d.y - q - epsilon * h).array().square();
}

ObjectiveComponents wreg_objective(const data::Dataset& d, const models::OutcomeModel& model,
                                   const energy::BalancingWeights& w, double epsilon,
                                   const ObjectiveConfig& cfg) {
  return evaluate(d.x, d.a, d.y, model, w, epsilon, energy_penalty(d.x, d.a, w), cfg);
}

FitResult fit(const data::Dataset& train, const ObjectiveConfig& cfg, const data::Dataset* validation) {
  validate(cfg);
  data::validate(train, /*require_both_arms=*/true);
  const Eigen::Index n = train.n();

  FitResult result;
  result.standardizer = data::Standardizer::fit(train.x);
  const Eigen::MatrixXd xs = result.standardizer.apply(train.x);

  // Stage 1: balancing weights.
  const energy::PairwiseDistances dist = energy::pairwise_distances(xs);
  if (cfg.use_weights) {
    energy::SolverConfig scfg = cfg.solver;
    scfg.seed = derive_seed(cfg.seed, "solver");
    result.solver = energy::solve_balancing_weights(dist, train.a, scfg);
    result.weights = result.solver.weights;
  } else {
    result.weights = energy::uniform_weights(train.a);
    result.solver.weights = result.weights;
    result.solver.uniform_sqrt_sum = energy::balance_objective(dist, train.a, result.weights,
                                                               energy::ObjectiveForm::sqrt_sum);
    result.solver.sqrt_sum = result.solver.uniform_sqrt_sum;
    result.solver.converged = true;
  }
  const double penalty = energy::balance_objective(dist, train.a, result.weights, energy::ObjectiveForm::sqrt_sum);

  // Stage 2: outcome model (and epsilon) with w frozen.
  result.model = build_model(cfg, static_cast<int>(train.p()));
  models::ModelOptimizer opt = models::make_optimizer(result.model, cfg.learning_rate, cfg.momentum);
  double epsilon = 0.0;
  double epsilon_velocity = 0.0;
  const bool train_epsilon = cfg.beta > 0.0;

  Eigen::MatrixXd xv;
  const bool has_validation = validation != nullptr && validation->n() > 0;
  if (has_validation) xv = result.standardizer.apply(validation->x);

  std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, "minibatch"));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const bool full_batch = cfg.batch_size == 0 || cfg.batch_size >= n;

  models::OutcomeModel best_model = result.model;
  double best_epsilon = 0.0;
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;
  result.best_epoch = cfg.epochs;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    ObjectiveGradient g = objective_gradient(xs, train.a, train.y, result.model, result.weights, epsilon, penalty, cfg);
    if (!std::isfinite(g.components.total)) {
      throw DivergenceError("objective became non-finite at epoch " + std::to_string(epoch) +
                            " (mse=" + std::to_string(g.components.mse) + ", gamma=" +
                            std::to_string(g.components.gamma) + "); lower the learning rate");
    }
    EpochRecord rec{epoch, g.components, std::nullopt};

    if (has_validation) {
      const Eigen::VectorXd pv = models::predict_batch(result.model, xv, validation->a);
      const double vmse = (pv - validation->y).squaredNorm() / static_cast<double>(validation->n());
      rec.validation_mse = vmse;
      if (vmse < best_val) {
        best_val = vmse;
        best_model = result.model;
        best_epsilon = epsilon;
        result.best_epoch = epoch;
        since_best = 0;
      } else if (++since_best >= cfg.patience) {
        result.trace.push_back(rec);
        result.early_stopped = true;
        break;
      }
    }
    result.trace.push_back(rec);

    if (full_batch) {
      models::sgd_step(result.model, g.model, opt);
      if (train_epsilon) nn::sgd_step_scalar(epsilon, g.epsilon, epsilon_velocity, cfg.learning_rate, cfg.momentum);
      continue;
    }
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const std::vector<Eigen::Index> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                          order.begin() + static_cast<std::ptrdiff_t>(stop));
      const auto m = static_cast<Eigen::Index>(idx.size());
      Eigen::MatrixXd xb(m, xs.cols());
      Eigen::VectorXi ab(m);
      Eigen::VectorXd yb(m);
      for (Eigen::Index k = 0; k < m; ++k) {
        xb.row(k) = xs.row(idx[static_cast<std::size_t>(k)]);
        ab(k) = train.a(idx[static_cast<std::size_t>(k)]);
        yb(k) = train.y(idx[static_cast<std::size_t>(k)]);
      }
      // The calibration covariate uses full-sample arm sizes, so mini-batch
      // weights are rescaled to keep h_i identical to its full-batch value.
      Eigen::VectorXd wb(m);
      const double n1 = static_cast<double>(train.n_treated());
      const double n0 = static_cast<double>(train.n_control());
      const double m1 = static_cast<double>((ab.array() == 1).count());
      const double m0 = static_cast<double>(m) - m1;
      for (Eigen::Index k = 0; k < m; ++k) {
        const double wi = result.weights.w(idx[static_cast<std::size_t>(k)]);
        wb(k) = ab(k) == 1 ? (m1 > 0 ? wi * (m1 / n1) * (static_cast<double>(n) / static_cast<double>(m)) : wi)
                           : (m0 > 0 ? wi * (m0 / n0) * (static_cast<double>(n) / static_cast<double>(m)) : wi);
      }
      if (m1 == 0.0 || m0 == 0.0) continue;  // calibration covariate undefined on a one-arm batch
      energy::BalancingWeights bw = energy::make_weights(std::move(wb), ab);
      ObjectiveGradient gb = objective_gradient(xb, ab, yb, result.model, bw, epsilon, penalty, cfg);
      models::sgd_step(result.model, gb.model, opt);
      if (train_epsilon) nn::sgd_step_scalar(epsilon, gb.epsilon, epsilon_velocity, cfg.learning_rate, cfg.momentum);
    }
  }

  if (has_validation) {
    result.model = std::move(best_model);
    epsilon = best_epsilon;
  }
  if (train_epsilon) {
    // epsilon enters the objective only through the quadratic gamma term, so
    // its minimiser at the returned theta is closed form.
    const Eigen::VectorXd h = estimators::calibration_covariate(train.a, result.weights);
    const Eigen::VectorXd r = train.y - models::predict_batch(result.model, xs, train.a);
    const double hh = h.squaredNorm();
    if (hh > 0.0) epsilon = r.dot(h) / hh;
  }
  if (!models::all_finite(result.model) || !std::isfinite(epsilon)) {
    throw DivergenceError("training produced non-finite parameters");
  }
  result.epsilon = epsilon;
  result.final_components = evaluate(xs, train.a, train.y, result.model, result.weights, epsilon, penalty, cfg);
  return result;
}

}  // namespace energyate::training
