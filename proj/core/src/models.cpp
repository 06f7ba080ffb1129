#include "energyate/models.hpp"

#include <cmath>
#include <string>

#include "energyate/error.hpp"

namespace energyate::models {

namespace {

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

void check_arm(int a) {
  if (a != 0 && a != 1) throw InvalidDataError("treatment arm must be 0 or 1");
}

void check_x(std::span<const double> x, int p) {
  if (static_cast<int>(x.size()) != p) {
    throw ShapeError("covariate vector has length " + std::to_string(x.size()) + ", model expects " +
                     std::to_string(p));
  }
}

Eigen::MatrixXd fcnn_inputs(const Eigen::MatrixXd& x, const Eigen::VectorXi& a) {
  Eigen::MatrixXd in(x.cols() + 1, x.rows());
  in.topRows(x.cols()) = x.transpose();
  in.row(x.cols()) = a.cast<double>().transpose();
  return in;
}

}  // namespace

std::string to_string(ModelKind kind) { return kind == ModelKind::fcnn ? "fcnn" : "nam"; }

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "fcnn") return ModelKind::fcnn;
  if (s == "nam") return ModelKind::nam;
  throw InvalidDataError("unknown model kind '" + s + "' (expected fcnn or nam)");
}

FcnnModel make_fcnn(int p, std::span<const int> hidden, std::uint64_t seed) {
  if (p < 1) throw InvalidArchitectureError("model needs at least one covariate");
  std::vector<int> dims{p + 1};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(1);
  return FcnnModel{nn::init_params(dims, seed), p};
}

NamModel make_nam(int p, std::span<const int> trunk, std::uint64_t seed) {
  if (p < 1) throw InvalidArchitectureError("model needs at least one covariate");
  if (trunk.empty()) throw InvalidArchitectureError("NAM trunk needs at least one hidden layer");
  std::vector<int> dims{1};
  dims.insert(dims.end(), trunk.begin(), trunk.end());
  dims.push_back(2);
  NamModel m;
  m.p = p;
  m.subnets.reserve(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) {
    m.subnets.push_back(nn::init_params(dims, seed * 1000003ULL + static_cast<std::uint64_t>(j) + 1));
  }
  return m;
}

OutcomeModel make_model(ModelKind kind, int p, std::uint64_t seed) {
  if (kind == ModelKind::fcnn) return make_fcnn(p, kDefaultFcnnHidden, seed);
  return make_nam(p, kDefaultNamTrunk, seed);
}

ModelKind kind_of(const OutcomeModel& m) {
  return std::holds_alternative<FcnnModel>(m) ? ModelKind::fcnn : ModelKind::nam;
}

int input_dim(const OutcomeModel& m) {
  return std::visit([](const auto& model) { return model.p; }, m);
}

double fcnn_predict(const FcnnModel& model, std::span<const double> x, int a) {
  check_x(x, model.p);
  check_arm(a);
  std::vector<double> in(x.begin(), x.end());
  in.push_back(static_cast<double>(a));
  return nn::forward(model.params, in);
}

double nam_feature_contribution(const NamModel& model, int j, double xj, int a) {
  if (j < 0 || j >= model.p) {
    throw IndexError("feature index " + std::to_string(j) + " out of range [0, " + std::to_string(model.p) + ")");
  }
  check_arm(a);
  Eigen::MatrixXd in(1, 1);
  in(0, 0) = xj;
  return nn::forward_batch(model.subnets[static_cast<std::size_t>(j)], in)(a, 0);
}

double nam_predict(const NamModel& model, std::span<const double> x, int a) {
  check_x(x, model.p);
  double total = 0.0;
  for (int j = 0; j < model.p; ++j) total += nam_feature_contribution(model, j, x[static_cast<std::size_t>(j)], a);
  return total + model.bias;
}

double predict(const OutcomeModel& model, std::span<const double> x, int a) {
  return std::visit(Overloaded{[&](const FcnnModel& m) { return fcnn_predict(m, x, a); },
                               [&](const NamModel& m) { return nam_predict(m, x, a); }},
                    model);
}

ModelForward forward_train(const OutcomeModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXi& a) {
  if (x.cols() != input_dim(model)) throw ShapeError("covariate matrix width does not match the model");
  if (a.size() != x.rows()) throw ShapeError("treatment length does not match covariate rows");
  for (Eigen::Index i = 0; i < a.size(); ++i) check_arm(a(i));
  ModelForward fwd;
  fwd.arms = a;
  std::visit(Overloaded{
                 [&](const FcnnModel& m) {
                   fwd.caches.resize(1);
                   fwd.prediction = nn::forward_batch(m.params, fcnn_inputs(x, a), fwd.caches[0]).row(0).transpose();
                 },
                 [&](const NamModel& m) {
                   fwd.caches.resize(static_cast<std::size_t>(m.p));
                   fwd.prediction = Eigen::VectorXd::Constant(x.rows(), m.bias);
                   for (int j = 0; j < m.p; ++j) {
                     const Eigen::MatrixXd out = nn::forward_batch(
                         m.subnets[static_cast<std::size_t>(j)], Eigen::MatrixXd(x.col(j).transpose()),
                         fwd.caches[static_cast<std::size_t>(j)]);
                     for (Eigen::Index i = 0; i < x.rows(); ++i) fwd.prediction(i) += out(a(i), i);
                   }
                 }},
             model);
  return fwd;
}

Eigen::VectorXd predict_batch(const OutcomeModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXi& a) {
  return forward_train(model, x, a).prediction;
}

Eigen::VectorXd predict_arm(const OutcomeModel& model, const Eigen::MatrixXd& x, int arm) {
  check_arm(arm);
  return predict_batch(model, x, Eigen::VectorXi::Constant(x.rows(), arm));
}

ModelGradient backward_train(const OutcomeModel& model, const ModelForward& fwd,
                             const Eigen::VectorXd& prediction_grad) {
  if (prediction_grad.size() != fwd.prediction.size()) throw ShapeError("prediction gradient length mismatch");
  ModelGradient g;
  std::visit(Overloaded{
                 [&](const FcnnModel& m) {
                   g.blocks.resize(1);
                   nn::backward_batch(m.params, fwd.caches[0], Eigen::MatrixXd(prediction_grad.transpose()),
                                      g.blocks[0]);
                 },
                 [&](const NamModel& m) {
                   g.blocks.resize(static_cast<std::size_t>(m.p));
                   Eigen::MatrixXd out_grad = Eigen::MatrixXd::Zero(2, prediction_grad.size());
                   for (Eigen::Index i = 0; i < prediction_grad.size(); ++i) {
                     out_grad(fwd.arms(i), i) = prediction_grad(i);
                   }
                   for (int j = 0; j < m.p; ++j) {
                     nn::backward_batch(m.subnets[static_cast<std::size_t>(j)],
                                        fwd.caches[static_cast<std::size_t>(j)], out_grad,
                                        g.blocks[static_cast<std::size_t>(j)]);
                   }
                   g.scalars.push_back(prediction_grad.sum());
                 }},
             model);
  return g;
}

ModelOptimizer make_optimizer(const OutcomeModel& model, double learning_rate, double momentum) {
  ModelOptimizer opt;
  opt.learning_rate = learning_rate;
  opt.momentum = momentum;
  std::visit(Overloaded{[&](const FcnnModel& m) {
                          opt.blocks.push_back(nn::make_optimizer(m.params, learning_rate, momentum));
                        },
                        [&](const NamModel& m) {
                          for (const auto& s : m.subnets) {
                            opt.blocks.push_back(nn::make_optimizer(s, learning_rate, momentum));
                          }
                          opt.scalar_velocity.assign(1, 0.0);
                        }},
             model);
  return opt;
}

void sgd_step(OutcomeModel& model, const ModelGradient& grad, ModelOptimizer& opt) {
  std::visit(Overloaded{[&](FcnnModel& m) { nn::sgd_step(m.params, grad.blocks.at(0), opt.blocks.at(0)); },
                        [&](NamModel& m) {
                          for (std::size_t j = 0; j < m.subnets.size(); ++j) {
                            nn::sgd_step(m.subnets[j], grad.blocks.at(j), opt.blocks.at(j));
                          }
                          nn::sgd_step_scalar(m.bias, grad.scalars.at(0), opt.scalar_velocity.at(0),
                                              opt.learning_rate, opt.momentum);
                        }},
             model);
}

std::vector<double> flatten(const OutcomeModel& model) {
  std::vector<double> out;
  std::visit(Overloaded{[&](const FcnnModel& m) { out = m.params.flatten(); },
                        [&](const NamModel& m) {
                          for (const auto& s : m.subnets) {
                            const auto f = s.flatten();
                            out.insert(out.end(), f.begin(), f.end());
                          }
                          out.push_back(m.bias);
                        }},
             model);
  return out;
}

std::vector<double> flatten(const ModelGradient& grad) {
  std::vector<double> out;
  for (const auto& b : grad.blocks) {
    const auto f = b.flatten();
    out.insert(out.end(), f.begin(), f.end());
  }
  out.insert(out.end(), grad.scalars.begin(), grad.scalars.end());
  return out;
}

void assign_flat(OutcomeModel& model, std::span<const double> values) {
  std::visit(Overloaded{[&](FcnnModel& m) { m.params.assign_flat(values); },
                        [&](NamModel& m) {
                          std::size_t pos = 0;
                          for (auto& s : m.subnets) {
                            const std::size_t k = s.size();
                            if (pos + k > values.size()) throw ShapeError("flat parameter length mismatch");
                            s.assign_flat(values.subspan(pos, k));
                            pos += k;
                          }
                          if (pos + 1 != values.size()) throw ShapeError("flat parameter length mismatch");
                          m.bias = values[pos];
                        }},
             model);
}

bool all_finite(const OutcomeModel& model) {
  return std::visit(Overloaded{[](const FcnnModel& m) { return m.params.all_finite(); },
                               [](const NamModel& m) {
                                 for (const auto& s : m.subnets) {
                                   if (!s.all_finite()) return false;
                                 }
                                 return std::isfinite(m.bias);
                               }},
                    model);
}

ShapeExtraction extract_shape_functions(const NamModel& model, const Eigen::MatrixXd& train_x, int grid_size) {
  if (grid_size < 2) throw InvalidDataError("shape grids need at least two points");
  if (train_x.cols() != model.p) throw ShapeError("training covariates do not match the model");
  if (train_x.rows() < 1) throw InvalidDataError("shape extraction needs training rows");
  ShapeExtraction result;
  for (int j = 0; j < model.p; ++j) {
    const auto& net = model.subnets[static_cast<std::size_t>(j)];
    const Eigen::MatrixXd train_out = nn::forward_batch(net, Eigen::MatrixXd(train_x.col(j).transpose()));
    const double mean = (train_out.row(1) - train_out.row(0)).mean();
    result.ate_offset += mean;

    ShapeFunctionTable table;
    table.feature = j;
    table.training_mean = mean;
    const double lo = train_x.col(j).minCoeff();
    const double hi = train_x.col(j).maxCoeff();
    if (!(hi > lo)) {
      table.grid.push_back(lo);
      table.delta.push_back(0.0);
    } else {
      Eigen::MatrixXd grid(1, grid_size);
      for (int k = 0; k < grid_size; ++k) {
        grid(0, k) = k + 1 == grid_size ? hi : lo + (hi - lo) * k / (grid_size - 1);
      }
      const Eigen::MatrixXd out = nn::forward_batch(net, grid);
      for (int k = 0; k < grid_size; ++k) {
        table.grid.push_back(grid(0, k));
        table.delta.push_back(out(1, k) - out(0, k) - mean);
      }
    }
    result.tables.push_back(std::move(table));
  }
  return result;
}

}  // namespace energyate::models
