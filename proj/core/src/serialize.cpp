#include "energyate/serialize.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "energyate/error.hpp"
#include "json.hpp"

namespace energyate::serialize {

namespace {

using nlohmann::json;

json stack_to_json(const nn::LayerStack& s) {
  return json{{"dims", s.dims()}, {"values", s.flatten()}};
}

nn::ParameterSet stack_from_json(const json& j) {
  const auto dims = j.at("dims").get<std::vector<int>>();
  nn::ParameterSet params = nn::init_params(dims, 0);
  const auto values = j.at("values").get<std::vector<double>>();
  if (values.size() != params.size()) throw ParseError("layer value count does not match dims", 0);
  params.assign_flat(values);
  return params;
}

json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string to_json(const SavedModel& m) {
  json j;
  j["format_version"] = kModelFormatVersion;
  j["kind"] = models::to_string(models::kind_of(m.model));
  j["p"] = models::input_dim(m.model);
  if (const auto* f = std::get_if<models::FcnnModel>(&m.model)) {
    j["layers"] = stack_to_json(f->params);
  } else {
    const auto& nam = std::get<models::NamModel>(m.model);
    json subnets = json::array();
    for (const auto& s : nam.subnets) subnets.push_back(stack_to_json(s));
    j["subnets"] = std::move(subnets);
    j["bias"] = nam.bias;
  }
  j["epsilon"] = m.epsilon;
  j["standardizer"] = {{"mean", vector_to_json(m.standardizer.mean())},
                       {"sd", vector_to_json(m.standardizer.sd())}};
  std::vector<std::int64_t> idx(m.train_index.begin(), m.train_index.end());
  j["train_index"] = idx;
  j["seed"] = m.seed;
  return j.dump(2);
}

SavedModel saved_model_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    const int version = j.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      throw ParseError("unsupported model format version " + std::to_string(version), 0);
    }
    SavedModel m;
    const int p = j.at("p").get<int>();
    const auto kind = models::model_kind_from_string(j.at("kind").get<std::string>());
    if (kind == models::ModelKind::fcnn) {
      models::FcnnModel f;
      f.params = stack_from_json(j.at("layers"));
      f.p = p;
      if (f.params.in_dim() != p + 1 || f.params.out_dim() != 1) throw ParseError("fcnn layer dims do not match p", 0);
      m.model = std::move(f);
    } else {
      models::NamModel nam;
      for (const auto& s : j.at("subnets")) nam.subnets.push_back(stack_from_json(s));
      nam.bias = j.at("bias").get<double>();
      nam.p = p;
      if (static_cast<int>(nam.subnets.size()) != p) throw ParseError("nam subnet count does not match p", 0);
      m.model = std::move(nam);
    }
    m.epsilon = j.at("epsilon").get<double>();
    m.standardizer = data::Standardizer(vector_from_json(j.at("standardizer").at("mean")),
                                        vector_from_json(j.at("standardizer").at("sd")));
    for (auto i : j.at("train_index").get<std::vector<std::int64_t>>()) m.train_index.push_back(i);
    m.seed = j.at("seed").get<std::uint64_t>();
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("model file: ") + e.what(), 0);
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(std::string("model file: ") + e.what(), 0);
  }
}

std::string dataset_metadata_json(const data::Dataset& d) {
  json j;
  j["n"] = d.n();
  j["p"] = d.p();
  j["n1"] = d.n_treated();
  j["n0"] = d.n_control();
  j["tau_true"] = d.tau_true ? json(*d.tau_true) : json(nullptr);
  j["provenance"] = d.provenance;
  return j.dump(2);
}

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string optional_csv(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

}  // namespace

std::string ate_report_json(const estimators::AteReport& r) {
  json j;
  j["tau_plugin"] = r.tau_plugin;
  j["tau_weighted"] = r.tau_weighted;
  j["tau_wreg"] = r.tau_wreg;
  j["ee_residual"] = r.ee_residual;
  j["tau_true"] = optional_json(r.tau_true);
  j["abs_err_plugin"] = optional_json(r.abs_err_plugin);
  j["abs_err_weighted"] = optional_json(r.abs_err_weighted);
  j["abs_err_wreg"] = optional_json(r.abs_err_wreg);
  return j.dump(2);
}

void write_ate_csv(const estimators::AteReport& r, std::ostream& out) {
  out << "tau_plugin,tau_weighted,tau_wreg,ee_residual,tau_true,abs_err_plugin,abs_err_weighted,abs_err_wreg\n";
  out << format_double(r.tau_plugin) << ',' << format_double(r.tau_weighted) << ',' << format_double(r.tau_wreg)
      << ',' << format_double(r.ee_residual) << ',' << optional_csv(r.tau_true) << ','
      << optional_csv(r.abs_err_plugin) << ',' << optional_csv(r.abs_err_weighted) << ','
      << optional_csv(r.abs_err_wreg) << '\n';
}

void write_weights_csv(const energy::BalancingWeights& w, std::ostream& out) {
  out << "w\n";
  for (Eigen::Index i = 0; i < w.w.size(); ++i) out << format_double(w.w(i)) << '\n';
}

void write_solver_trace_csv(const std::vector<energy::TracePoint>& trace, std::ostream& out) {
  out << "iter,objective,sqrt_sum\n";
  for (const auto& t : trace) {
    out << t.iteration << ',' << format_double(t.objective) << ',' << format_double(t.sqrt_sum) << '\n';
  }
}

void write_loss_trace_csv(const std::vector<training::EpochRecord>& trace, std::ostream& out) {
  out << "epoch,total,mse,energy,gamma,validation_mse\n";
  for (const auto& r : trace) {
    out << r.epoch << ',' << format_double(r.components.total) << ',' << format_double(r.components.mse) << ','
        << format_double(r.components.energy) << ',' << format_double(r.components.gamma) << ','
        << (r.validation_mse ? format_double(*r.validation_mse) : std::string()) << '\n';
  }
}

void write_shape_csv(const models::ShapeFunctionTable& table, std::ostream& out) {
  out << "feature,x,delta_q\n";
  for (std::size_t k = 0; k < table.grid.size(); ++k) {
    out << table.feature + 1 << ',' << format_double(table.grid[k]) << ',' << format_double(table.delta[k]) << '\n';
  }
}

}  // namespace energyate::serialize
