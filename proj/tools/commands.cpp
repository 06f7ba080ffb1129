#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "energyate/data.hpp"
#include "energyate/energy.hpp"
#include "energyate/error.hpp"
#include "energyate/estimators.hpp"
#include "energyate/models.hpp"
#include "energyate/seed.hpp"
#include "energyate/serialize.hpp"
#include "energyate/training.hpp"
#include "energyate/verify.hpp"
#include "manifest.hpp"

namespace energyate::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path output_dir(const GlobalOptions& g) {
  fs::path dir(g.out);
  fs::create_directories(dir);
  return dir;
}

template <class Writer>
fs::path write_file(const fs::path& path, RunManifest& manifest, Writer&& writer) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  writer(out);
  out.flush();
  if (!out) throw Error("failed writing " + path.string());
  manifest.add_output(path);
  return path;
}

fs::path write_json(const fs::path& path, RunManifest& manifest, const json& j) {
  return write_file(path, manifest, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
}

// Layout for a CSV: explicit flag, else the p recorded in a simulate sidecar,
// else the IHDP default.
data::ColumnLayout resolve_layout(const std::string& csv, const std::string& flag) {
  if (!flag.empty()) return data::ColumnLayout::parse(flag);
  fs::path sidecar = fs::path(csv);
  sidecar.replace_extension(".json");
  if (fs::exists(sidecar)) {
    std::ifstream in(sidecar);
    try {
      const json meta = json::parse(in);
      if (meta.contains("p") && meta.contains("provenance")) {
        const int p = meta.at("p").get<int>();
        data::ColumnLayout layout;
        layout.covariate_end = layout.covariate_begin + p;
        layout.expected_columns = layout.covariate_end;
        return layout;
      }
    } catch (const json::exception&) {
      // Not a sidecar of ours; fall back to the default layout.
    }
  }
  return {};
}

data::Dataset load_data(const std::string& csv, const std::string& layout, RunManifest& manifest) {
  manifest.add_input(csv);
  return data::load_ihdp_csv(csv, resolve_layout(csv, layout));
}

json dataset_summary(const data::Dataset& d) { return json::parse(serialize::dataset_metadata_json(d)); }

json components_json(const training::ObjectiveComponents& c) {
  return {{"total", c.total}, {"mse", c.mse}, {"energy", c.energy}, {"gamma", c.gamma}};
}

json solver_json(const energy::SolveResult& s) {
  return {{"uniform_objective", s.uniform_objective},
          {"objective", s.objective},
          {"uniform_sqrt_sum", s.uniform_sqrt_sum},
          {"sqrt_sum", s.sqrt_sum},
          {"iterations", s.iterations},
          {"converged", s.converged},
          {"warning", s.warning}};
}

json check_json(const verify::CheckResult& c, const std::string& model) {
  return {{"check", c.check}, {"model", model}, {"pass", c.pass},   {"lhs", c.lhs},     {"rhs", c.rhs},
          {"se", c.se},       {"slack", c.slack}, {"threshold_se", c.threshold_se}, {"draws", c.draws},
          {"seed", c.seed}};
}

training::ObjectiveConfig make_config(const FitOptions& o, std::uint64_t seed) {
  training::ObjectiveConfig cfg;
  cfg.alpha = o.alpha;
  cfg.beta = o.beta;
  if (o.weighted_mse == "on") cfg.weighted_mse = true;
  if (o.weighted_mse == "off") cfg.weighted_mse = false;
  cfg.use_weights = !o.no_weights;
  cfg.epochs = o.epochs;
  cfg.learning_rate = o.learning_rate;
  cfg.momentum = o.momentum;
  cfg.batch_size = o.batch_size;
  cfg.patience = o.patience;
  cfg.seed = seed;
  cfg.kind = models::model_kind_from_string(o.model);
  cfg.fcnn_hidden = o.hidden;
  cfg.nam_trunk = o.trunk;
  cfg.solver.seed = seed;
  return cfg;
}

}  // namespace

int cmd_simulate(const GlobalOptions& g, const SimulateOptions& o, const json& config, std::ostream& out) {
  RunManifest manifest("simulate", g.seed);
  manifest.set_config(config);
  const fs::path dir = output_dir(g);
  const verify::OracleDgp dgp = verify::dgp_by_name(o.dgp, o.p);
  const data::Dataset d = data::simulate(dgp, o.n, derive_seed(g.seed, "simulate"));
  write_file(dir / "data.csv", manifest, [&](std::ostream& s) { data::write_ihdp_csv(d, s); });
  write_file(dir / "data.json", manifest,
             [&](std::ostream& s) { s << serialize::dataset_metadata_json(d) << '\n'; });
  manifest.summary() = dataset_summary(d);
  manifest.write(dir, "ok");
  out << "simulated n=" << d.n() << " p=" << d.p() << " n1=" << d.n_treated() << " tau_true="
      << serialize::format_double(d.tau_true.value_or(std::nan(""))) << " -> " << (dir / "data.csv").string() << '\n';
  return 0;
}

int cmd_weights(const GlobalOptions& g, const WeightsOptions& o, const json& config, std::ostream& out) {
  RunManifest manifest("weights", g.seed);
  manifest.set_config(config);
  const fs::path dir = output_dir(g);
  const data::Dataset d = load_data(o.data, o.layout, manifest);
  data::validate(d, true);
  const Eigen::MatrixXd xs = data::Standardizer::fit(d.x).apply(d.x);
  energy::SolverConfig solver;
  solver.max_iterations = o.max_iterations;
  solver.tolerance = o.tolerance;
  solver.seed = derive_seed(g.seed, "weights");
  const energy::SolveResult r = energy::solve_balancing_weights(xs, d.a, solver);

  write_file(dir / "weights.csv", manifest, [&](std::ostream& s) { serialize::write_weights_csv(r.weights, s); });
  write_file(dir / "solver_trace.csv", manifest,
             [&](std::ostream& s) { serialize::write_solver_trace_csv(r.trace, s); });
  json summary = solver_json(r);
  const double improvement =
      r.uniform_sqrt_sum > 0.0 ? 1.0 - r.sqrt_sum / r.uniform_sqrt_sum : 0.0;
  summary["improvement"] = improvement;
  summary["n"] = d.n();
  summary["n1"] = d.n_treated();
  summary["n0"] = d.n_control();
  if (improvement < 0.01) summary["note"] = "near-zero improvement: arms already balanced under uniform weights";
  write_json(dir / "weights.json", manifest, summary);
  manifest.summary() = summary;
  manifest.write(dir, "ok");
  out << "sqrt-sum objective " << serialize::format_double(r.sqrt_sum) << " (uniform "
      << serialize::format_double(r.uniform_sqrt_sum) << ")" << (r.warning ? " [solver did not converge]" : "")
      << '\n';
  return 0;
}

int cmd_fit(const GlobalOptions& g, const FitOptions& o, const json& config, std::ostream& out) {
  RunManifest manifest("fit", g.seed);
  manifest.set_config(config);
  const fs::path dir = output_dir(g);

  data::Dataset d;
  if (o.data.empty()) {
    d = data::simulate(verify::default_dgp(), o.n, derive_seed(g.seed, "simulate"));
  } else {
    d = load_data(o.data, o.layout, manifest);
  }
  data::validate(d, true);

  data::Dataset train = d;
  data::Dataset validation;
  std::vector<Eigen::Index> train_index;
  json split_info;
  if (o.no_split) {
    train_index.resize(static_cast<std::size_t>(d.n()));
    for (Eigen::Index i = 0; i < d.n(); ++i) train_index[static_cast<std::size_t>(i)] = i;
    split_info = {{"mode", "none"}, {"train", d.n()}, {"test", 0}, {"validation", 0}};
  } else {
    data::SplitSpec spec;
    spec.seed = derive_seed(g.seed, "split");
    data::Split s = data::split(d, spec);
    train = std::move(s.train);
    validation = std::move(s.validation);
    train_index = s.train_index;
    split_info = {{"mode", "thirds"},
                  {"train", s.train_index.size()},
                  {"test", s.test_index.size()},
                  {"validation", s.validation_index.size()}};
  }

  const training::ObjectiveConfig cfg = make_config(o, derive_seed(g.seed, "fit"));
  const training::FitResult f = training::fit(train, cfg, validation.n() > 0 ? &validation : nullptr);
  const Eigen::MatrixXd xs = f.standardizer.apply(train.x);
  const estimators::AteReport report =
      estimators::make_report(f.model, xs, train.a, train.y, f.weights, f.epsilon, train.tau_true);

  json trace = json::array();
  for (const auto& r : f.trace) {
    json row = components_json(r.components);
    row["epoch"] = r.epoch;
    row["validation_mse"] = r.validation_mse ? json(*r.validation_mse) : json(nullptr);
    trace.push_back(std::move(row));
  }
  json result;
  result["config"] = config;
  result["data"] = dataset_summary(d);
  result["split"] = split_info;
  result["solver"] = solver_json(f.solver);
  result["epsilon"] = f.epsilon;
  result["best_epoch"] = f.best_epoch;
  result["early_stopped"] = f.early_stopped;
  result["final_components"] = components_json(f.final_components);
  result["ate"] = json::parse(serialize::ate_report_json(report));
  result["trace"] = std::move(trace);

  serialize::SavedModel saved{f.model, f.standardizer, f.epsilon, train_index, cfg.seed};
  write_json(dir / "fit.json", manifest, result);
  write_file(dir / "model.json", manifest, [&](std::ostream& s) { s << serialize::to_json(saved) << '\n'; });
  write_file(dir / "ate.json", manifest, [&](std::ostream& s) { s << serialize::ate_report_json(report) << '\n'; });
  write_file(dir / "ate.csv", manifest, [&](std::ostream& s) { serialize::write_ate_csv(report, s); });
  write_file(dir / "weights.csv", manifest, [&](std::ostream& s) { serialize::write_weights_csv(f.weights, s); });
  write_file(dir / "solver_trace.csv", manifest,
             [&](std::ostream& s) { serialize::write_solver_trace_csv(f.solver.trace, s); });
  write_file(dir / "loss_trace.csv", manifest,
             [&](std::ostream& s) { serialize::write_loss_trace_csv(f.trace, s); });
  manifest.summary() = result["ate"];
  manifest.write(dir, "ok");
  out << "tau_plugin=" << serialize::format_double(report.tau_plugin)
      << " tau_weighted=" << serialize::format_double(report.tau_weighted)
      << " tau_wreg=" << serialize::format_double(report.tau_wreg)
      << " ee_residual=" << serialize::format_double(report.ee_residual) << '\n';
  return 0;
}

int cmd_shapes(const GlobalOptions& g, const ShapesOptions& o, const json& config, std::ostream& out) {
  RunManifest manifest("shapes", g.seed);
  manifest.set_config(config);
  const fs::path dir = output_dir(g);

  manifest.add_input(o.model_file);
  std::ifstream in(o.model_file);
  if (!in) throw Error("cannot read " + o.model_file);
  std::stringstream buf;
  buf << in.rdbuf();
  const serialize::SavedModel saved = serialize::saved_model_from_json(buf.str());
  const auto* nam = std::get_if<models::NamModel>(&saved.model);
  if (nam == nullptr) throw UnsupportedModelError("shape functions need a NAM model; got fcnn");

  const data::Dataset d = load_data(o.data, o.layout, manifest);
  if (d.p() != nam->p) {
    throw InvalidDataError("data has " + std::to_string(d.p()) + " covariates, model expects " +
                           std::to_string(nam->p));
  }
  std::vector<Eigen::Index> rows = saved.train_index;
  if (rows.empty()) {
    for (Eigen::Index i = 0; i < d.n(); ++i) rows.push_back(i);
  }
  for (Eigen::Index i : rows) {
    if (i < 0 || i >= d.n()) throw InvalidDataError("model train index " + std::to_string(i) + " outside the data");
  }
  const data::Dataset train = d.subset(rows);
  const Eigen::MatrixXd xs = saved.standardizer.apply(train.x);
  models::ShapeExtraction ex = models::extract_shape_functions(*nam, xs, o.grid);

  // Report grids in raw covariate units.
  for (auto& t : ex.tables) {
    const double mean = saved.standardizer.mean()(t.feature);
    const double sd = saved.standardizer.sd()(t.feature);
    for (double& x : t.grid) x = sd >= 1e-12 ? mean + sd * x : mean;
  }

  json features = json::array();
  if (o.long_format) {
    write_file(dir / "shapes.csv", manifest, [&](std::ostream& s) {
      s << "feature,x,delta_q\n";
      for (const auto& t : ex.tables) {
        std::ostringstream one;
        serialize::write_shape_csv(t, one);
        const std::string text = one.str();
        s << text.substr(text.find('\n') + 1);
      }
    });
  }
  for (const auto& t : ex.tables) {
    json f = {{"feature", t.feature + 1}, {"training_mean", t.training_mean}, {"points", t.grid.size()}};
    if (!o.long_format) {
      const fs::path path = dir / ("shape_" + std::to_string(t.feature + 1) + ".csv");
      write_file(path, manifest, [&](std::ostream& s) { serialize::write_shape_csv(t, s); });
      f["file"] = path.filename().string();
    }
    features.push_back(std::move(f));
  }
  const json summary = {{"ate_offset", ex.ate_offset}, {"features", features}};
  write_json(dir / "shapes.json", manifest, summary);
  manifest.summary() = {{"ate_offset", ex.ate_offset}, {"features", ex.tables.size()}};
  manifest.write(dir, "ok");
  out << "wrote " << ex.tables.size() << " shape tables, ate_offset=" << serialize::format_double(ex.ate_offset)
      << '\n';
  return 0;
}

namespace {

struct BenchTask {
  std::size_t replicate = 0;
  std::size_t config = 0;
};

struct Replicate {
  std::string name;
  data::Dataset estimation;  // the rows the ATE is estimated on
  data::Dataset validation;
};

training::ObjectiveConfig bench_config(const std::string& name, int epochs, std::uint64_t seed) {
  FitOptions o;
  o.model = name.rfind("nam", 0) == 0 ? "nam" : "fcnn";
  o.beta = name.find("noreg") != std::string::npos ? 0.0 : 1.0;
  o.epochs = epochs;
  return make_config(o, seed);
}

}  // namespace

int cmd_benchmark(const GlobalOptions& g, const BenchmarkOptions& o, const json& config, std::ostream& out) {
  RunManifest manifest("benchmark", g.seed);
  manifest.set_config(config);
  const fs::path dir = output_dir(g);
  if (o.configs.empty()) throw UsageError("--configs needs at least one configuration");

  const bool ihdp = !o.ihdp_dir.empty();
  const bool use_split = o.split == "thirds" || (o.split == "auto" && ihdp);

  std::vector<data::Dataset> raw;
  std::vector<std::string> names;
  if (ihdp) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(o.ihdp_dir)) {
      if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw InvalidDataError("no .csv files in " + o.ihdp_dir);
    if (files.size() > static_cast<std::size_t>(o.replicates)) files.resize(static_cast<std::size_t>(o.replicates));
    for (const auto& f : files) {
      raw.push_back(load_data(f.string(), o.layout, manifest));
      names.push_back(f.filename().string());
    }
  } else {
    const verify::OracleDgp dgp = verify::dgp_by_name(o.dgp);
    for (int r = 0; r < o.replicates; ++r) {
      raw.push_back(data::simulate(dgp, o.n, derive_seed(g.seed, "benchmark:data:" + std::to_string(r))));
      names.push_back("sim_" + std::to_string(r));
    }
  }

  std::vector<Replicate> reps;
  for (std::size_t r = 0; r < raw.size(); ++r) {
    data::validate(raw[r], true);
    Replicate rep;
    rep.name = names[r];
    if (use_split) {
      data::SplitSpec spec;
      spec.seed = derive_seed(g.seed, "benchmark:split:" + std::to_string(r));
      data::Split s = data::split(raw[r], spec);
      rep.estimation = std::move(s.train);
      rep.validation = std::move(s.validation);
    } else {
      rep.estimation = std::move(raw[r]);
    }
    if (!rep.estimation.tau_true) throw InvalidDataError(rep.name + ": no true ATE (mu0/mu1 columns) available");
    reps.push_back(std::move(rep));
  }

  std::vector<BenchTask> tasks;
  for (std::size_t r = 0; r < reps.size(); ++r) {
    for (std::size_t c = 0; c < o.configs.size(); ++c) tasks.push_back({r, c});
  }
  std::vector<double> tau_hat(tasks.size(), 0.0);
  std::vector<std::exception_ptr> failures(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < tasks.size(); k = next++) {
      try {
        const auto& t = tasks[k];
        const auto& rep = reps[t.replicate];
        const training::ObjectiveConfig cfg = bench_config(
            o.configs[t.config], o.epochs,
            derive_seed(g.seed, "benchmark:fit:" + std::to_string(t.replicate) + ":" + o.configs[t.config]));
        const training::FitResult f =
            training::fit(rep.estimation, cfg, rep.validation.n() > 0 ? &rep.validation : nullptr);
        const Eigen::MatrixXd xs = f.standardizer.apply(rep.estimation.x);
        tau_hat[k] = estimators::ate_wreg(f.model, xs, f.weights, rep.estimation.a, f.epsilon);
      } catch (...) {
        failures[k] = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(g.threads, static_cast<int>(tasks.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : failures) {
    if (e) std::rethrow_exception(e);
  }

  // Merge by replicate index.
  const std::size_t nc = o.configs.size();
  const std::size_t nr = reps.size();
  std::vector<std::vector<double>> errors(nc + 1);
  std::ostringstream per_rep;
  per_rep << "replicate,config,tau_hat,tau_true,abs_err\n";
  for (std::size_t r = 0; r < nr; ++r) {
    const double truth = *reps[r].estimation.tau_true;
    for (std::size_t c = 0; c <= nc; ++c) {
      const double est = c < nc ? tau_hat[r * nc + c]
                                : estimators::difference_in_means(reps[r].estimation.y, reps[r].estimation.a);
      const double e = estimators::abs_error(est, truth);
      errors[c].push_back(e);
      per_rep << reps[r].name << ',' << (c < nc ? o.configs[c] : std::string("diff_in_means")) << ','
              << serialize::format_double(est) << ',' << serialize::format_double(truth) << ','
              << serialize::format_double(e) << '\n';
    }
  }
  json table = json::array();
  std::ostringstream metrics;
  metrics << "config,mean_abs_err,se\n";
  for (std::size_t c = 0; c <= nc; ++c) {
    const auto& v = errors[c];
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double e : v) mean += e;
    mean /= n;
    double ss = 0.0;
    for (double e : v) ss += (e - mean) * (e - mean);
    const double se = v.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
    const std::string name = c < nc ? o.configs[c] : "diff_in_means";
    metrics << name << ',' << serialize::format_double(mean) << ',' << serialize::format_double(se) << '\n';
    table.push_back({{"config", name}, {"mean_abs_err", mean}, {"se", se}});
  }
  write_file(dir / "metrics.csv", manifest, [&](std::ostream& s) { s << metrics.str(); });
  write_file(dir / "replicates.csv", manifest, [&](std::ostream& s) { s << per_rep.str(); });
  manifest.summary() = {{"replicates", nr}, {"split", use_split ? "thirds" : "none"}, {"metrics", table}};
  manifest.write(dir, "ok");
  out << metrics.str();
  return 0;
}

int cmd_verify(const GlobalOptions& g, const VerifyOptions& o, const json& config, std::ostream& out) {
  RunManifest manifest("verify", g.seed);
  manifest.set_config(config);
  const fs::path dir = output_dir(g);
  if (o.draws < verify::kMinDraws) {
    throw UsageError("--draws must be at least " + std::to_string(verify::kMinDraws));
  }

  const verify::OracleDgp dgp = verify::dgp_by_name(o.dgp);
  std::vector<std::pair<std::string, verify::OutcomeFunction>> candidates;
  candidates.emplace_back("oracle", verify::biased_oracle(dgp, 0.0, 0.0));
  candidates.emplace_back("biased_oracle", verify::biased_oracle(dgp, 0.5, -0.25));
  candidates.emplace_back("random_linear", verify::random_linear_model(derive_seed(g.seed, "verify:linear"), dgp.p));
  std::optional<serialize::SavedModel> saved;
  if (!o.model_file.empty()) {
    manifest.add_input(o.model_file);
    std::ifstream in(o.model_file);
    if (!in) throw Error("cannot read " + o.model_file);
    std::stringstream buf;
    buf << in.rdbuf();
    saved = serialize::saved_model_from_json(buf.str());
    if (models::input_dim(saved->model) != dgp.p) {
      throw InvalidDataError("model expects " + std::to_string(models::input_dim(saved->model)) +
                             " covariates, DGP has " + std::to_string(dgp.p));
    }
    const serialize::SavedModel& m = *saved;
    candidates.emplace_back("fitted", [&m](const Eigen::VectorXd& x, int a) {
      const Eigen::VectorXd z = m.standardizer.apply_row(x);
      return models::predict(m.model, std::span<const double>(z.data(), static_cast<std::size_t>(z.size())), a);
    });
  }

  bool all_pass = true;
  json checks = json::array();
  json losses = json::array();
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const auto& [name, model] = candidates[k];
    const std::uint64_t s = derive_seed(g.seed, "verify:model:" + name);
    const verify::LossEstimates l = verify::mc_losses(dgp, model, o.draws, s);
    losses.push_back({{"model", name},
                      {"r_f", l.r_f.value},
                      {"r_f_se", l.r_f.se},
                      {"r_cf", l.r_cf.value},
                      {"r_cf_se", l.r_cf.se},
                      {"r_ate", l.r_ate.value},
                      {"r_ate_se", l.r_ate.se},
                      {"sigma2_y", l.sigma2_y},
                      {"draws", l.draws},
                      {"seed", l.seed}});
    const verify::Claim1Report c1 = verify::check_claim1(dgp, model, o.draws, s);
    const verify::CheckResult c2 = verify::check_claim2(dgp, model, o.draws, s);
    checks.push_back(check_json(c1.factual, name));
    checks.push_back(check_json(c1.counterfactual, name));
    checks.push_back(check_json(c2, name));
    all_pass = all_pass && c1.pass() && c2.pass;
  }

  std::vector<std::uint64_t> seeds;
  for (int k = 0; k < o.weight_seeds; ++k) seeds.push_back(derive_seed(g.seed, "verify:weights:" + std::to_string(k)));
  const verify::WeightLimitReport wl =
      verify::check_weight_limit(verify::dgp_by_name(o.weight_dgp), o.n_grid, seeds);
  all_pass = all_pass && wl.pass;
  const json weight_limit = {{"check", "weight_limit"},
                             {"pass", wl.pass},
                             {"dgp", o.weight_dgp},
                             {"n_grid", wl.n_grid},
                             {"median_treated", wl.median_treated},
                             {"median_control", wl.median_control},
                             {"solver_warning", wl.solver_warning},
                             {"note", wl.note},
                             {"seeds", wl.seeds}};

  json sweep = nullptr;
  if (o.pairs > 0) {
    const verify::SweepSummary sw = verify::sweep_claims(o.pairs, o.draws, derive_seed(g.seed, "verify:sweep"));
    all_pass = all_pass && sw.pass;
    json rows = json::array();
    for (std::size_t k = 0; k < sw.claim1.size(); ++k) {
      const std::string pair = "pair_" + std::to_string(k);
      rows.push_back(check_json(sw.claim1[k].factual, pair));
      rows.push_back(check_json(sw.claim1[k].counterfactual, pair));
      rows.push_back(check_json(sw.claim2[k], pair));
    }
    sweep = {{"check", "claims_sweep"},
             {"pass", sw.pass},
             {"pairs", sw.pairs},
             {"failures_at_3se", sw.failures_at_primary},
             {"failures_at_5se", sw.failures_at_fallback},
             {"checks", rows}};
  }

  json report;
  report["config"] = config;
  report["pass"] = all_pass;
  report["dgp"] = dgp.name;
  report["draws"] = o.draws;
  report["seed"] = g.seed;
  report["checks"] = checks;
  report["losses"] = losses;
  report["weight_limit"] = weight_limit;
  report["sweep"] = sweep;
  write_json(dir / "verify.json", manifest, report);
  manifest.summary() = {{"pass", all_pass}};
  manifest.write(dir, all_pass ? "ok" : "checks_failed");
  for (const auto& c : checks) {
    out << (c["pass"].get<bool>() ? "PASS " : "FAIL ") << c["check"].get<std::string>() << " ["
        << c["model"].get<std::string>() << "]\n";
  }
  out << (wl.pass ? "PASS " : "FAIL ") << "weight_limit\n";
  if (!sweep.is_null()) out << (sweep["pass"].get<bool>() ? "PASS " : "FAIL ") << "claims_sweep\n";
  return all_pass ? 0 : 1;
}

}  // namespace energyate::cli
