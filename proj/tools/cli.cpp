#include "cli.hpp"

#include <exception>
#include <functional>
#include <memory>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"
#include "energyate/error.hpp"
#include "energyate/verify.hpp"
#include "json.hpp"
#include "json_config.hpp"
#include "manifest.hpp"

namespace energyate::cli {

namespace {

// Every option of `app` that is not help or config, with its effective value.
nlohmann::json echo_options(const CLI::App* app) {
  nlohmann::json j = nlohmann::json::object();
  for (const CLI::Option* opt : app->get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string name = opt->get_lnames().front();
    if (name == "help" || name == "config") continue;
    if (opt->get_expected_max() == 0) {
      j[name] = opt->count() > 0;
      continue;
    }
    std::vector<std::string> values = opt->count() > 0 ? opt->results() : std::vector<std::string>{};
    if (values.empty() && !opt->get_default_str().empty()) values.push_back(opt->get_default_str());
    if (values.empty()) {
      j[name] = nullptr;
    } else if (values.size() == 1 && opt->get_expected_max() <= 1) {
      j[name] = values.front();
    } else {
      j[name] = values;
    }
  }
  return j;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Energy-distance balancing weights and neural outcome models for ATE estimation",
               "energyate-cli"};
  app.require_subcommand(1);
  app.config_formatter(std::make_shared<JsonConfig>(&app));
  app.set_config("--config", "", "JSON file supplying any flag; command-line flags win");
  app.allow_config_extras(CLI::config_extras_mode::error);

  GlobalOptions g;
  app.add_option("--seed", g.seed, "Root seed; component seeds are derived from it")->capture_default_str();
  app.add_option("--out", g.out, "Output directory")->required();
  app.add_option("--threads", g.threads, "Worker threads for benchmark replicates")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  std::function<int()> action;
  std::function<nlohmann::json()> echo;

  SimulateOptions sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Draw a dataset from an oracle DGP");
  sim_cmd->fallthrough();
  sim_cmd->add_option("--n", sim.n, "Sample size")->capture_default_str();
  sim_cmd->add_option("--dgp", sim.dgp, "default | randomized | shift")
      ->check(CLI::IsMember({"default", "randomized", "shift"}))
      ->capture_default_str();
  sim_cmd->add_option("--p", sim.p, "Covariates for the default and randomized DGPs")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sim_cmd->callback([&] { action = [&] { return cmd_simulate(g, sim, echo(), out); }; });

  WeightsOptions wts;
  auto* wts_cmd = app.add_subcommand("weights", "Solve energy-distance balancing weights");
  wts_cmd->fallthrough();
  wts_cmd->add_option("--data", wts.data, "IHDP-layout CSV")->required();
  wts_cmd->add_option("--layout", wts.layout, "Column map, e.g. treatment=0,y=1,x=5:30,cols=30");
  wts_cmd->add_option("--max-iter", wts.max_iterations, "Solver iteration cap")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  wts_cmd->add_option("--tol", wts.tolerance, "Stop when the objective decrease stays below this")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  wts_cmd->callback([&] { action = [&] { return cmd_weights(g, wts, echo(), out); }; });

  FitOptions fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit an outcome model and report ATE estimates");
  fit_cmd->fallthrough();
  fit_cmd->add_option("--data", fit.data, "IHDP-layout CSV (default: simulate from the default DGP)");
  fit_cmd->add_option("--layout", fit.layout, "Column map for --data");
  fit_cmd->add_option("--n", fit.n, "Sample size when simulating")->capture_default_str();
  fit_cmd->add_option("--model", fit.model, "fcnn | nam")
      ->check(CLI::IsMember({"fcnn", "nam"}))
      ->capture_default_str();
  fit_cmd->add_option("--alpha", fit.alpha, "Energy penalty weight")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  fit_cmd->add_option("--beta", fit.beta, "Weighted regularization weight")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  fit_cmd->add_flag("--no-weights", fit.no_weights, "Use uniform weights instead of solving for w");
  fit_cmd->add_option("--weighted-mse", fit.weighted_mse, "auto | on | off")
      ->check(CLI::IsMember({"auto", "on", "off"}))
      ->capture_default_str();
  fit_cmd->add_option("--epochs", fit.epochs)->check(CLI::PositiveNumber)->capture_default_str();
  fit_cmd->add_option("--lr", fit.learning_rate)->check(CLI::PositiveNumber)->capture_default_str();
  fit_cmd->add_option("--momentum", fit.momentum)->check(CLI::Range(0.0, 0.999999))->capture_default_str();
  fit_cmd->add_option("--batch-size", fit.batch_size, "0 for full batch")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  fit_cmd->add_option("--patience", fit.patience, "Early-stopping patience in epochs")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  fit_cmd->add_flag("--no-split", fit.no_split, "Train and estimate on all rows instead of a 1/3 split");
  fit_cmd->add_option("--hidden", fit.hidden, "FCNN hidden widths")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--trunk", fit.trunk, "NAM trunk widths")->check(CLI::PositiveNumber);
  fit_cmd->callback([&] {
    if (fit.no_weights && fit.beta > 0.0) {
      throw UsageError("--no-weights conflicts with --beta > 0: the regularizer needs balancing weights");
    }
    action = [&] { return cmd_fit(g, fit, echo(), out); };
  });

  ShapesOptions shp;
  auto* shp_cmd = app.add_subcommand("shapes", "Export NAM shape functions");
  shp_cmd->fallthrough();
  shp_cmd->add_option("--model", shp.model_file, "model.json written by fit")->required();
  shp_cmd->add_option("--data", shp.data, "The CSV the model was fitted on")->required();
  shp_cmd->add_option("--layout", shp.layout, "Column map for --data");
  shp_cmd->add_option("--grid", shp.grid, "Grid points per feature")
      ->check(CLI::Range(2, 1000000))
      ->capture_default_str();
  shp_cmd->add_flag("--long", shp.long_format, "One long CSV instead of one file per feature");
  shp_cmd->callback([&] { action = [&] { return cmd_shapes(g, shp, echo(), out); }; });

  BenchmarkOptions bench;
  auto* bench_cmd = app.add_subcommand("benchmark", "Mean absolute ATE error over replicates");
  bench_cmd->fallthrough();
  bench_cmd->add_option("--replicates", bench.replicates, "Replicates (cap on files with --ihdp-dir)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  bench_cmd->add_option("--n", bench.n, "Sample size per simulated replicate")->capture_default_str();
  bench_cmd->add_option("--dgp", bench.dgp, "default | randomized | shift")
      ->check(CLI::IsMember({"default", "randomized", "shift"}))
      ->capture_default_str();
  bench_cmd->add_option("--ihdp-dir", bench.ihdp_dir, "Directory of IHDP replicate CSVs")
      ->check(CLI::ExistingDirectory);
  bench_cmd->add_option("--layout", bench.layout, "Column map for the replicate files");
  bench_cmd->add_option("--configs", bench.configs, "Subset of fcnn_reg fcnn_noreg nam_reg nam_noreg")
      ->check(CLI::IsMember({"fcnn_reg", "fcnn_noreg", "nam_reg", "nam_noreg"}));
  bench_cmd->add_option("--epochs", bench.epochs)->check(CLI::PositiveNumber)->capture_default_str();
  bench_cmd->add_option("--split", bench.split, "auto | none | thirds (auto: none when simulating)")
      ->check(CLI::IsMember({"auto", "none", "thirds"}))
      ->capture_default_str();
  bench_cmd->callback([&] { action = [&] { return cmd_benchmark(g, bench, echo(), out); }; });

  VerifyOptions ver;
  auto* ver_cmd = app.add_subcommand("verify", "Monte-Carlo checks of the loss identities and weight limit");
  ver_cmd->fallthrough();
  ver_cmd->add_option("--draws", ver.draws, "Monte-Carlo draws per estimate")
      ->check(CLI::Range(verify::kMinDraws, 1000000000))
      ->capture_default_str();
  ver_cmd->add_option("--pairs", ver.pairs, "Random model/DGP pairs in the sweep (0 skips it)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  ver_cmd->add_option("--dgp", ver.dgp, "Oracle DGP for the single-model checks")
      ->check(CLI::IsMember({"default", "randomized", "shift"}))
      ->capture_default_str();
  ver_cmd->add_option("--model", ver.model_file, "Also check a fitted model.json against the DGP");
  ver_cmd->add_option("--n-grid", ver.n_grid, "Sample sizes for the weight-limit trend")
      ->check(CLI::PositiveNumber);
  ver_cmd->add_option("--weight-seeds", ver.weight_seeds, "Seeds per grid point")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  ver_cmd->add_option("--weight-dgp", ver.weight_dgp, "DGP for the weight-limit trend")
      ->check(CLI::IsMember({"default", "randomized", "shift"}))
      ->capture_default_str();
  ver_cmd->callback([&] { action = [&] { return cmd_verify(g, ver, echo(), out); }; });

  echo = [&] {
    nlohmann::json j = echo_options(app.get_subcommands().front());
    j["seed"] = g.seed;
    return j;
  };

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    return action();
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    // A failed run still leaves one manifest describing the failure.
    try {
      RunManifest manifest(app.get_subcommands().front()->get_name(), g.seed);
      manifest.set_config(echo());
      manifest.summary() = {{"error", e.what()}};
      manifest.write(g.out, "error");
    } catch (const std::exception& inner) {
      err << "error: could not write the manifest: " << inner.what() << '\n';
    }
    return kExitRuntime;
  }
}

}  // namespace energyate::cli
