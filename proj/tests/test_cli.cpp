#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "doctest.h"
#include "energyate/models.hpp"
#include "energyate/serialize.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using energyate::cli::kExitOk;
using energyate::cli::kExitRuntime;
using energyate::cli::kExitUsage;
using nlohmann::json;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome call(std::vector<std::string> args) {
  args.insert(args.begin(), "energyate-cli");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Outcome o;
  o.code = energyate::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

fs::path fresh(const std::string& name) {
  const fs::path dir = fs::current_path() / "cli_runs" / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

json read_json(const fs::path& path) { return json::parse(slurp(path)); }

std::vector<std::string> csv_lines(const fs::path& path) {
  std::istringstream in(slurp(path));
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  return lines;
}

void check_manifest(const fs::path& dir, const std::string& command, const std::string& status = "ok") {
  const json m = read_json(dir / "manifest.json");
  CHECK(m.at("command") == command);
  CHECK(m.at("status") == status);
  CHECK(m.contains("config"));
  CHECK(m.contains("seed"));
  CHECK(m.at("duration_seconds").get<double>() >= 0.0);
  for (const auto& p : m.at("outputs")) CHECK_MESSAGE(fs::exists(p.get<std::string>()), p.get<std::string>());
  for (const auto& in : m.at("inputs")) CHECK(in.at("fnv1a64").get<std::string>().size() == 16);
}

// Simulated data shared by several cases.
fs::path simulated(const std::string& name, int n, const std::string& dgp = "default") {
  const fs::path dir = fresh(name);
  const Outcome o = call({"simulate", "--n", std::to_string(n), "--dgp", dgp, "--seed", "1", "--out", dir.string()});
  REQUIRE(o.code == kExitOk);
  return dir / "data.csv";
}

}  // namespace

TEST_CASE("simulate writes the dataset, sidecar and manifest") {
  const fs::path dir = fresh("simulate");
  const Outcome o = call({"simulate", "--n", "1000", "--seed", "1", "--out", dir.string()});
  REQUIRE(o.code == kExitOk);
  const json meta = read_json(dir / "data.json");
  CHECK(meta.at("n") == 1000);
  CHECK(meta.at("p") == 10);
  CHECK(meta.at("tau_true").get<double>() == 1.0);
  CHECK(csv_lines(dir / "data.csv").size() == 1000);
  check_manifest(dir, "simulate");
  CHECK(read_json(dir / "manifest.json").at("config").at("n") == "1000");
}

TEST_CASE("usage and runtime errors map to exit codes") {
  CHECK(call({"simulate", "--n", "100"}).code == kExitUsage);
  CHECK(call({"--out", "x"}).code == kExitUsage);
  CHECK(call({"simulate", "--out", "x", "--bogus"}).code == kExitUsage);
  CHECK(call({"simulate", "--out", "x", "--dgp", "acic"}).code == kExitUsage);

  const fs::path dir = fresh("tiny");
  const Outcome tiny = call({"simulate", "--n", "2", "--out", dir.string()});
  CHECK(tiny.code == kExitRuntime);
  CHECK(tiny.err.find("n >= 4") != std::string::npos);
  check_manifest(dir, "simulate", "error");

  CHECK(call({"--help"}).code == kExitOk);
}

TEST_CASE("weights improve on uniform for confounded data") {
  const fs::path data = simulated("weights_data", 300);
  const fs::path dir = fresh("weights");
  const Outcome o = call({"weights", "--data", data.string(), "--out", dir.string()});
  REQUIRE(o.code == kExitOk);
  const json w = read_json(dir / "weights.json");
  CHECK(w.at("sqrt_sum").get<double>() < w.at("uniform_sqrt_sum").get<double>());
  CHECK(csv_lines(dir / "weights.csv").size() == 301);
  CHECK(csv_lines(dir / "solver_trace.csv").front() == "iter,objective,sqrt_sum");
  check_manifest(dir, "weights");
  const json m = read_json(dir / "manifest.json");
  CHECK(m.at("summary").at("sqrt_sum") == w.at("sqrt_sum"));
  CHECK(m.at("inputs").size() == 1);
}

TEST_CASE("weights on balanced data note the small improvement") {
  // Each treated row has an identical control twin.
  const fs::path dir = fresh("balanced");
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "paired.csv");
    for (int i = 0; i < 20; ++i) {
      for (int arm : {1, 0}) f << arm << ",0,0,0,0," << (i % 7) * 0.3 << ',' << (i % 3) - 1.0 << '\n';
    }
  }
  const Outcome o = call({"weights", "--data", (dir / "paired.csv").string(), "--layout", "x=5:7,cols=7", "--out",
                          (dir / "out").string()});
  REQUIRE(o.code == kExitOk);
  const json w = read_json(dir / "out" / "weights.json");
  CHECK(w.at("uniform_sqrt_sum").get<double>() <= 1e-6);
  CHECK(w.contains("note"));
}

TEST_CASE("weights reject a malformed file") {
  const fs::path dir = fresh("badcsv");
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "bad.csv");
    f << "1,2,3,4,5,6,7\n0,1,x,1,1,1,1\n";
  }
  const Outcome o = call({"weights", "--data", (dir / "bad.csv").string(), "--layout", "x=5:7,cols=7", "--out",
                          (dir / "out").string()});
  CHECK(o.code == kExitRuntime);
  CHECK(o.err.find("line 2") != std::string::npos);
}

TEST_CASE("fit reports all estimates and the shapes of a nam") {
  const fs::path data = simulated("fit_data", 240);
  const fs::path dir = fresh("fit_nam");
  const Outcome o = call({"fit", "--data", data.string(), "--model", "nam", "--alpha", "0.05", "--beta", "1",
                          "--seed", "3", "--epochs", "60", "--out", dir.string()});
  REQUIRE(o.code == kExitOk);
  const json ate = read_json(dir / "ate.json");
  for (const char* key : {"tau_plugin", "tau_weighted", "tau_wreg", "ee_residual", "tau_true"}) {
    CHECK_MESSAGE(ate.contains(key), key);
  }
  const json fit = read_json(dir / "fit.json");
  CHECK(fit.at("split").at("mode") == "thirds");
  CHECK(fit.at("split").at("train") == 80);
  CHECK(csv_lines(dir / "loss_trace.csv").front() == "epoch,total,mse,energy,gamma,validation_mse");
  CHECK(csv_lines(dir / "ate.csv").size() == 2);
  check_manifest(dir, "fit");
  CHECK(read_json(dir / "manifest.json").at("inputs").size() == 1);

  const fs::path shapes = fresh("shapes");
  const Outcome s = call({"shapes", "--model", (dir / "model.json").string(), "--data", data.string(), "--grid",
                          "5", "--out", shapes.string()});
  REQUIRE(s.code == kExitOk);
  for (int j = 1; j <= 10; ++j) {
    const auto lines = csv_lines(shapes / ("shape_" + std::to_string(j) + ".csv"));
    CHECK(lines.size() == 6);
    CHECK(lines.front() == "feature,x,delta_q");
    CHECK(lines[1].rfind(std::to_string(j) + ",", 0) == 0);
  }
  check_manifest(shapes, "shapes");

  // Re-check centring from the saved model on the recorded training rows.
  const auto saved = energyate::serialize::saved_model_from_json(slurp(dir / "model.json"));
  const auto& nam = std::get<energyate::models::NamModel>(saved.model);
  CHECK(saved.train_index.size() == 80);
  const json sj = read_json(shapes / "shapes.json");
  double sum_means = 0.0;
  for (const auto& f : sj.at("features")) sum_means += f.at("training_mean").get<double>();
  CHECK(sum_means == doctest::Approx(sj.at("ate_offset").get<double>()).epsilon(1e-12));
  CHECK(nam.p == 10);

  const fs::path long_dir = fresh("shapes_long");
  REQUIRE(call({"shapes", "--model", (dir / "model.json").string(), "--data", data.string(), "--grid", "4", "--long",
                "--out", long_dir.string()})
              .code == kExitOk);
  CHECK(csv_lines(long_dir / "shapes.csv").size() == 41);
  CHECK_FALSE(fs::exists(long_dir / "shape_1.csv"));

  CHECK(call({"shapes", "--model", (dir / "model.json").string(), "--data", data.string(), "--grid", "1", "--out",
              fresh("shapes_bad").string()})
            .code == kExitUsage);
}

TEST_CASE("fit without regularisation and flag conflicts") {
  const fs::path dir = fresh("fit_plain");
  const Outcome o = call({"fit", "--model", "fcnn", "--alpha", "0", "--beta", "0", "--n", "150", "--epochs", "30",
                          "--hidden", "16", "16", "--no-split", "--out", dir.string()});
  REQUIRE(o.code == kExitOk);
  const json fit = read_json(dir / "fit.json");
  const json& c = fit.at("final_components");
  CHECK(c.at("gamma").get<double>() == 0.0);
  CHECK(c.at("total").get<double>() == c.at("mse").get<double>());
  CHECK(fit.at("split").at("mode") == "none");
  CHECK(fit.at("epsilon").get<double>() == 0.0);
  const json ate = read_json(dir / "ate.json");
  CHECK(ate.at("tau_wreg") == ate.at("tau_plugin"));

  CHECK(call({"fit", "--beta", "1", "--no-weights", "--out", fresh("conflict").string()}).code == kExitUsage);

  const fs::path shapes = fresh("shapes_fcnn");
  const fs::path data = simulated("fcnn_data", 60);
  const fs::path fcnn = fresh("fit_fcnn");
  REQUIRE(call({"fit", "--data", data.string(), "--epochs", "5", "--hidden", "8", "--no-split", "--out",
                fcnn.string()})
              .code == kExitOk);
  const Outcome s =
      call({"shapes", "--model", (fcnn / "model.json").string(), "--data", data.string(), "--out", shapes.string()});
  CHECK(s.code == kExitRuntime);
  CHECK(s.err.find("NAM") != std::string::npos);
}

TEST_CASE("fit reruns are byte-identical") {
  const fs::path a = fresh("rerun_a"), b = fresh("rerun_b");
  const std::vector<std::string> common{"fit", "--model", "nam", "--n", "120", "--epochs", "20", "--trunk", "8",
                                        "--seed", "5", "--out"};
  auto with = [&](const fs::path& dir) {
    auto args = common;
    args.push_back(dir.string());
    return call(args);
  };
  REQUIRE(with(a).code == kExitOk);
  REQUIRE(with(b).code == kExitOk);
  for (const char* f : {"fit.json", "model.json", "ate.json", "ate.csv", "weights.csv", "loss_trace.csv"}) {
    CHECK_MESSAGE(slurp(a / f) == slurp(b / f), f);
  }
}

TEST_CASE("benchmark writes the metrics table") {
  const fs::path dir = fresh("benchmark");
  const Outcome o = call({"benchmark", "--replicates", "2", "--n", "80", "--epochs", "10", "--configs", "fcnn_noreg",
                          "nam_reg", "--threads", "2", "--out", dir.string()});
  REQUIRE(o.code == kExitOk);
  const auto lines = csv_lines(dir / "metrics.csv");
  REQUIRE(lines.size() == 4);
  CHECK(lines[0] == "config,mean_abs_err,se");
  CHECK(lines[1].rfind("fcnn_noreg,", 0) == 0);
  CHECK(lines[2].rfind("nam_reg,", 0) == 0);
  CHECK(lines[3].rfind("diff_in_means,", 0) == 0);
  check_manifest(dir, "benchmark");

  CHECK(call({"benchmark", "--replicates", "0", "--out", fresh("bench0").string()}).code == kExitUsage);
  CHECK(call({"benchmark", "--configs", "tarnet", "--out", fresh("bench1").string()}).code == kExitUsage);
}

TEST_CASE("benchmark over a replicate directory") {
  const fs::path dir = fresh("bench_dir");
  fs::create_directories(dir / "reps");
  for (int r = 0; r < 2; ++r) {
    const fs::path sim = fresh("bench_rep" + std::to_string(r));
    REQUIRE(call({"simulate", "--n", "90", "--p", "25", "--seed", std::to_string(r + 1), "--out", sim.string()})
                .code == kExitOk);
    fs::copy_file(sim / "data.csv", dir / "reps" / ("rep" + std::to_string(r) + ".csv"));
  }
  const Outcome o = call({"benchmark", "--ihdp-dir", (dir / "reps").string(), "--epochs", "5", "--configs",
                          "nam_noreg", "--out", (dir / "out").string()});
  REQUIRE(o.code == kExitOk);
  CHECK(csv_lines(dir / "out" / "metrics.csv").size() == 3);
  CHECK(csv_lines(dir / "out" / "replicates.csv").size() >= 3);
  CHECK(read_json(dir / "out" / "manifest.json").at("inputs").size() == 2);
}

TEST_CASE("verify default run passes and reruns identically") {
  CHECK(call({"verify", "--draws", "10", "--out", fresh("verify_bad").string()}).code == kExitUsage);

  const fs::path a = fresh("verify_a"), b = fresh("verify_b");
  const Outcome o = call({"verify", "--out", a.string()});
  CHECK(o.code == kExitOk);
  const json report = read_json(a / "verify.json");
  CHECK(report.contains("checks"));
  check_manifest(a, "verify");
  REQUIRE(call({"verify", "--out", b.string()}).code == kExitOk);
  CHECK(slurp(a / "verify.json") == slurp(b / "verify.json"));
}

TEST_CASE("config file supplies flags and the command line wins") {
  const fs::path dir = fresh("config");
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "run.json");
    f << R"({"n": 50, "seed": 7, "dgp": "shift"})";
  }
  const fs::path out = dir / "out";
  REQUIRE(call({"simulate", "--config", (dir / "run.json").string(), "--n", "60", "--out", out.string()}).code ==
          kExitOk);
  const json meta = read_json(out / "data.json");
  CHECK(meta.at("n") == 60);
  CHECK(meta.at("p") == 1);
  CHECK(read_json(out / "manifest.json").at("seed") == 7);

  {
    std::ofstream f(dir / "extra.json");
    f << R"({"n": 50, "colour": "red"})";
  }
  CHECK(call({"simulate", "--config", (dir / "extra.json").string(), "--out", out.string()}).code == kExitUsage);
}
