#pragma once

#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace energyate::cli {

/// Bad flag combinations detected after parsing.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GlobalOptions {
  std::uint64_t seed = 1;
  std::string out;
  int threads = 1;
};

struct SimulateOptions {
  long n = 1000;
  std::string dgp = "default";
  int p = 10;
};

struct WeightsOptions {
  std::string data;
  std::string layout;
  int max_iterations = 5000;
  double tolerance = 1e-12;
};

struct FitOptions {
  std::string data;
  std::string layout;
  long n = 1000;
  std::string model = "fcnn";
  double alpha = 0.05;
  double beta = 1.0;
  bool no_weights = false;
  std::string weighted_mse = "auto";
  int epochs = 1000;
  double learning_rate = 0.01;
  double momentum = 0.9;
  int batch_size = 0;
  int patience = 20;
  bool no_split = false;
  std::vector<int> hidden{100, 100, 100};
  std::vector<int> trunk{32, 32};
};

struct ShapesOptions {
  std::string model_file;
  std::string data;
  std::string layout;
  int grid = 100;
  bool long_format = false;
};

struct BenchmarkOptions {
  int replicates = 20;
  long n = 1000;
  std::string dgp = "default";
  std::string ihdp_dir;
  std::string layout;
  std::vector<std::string> configs{"fcnn_reg", "fcnn_noreg", "nam_reg", "nam_noreg"};
  int epochs = 1000;
  std::string split = "auto";
};

struct VerifyOptions {
  int draws = 20000;
  int pairs = 100;
  std::string dgp = "default";
  std::string model_file;
  std::vector<int> n_grid{100, 200, 400, 800};
  int weight_seeds = 10;
  std::string weight_dgp = "shift";
};

// Each returns an exit code and throws energyate::Error (or std::exception)
// on runtime failures. `config` is the echo of the parsed flags.
int cmd_simulate(const GlobalOptions& g, const SimulateOptions& o, const nlohmann::json& config, std::ostream& out);
int cmd_weights(const GlobalOptions& g, const WeightsOptions& o, const nlohmann::json& config, std::ostream& out);
int cmd_fit(const GlobalOptions& g, const FitOptions& o, const nlohmann::json& config, std::ostream& out);
int cmd_shapes(const GlobalOptions& g, const ShapesOptions& o, const nlohmann::json& config, std::ostream& out);
int cmd_benchmark(const GlobalOptions& g, const BenchmarkOptions& o, const nlohmann::json& config,
                  std::ostream& out);
int cmd_verify(const GlobalOptions& g, const VerifyOptions& o, const nlohmann::json& config, std::ostream& out);

}  // namespace energyate::cli
