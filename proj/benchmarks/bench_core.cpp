#include <benchmark/benchmark.h>

#include <vector>

#include "energyate/data.hpp"
#include "energyate/energy.hpp"
#include "energyate/nn.hpp"
#include "energyate/oracle_dgp.hpp"
#include "energyate/training.hpp"

using namespace energyate;

namespace {

data::Dataset default_data(int n) {
  const data::Dataset d = data::simulate(verify::default_dgp(), n, 1);
  data::Dataset s = d;
  s.x = data::Standardizer::fit(d.x).apply(d.x);
  return s;
}

void BM_PairwiseDistances(benchmark::State& state) {
  const data::Dataset d = default_data(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(energy::pairwise_distances(d.x));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_PairwiseDistances)->Arg(125)->Arg(250)->Arg(500)->Arg(1000)->Complexity(benchmark::oNSquared);

void BM_SolveBalancingWeights(benchmark::State& state) {
  const data::Dataset d = default_data(static_cast<int>(state.range(0)));
  const energy::PairwiseDistances dist = energy::pairwise_distances(d.x);
  for (auto _ : state) benchmark::DoNotOptimize(energy::solve_balancing_weights(dist, d.a));
}
BENCHMARK(BM_SolveBalancingWeights)->Arg(250)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_Backward(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  const std::vector<int> dims{11, 100, 100, 100, 1};
  const nn::ParameterSet params = nn::init_params(dims, 3);
  const data::Dataset d = default_data(batch);
  Eigen::MatrixXd inputs(11, batch);
  inputs.topRows(10) = d.x.transpose();
  inputs.row(10) = d.a.cast<double>().transpose();
  for (auto _ : state) benchmark::DoNotOptimize(nn::backward(params, inputs, d.y));
}
BENCHMARK(BM_Backward)->Arg(64)->Arg(667)->Unit(benchmark::kMicrosecond);

void BM_FitEpochs(benchmark::State& state) {
  const data::Dataset d = default_data(500);
  training::ObjectiveConfig cfg;
  cfg.epochs = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(training::fit(d, cfg));
}
BENCHMARK(BM_FitEpochs)->Arg(50)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
