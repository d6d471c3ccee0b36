#include <benchmark/benchmark.h>

#include "bflow/dynamics.hpp"
#include "bflow/generators.hpp"
#include "bflow/stability.hpp"
#include "bflow/steady_state.hpp"
#include "bflow/train_local.hpp"

using namespace bflow;

namespace {

FlowNetwork disordered(int n) {
  DisorderedParams prm;
  prm.n = n;
  prm.seed = 4;
  prm.r_connect = n >= 100 ? 0.15 : 0.4;
  prm.r_min = n >= 100 ? 0.04 : 0.08;
  return gen_disordered(prm);
}

void BM_MixedBcSolve(benchmark::State& state) {
  const FlowNetwork net = disordered(static_cast<int>(state.range(0)));
  const Laplacian w = laplacian_from_conductance(net);
  const std::vector<PressureClamp> clamps{{0, 8.0}, {net.size() - 1, 0.0}};
  for (auto _ : state) benchmark::DoNotOptimize(pressures_mixed_bc(w, clamps));
}
BENCHMARK(BM_MixedBcSolve)->Arg(20)->Arg(150);

void BM_SimulateToSteady(benchmark::State& state) {
  const BistableLaw law;
  const FlowNetwork net = disordered(static_cast<int>(state.range(0)));
  DrivePhase ph;
  ph.duration = 5000.0;
  ph.clamps = {{0, 8.0}, {net.size() - 1, 0.0}};
  SimulationOptions opts;
  opts.record = false;
  const Eigen::VectorXd v0 = Eigen::VectorXd::Constant(net.size(), 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(simulate(net, law, DriveSchedule::single(ph), v0, opts));
}
BENCHMARK(BM_SimulateToSteady)->Arg(20)->Arg(150)->Unit(benchmark::kMillisecond);

void BM_FastSteadyUpdate(benchmark::State& state) {
  const BistableLaw law;
  const FlowNetwork net = disordered(static_cast<int>(state.range(0)));
  const std::vector<PressureClamp> clamps{{0, 8.0}, {net.size() - 1, 0.0}};
  const std::vector<Binary> labels(net.size(), Binary::zero);
  for (auto _ : state) benchmark::DoNotOptimize(fast_steady_update(net, law, clamps, labels));
}
BENCHMARK(BM_FastSteadyUpdate)->Arg(20)->Arg(150);

void BM_MinorsCriterion(benchmark::State& state) {
  const BistableLaw law;
  Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(state.range(0), 0.5, 19.5);
  for (auto _ : state) benchmark::DoNotOptimize(minors_criterion(v, law));
}
BENCHMARK(BM_MinorsCriterion)->Arg(8)->Arg(64);

}  // namespace
BENCHMARK_MAIN();
