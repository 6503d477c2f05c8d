#include <benchmark/benchmark.h>

#include <vector>

#include "pidon/dataset.hpp"
#include "pidon/dynamics.hpp"
#include "pidon/operator_model.hpp"
#include "pidon/solver.hpp"
#include "pidon/training.hpp"

using namespace pidon;

namespace {

DomainSpec bench_domain(std::size_t n) {
  DomainSpec d;
  d.params = SmParams::textbook();
  d.n_train = n;
  d.n_test = n;
  d.sensors = 100;
  d.seed = 3;
  return d;
}

OperatorModel fitted_model(Arch arch, const LabeledDataset& train) {
  ModelSpec spec;
  spec.arch = arch;
  spec.sensors = train.inputs.m;
  OperatorModel model = OperatorModel::create(spec);
  model.norm = Normalization::fit(train);
  return model;
}

void BM_SmRhs(benchmark::State& state) {
  const SmParams p = SmParams::textbook();
  SmState x{0.5, 0.1, 1.0, 0.05};
  for (auto _ : state) {
    benchmark::DoNotOptimize(x);
    benchmark::DoNotOptimize(sm_rhs(x, ExogenousInputs{}, BusVoltage{1.0, 0.0}, p));
  }
}
BENCHMARK(BM_SmRhs);

void BM_SolveCurrents(benchmark::State& state) {
  const SmParams p = SmParams::textbook();
  SmState x{0.5, 0.1, 1.0, 0.05};
  for (auto _ : state) {
    benchmark::DoNotOptimize(x);
    benchmark::DoNotOptimize(solve_currents(x, BusVoltage{1.0, 0.0}, p));
  }
}
BENCHMARK(BM_SolveCurrents);

void BM_SimulateTrajectory(benchmark::State& state) {
  const DomainSpec d = bench_domain(1);
  const InputBlock in = sample_inputs(d, Split::Test);
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate_trajectory(in.x0_row(0), in.descriptors(0), d.params, d.solver));
  }
}
BENCHMARK(BM_SimulateTrajectory)->Unit(benchmark::kMillisecond);

void BM_OperatorForward(benchmark::State& state) {
  DomainSpec d = bench_domain(4);
  d.solver.eval_dt = 0.1;
  const LabeledDataset train = generate_labeled(d, Split::Train);
  const OperatorModel model = fitted_model(static_cast<Arch>(state.range(0)), train);
  for (auto _ : state) {
    benchmark::DoNotOptimize(operator_forward(model, train.inputs.x0_row(0), train.inputs.sensor_row(0), 0.5));
  }
}
BENCHMARK(BM_OperatorForward)
    ->Arg(static_cast<int>(Arch::Unstacked))
    ->Arg(static_cast<int>(Arch::StackedN))
    ->Arg(static_cast<int>(Arch::Pinn))
    ->Unit(benchmark::kMicrosecond);

void BM_PredictGrid(benchmark::State& state) {
  DomainSpec d = bench_domain(static_cast<std::size_t>(state.range(0)));
  d.solver.eval_dt = 0.1;
  const LabeledDataset train = generate_labeled(d, Split::Train);
  const OperatorModel model = fitted_model(Arch::Unstacked, train);
  const std::vector<double> times = make_grid(SolverConfig{});
  for (auto _ : state) benchmark::DoNotOptimize(predict_grid(model, train.inputs, times));
  state.SetItemsProcessed(state.iterations() * state.range(0) * static_cast<std::int64_t>(times.size()));
}
BENCHMARK(BM_PredictGrid)->Arg(1)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_TrainEpoch(benchmark::State& state) {
  DomainSpec d = bench_domain(20);
  d.n_val = 4;
  d.n_colloc = 20;
  d.colloc_times = 51;
  d.solver.eval_dt = 0.02;
  const LabeledDataset labeled = generate_labeled(d, Split::Train);
  const LabeledDataset val = generate_labeled(d, Split::Validation);
  const CollocationDataset colloc = generate_collocation(d);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 512;
  cfg.use_physics = state.range(0) != 0;
  ModelSpec spec;
  spec.sensors = d.sensors;
  const OperatorModel model = OperatorModel::create(spec);
  for (auto _ : state) {
    benchmark::DoNotOptimize(pidon::train(model, {&labeled, &val, &colloc, d.params}, cfg));
  }
}
BENCHMARK(BM_TrainEpoch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
