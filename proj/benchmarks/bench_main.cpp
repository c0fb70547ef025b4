#include <aoimix/linalg.hpp>
#include <aoimix/neural.hpp>
#include <aoimix/selector.hpp>
#include <aoimix/simulation.hpp>

#include <benchmark/benchmark.h>

using namespace aoimix;

static void BM_Eigenvalues(benchmark::State& state) {
  const auto n = static_cast<int>(state.range(0));
  Rng rng(1);
  std::normal_distribution<double> g;
  Matrix m(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) m(r, c) = g(rng);
  for (auto _ : state) benchmark::DoNotOptimize(eigenvalues(m));
}
BENCHMARK(BM_Eigenvalues)->Arg(2)->Arg(4)->Arg(10)->Arg(32);

static void BM_DenseNetTrainBatch(benchmark::State& state) {
  Rng rng(2);
  DenseNet net({{4, 64, Activation::kRelu}, {64, 64, Activation::kRelu}, {64, 2, Activation::kIdentity}},
               rng);
  const Matrix x = Matrix::Random(4, state.range(0));
  const Matrix up = Matrix::Random(2, state.range(0));
  ForwardCache cache;
  for (auto _ : state) {
    net.forward_batch(x, &cache);
    benchmark::DoNotOptimize(net.backward(cache, up));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DenseNetTrainBatch)->Arg(1)->Arg(64);

static void BM_Select(benchmark::State& state) {
  Rng rng(3);
  std::uniform_real_distribution<double> u(-3, 3);
  SelectionProblem p;
  p.rb_budget = static_cast<int>(state.range(0) / 2);
  for (int m = 0; m < state.range(0); ++m) {
    p.c1.push_back(u(rng));
    p.c2.push_back(u(rng));
    p.has_request.push_back(1);
  }
  for (auto _ : state) benchmark::DoNotOptimize(select(p));
}
BENCHMARK(BM_Select)->Arg(20)->Arg(200);

static void BM_SimulationSlot(benchmark::State& state) {
  SystemConfig cfg;
  cfg.devices = static_cast<int>(state.range(0));
  cfg.rb_count = cfg.devices / 2;
  EpisodeOptions opt;
  opt.mode = static_cast<TrainerMode>(state.range(1));
  opt.slots = 1 << 30;
  opt.eval_slots = 0;
  Simulation sim(System::build(cfg, 1), opt);
  for (auto _ : state) sim.step();
}
BENCHMARK(BM_SimulationSlot)
    ->Args({4, static_cast<int>(TrainerMode::kUniform)})
    ->Args({4, static_cast<int>(TrainerMode::kQmixPartial)})
    ->Args({20, static_cast<int>(TrainerMode::kQmixPartial)})
    ->Args({20, static_cast<int>(TrainerMode::kDqn)});
BENCHMARK_MAIN();
