#include <benchmark/benchmark.h>

#include <vector>

#include "d3g/data.hpp"
#include "d3g/mlp.hpp"
#include "d3g/model.hpp"
#include "d3g/relations.hpp"
#include "d3g/rng.hpp"
#include "d3g/theory.hpp"

namespace {

using namespace d3g;

DenseParams bench_net(std::size_t width) {
  Rng rng(1);
  const std::size_t dims[] = {2, width, 2};
  const Activation acts[] = {Activation::kRelu, Activation::kIdentity};
  return make_dense(dims, acts, rng);
}

void BM_Forward(benchmark::State& state) {
  const auto net = bench_net(static_cast<std::size_t>(state.range(0)));
  const std::vector<double> x{0.3, -1.2};
  for (auto _ : state) benchmark::DoNotOptimize(forward(net, x));
}
BENCHMARK(BM_Forward)->Arg(64)->Arg(256);

void BM_ForwardBackward(benchmark::State& state) {
  const auto net = bench_net(static_cast<std::size_t>(state.range(0)));
  auto grads = net.zeros_like();
  const std::vector<double> x{0.3, -1.2}, g{1.0, -1.0};
  Tape tape;
  for (auto _ : state) {
    forward(net, x, &tape);
    benchmark::DoNotOptimize(backward(net, tape, g, grads));
  }
}
BENCHMARK(BM_ForwardBackward)->Arg(64)->Arg(256);

void BM_LearnedRelations(benchmark::State& state) {
  Rng rng(2);
  const auto net = make_relation_net({1, 32, 4, 0.1}, rng);
  std::vector<std::vector<double>> metas;
  for (int k = 0; k < state.range(0); ++k) metas.push_back({rng.uniform(-3.0, 3.0)});
  for (auto _ : state) benchmark::DoNotOptimize(LearnedRelationGraph(net, metas).values());
}
BENCHMARK(BM_LearnedRelations)->Arg(5)->Arg(24);

void BM_ObjectiveGradient(benchmark::State& state) {
  const auto ds = gen_dg15(0);
  TrainConfig cfg;
  const auto model = init_model(ModelKind::kMultiHead, ds, cfg);
  const auto fixed = fixed_matrix_for_heads(model, ds.fixed_relation());
  const auto train = ds.examples_in(Split::kTrain);
  const std::vector<Example> batch(train.begin(), train.begin() + 10);
  ObjectiveOptions opt;
  auto grads = model.params.zeros_like();
  for (auto _ : state) {
    grads.set_zero();
    benchmark::DoNotOptimize(objective(model, batch, fixed, opt, &grads));
  }
}
BENCHMARK(BM_ObjectiveGradient);

void BM_TrainEpoch(benchmark::State& state) {
  const auto ds = gen_dg15(0);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.eval_every = 0;
  const bool erm = state.range(0) == 1;
  for (auto _ : state) {
    auto model = init_model(erm ? ModelKind::kErm : ModelKind::kMultiHead, ds, cfg);
    benchmark::DoNotOptimize(erm ? train_erm(model, ds, cfg) : train(model, ds, cfg));
  }
}
BENCHMARK(BM_TrainEpoch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_ScalingWorld(benchmark::State& state) {
  theory::ScalingConfig cfg;
  cfg.seeds = 1;
  cfg.grid = {static_cast<std::size_t>(state.range(0))};
  for (auto _ : state) benchmark::DoNotOptimize(theory::scaling_experiment(cfg));
}
BENCHMARK(BM_ScalingWorld)->Arg(8)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
