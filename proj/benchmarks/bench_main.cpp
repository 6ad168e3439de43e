#include <benchmark/benchmark.h>

#include <random>

#include "convdysat/model.hpp"
#include "convdysat/ops.hpp"
#include "convdysat/synthetic.hpp"
#include "convdysat/training.hpp"

using namespace convdysat;

namespace {

Tensor random_tensor(const Shape& shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor t(shape);
  for (auto& x : t.storage()) x = u(rng);
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = random_tensor({n, n}, 1), b = random_tensor({n, n}, 2);
  for (auto _ : state) {
    Tape tape;
    benchmark::DoNotOptimize(matmul(tape.constant(a), tape.constant(b)).value().data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(128)->Arg(256);

void BM_CausalConv(benchmark::State& state) {
  const Tensor x = random_tensor({143, 16, 64}, 3);
  const Tensor k = random_tensor({2, 64, 8}, 4);
  const Tensor b = random_tensor({8}, 5);
  for (auto _ : state) {
    Tape tape;
    benchmark::DoNotOptimize(
        causal_conv1d(tape.constant(x), tape.constant(k), tape.constant(b)).value().data().data());
  }
}
BENCHMARK(BM_CausalConv);

struct EmailFixture {
  DynamicGraph graph = build_snapshots(email_like_dataset(), 16, SnapshotMode::Binned);
  ModelConfig model;
  EmailFixture() {
    model.structural_dims = {32};
    model.structural_heads = 4;
    model.temporal_dim = 32;
    model.temporal_heads = 4;
  }
};

void BM_Forward(benchmark::State& state) {
  static const EmailFixture fx;
  const GraphTensors tensors(fx.graph);
  const ParameterSet params = init_parameters(fx.model, fx.graph.node_count(), 16, 1);
  const int up_to = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(embed(tensors, params, fx.model, up_to).values().data().data());
}
BENCHMARK(BM_Forward)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_TrainEpoch(benchmark::State& state) {
  static const EmailFixture fx;
  TrainConfig tc;
  tc.batch_size = 4096;
  tc.learning_rate = 0.001;
  tc.first_step = static_cast<int>(state.range(0));
  Trainer trainer(fx.graph, fx.model, WalkConfig{}, tc);
  TrainState st = trainer.initial_state();
  for (auto _ : state) benchmark::DoNotOptimize(trainer.run_epoch(st));
}
BENCHMARK(BM_TrainEpoch)->Arg(4)->Arg(15)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
