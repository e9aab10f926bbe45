#include <benchmark/benchmark.h>
#include <torch/torch.h>

#include "cmedl/nn/losses.hpp"
#include "cmedl/nn/trainer.hpp"

namespace {

using namespace cmedl::nn;

void BM_ContextualSimilarity(benchmark::State& state) {
    const long p = state.range(0);
    torch::manual_seed(1);
    const auto a = torch::randn({2, 64, p});
    const auto b = torch::randn({2, 64, p});
    for (auto _ : state) benchmark::DoNotOptimize(contextual_similarity(a.view({2, 64, p, 1}), b.view({2, 64, p, 1})));
    state.SetComplexityN(p);
}
BENCHMARK(BM_ContextualSimilarity)->RangeMultiplier(2)->Range(64, 1024)->Unit(benchmark::kMillisecond);

Batch random_batch(long n, long side, std::uint64_t seed) {
    torch::manual_seed(seed);
    return {torch::rand({n, 1, side, side}) * 2 - 1, (torch::rand({n, side, side}) > 0.7).to(torch::kFloat32)};
}

TrainConfig step_config(int generator_width) {
    TrainConfig cfg;
    cfg.generator_width = generator_width;
    return cfg;
}

void BM_CmedlStep(benchmark::State& state) {
    auto cfg = step_config(static_cast<int>(state.range(0)));
    auto b = make_bundle(cfg);
    const auto c = random_batch(2, 64, 1), m = random_batch(2, 64, 2);
    for (auto _ : state) benchmark::DoNotOptimize(train_step_cmedl(b, c, m, cfg));
}
BENCHMARK(BM_CmedlStep)->Arg(8)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_BaselineStep(benchmark::State& state) {
    auto cfg = step_config(0);
    cfg.mode = TrainMode::CbctOnly;
    auto b = make_bundle(cfg);
    const auto c = random_batch(2, 64, 1);
    for (auto _ : state) benchmark::DoNotOptimize(train_step_baseline(b, c, cfg));
}
BENCHMARK(BM_BaselineStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
