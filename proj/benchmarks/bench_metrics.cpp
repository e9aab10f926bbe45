#include <benchmark/benchmark.h>

#include <random>

#include "cmedl/surface_metrics.hpp"

namespace {

using namespace cmedl;

Mask disc(int n, double cy, double cx, double r) {
    Grid<std::uint8_t> px(n, n, 0);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) px(y, x) = (y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r;
    return Mask(std::move(px), {1.0, 1.0});
}

// All-pairs reference the distance transform replaces.
double brute_surface_dsc(const Mask& a, const Mask& b, double tau) {
    const auto sa = metrics::surface_voxels(metrics::VolumeMask{{a}, 1.0});
    const auto sb = metrics::surface_voxels(metrics::VolumeMask{{b}, 1.0});
    const auto within = [tau](const std::vector<metrics::Voxel>& from, const std::vector<metrics::Voxel>& to) {
        std::size_t k = 0;
        for (const auto& p : from)
            for (const auto& q : to) {
                const double dr = p.r - q.r, dc = p.c - q.c;
                if (dr * dr + dc * dc <= tau * tau) {
                    ++k;
                    break;
                }
            }
        return k;
    };
    return static_cast<double>(within(sa, sb) + within(sb, sa)) / static_cast<double>(sa.size() + sb.size());
}

void BM_SurfaceDscTransform(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const auto a = disc(n, n * 0.45, n * 0.5, n * 0.3), b = disc(n, n * 0.55, n * 0.5, n * 0.28);
    for (auto _ : state) benchmark::DoNotOptimize(metrics::surface_dsc(a, b, 4.38));
    state.SetComplexityN(n);
}
BENCHMARK(BM_SurfaceDscTransform)->RangeMultiplier(2)->Range(32, 512)->Unit(benchmark::kMicrosecond)->Complexity();

void BM_SurfaceDscBruteForce(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const auto a = disc(n, n * 0.45, n * 0.5, n * 0.3), b = disc(n, n * 0.55, n * 0.5, n * 0.28);
    for (auto _ : state) benchmark::DoNotOptimize(brute_surface_dsc(a, b, 4.38));
    state.SetComplexityN(n);
}
BENCHMARK(BM_SurfaceDscBruteForce)->RangeMultiplier(2)->Range(32, 512)->Unit(benchmark::kMicrosecond)->Complexity();

void BM_Hd95(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const auto a = disc(n, n * 0.45, n * 0.5, n * 0.3), b = disc(n, n * 0.55, n * 0.5, n * 0.28);
    for (auto _ : state) benchmark::DoNotOptimize(metrics::hd95(a, b));
}
BENCHMARK(BM_Hd95)->RangeMultiplier(2)->Range(32, 512)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
