#include <random>

#include <benchmark/benchmark.h>

#include "voxavoid/edt.hpp"
#include "voxavoid/point_cloud.hpp"

using namespace voxavoid;

namespace {

OccupancySnapshot random_grid(GridDims dims, double density)
{
    std::mt19937_64 rng(7);
    std::bernoulli_distribution occ(density);
    OccupancySnapshot s{dims, 0.02, Eigen::Vector3d::Zero(), std::vector<std::uint8_t>(dims.count(), 0)};
    for (auto& c : s.occupied) c = occ(rng) ? 1 : 0;
    return s;
}

GridDims cube(const benchmark::State& state)
{
    const int n = static_cast<int>(state.range(0));
    return {n, n, n};
}

void BM_pba(benchmark::State& state)
{
    const auto snap = random_grid(cube(state), 0.01);
    const int workers = static_cast<int>(state.range(1));
    for (auto _ : state) benchmark::DoNotOptimize(pba_edt(snap, {BandConfig::for_workers(workers), workers}));
    state.SetItemsProcessed(state.iterations() * static_cast<long>(snap.occupied.size()));
}

void BM_separable_reference(benchmark::State& state)
{
    const auto snap = random_grid(cube(state), 0.01);
    for (auto _ : state) benchmark::DoNotOptimize(reference_edt_squared(snap));
    state.SetItemsProcessed(state.iterations() * static_cast<long>(snap.occupied.size()));
}

void BM_brute_force(benchmark::State& state)
{
    const auto snap = random_grid(cube(state), 0.01);
    for (auto _ : state) benchmark::DoNotOptimize(brute_force_edt(snap));
    state.SetItemsProcessed(state.iterations() * static_cast<long>(snap.occupied.size()));
}

// Table-style map sizes: 192x192x128 and 256x256x128, 1% occupancy.
void BM_pba_table(benchmark::State& state)
{
    const int n = static_cast<int>(state.range(0));
    const auto snap = random_grid({n, n, 128}, 0.01);
    const int workers = static_cast<int>(state.range(1));
    for (auto _ : state) benchmark::DoNotOptimize(pba_edt(snap, {BandConfig::for_workers(workers), workers}));
    state.SetItemsProcessed(state.iterations() * static_cast<long>(snap.occupied.size()));
}

void BM_outlier_filter(benchmark::State& state, bool bucketed)
{
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Points pts(static_cast<std::size_t>(state.range(0)));
    for (auto& p : pts) p = Eigen::Vector3d(u(rng), u(rng), 0.1 * u(rng));
    for (auto _ : state) {
        benchmark::DoNotOptimize(bucketed ? statistical_outlier_filter(pts, 8, 1.0)
                                          : statistical_outlier_filter_reference(pts, 8, 1.0));
    }
}

}  // namespace

BENCHMARK(BM_pba)->ArgsProduct({{16, 32, 64}, {1, 4}})->UseRealTime()->Unit(benchmark::kMillisecond);
BENCHMARK(BM_separable_reference)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_brute_force)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_pba_table)->ArgsProduct({{192, 256}, {1, 4}})->UseRealTime()->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_outlier_filter, bucketed, true)->Arg(2000)->Arg(8000)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_outlier_filter, all_pairs, false)->Arg(2000)->Arg(8000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
