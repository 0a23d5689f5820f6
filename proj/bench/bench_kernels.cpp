// Serial reference kernels against their OpenMP counterparts, plus the
// sensing gradient that dominates the matrix-sensing experiment.

#include <benchmark/benchmark.h>

#include <vector>

#include "nso/kernels.hpp"
#include "nso/rng.hpp"
#include "nso/sensing.hpp"

namespace {

struct RowData {
    std::size_t n;
    std::size_t p;
    std::vector<double> rows;
    std::vector<double> x;
    std::vector<double> weights;
};

RowData make_rows(std::size_t n, std::size_t p) {
    nso::RngStream rng(1, 0);
    RowData d{n, p, std::vector<double>(n * p), std::vector<double>(p), std::vector<double>(n)};
    for (double& v : d.rows) v = rng.normal();
    for (double& v : d.x) v = rng.normal();
    for (double& v : d.weights) v = rng.normal();
    return d;
}

template <bool Parallel>
void BM_RowDots(benchmark::State& state) {
    const auto d = make_rows(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
    std::vector<double> out(d.n);
    for (auto _ : state) {
        if constexpr (Parallel)
            nso::kernels::parallel::row_dots(d.rows, d.p, d.x, out);
        else
            nso::kernels::serial::row_dots(d.rows, d.p, d.x, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(d.n * d.p));
}

template <bool Parallel>
void BM_WeightedRowSum(benchmark::State& state) {
    const auto d = make_rows(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
    std::vector<double> out(d.p);
    for (auto _ : state) {
        if constexpr (Parallel)
            nso::kernels::parallel::weighted_row_sum(d.rows, d.p, d.weights, out);
        else
            nso::kernels::serial::weighted_row_sum(d.rows, d.p, d.weights, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(d.n * d.p));
}

template <nso::KernelMode Mode>
void BM_SensingGradient(benchmark::State& state) {
    const auto d = static_cast<std::size_t>(state.range(0));
    const auto r = static_cast<std::size_t>(state.range(1));
    const auto inst = nso::make_sensing_instance(d, r, nso::default_measurements(d, r), nso::RngStream(2, 0));
    const nso::SensingObjective obj(inst.train, Mode);
    nso::RngStream rng(3, 0);
    nso::Vector w(d * d);
    for (double& v : w) v = rng.normal();
    for (auto _ : state) benchmark::DoNotOptimize(obj.gradient(w));
}

}  // namespace

BENCHMARK(BM_RowDots<false>)->Args({450, 465})->Args({2500, 5050});
BENCHMARK(BM_RowDots<true>)->Args({450, 465})->Args({2500, 5050});
BENCHMARK(BM_WeightedRowSum<false>)->Args({450, 465})->Args({2500, 5050});
BENCHMARK(BM_WeightedRowSum<true>)->Args({450, 465})->Args({2500, 5050});
BENCHMARK(BM_SensingGradient<nso::KernelMode::Serial>)->Args({30, 3})->Args({100, 5});
BENCHMARK(BM_SensingGradient<nso::KernelMode::Parallel>)->Args({30, 3})->Args({100, 5});

BENCHMARK_MAIN();
