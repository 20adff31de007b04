#include <benchmark/benchmark.h>

#include "mrf/lowrank.hpp"

namespace {

using namespace mrf;

void BM_Svt(benchmark::State &state) {
    const Index rows = state.range(0), cols = state.range(1);
    const auto method = static_cast<SvtMethod>(state.range(2));
    const MatrixXcd z = MatrixXcd::Random(rows, cols);
    for (auto _ : state)
        benchmark::DoNotOptimize(svt(z, 1.0, method));
}
BENCHMARK(BM_Svt)
    ->Args({1024, 200, static_cast<int>(SvtMethod::Gram)})
    ->Args({1024, 200, static_cast<int>(SvtMethod::Jacobi)})
    ->Args({16384, 200, static_cast<int>(SvtMethod::Gram)})
    ->Unit(benchmark::kMillisecond);

void BM_RestoreIteration(benchmark::State &state) {
    const Index n = state.range(0), frames = 200;
    const ContrastStack x{MatrixXcd::Random(n * n, frames), n, n};
    const auto y = subsample_stack(x, make_gaussian_masks(n, n, frames, 0.15, 0.25, 1));
    RestoreConfig cfg;
    cfg.max_iters = 1;
    for (auto _ : state)
        benchmark::DoNotOptimize(restore(y, cfg));
}
BENCHMARK(BM_RestoreIteration)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

} // namespace
