#include <benchmark/benchmark.h>

#include "mrf/epg.hpp"
#include "mrf/kspace.hpp"

namespace {

using namespace mrf;

void BM_SimulateSignature(benchmark::State &state) {
    FispOptions o;
    o.length = state.range(0);
    const auto seq = generate_fisp(o);
    for (auto _ : state)
        benchmark::DoNotOptimize(simulate_signature({1000, 100}, seq));
    state.SetItemsProcessed(state.iterations() * o.length);
}
BENCHMARK(BM_SimulateSignature)->Arg(50)->Arg(200)->Arg(500)->Unit(benchmark::kMicrosecond);

void BM_Fft2c(benchmark::State &state) {
    const Index n = state.range(0);
    const VectorXcd x = VectorXcd::Random(n * n);
    for (auto _ : state)
        benchmark::DoNotOptimize(fft2c(x, n, n));
}
BENCHMARK(BM_Fft2c)->Arg(32)->Arg(128)->Unit(benchmark::kMicrosecond);

void BM_MaskGeneration(benchmark::State &state) {
    for (auto _ : state)
        benchmark::DoNotOptimize(make_gaussian_masks(128, 128, state.range(0), 0.15, 0.25, 1));
}
BENCHMARK(BM_MaskGeneration)->Arg(1)->Arg(200)->Unit(benchmark::kMillisecond);

} // namespace
