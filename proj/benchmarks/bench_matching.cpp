#include <benchmark/benchmark.h>

#include "mrf/dictionary.hpp"
#include "mrf/net.hpp"
#include "mrf/random.hpp"

namespace {

using namespace mrf;

const SequenceParams &sequence() {
    static const SequenceParams seq = generate_fisp({});
    return seq;
}

/// Dictionary over the first K entries of the full lookup table.
Dictionary make_dictionary(Index k) {
    auto lut = build_lut({1, 5000, 10}, {1, 2000, 10});
    lut.entries.resize(static_cast<std::size_t>(k));
    lut.grid.reset();
    return build_dictionary(lut, sequence());
}

MatrixXcd queries(const Dictionary &dict, Index n) {
    Rng rng(1);
    MatrixXcd q(n, dict.length());
    for (Index j = 0; j < n; ++j)
        q.row(j) = dict.signature(static_cast<Index>(rng.below(static_cast<std::uint64_t>(dict.size())))).transpose();
    return q;
}

void BM_MatchBatch(benchmark::State &state) {
    const Dictionary dict = make_dictionary(state.range(0));
    const MatrixXcd q = queries(dict, 64);
    for (auto _ : state)
        benchmark::DoNotOptimize(match_batch(dict, q));
    state.SetItemsProcessed(state.iterations() * q.rows());
}
BENCHMARK(BM_MatchBatch)->Arg(2500)->Arg(5000)->Arg(10000)->Arg(20000)->Unit(benchmark::kMillisecond);

void BM_PredictDefaultNet(benchmark::State &state) {
    const auto model = build(NetConfig{}, 1);
    const MatrixXcd q = queries(make_dictionary(64), state.range(0));
    for (auto _ : state)
        benchmark::DoNotOptimize(predict(model, q));
    state.SetItemsProcessed(state.iterations() * q.rows());
}
BENCHMARK(BM_PredictDefaultNet)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_TrainStepDefaultNet(benchmark::State &state) {
    auto model = build(NetConfig{}, 1);
    const MatrixXd x = preprocess(queries(make_dictionary(64), state.range(0)));
    const MatrixXd t = MatrixXd::Constant(x.rows(), 2, 0.5);
    const TrainConfig cfg;
    for (auto _ : state)
        benchmark::DoNotOptimize(backward_and_step(model, x, t, cfg, 1e-4));
    state.SetItemsProcessed(state.iterations() * x.rows());
}
BENCHMARK(BM_TrainStepDefaultNet)->Arg(16)->Unit(benchmark::kMillisecond);

} // namespace
