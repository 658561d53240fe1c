#include <benchmark/benchmark.h>

#include <cstdint>
#include <map>

#include "rotor/analytics.hpp"
#include "rotor/contour.hpp"
#include "rotor/distributions.hpp"
#include "rotor/rng.hpp"
#include "rotor/tree_engine.hpp"

using namespace rotor;

namespace {

// Walk throughput is measured in chunks on fresh environments: the visited
// set of any infinite-tree walk grows linearly, so a single never-ending walk
// would only benchmark the allocator's path to the node budget.
constexpr std::uint64_t kChunk = 1'000'000;

void walk_chunks(benchmark::State& state, const RotorLaw& law, WalkKind kind) {
    std::uint64_t stream = 0;
    for (auto _ : state) {
        Environment env = Environment::regular(law, {99, stream++});
        Walker w;
        const TrajectoryStats st = run_steps(env, w, kChunk, 0, kind);
        benchmark::DoNotOptimize(st.final_range);
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * kChunk));
}

void BM_RotorStepNullRecurrent(benchmark::State& state) {
    walk_chunks(state, RotorLaw::uniform(2), WalkKind::Rotor);
}
BENCHMARK(BM_RotorStepNullRecurrent)->Unit(benchmark::kMillisecond);

void BM_RotorStepTransient(benchmark::State& state) {
    walk_chunks(state, RotorLaw::uniform(3), WalkKind::Rotor);
}
BENCHMARK(BM_RotorStepTransient)->Unit(benchmark::kMillisecond);

void BM_SrwStep(benchmark::State& state) {
    walk_chunks(state, RotorLaw::uniform(2), WalkKind::Srw);
}
BENCHMARK(BM_SrwStep)->Unit(benchmark::kMillisecond);

void BM_GwStep(benchmark::State& state) {
    const OffspringLaw off(std::map<int, double>{{1, 0.5}, {2, 0.5}});
    const RotorMatrix rows = RotorMatrix::uniform_for(off);
    std::uint64_t stream = 0;
    for (auto _ : state) {
        Environment env = Environment::galton_watson(off, rows, {99, stream++});
        Walker w;
        const TrajectoryStats st = run_steps(env, w, kChunk, 0);
        benchmark::DoNotOptimize(st.final_range);
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * kChunk));
}
BENCHMARK(BM_GwStep)->Unit(benchmark::kMillisecond);

void BM_ExtinctionSolve(benchmark::State& state) {
    const GenFun f = genfun(good_child_law(RotorLaw::uniform(static_cast<int>(state.range(0)))));
    for (auto _ : state) {
        benchmark::DoNotOptimize(extinction_probability(f));
    }
}
BENCHMARK(BM_ExtinctionSolve)->Arg(3)->Arg(10)->Arg(100);

void BM_ContourGrid(benchmark::State& state) {
    const CumulativeLaw law(RotorLaw::uniform(2));
    const int level = static_cast<int>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(expected_contour_grids(law, 4, level));
    }
    state.SetItemsProcessed(state.iterations() * (1ll << level));
}
BENCHMARK(BM_ContourGrid)->Arg(8)->Arg(14)->Arg(18);

void BM_AliasSample(benchmark::State& state) {
    const RotorLaw law = RotorLaw::uniform(static_cast<int>(state.range(0)));
    const AliasTable table(law.probs());
    Xoshiro256 rng({7, 0});
    for (auto _ : state) {
        benchmark::DoNotOptimize(table.sample(rng));
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_AliasSample)->Arg(3)->Arg(100);

}  // namespace

BENCHMARK_MAIN();
