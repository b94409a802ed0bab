#include <benchmark/benchmark.h>

#include <random>

#include "modescatter/green.hpp"
#include "modescatter/kernels.hpp"

using namespace modescatter;

namespace {

Scenario bench_scenario(int n1) {
    return make_reference_grating(Polarization::TM, 0.1, {n1, 0.0125});
}

Field random_field(const Grid& g) {
    std::mt19937 rng(11);
    std::normal_distribution<double> nd;
    Field f(g);
    for (auto& v : f.values) v = cd(nd(rng), nd(rng));
    return f;
}

void BM_apply_operator(benchmark::State& st) {
    const Exec exec = st.range(1) ? Exec::parallel : Exec::serial;
    const Scenario s = bench_scenario(static_cast<int>(st.range(0)));
    const Field u = random_field(s.grid);
    for (auto _ : st) benchmark::DoNotOptimize(apply_operator(s, 1.7, u, exec));
    st.SetItemsProcessed(st.iterations() * s.grid.size());
}

void BM_green_apply(benchmark::State& st) {
    const Exec exec = st.range(1) ? Exec::parallel : Exec::serial;
    const Scenario s = bench_scenario(static_cast<int>(st.range(0)));
    const Field f = random_field(s.grid);
    GreenApplication app;
    app.k = 1.7;
    app.mode_cutoff = s.grid.n1 / 2 - 1;
    app.exec = exec;
    for (auto _ : st) benchmark::DoNotOptimize(grating_green_apply(f, app));
    st.SetItemsProcessed(st.iterations() * s.grid.size());
}

}  // namespace

BENCHMARK(BM_apply_operator)->ArgsProduct({{64, 256}, {0, 1}})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_green_apply)->ArgsProduct({{64, 256}, {0, 1}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
