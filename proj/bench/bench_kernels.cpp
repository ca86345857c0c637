// Serial reference vs OpenMP kernels: chunk-distribution enumeration, OLC measurement and sweeps.
#include <benchmark/benchmark.h>
#include <omp.h>

#include "aclab/harness.hpp"
#include "aclab/metrics.hpp"
#include "aclab/random_instances.hpp"

using namespace aclab;

namespace {

RandomInstance bench_instance(int S, int h) {
    InstanceOptions opt;
    opt.s_min = opt.s_max = S;
    opt.a_min = opt.a_max = 3;
    opt.h_min = opt.h_max = h;
    return random_instance(12345, opt);
}

void BM_BuildDataModel(benchmark::State& state, Exec exec) {
    const RandomInstance in = bench_instance(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
    for (auto _ : state) benchmark::DoNotOptimize(build_data_model(in.mdp, in.data, in.h, exec));
}

void BM_OlcReport(benchmark::State& state, Exec exec) {
    const RandomInstance in = bench_instance(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
    const DataModel model = build_data_model(in.mdp, in.data, in.h, Exec::serial);
    for (auto _ : state) benchmark::DoNotOptimize(olc_report(in.mdp, model, exec));
}

void BM_Sweep(benchmark::State& state) {
    SweepConfig cfg;
    cfg.seed = 1;
    SweepRun run;
    run.check = "strong_olc_bound";
    std::vector<double> idx;
    for (int i = 0; i < 32; ++i) idx.push_back(i);
    run.grid = {{"index", idx}};
    cfg.runs.push_back(run);
    SweepOptions opt;
    opt.workers = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(sweep(cfg, opt));
}

}  // namespace

BENCHMARK_CAPTURE(BM_BuildDataModel, serial, Exec::serial)->Args({6, 3})->Args({10, 3})->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_BuildDataModel, parallel, Exec::parallel)->Args({6, 3})->Args({10, 3})->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_OlcReport, serial, Exec::serial)->Args({6, 3})->Args({10, 3})->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_OlcReport, parallel, Exec::parallel)->Args({6, 3})->Args({10, 3})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Sweep)->Arg(1)->Arg(omp_get_max_threads())->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
