// Serial reference vs OpenMP kernels. Arg(0) = serial, Arg(1) = parallel.
#include <benchmark/benchmark.h>

#include "sbd/certificate.hpp"
#include "sbd/dynamics.hpp"
#include "sbd/statistics.hpp"

using namespace sbd;

namespace {

void BM_riemann_upper_sum(benchmark::State& state) {
    const Kernel k = Kernel::gaussian(1, 1, 3);
    const double h = 0.05;
    for (auto _ : state) {
        const double s = state.range(0) ? riemann_upper_sum(k, h) : serial::riemann_upper_sum(k, h);
        benchmark::DoNotOptimize(s);
    }
}
BENCHMARK(BM_riemann_upper_sum)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_verify_certificate(benchmark::State& state) {
    const Kernel ap = Kernel::gaussian(1, 2, 2), am = Kernel::triangular(1, 1, 2);
    const Certificate c = certify(ap, am, 1.0, default_search_grid(ap, am));
    VerifyOptions o;
    o.trials = 20000;
    for (auto _ : state) {
        const ViolationReport r =
            state.range(0) ? verify_certificate(c, ap, am, o) : serial::verify_certificate(c, ap, am, o);
        benchmark::DoNotOptimize(r.min_u);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(o.trials));
}
BENCHMARK(BM_verify_certificate)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_pair_correlation(benchmark::State& state) {
    const Torus t(30, 2);
    std::vector<PointSet> reps;
    for (int i = 0; i < 32; ++i) {
        Rng rng = make_stream(9, i);
        reps.push_back(sample_poisson(t, 1.0, rng).positions());
    }
    const auto edges = equal_bins(5.0, 25);
    for (auto _ : state) {
        const auto g = state.range(0) ? pair_correlation(t, reps, edges)
                                      : serial::pair_correlation(t, reps, edges);
        benchmark::DoNotOptimize(g.data());
    }
}
BENCHMARK(BM_pair_correlation)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
