#include <random>

#include <benchmark/benchmark.h>

#include "twpa/hb_kernels.hpp"

namespace {

struct Fixture {
    twpa::LadderNetwork net;
    std::vector<double> x;

    Fixture(std::size_t cells, int k)
        : net(twpa::LadderNetwork::uniform(cells, 1.4e-6, 93e-15, 0.7e-6)),
          x((cells + 1) * static_cast<std::size_t>(2 * k + 1)) {
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> u(-0.2, 0.2);
        for (auto& v : x) {
            v = u(rng);
        }
    }
};

void BM_junctions_openmp(benchmark::State& st) {
    const int k = static_cast<int>(st.range(1));
    Fixture f(static_cast<std::size_t>(st.range(0)), k);
    const twpa::kernels::TimeGrid grid(k, 64);
    twpa::kernels::JunctionEval out;
    for (auto _ : st) {
        twpa::kernels::evaluate_junctions(f.net, grid, f.x, out);
        benchmark::DoNotOptimize(out.current.data());
    }
    st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_junctions_serial(benchmark::State& st) {
    const int k = static_cast<int>(st.range(1));
    Fixture f(static_cast<std::size_t>(st.range(0)), k);
    twpa::kernels::JunctionEval out;
    for (auto _ : st) {
        twpa::kernels::evaluate_junctions_serial(f.net, k, 64, f.x, out);
        benchmark::DoNotOptimize(out.current.data());
    }
    st.SetItemsProcessed(st.iterations() * st.range(0));
}

}  // namespace

BENCHMARK(BM_junctions_openmp)->Args({200, 7})->Args({1000, 9})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_junctions_serial)->Args({200, 7})->Args({1000, 9})->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
