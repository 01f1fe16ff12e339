// Throughput comparison of the serial reference path against the OpenMP
// kernels on the two hot loops: ensemble simulation and dictionary profiling.
// The checksums must agree bit-for-bit between the two modes.

#include <chrono>
#include <cstdio>
#include <cstring>

#include "mfcn/laplace.hpp"
#include "mfcn/metric.hpp"
#include "mfcn/model.hpp"
#include "mfcn/simulate.hpp"

using namespace mfcn;

namespace {

double now_s() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

struct BenchResult {
    double seconds = 0.0;
    double checksum = 0.0;
};

BenchResult bench_ensemble(int threads, int replicas, int n, int steps) {
    set_max_threads(threads);
    const ModelDims dims{1, 1, 1};
    BuiltinParams params;
    params.rate = 1.0;
    params.attract = 0.5;
    const CoefficientSet coeffs = make_linear_mean_field(dims, params);
    const InitialData init = initial_point_cloud(n, 1, {0.0});
    const TimeGrid grid(1.0, steps);
    const NoisePlan plan{20240709};

    const double t0 = now_s();
    const std::vector<double> values = ensemble_values(replicas, [&](std::uint32_t r) {
        SimOptions options;
        options.record_flow = false;
        const PathBundle bundle =
            simulate_unweighted(coeffs, dims, init, grid, 0.05, plan, r, nullptr, options);
        return bundle.flow.terminal().mean()[0];
    });
    const double t1 = now_s();
    return {t1 - t0, pairwise_sum(values)};
}

BenchResult bench_dictionary(int threads, int clouds, int atoms, int dict_size) {
    set_max_threads(threads);
    const BlDictionary dict(2, dict_size, 99);
    Prng rng(7);
    std::vector<EmpiricalMeasure> measures;
    for (int c = 0; c < clouds; ++c) {
        std::vector<double> pts(static_cast<std::size_t>(atoms) * 2);
        std::vector<double> w(static_cast<std::size_t>(atoms), 1.0 / atoms);
        for (double& v : pts) v = rng.normal();
        measures.emplace_back(2, std::move(pts), std::move(w));
    }
    const double t0 = now_s();
    std::vector<double> sums(static_cast<std::size_t>(clouds));
    parallel_for(0, clouds, [&](std::int64_t c) {
        const auto prof = dict.profile(measures[static_cast<std::size_t>(c)]);
        sums[static_cast<std::size_t>(c)] = pairwise_sum(prof);
    });
    const double t1 = now_s();
    return {t1 - t0, pairwise_sum(sums)};
}

void report(const char* name, const BenchResult& serial, const BenchResult& parallel,
            double work_units) {
    const bool identical = std::memcmp(&serial.checksum, &parallel.checksum, sizeof(double)) == 0;
    std::printf("%-22s serial %8.3f s (%8.2f Mu/s)  omp %8.3f s (%8.2f Mu/s)  "
                "speedup %.2fx  bit-identical %s\n",
                name, serial.seconds, work_units / serial.seconds / 1e6, parallel.seconds,
                work_units / parallel.seconds / 1e6, serial.seconds / parallel.seconds,
                identical ? "yes" : "NO");
}

}  // namespace

int main(int argc, char** argv) {
    int threads = 0;
    if (argc > 1) threads = std::atoi(argv[1]);
    set_max_threads(threads);
    const int omp_threads = max_threads();
    std::printf("bench_kernels: serial reference vs OpenMP (%d threads)\n", omp_threads);

    {
        const int replicas = 2000, n = 200, steps = 50;
        const BenchResult s = bench_ensemble(1, replicas, n, steps);
        const BenchResult p = bench_ensemble(omp_threads, replicas, n, steps);
        report("ensemble particle-steps", s, p,
               static_cast<double>(replicas) * n * steps);
    }
    {
        const int clouds = 4000, atoms = 1000, dict_size = 64;
        const BenchResult s = bench_dictionary(1, clouds, atoms, dict_size);
        const BenchResult p = bench_dictionary(omp_threads, clouds, atoms, dict_size);
        report("dictionary evaluations", s, p,
               static_cast<double>(clouds) * atoms * dict_size);
    }
    return 0;
}
