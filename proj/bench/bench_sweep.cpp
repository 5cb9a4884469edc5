// Serial vs OpenMP sweep timing on a generated signal task.
//   bench_sweep [instances] [length] [repeats]

#include "remask/sweep.hpp"

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>

using namespace remask;

namespace {

template <typename F>
double best_of(int repeats, F && f) {
    double best = 1e300;
    for (int i = 0; i < repeats; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

} // namespace

int main(int argc, char ** argv) {
    const std::size_t n       = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 100;
    const std::size_t length  = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 64;
    const int         repeats = argc > 3 ? std::atoi(argv[3]) : 3;

    const auto tasks  = gen_signal_task(n, length, SignalTaskParams{}, 42);
    const auto points = SweepGrid{}.points();

    std::string serial_csv, parallel_csv;
    const double serial   = best_of(repeats, [&] { serial_csv = to_csv(run_sweep_serial(points, tasks)); });
    const double parallel = best_of(repeats, [&] { parallel_csv = to_csv(run_sweep_parallel(points, tasks)); });

    std::printf("grid %zu points, %zu instances x %zu tokens, %d threads\n", points.size(), n, length,
                omp_get_max_threads());
    std::printf("serial   %.3f s\n", serial);
    std::printf("parallel %.3f s  (x%.2f)\n", parallel, serial / parallel);
    std::printf("outputs %s\n", serial_csv == parallel_csv ? "identical" : "DIFFER");
    return serial_csv == parallel_csv ? 0 : 1;
}
