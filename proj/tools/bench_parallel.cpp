// Compares the serial reference path with the OpenMP path on the three
// data-parallel workloads: sweep runs, stale-demo seed scan, lemma grid.

#include <chrono>
#include <cstdio>

#include "bitd/diagnostics.hpp"
#include "bitd/exact.hpp"
#include "bitd/harness.hpp"
#include "bitd/parallel.hpp"

using namespace bitd;

namespace {

template <class F>
double timed(F&& fn) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main() {
    std::printf("threads available: %d\n\n", max_threads());

    ExperimentConfig cfg;
    cfg.algorithms = {"TDLambda", "BiTD-FR"};
    cfg.alphas = {0.1, 0.03};
    cfg.lambdas = {0.0, 0.4};
    cfg.seeds = 8;
    cfg.steps = 5000;

    double serial = timed([&] { run_sweep(cfg, false); });
    double parallel = timed([&] { run_sweep(cfg, true); });
    std::printf("sweep (%zu cells x %d seeds x %ld steps): serial %.3fs  parallel %.3fs  speedup %.2fx\n",
                cfg.algorithms.size() * cfg.alphas.size() * cfg.lambdas.size(), cfg.seeds, cfg.steps,
                serial, parallel, serial / parallel);

    StaleDemoSettings settings;
    const std::uint64_t n_seeds = 20000;
    serial = timed([&] { find_stale_demo(0, n_seeds, settings, false); });
    parallel = timed([&] { find_stale_demo(0, n_seeds, settings, true); });
    std::printf("stale-demo scan (%llu seeds): serial %.3fs  parallel %.3fs  speedup %.2fx\n",
                static_cast<unsigned long long>(n_seeds), serial, parallel, serial / parallel);

    const TabularMdp mdp = make_chain(5, 5.0, 0.9);
    const Policy pi = uniform_policy(mdp);
    auto lemma_grid = [&](bool par) {
        parallel_for(
            5 * 7, [&](long i) { lemma1_check(mdp, pi, static_cast<int>(i % 5), static_cast<int>(i / 5), 0.5); },
            par);
    };
    serial = timed([&] { lemma_grid(false); });
    parallel = timed([&] { lemma_grid(true); });
    std::printf("lemma grid (5 states x 7 times): serial %.3fs  parallel %.3fs  speedup %.2fx\n",
                serial, parallel, serial / parallel);
    return 0;
}
