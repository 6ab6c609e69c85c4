// Compares the OpenMP operator kernels against a single-thread run on large
// synthetic MDPs and checks the results agree bitwise (per-state writes are
// independent, so thread count must not change the output).
#include <chrono>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "r2mdp/mdp.hpp"
#include "r2mdp/r2.hpp"

using namespace r2mdp;

namespace {

TabularMdp random_mdp(std::size_t n_states, std::size_t n_actions, double gamma,
                      std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    TabularMdp mdp;
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.gamma = gamma;
    mdp.reward = Mat(n_states, n_actions);
    mdp.transition.assign(n_states * n_actions * n_states, 0.0);
    mdp.mu0.assign(n_states, 1.0 / static_cast<double>(n_states));
    for (std::size_t s = 0; s < n_states; ++s)
        for (std::size_t a = 0; a < n_actions; ++a) {
            mdp.reward(s, a) = unif(rng);
            auto row = mdp.p_row(s, a);
            double sum = 0.0;
            for (std::size_t sp = 0; sp < n_states; ++sp) {
                row[sp] = unif(rng);
                sum += row[sp];
            }
            for (std::size_t sp = 0; sp < n_states; ++sp) row[sp] /= sum;
        }
    return mdp;
}

template <typename F>
double time_ms(F&& f, int reps) {
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) f();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

}  // namespace

int main(int argc, char** argv) {
    const std::size_t n_states = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 2048;
    const std::size_t n_actions = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 8;
    const int reps = argc > 3 ? std::atoi(argv[3]) : 5;

    std::mt19937_64 rng(7);
    const TabularMdp mdp = random_mdp(n_states, n_actions, 0.95, rng);
    const Policy pi = Policy::uniform(n_states, n_actions);
    ValueFn v(n_states);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (double& x : v) x = unif(rng);
    const auto cfg = R2Config::with_uniform_epsilon(
        UncertaintySpec::sarect_uniform(n_states, n_actions, 1e-3, 1e-5), n_states);

#ifndef _OPENMP
    std::cout << "built without OpenMP; serial timings only\n";
#endif

    struct Kernel {
        const char* name;
        std::function<ValueFn()> run;
    };
    const Kernel kernels[] = {
        {"bellman_eval_apply", [&] { return bellman_eval_apply(mdp, pi, v); }},
        {"bellman_opt_apply", [&] { return bellman_opt_apply(mdp, v); }},
        {"r2_bellman_eval_apply", [&] { return r2_bellman_eval_apply(mdp, cfg, pi, v); }},
        {"r2_bellman_opt_apply", [&] { return r2_bellman_opt_apply(mdp, cfg, v); }},
    };

    std::cout << "n_states=" << n_states << " n_actions=" << n_actions << " reps=" << reps << "\n";
    for (const auto& k : kernels) {
#ifdef _OPENMP
        omp_set_num_threads(1);
        const ValueFn serial = k.run();
        const double t_serial = time_ms(k.run, reps);
        omp_set_num_threads(omp_get_num_procs());
        const ValueFn parallel = k.run();
        const double t_parallel = time_ms(k.run, reps);
        const bool identical = serial == parallel;
        std::cout << k.name << ": serial " << t_serial << " ms, parallel " << t_parallel
                  << " ms, speedup " << t_serial / t_parallel
                  << (identical ? " (outputs identical)" : " (OUTPUTS DIFFER!)") << "\n";
        if (!identical) return 1;
#else
        std::cout << k.name << ": " << time_ms(k.run, reps) << " ms\n";
#endif
    }
    return 0;
}
