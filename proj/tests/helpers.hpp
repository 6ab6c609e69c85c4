#pragma once

// Shared fixtures and independent reference implementations ("oracles") used
// across the test binaries. The references are deliberately written as plain
// serial loops, independent of the library kernels they check.

#include <cmath>
#include <random>
#include <vector>

#include "r2mdp/mdp.hpp"
#include "r2mdp/norms.hpp"

namespace testing {

using namespace r2mdp;

// 2-state chain: action 0 ("stay") self-loops, action 1 ("go") swaps states;
// reward 1 exactly in state 1; gamma 0.5.
inline TabularMdp chain2() {
    TabularMdp mdp;
    mdp.n_states = 2;
    mdp.n_actions = 2;
    mdp.gamma = 0.5;
    mdp.mu0 = {1.0, 0.0};
    mdp.reward = Mat(2, 2, 0.0);
    mdp.reward(1, 0) = 1.0;
    mdp.reward(1, 1) = 1.0;
    mdp.transition.assign(2 * 2 * 2, 0.0);
    auto set = [&](std::size_t s, std::size_t a, std::size_t sp) {
        mdp.transition[(s * 2 + a) * 2 + sp] = 1.0;
    };
    set(0, 0, 0);
    set(0, 1, 1);
    set(1, 0, 1);
    set(1, 1, 0);
    return mdp;
}

inline TabularMdp random_mdp(std::mt19937_64& rng, std::size_t n_states, std::size_t n_actions,
                             double gamma) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    TabularMdp mdp;
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.gamma = gamma;
    mdp.reward = Mat(n_states, n_actions);
    mdp.transition.assign(n_states * n_actions * n_states, 0.0);
    mdp.mu0.assign(n_states, 0.0);
    double mass = 0.0;
    for (std::size_t s = 0; s < n_states; ++s) {
        mdp.mu0[s] = 0.05 + unif(rng);
        mass += mdp.mu0[s];
    }
    for (double& m : mdp.mu0) m /= mass;
    for (std::size_t s = 0; s < n_states; ++s)
        for (std::size_t a = 0; a < n_actions; ++a) {
            mdp.reward(s, a) = 2.0 * unif(rng) - 1.0;
            auto row = mdp.p_row(s, a);
            double sum = 0.0;
            for (std::size_t sp = 0; sp < n_states; ++sp) {
                row[sp] = 0.05 + unif(rng);  // strictly positive rows
                sum += row[sp];
            }
            for (std::size_t sp = 0; sp < n_states; ++sp) row[sp] /= sum;
        }
    return mdp;
}

inline Policy random_policy(std::mt19937_64& rng, std::size_t n_states, std::size_t n_actions) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Policy pi;
    pi.probs = Mat(n_states, n_actions);
    for (std::size_t s = 0; s < n_states; ++s) {
        double sum = 0.0;
        for (std::size_t a = 0; a < n_actions; ++a) {
            pi.probs(s, a) = 0.01 + unif(rng);
            sum += pi.probs(s, a);
        }
        for (std::size_t a = 0; a < n_actions; ++a) pi.probs(s, a) /= sum;
    }
    return pi;
}

// --- serial reference kernels -------------------------------------------

inline ValueFn ref_bellman_eval(const TabularMdp& mdp, const Policy& pi, const ValueFn& v) {
    ValueFn out(mdp.n_states, 0.0);
    for (std::size_t s = 0; s < mdp.n_states; ++s)
        for (std::size_t a = 0; a < mdp.n_actions; ++a) {
            double pv = 0.0;
            for (std::size_t sp = 0; sp < mdp.n_states; ++sp)
                pv += mdp.transition[(s * mdp.n_actions + a) * mdp.n_states + sp] * v[sp];
            out[s] += pi.probs(s, a) * (mdp.reward(s, a) + mdp.gamma * pv);
        }
    return out;
}

inline ValueFn ref_bellman_opt(const TabularMdp& mdp, const ValueFn& v) {
    ValueFn out(mdp.n_states, 0.0);
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
        double best = -1e300;
        for (std::size_t a = 0; a < mdp.n_actions; ++a) {
            double pv = 0.0;
            for (std::size_t sp = 0; sp < mdp.n_states; ++sp)
                pv += mdp.transition[(s * mdp.n_actions + a) * mdp.n_states + sp] * v[sp];
            best = std::max(best, mdp.reward(s, a) + mdp.gamma * pv);
        }
        out[s] = best;
    }
    return out;
}

// Value iteration to a tight fixed point, as an independent oracle.
inline ValueFn ref_value_iteration(const TabularMdp& mdp, double tol = 1e-12) {
    ValueFn v(mdp.n_states, 0.0);
    for (int it = 0; it < 1000000; ++it) {
        ValueFn next = ref_bellman_opt(mdp, v);
        double res = 0.0;
        for (std::size_t s = 0; s < v.size(); ++s) res = std::max(res, std::abs(next[s] - v[s]));
        v = std::move(next);
        if (res <= tol) break;
    }
    return v;
}

// Brute-force active-set QP for the simplex projection, exact for small dims.
inline std::vector<double> ref_simplex_projection(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<double> best;
    double best_dist = 1e300;
    for (std::size_t mask = 1; mask < (1u << n); ++mask) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (1u << i)) {
                sum += x[i];
                ++count;
            }
        const double lambda = (sum - 1.0) / static_cast<double>(count);
        std::vector<double> cand(n, 0.0);
        bool feasible = true;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (1u << i)) {
                cand[i] = x[i] - lambda;
                if (cand[i] < -1e-12) feasible = false;
            }
        if (!feasible) continue;
        double dist = 0.0;
        for (std::size_t i = 0; i < n; ++i) dist += (cand[i] - x[i]) * (cand[i] - x[i]);
        if (dist < best_dist) {
            best_dist = dist;
            best = std::move(cand);
        }
    }
    return best;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// Uniform point in the unit ball of the given norm (for support-function
// domination checks).
inline std::vector<double> sample_in_ball(std::mt19937_64& rng, std::size_t dim, double radius,
                                          Lp p) {
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::vector<double> x(dim);
    for (;;) {
        for (double& v : x) v = unif(rng);
        if (norm_eval(x, p) <= 1.0) break;
    }
    for (double& v : x) v *= radius;
    return x;
}

}  // namespace testing
