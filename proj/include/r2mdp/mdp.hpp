#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace r2mdp {

using Vec = std::vector<double>;

/// Dense row-major matrix, just enough for reward tables, policies and
/// q-functions.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vec data;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
};

/// Finite nominal MDP (P0, r0, gamma, mu0) over n_states x n_actions.
/// transition is stored flat as [s][a][s'].
struct TabularMdp {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    Vec transition;   // n_states * n_actions * n_states
    Mat reward;       // n_states x n_actions
    double gamma = 0.0;
    Vec mu0;

    std::span<const double> p_row(std::size_t s, std::size_t a) const {
        return {transition.data() + (s * n_actions + a) * n_states, n_states};
    }
    std::span<double> p_row(std::size_t s, std::size_t a) {
        return {transition.data() + (s * n_actions + a) * n_states, n_states};
    }

    /// Throws std::invalid_argument when a stochasticity or shape invariant
    /// is violated beyond `tol`.
    void validate(double tol = 1e-12) const;
};

struct Policy {
    Mat probs;  // n_states x n_actions, row-stochastic

    static Policy uniform(std::size_t n_states, std::size_t n_actions);
    static Policy deterministic(std::size_t n_states, std::size_t n_actions,
                                const std::vector<std::size_t>& actions);
    void validate(double tol = 1e-12) const;
};

struct OccupancyMeasure {
    Mat mass;  // n_states x n_actions, discounted visitation mass
};

using ValueFn = Vec;
using QFn = Mat;

// ---------------------------------------------------------------------------
// Standard Bellman machinery.
// ---------------------------------------------------------------------------

/// r^pi + gamma P^pi v.
ValueFn bellman_eval_apply(const TabularMdp& mdp, const Policy& policy, const ValueFn& v);

/// Per-state max over actions of r0(s,a) + gamma <P0(.|s,a), v>.
ValueFn bellman_opt_apply(const TabularMdp& mdp, const ValueFn& v);

/// q(s,a) = r0(s,a) + gamma <P0(.|s,a), v>.
QFn q_from_v(const TabularMdp& mdp, const ValueFn& v);

/// Deterministic argmax policy of q_from_v; ties broken by lowest action index.
Policy greedy_policy(const TabularMdp& mdp, const ValueFn& v);

/// Fixed point of the evaluation operator to sup-norm residual <= tol.
/// With linear_solve=true the value is obtained from (I - gamma P^pi) v = r^pi
/// directly, as a cross-check mode.
ValueFn policy_evaluation(const TabularMdp& mdp, const Policy& policy, double tol,
                          bool linear_solve = false);

/// Discounted state-action visitation mass, from the linear flow equation.
OccupancyMeasure occupancy_measure(const TabularMdp& mdp, const Policy& policy);

/// <v^pi, mu0>.
double policy_return(const TabularMdp& mdp, const Policy& policy, double tol = 1e-10);

// ---------------------------------------------------------------------------
// Small dense solver, shared by the linear-solve evaluation mode and the
// occupancy computation.
// ---------------------------------------------------------------------------

/// Solves A x = b by Gaussian elimination with partial pivoting. A is n x n
/// row-major and is clobbered.
Vec solve_dense(std::vector<double> a, Vec b, std::size_t n);

double sup_norm_diff(std::span<const double> a, std::span<const double> b);

/// Iteration cap before an evaluation loop reports divergence.
inline constexpr std::size_t kMaxFixedPointIters = 1'000'000;

/// State count above which operator kernels use OpenMP. Small instances run
/// serially so micro-timings stay comparable.
inline constexpr std::size_t kParallelStateThreshold = 256;

}  // namespace r2mdp
