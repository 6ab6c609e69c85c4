#pragma once

#include <cstdint>
#include <vector>

#include "r2mdp/mdp.hpp"
#include "r2mdp/robust.hpp"

namespace r2mdp {

/// Configuration of the twice-regularized operators: the ball spec they stand
/// in for, the per-state slack used by the radius-bound check, and the greedy
/// accuracy for the s-rectangular numeric branch.
struct R2Config {
    UncertaintySpec spec;
    Vec epsilon;  // per-state, > 0
    double greedy_tol = 1e-10;

    static R2Config with_uniform_epsilon(UncertaintySpec spec, std::size_t n_states,
                                         double eps = 1e-2, double greedy_tol = 1e-10);
    void validate(std::size_t n_states, std::size_t n_actions) const;
};

struct Assumption1Report {
    double bound = 0.0;
    bool holds = false;
};

struct GradientReport {
    Mat gradient;  // over per-state softmax parameters theta[s][a]
    double objective = 0.0;
};

/// Evaluation operator regularized in both policy and value norms.
ValueFn r2_bellman_eval_apply(const TabularMdp& mdp, const R2Config& cfg, const Policy& policy,
                              const ValueFn& v);

/// Optimality operator; SARect has a per-action closed form, SRect maximizes
/// the penalized linear objective over the simplex.
ValueFn r2_bellman_opt_apply(const TabularMdp& mdp, const R2Config& cfg, const ValueFn& v);

/// Greedy policy of the optimality operator. SARect is deterministic with
/// lowest-index tie-break; SRect returns the unique penalized maximizer.
Policy r2_greedy(const TabularMdp& mdp, const R2Config& cfg, const ValueFn& v);

/// Per-state radius bound: min((1-gamma-eps_s)/(gamma |S|^{1/q}), min entry of
/// P0(.|s,.)), with q the dual index of the transition norm. holds iff the
/// transition radius at s stays below the bound.
std::vector<Assumption1Report> check_assumption_1(const TabularMdp& mdp, const R2Config& cfg);

/// Fixed point of the evaluation operator. When the radius bound fails the
/// iteration still runs (the bound is sufficient, not necessary); set warn to
/// emit a note on stderr.
ValueFn r2_policy_evaluation(const TabularMdp& mdp, const R2Config& cfg, const Policy& policy,
                             double tol, bool warn = true);

struct R2MpiResult {
    Policy policy;
    ValueFn value;
    std::size_t iterations = 0;
    std::vector<double> residuals;
    std::vector<std::int64_t> wall_time_ns;  // cumulative, per outer iteration
};

/// Modified policy iteration on the R2 operators: greedy step + m partial
/// evaluation sweeps until the sup-norm residual falls below tol.
R2MpiResult r2_mpi(const TabularMdp& mdp, const R2Config& cfg, std::size_t m, double tol);

/// q-variant of the evaluation operator (SARect only):
/// T^pi q(s,a) - alpha^r_sa - gamma alpha^P_sa ||q.pi||_dual with
/// (q.pi)(s') = sum_a pi_s'(a) q(s',a).
QFn r2_q_bellman_apply(const TabularMdp& mdp, const R2Config& cfg, const QFn& q,
                       const Policy& policy);

/// Analytic gradient of the reward-robust return J_U under a per-state
/// softmax parametrization theta. Requires a reward-only l2 spec
/// (transition radii all zero).
GradientReport reward_robust_policy_gradient(const TabularMdp& mdp, const UncertaintySpec& spec,
                                             const Mat& theta);

/// Rowwise softmax of theta, shared with the gradient tests.
Policy softmax_policy(const Mat& theta);

}  // namespace r2mdp
