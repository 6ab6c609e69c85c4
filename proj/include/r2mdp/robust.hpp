#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "r2mdp/mdp.hpp"
#include "r2mdp/norms.hpp"

namespace r2mdp {

/// Ball uncertainty around the nominal model, factored per state (SRect) or
/// per state-action pair (SARect).
struct UncertaintySpec {
    enum class Rect { SRect, SARect };

    Rect rect = Rect::SARect;
    Mat reward_radius;      // SRect: n_states x 1; SARect: n_states x n_actions
    Mat transition_radius;  // same shape
    Lp reward_norm = Lp::L2;
    Lp transition_norm = Lp::L2;

    static UncertaintySpec srect_uniform(std::size_t n_states, double alpha_r, double alpha_p,
                                         Lp rnorm = Lp::L2, Lp tnorm = Lp::L2);
    static UncertaintySpec sarect_uniform(std::size_t n_states, std::size_t n_actions,
                                          double alpha_r, double alpha_p, Lp rnorm = Lp::L2,
                                          Lp tnorm = Lp::L2);

    bool srect() const { return rect == Rect::SRect; }
    double ar(std::size_t s, std::size_t a = 0) const {
        return srect() ? reward_radius(s, 0) : reward_radius(s, a);
    }
    double ap(std::size_t s, std::size_t a = 0) const {
        return srect() ? transition_radius(s, 0) : transition_radius(s, a);
    }

    void validate(std::size_t n_states, std::size_t n_actions) const;
};

/// Inner minimization backend. ClosedForm uses the dual-norm support
/// functions; Iterative runs projected gradient descent over the product
/// ball, emulating a black-box solver's cost profile.
struct InnerSolver {
    enum class Mode { ClosedForm, Iterative };

    Mode mode = Mode::ClosedForm;
    double step = 0.0;  // Iterative; <= 0 selects radius/10
    double tol = 1e-8;
    std::size_t max_iter = 10'000;
    std::size_t min_iter = 20;  // burn-in before convergence may be declared

    static InnerSolver closed_form() { return {}; }
    static InnerSolver iterative(double tol = 1e-8, std::size_t max_iter = 10'000) {
        return {Mode::Iterative, 0.0, tol, max_iter, 20};
    }
};

/// Raised when the iterative inner solver exhausts its cap; carries the best
/// objective value reached.
struct SolverError : std::runtime_error {
    double best_value;
    SolverError(const std::string& what, double best) : std::runtime_error(what), best_value(best) {}
};

/// Per-state worst case of the evaluation operator over the uncertainty set.
ValueFn robust_bellman_eval_apply(const TabularMdp& mdp, const UncertaintySpec& spec,
                                  const Policy& policy, const ValueFn& v,
                                  const InnerSolver& solver);

/// max over policies of the robust evaluation operator. SARect reduces to a
/// per-action closed form; SRect maximizes over the simplex numerically.
ValueFn robust_bellman_opt_apply(const TabularMdp& mdp, const UncertaintySpec& spec,
                                 const ValueFn& v, const InnerSolver& solver);

struct PerturbedModel {
    Vec transition;  // same flat layout as TabularMdp::transition
    Mat reward;
};

/// Analytic minimizer of the inner problem for l2 balls. The returned
/// transition block is intentionally not re-projected onto the simplex.
PerturbedModel worst_case_model(const TabularMdp& mdp, const UncertaintySpec& spec,
                                const Policy& policy, const ValueFn& v);

ValueFn robust_policy_evaluation(const TabularMdp& mdp, const UncertaintySpec& spec,
                                 const Policy& policy, double tol, const InnerSolver& solver);

struct MpiResult {
    Policy policy;
    ValueFn value;
    std::size_t iterations = 0;
    std::vector<double> residuals;
    std::vector<std::int64_t> wall_time_ns;  // cumulative, per outer iteration
};

/// Robust modified policy iteration: greedy step + m partial evaluations.
MpiResult robust_mpi(const TabularMdp& mdp, const UncertaintySpec& spec, std::size_t m, double tol,
                     const InnerSolver& solver);

/// radius * ||y||_dual via projected gradient ascent over the ball; shared by
/// the Iterative robust operators and the learning module's iterative TD
/// target. Throws SolverError past max_iter.
double iterative_support(double radius, Lp norm, std::span<const double> y,
                         const InnerSolver& solver);

}  // namespace r2mdp
