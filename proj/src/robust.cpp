#include "r2mdp/robust.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>

#include "r2mdp/regularizers.hpp"

namespace r2mdp {

namespace {

void project_ball(std::vector<double>& x, double radius, Lp p) {
    switch (p) {
        case Lp::L2: {
            const double n = norm_eval(x, Lp::L2);
            if (n > radius)
                for (double& v : x) v *= radius / n;
            break;
        }
        case Lp::LInf:
            for (double& v : x) v = std::clamp(v, -radius, radius);
            break;
        case Lp::L1: {
            if (norm_eval(x, Lp::L1) <= radius) break;
            std::vector<double> u(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) u[i] = std::abs(x[i]);
            std::sort(u.begin(), u.end(), std::greater<>());
            double cum = 0.0, theta = 0.0;
            for (std::size_t j = 1; j <= u.size(); ++j) {
                cum += u[j - 1];
                const double t = (cum - radius) / static_cast<double>(j);
                if (u[j - 1] - t > 0.0) theta = t;
            }
            for (double& v : x) {
                const double mag = std::max(0.0, std::abs(v) - theta);
                v = v < 0.0 ? -mag : mag;
            }
            break;
        }
    }
}

/// sigma of the ball in the configured solver mode.
double support(double radius, Lp norm, std::span<const double> y, const InnerSolver& solver) {
    if (solver.mode == InnerSolver::Mode::ClosedForm) return support_ball(radius, norm, y);
    return iterative_support(radius, norm, y, solver);
}

/// gamma * v outer pi_s, flattened [s'][a]; the perturbation direction of the
/// s-rectangular transition block.
std::vector<double> transition_direction(const TabularMdp& mdp, std::span<const double> pi_s,
                                         const ValueFn& v) {
    std::vector<double> dir(mdp.n_states * mdp.n_actions);
    for (std::size_t sp = 0; sp < mdp.n_states; ++sp)
        for (std::size_t a = 0; a < mdp.n_actions; ++a)
            dir[sp * mdp.n_actions + a] = mdp.gamma * v[sp] * pi_s[a];
    return dir;
}

/// Penalty subtracted from the nominal evaluation operator at state s.
double robust_penalty(const TabularMdp& mdp, const UncertaintySpec& spec,
                      std::span<const double> pi_s, const ValueFn& v, std::size_t s,
                      const InnerSolver& solver) {
    if (spec.srect()) {
        const double reward_term = support(spec.ar(s), spec.reward_norm, pi_s, solver);
        const auto dir = transition_direction(mdp, pi_s, v);
        const double trans_term = support(spec.ap(s), spec.transition_norm, dir, solver);
        return reward_term + trans_term;
    }
    double acc = 0.0;
    const double one = 1.0;
    std::vector<double> gv(mdp.n_states);
    for (std::size_t sp = 0; sp < mdp.n_states; ++sp) gv[sp] = mdp.gamma * v[sp];
    for (std::size_t a = 0; a < pi_s.size(); ++a) {
        if (pi_s[a] == 0.0) continue;
        const double reward_term = support(spec.ar(s, a), spec.reward_norm, {&one, 1}, solver);
        const double trans_term = support(spec.ap(s, a), spec.transition_norm, gv, solver);
        acc += pi_s[a] * (reward_term + trans_term);
    }
    return acc;
}

std::vector<double> srect_greedy_row(const TabularMdp& mdp, const UncertaintySpec& spec,
                                     std::span<const double> q_row, const ValueFn& v,
                                     std::size_t s) {
    const double a1 = spec.ar(s);
    const double a2 = mdp.gamma * spec.ap(s) * norm_eval(v, dual(spec.transition_norm));
    const Lp n1 = dual(spec.reward_norm);
    const Lp n2 = dual(spec.transition_norm);
    if (a1 + a2 == 0.0) {
        std::size_t best = 0;
        for (std::size_t a = 1; a < q_row.size(); ++a)
            if (q_row[a] > q_row[best]) best = a;
        std::vector<double> row(q_row.size(), 0.0);
        row[best] = 1.0;
        return row;
    }
    if (n1 == Lp::L2 && n2 == Lp::L2) return simplex_l2_penalized_argmax(q_row, a1 + a2);
    if (n1 == n2) {
        if (n1 == Lp::L1) {  // constant on the simplex
            std::size_t best = 0;
            for (std::size_t a = 1; a < q_row.size(); ++a)
                if (q_row[a] > q_row[best]) best = a;
            std::vector<double> row(q_row.size(), 0.0);
            row[best] = 1.0;
            return row;
        }
        return simplex_norm_penalized_argmax(q_row, a1 + a2, n1, 0.0, Lp::L2);
    }
    return simplex_norm_penalized_argmax(q_row, a1, n1, a2, n2);
}

}  // namespace

UncertaintySpec UncertaintySpec::srect_uniform(std::size_t n_states, double alpha_r, double alpha_p,
                                               Lp rnorm, Lp tnorm) {
    UncertaintySpec spec;
    spec.rect = Rect::SRect;
    spec.reward_radius = Mat(n_states, 1, alpha_r);
    spec.transition_radius = Mat(n_states, 1, alpha_p);
    spec.reward_norm = rnorm;
    spec.transition_norm = tnorm;
    return spec;
}

UncertaintySpec UncertaintySpec::sarect_uniform(std::size_t n_states, std::size_t n_actions,
                                                double alpha_r, double alpha_p, Lp rnorm,
                                                Lp tnorm) {
    UncertaintySpec spec;
    spec.rect = Rect::SARect;
    spec.reward_radius = Mat(n_states, n_actions, alpha_r);
    spec.transition_radius = Mat(n_states, n_actions, alpha_p);
    spec.reward_norm = rnorm;
    spec.transition_norm = tnorm;
    return spec;
}

void UncertaintySpec::validate(std::size_t n_states, std::size_t n_actions) const {
    const std::size_t want_cols = srect() ? 1 : n_actions;
    if (reward_radius.rows != n_states || reward_radius.cols != want_cols ||
        transition_radius.rows != n_states || transition_radius.cols != want_cols)
        throw std::invalid_argument("uncertainty spec: radius shape mismatch");
    for (double r : reward_radius.data)
        if (r < 0.0 || !std::isfinite(r)) throw std::invalid_argument("uncertainty spec: bad reward radius");
    for (double r : transition_radius.data)
        if (r < 0.0 || !std::isfinite(r))
            throw std::invalid_argument("uncertainty spec: bad transition radius");
}

double iterative_support(double radius, Lp norm, std::span<const double> y,
                         const InnerSolver& solver) {
    if (radius < 0.0) throw std::domain_error("iterative_support: negative radius");
    if (radius == 0.0) return 0.0;
    const double ynorm = norm_eval(y, Lp::L2);
    if (ynorm == 0.0) return 0.0;
    const double step_len = solver.step > 0.0 ? solver.step : radius / 10.0;
    std::vector<double> x(y.size(), 0.0);
    double prev = 0.0;
    double best = 0.0;
    for (std::size_t it = 0; it < solver.max_iter; ++it) {
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += step_len * y[i] / ynorm;
        project_ball(x, radius, norm);
        double f = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) f += x[i] * y[i];
        best = std::max(best, f);
        if (it + 1 >= solver.min_iter && std::abs(f - prev) < solver.tol) return best;
        prev = f;
    }
    throw SolverError("iterative_support: inner solver exhausted its cap", best);
}

ValueFn robust_bellman_eval_apply(const TabularMdp& mdp, const UncertaintySpec& spec,
                                  const Policy& policy, const ValueFn& v,
                                  const InnerSolver& solver) {
    spec.validate(mdp.n_states, mdp.n_actions);
    ValueFn out = bellman_eval_apply(mdp, policy, v);
    for (std::size_t s = 0; s < mdp.n_states; ++s)
        out[s] -= robust_penalty(mdp, spec, policy.probs.row(s), v, s, solver);
    return out;
}

ValueFn robust_bellman_opt_apply(const TabularMdp& mdp, const UncertaintySpec& spec,
                                 const ValueFn& v, const InnerSolver& solver) {
    spec.validate(mdp.n_states, mdp.n_actions);
    const QFn q = q_from_v(mdp, v);
    ValueFn out(mdp.n_states);
    if (!spec.srect()) {
        const double one = 1.0;
        std::vector<double> gv(mdp.n_states);
        for (std::size_t sp = 0; sp < mdp.n_states; ++sp) gv[sp] = mdp.gamma * v[sp];
        for (std::size_t s = 0; s < mdp.n_states; ++s) {
            double bestv = -std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < mdp.n_actions; ++a) {
                const double val = q(s, a) - support(spec.ar(s, a), spec.reward_norm, {&one, 1}, solver) -
                                   support(spec.ap(s, a), spec.transition_norm, gv, solver);
                bestv = std::max(bestv, val);
            }
            out[s] = bestv;
        }
        return out;
    }
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
        const auto row = srect_greedy_row(mdp, spec, q.row(s), v, s);
        double dot = 0.0;
        for (std::size_t a = 0; a < row.size(); ++a) dot += row[a] * q(s, a);
        out[s] = dot - robust_penalty(mdp, spec, row, v, s, solver);
    }
    return out;
}

PerturbedModel worst_case_model(const TabularMdp& mdp, const UncertaintySpec& spec,
                                const Policy& policy, const ValueFn& v) {
    spec.validate(mdp.n_states, mdp.n_actions);
    if (spec.reward_norm != Lp::L2 || spec.transition_norm != Lp::L2)
        throw std::invalid_argument("worst_case_model: analytic maximizer requires l2 balls");
    PerturbedModel model{mdp.transition, mdp.reward};
    const double vnorm = norm_eval(v, Lp::L2);
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
        const auto pi_s = policy.probs.row(s);
        const double pnorm = norm_eval(pi_s, Lp::L2);
        if (spec.srect()) {
            if (pnorm > 0.0)
                for (std::size_t a = 0; a < mdp.n_actions; ++a)
                    model.reward(s, a) -= spec.ar(s) * pi_s[a] / pnorm;
            if (vnorm > 0.0 && pnorm > 0.0) {
                const double denom = vnorm * pnorm;  // ||v outer pi||_2 factorizes
                for (std::size_t a = 0; a < mdp.n_actions; ++a) {
                    auto row = model.transition.data() + (s * mdp.n_actions + a) * mdp.n_states;
                    for (std::size_t sp = 0; sp < mdp.n_states; ++sp)
                        row[sp] -= spec.ap(s) * v[sp] * pi_s[a] / denom;
                }
            }
        } else {
            for (std::size_t a = 0; a < mdp.n_actions; ++a) {
                model.reward(s, a) -= spec.ar(s, a);
                if (vnorm > 0.0) {
                    auto row = model.transition.data() + (s * mdp.n_actions + a) * mdp.n_states;
                    for (std::size_t sp = 0; sp < mdp.n_states; ++sp)
                        row[sp] -= spec.ap(s, a) * v[sp] / vnorm;
                }
            }
        }
    }
    return model;
}

ValueFn robust_policy_evaluation(const TabularMdp& mdp, const UncertaintySpec& spec,
                                 const Policy& policy, double tol, const InnerSolver& solver) {
    if (tol <= 0.0) throw std::invalid_argument("robust_policy_evaluation: tol must be positive");
    ValueFn v(mdp.n_states, 0.0);
    for (std::size_t it = 0; it < kMaxFixedPointIters; ++it) {
        ValueFn next = robust_bellman_eval_apply(mdp, spec, policy, v, solver);
        const double res = sup_norm_diff(next, v);
        v = std::move(next);
        if (res <= tol) return v;
        if (!std::isfinite(res)) break;
    }
    throw std::runtime_error("robust_policy_evaluation: did not converge");
}

MpiResult robust_mpi(const TabularMdp& mdp, const UncertaintySpec& spec, std::size_t m, double tol,
                     const InnerSolver& solver) {
    if (m < 1) throw std::invalid_argument("robust_mpi: m must be >= 1");
    if (tol <= 0.0) throw std::invalid_argument("robust_mpi: tol must be positive");
    spec.validate(mdp.n_states, mdp.n_actions);
    const auto t0 = std::chrono::steady_clock::now();
    MpiResult result;
    ValueFn v(mdp.n_states, 0.0);
    Policy pi = Policy::uniform(mdp.n_states, mdp.n_actions);
    for (std::size_t it = 0; it < kMaxFixedPointIters; ++it) {
        // Greedy step.
        const QFn q = q_from_v(mdp, v);
        if (!spec.srect()) {
            const double one = 1.0;
            std::vector<double> gv(mdp.n_states);
            for (std::size_t sp = 0; sp < mdp.n_states; ++sp) gv[sp] = mdp.gamma * v[sp];
            std::vector<std::size_t> actions(mdp.n_states, 0);
            for (std::size_t s = 0; s < mdp.n_states; ++s) {
                double bestv = -std::numeric_limits<double>::infinity();
                for (std::size_t a = 0; a < mdp.n_actions; ++a) {
                    const double val =
                        q(s, a) - support(spec.ar(s, a), spec.reward_norm, {&one, 1}, solver) -
                        support(spec.ap(s, a), spec.transition_norm, gv, solver);
                    if (val > bestv) {
                        bestv = val;
                        actions[s] = a;
                    }
                }
            }
            pi = Policy::deterministic(mdp.n_states, mdp.n_actions, actions);
        } else {
            for (std::size_t s = 0; s < mdp.n_states; ++s) {
                const auto row = srect_greedy_row(mdp, spec, q.row(s), v, s);
                std::copy(row.begin(), row.end(), pi.probs.row(s).begin());
            }
        }
        // m partial evaluations.
        ValueFn next = v;
        for (std::size_t j = 0; j < m; ++j)
            next = robust_bellman_eval_apply(mdp, spec, pi, next, solver);
        const double res = sup_norm_diff(next, v);
        v = std::move(next);
        result.residuals.push_back(res);
        result.wall_time_ns.push_back(
            std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0)
                .count());
        ++result.iterations;
        if (res <= tol) break;
        if (!std::isfinite(res)) throw std::runtime_error("robust_mpi: diverged");
    }
    result.policy = std::move(pi);
    result.value = std::move(v);
    return result;
}

}  // namespace r2mdp
