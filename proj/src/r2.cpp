#include "r2mdp/r2.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>

#include "r2mdp/regularizers.hpp"

namespace r2mdp {

namespace {

/// Per-state penalty of Def.-style twice regularization. For s-rectangular
/// specs the transition term factorizes into ||v|| ||pi_s|| under the dual
/// norms; for (s,a)-rectangular specs it is policy-weighted per action.
double r2_penalty(const R2Config& cfg, double gamma, std::span<const double> pi_s,
                  double v_dual_norm, std::size_t s) {
    const UncertaintySpec& spec = cfg.spec;
    if (spec.srect()) {
        const double reward_term = spec.ar(s) * norm_eval(pi_s, dual(spec.reward_norm));
        const double trans_term =
            gamma * spec.ap(s) * v_dual_norm * norm_eval(pi_s, dual(spec.transition_norm));
        return reward_term + trans_term;
    }
    double acc = 0.0;
    for (std::size_t a = 0; a < pi_s.size(); ++a)
        acc += pi_s[a] * (spec.ar(s, a) + gamma * spec.ap(s, a) * v_dual_norm);
    return acc;
}

std::vector<double> srect_r2_greedy_row(const TabularMdp& mdp, const R2Config& cfg,
                                        std::span<const double> q_row, double v_dual_norm,
                                        std::size_t s) {
    const UncertaintySpec& spec = cfg.spec;
    const double a1 = spec.ar(s);
    const double a2 = mdp.gamma * spec.ap(s) * v_dual_norm;
    const Lp n1 = dual(spec.reward_norm);
    const Lp n2 = dual(spec.transition_norm);
    auto vertex = [&] {
        std::size_t best = 0;
        for (std::size_t a = 1; a < q_row.size(); ++a)
            if (q_row[a] > q_row[best]) best = a;
        std::vector<double> row(q_row.size(), 0.0);
        row[best] = 1.0;
        return row;
    };
    if (a1 + a2 == 0.0) return vertex();
    if (n1 == Lp::L2 && n2 == Lp::L2) return simplex_l2_penalized_argmax(q_row, a1 + a2);
    if (n1 == n2 && n1 == Lp::L1) return vertex();  // l1 is constant on the simplex
    return simplex_norm_penalized_argmax(q_row, a1, n1, a2, n2, cfg.greedy_tol);
}

}  // namespace

R2Config R2Config::with_uniform_epsilon(UncertaintySpec spec, std::size_t n_states, double eps,
                                        double greedy_tol) {
    R2Config cfg;
    cfg.spec = std::move(spec);
    cfg.epsilon = Vec(n_states, eps);
    cfg.greedy_tol = greedy_tol;
    return cfg;
}

void R2Config::validate(std::size_t n_states, std::size_t n_actions) const {
    spec.validate(n_states, n_actions);
    if (epsilon.size() != n_states) throw std::invalid_argument("r2 config: epsilon shape mismatch");
    for (double e : epsilon)
        if (!(e > 0.0)) throw std::invalid_argument("r2 config: epsilon must be positive");
    if (!(greedy_tol > 0.0)) throw std::invalid_argument("r2 config: greedy_tol must be positive");
}

ValueFn r2_bellman_eval_apply(const TabularMdp& mdp, const R2Config& cfg, const Policy& policy,
                              const ValueFn& v) {
    cfg.validate(mdp.n_states, mdp.n_actions);
    ValueFn out = bellman_eval_apply(mdp, policy, v);
    const double vnorm = norm_eval(v, dual(cfg.spec.transition_norm));
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(mdp.n_states);
#pragma omp parallel for if (mdp.n_states >= kParallelStateThreshold)
    for (std::ptrdiff_t s = 0; s < n; ++s)
        out[s] -= r2_penalty(cfg, mdp.gamma, policy.probs.row(s), vnorm, s);
    return out;
}

ValueFn r2_bellman_opt_apply(const TabularMdp& mdp, const R2Config& cfg, const ValueFn& v) {
    cfg.validate(mdp.n_states, mdp.n_actions);
    const QFn q = q_from_v(mdp, v);
    const double vnorm = norm_eval(v, dual(cfg.spec.transition_norm));
    ValueFn out(mdp.n_states);
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(mdp.n_states);
    if (!cfg.spec.srect()) {
#pragma omp parallel for if (mdp.n_states >= kParallelStateThreshold)
        for (std::ptrdiff_t s = 0; s < n; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < mdp.n_actions; ++a)
                best = std::max(best, q(s, a) - cfg.spec.ar(s, a) -
                                          mdp.gamma * cfg.spec.ap(s, a) * vnorm);
            out[s] = best;
        }
        return out;
    }
#pragma omp parallel for if (mdp.n_states >= kParallelStateThreshold)
    for (std::ptrdiff_t s = 0; s < n; ++s) {
        const auto row = srect_r2_greedy_row(mdp, cfg, q.row(s), vnorm, s);
        double dot = 0.0;
        for (std::size_t a = 0; a < row.size(); ++a) dot += row[a] * q(s, a);
        out[s] = dot - r2_penalty(cfg, mdp.gamma, row, vnorm, s);
    }
    return out;
}

Policy r2_greedy(const TabularMdp& mdp, const R2Config& cfg, const ValueFn& v) {
    cfg.validate(mdp.n_states, mdp.n_actions);
    const QFn q = q_from_v(mdp, v);
    const double vnorm = norm_eval(v, dual(cfg.spec.transition_norm));
    if (!cfg.spec.srect()) {
        std::vector<std::size_t> actions(mdp.n_states, 0);
        for (std::size_t s = 0; s < mdp.n_states; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < mdp.n_actions; ++a) {
                const double val = q(s, a) - cfg.spec.ar(s, a) - mdp.gamma * cfg.spec.ap(s, a) * vnorm;
                if (val > best) {
                    best = val;
                    actions[s] = a;
                }
            }
        }
        return Policy::deterministic(mdp.n_states, mdp.n_actions, actions);
    }
    Policy pi;
    pi.probs = Mat(mdp.n_states, mdp.n_actions);
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
        const auto row = srect_r2_greedy_row(mdp, cfg, q.row(s), vnorm, s);
        std::copy(row.begin(), row.end(), pi.probs.row(s).begin());
    }
    return pi;
}

std::vector<Assumption1Report> check_assumption_1(const TabularMdp& mdp, const R2Config& cfg) {
    cfg.validate(mdp.n_states, mdp.n_actions);
    const double dim_term = dim_pow_inv_dual(mdp.n_states, cfg.spec.transition_norm);
    std::vector<Assumption1Report> reports(mdp.n_states);
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
        const double slack = 1.0 - mdp.gamma - cfg.epsilon[s];
        double min_entry = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < mdp.n_actions; ++a)
            for (double p : mdp.p_row(s, a)) min_entry = std::min(min_entry, p);
        double bound = 0.0;
        if (slack > 0.0) bound = std::min(slack / (mdp.gamma * dim_term), min_entry);
        double radius = 0.0;
        if (cfg.spec.srect()) {
            radius = cfg.spec.ap(s);
        } else {
            for (std::size_t a = 0; a < mdp.n_actions; ++a)
                radius = std::max(radius, cfg.spec.ap(s, a));
        }
        reports[s] = {bound, radius <= bound};
    }
    return reports;
}

ValueFn r2_policy_evaluation(const TabularMdp& mdp, const R2Config& cfg, const Policy& policy,
                             double tol, bool warn) {
    if (tol <= 0.0) throw std::invalid_argument("r2_policy_evaluation: tol must be positive");
    if (warn) {
        const auto reports = check_assumption_1(mdp, cfg);
        for (std::size_t s = 0; s < reports.size(); ++s)
            if (!reports[s].holds) {
                std::cerr << "r2_policy_evaluation: radius bound fails at state " << s
                          << " (bound " << reports[s].bound << "); continuing anyway\n";
                break;
            }
    }
    ValueFn v(mdp.n_states, 0.0);
    for (std::size_t it = 0; it < kMaxFixedPointIters; ++it) {
        ValueFn next = r2_bellman_eval_apply(mdp, cfg, policy, v);
        const double res = sup_norm_diff(next, v);
        v = std::move(next);
        if (res <= tol) return v;
        if (!std::isfinite(res)) break;
    }
    throw std::runtime_error("r2_policy_evaluation: did not converge");
}

R2MpiResult r2_mpi(const TabularMdp& mdp, const R2Config& cfg, std::size_t m, double tol) {
    if (m < 1) throw std::invalid_argument("r2_mpi: m must be >= 1");
    if (tol <= 0.0) throw std::invalid_argument("r2_mpi: tol must be positive");
    cfg.validate(mdp.n_states, mdp.n_actions);
    const auto t0 = std::chrono::steady_clock::now();
    R2MpiResult result;
    ValueFn v(mdp.n_states, 0.0);
    Policy pi = Policy::uniform(mdp.n_states, mdp.n_actions);
    for (std::size_t it = 0; it < kMaxFixedPointIters; ++it) {
        pi = r2_greedy(mdp, cfg, v);
        ValueFn next = v;
        for (std::size_t j = 0; j < m; ++j) next = r2_bellman_eval_apply(mdp, cfg, pi, next);
        const double res = sup_norm_diff(next, v);
        v = std::move(next);
        result.residuals.push_back(res);
        result.wall_time_ns.push_back(
            std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0)
                .count());
        ++result.iterations;
        if (res <= tol) break;
        if (!std::isfinite(res)) throw std::runtime_error("r2_mpi: diverged");
    }
    result.policy = std::move(pi);
    result.value = std::move(v);
    return result;
}

QFn r2_q_bellman_apply(const TabularMdp& mdp, const R2Config& cfg, const QFn& q,
                       const Policy& policy) {
    cfg.validate(mdp.n_states, mdp.n_actions);
    if (cfg.spec.srect())
        throw std::invalid_argument("r2_q_bellman_apply: only (s,a)-rectangular specs supported");
    if (q.rows != mdp.n_states || q.cols != mdp.n_actions)
        throw std::invalid_argument("r2_q_bellman_apply: shape mismatch");
    // (q.pi)(s') = sum_a pi_s'(a) q(s',a)
    Vec qpi(mdp.n_states, 0.0);
    for (std::size_t sp = 0; sp < mdp.n_states; ++sp)
        for (std::size_t a = 0; a < mdp.n_actions; ++a) qpi[sp] += policy.probs(sp, a) * q(sp, a);
    const double qpi_norm = norm_eval(qpi, dual(cfg.spec.transition_norm));
    QFn out(mdp.n_states, mdp.n_actions);
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(mdp.n_states);
#pragma omp parallel for if (mdp.n_states >= kParallelStateThreshold)
    for (std::ptrdiff_t s = 0; s < n; ++s)
        for (std::size_t a = 0; a < mdp.n_actions; ++a) {
            auto row = mdp.p_row(s, a);
            double pv = 0.0;
            for (std::size_t sp = 0; sp < mdp.n_states; ++sp) pv += row[sp] * qpi[sp];
            out(s, a) = mdp.reward(s, a) + mdp.gamma * pv - cfg.spec.ar(s, a) -
                        mdp.gamma * cfg.spec.ap(s, a) * qpi_norm;
        }
    return out;
}

Policy softmax_policy(const Mat& theta) {
    Policy pi;
    pi.probs = Mat(theta.rows, theta.cols);
    for (std::size_t s = 0; s < theta.rows; ++s) {
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < theta.cols; ++a) m = std::max(m, theta(s, a));
        double z = 0.0;
        for (std::size_t a = 0; a < theta.cols; ++a) {
            pi.probs(s, a) = std::exp(theta(s, a) - m);
            z += pi.probs(s, a);
        }
        for (std::size_t a = 0; a < theta.cols; ++a) pi.probs(s, a) /= z;
    }
    return pi;
}

GradientReport reward_robust_policy_gradient(const TabularMdp& mdp, const UncertaintySpec& spec,
                                             const Mat& theta) {
    spec.validate(mdp.n_states, mdp.n_actions);
    if (!spec.srect())
        throw std::invalid_argument("reward_robust_policy_gradient: s-rectangular specs only");
    if (spec.reward_norm != Lp::L2)
        throw std::invalid_argument("reward_robust_policy_gradient: l2 reward balls only");
    for (double r : spec.transition_radius.data)
        if (r != 0.0)
            throw std::invalid_argument(
                "reward_robust_policy_gradient: transition-uncertain gradient unsupported");
    if (theta.rows != mdp.n_states || theta.cols != mdp.n_actions)
        throw std::invalid_argument("reward_robust_policy_gradient: theta shape mismatch");

    const Policy pi = softmax_policy(theta);
    const ValueFn v_u =
        robust_policy_evaluation(mdp, spec, pi, 1e-13, InnerSolver::closed_form());
    const QFn q_u = q_from_v(mdp, v_u);
    const OccupancyMeasure mu = occupancy_measure(mdp, pi);

    GradientReport report;
    report.gradient = Mat(mdp.n_states, mdp.n_actions);
    report.objective = std::inner_product(v_u.begin(), v_u.end(), mdp.mu0.begin(), 0.0);
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
        const double pnorm = norm_eval(pi.probs.row(s), Lp::L2);
        double weighted = 0.0;
        std::vector<double> w(mdp.n_actions);
        for (std::size_t a = 0; a < mdp.n_actions; ++a) {
            w[a] = q_u(s, a) - spec.ar(s) * pi.probs(s, a) / pnorm;
            weighted += mu.mass(s, a) * w[a];
        }
        for (std::size_t b = 0; b < mdp.n_actions; ++b)
            report.gradient(s, b) = mu.mass(s, b) * w[b] - pi.probs(s, b) * weighted;
    }
    return report;
}

}  // namespace r2mdp
