#include "r2mdp/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace r2mdp {

namespace {

void check_finite(std::span<const double> x, const char* what) {
    for (double v : x)
        if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + ": non-finite entry");
}

double eval_state(const TabularMdp& mdp, const Policy& policy, const ValueFn& v, std::size_t s) {
    double out = 0.0;
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
        const double pa = policy.probs(s, a);
        if (pa == 0.0) continue;
        auto row = mdp.p_row(s, a);
        double pv = 0.0;
        for (std::size_t sp = 0; sp < mdp.n_states; ++sp) pv += row[sp] * v[sp];
        out += pa * (mdp.reward(s, a) + mdp.gamma * pv);
    }
    return out;
}

}  // namespace

void TabularMdp::validate(double tol) const {
    if (n_states == 0 || n_actions == 0) throw std::invalid_argument("mdp: empty state or action space");
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("mdp: gamma must lie in (0,1)");
    if (transition.size() != n_states * n_actions * n_states)
        throw std::invalid_argument("mdp: transition tensor shape mismatch");
    if (reward.rows != n_states || reward.cols != n_actions)
        throw std::invalid_argument("mdp: reward shape mismatch");
    if (mu0.size() != n_states) throw std::invalid_argument("mdp: mu0 shape mismatch");
    check_finite(transition, "mdp transition");
    check_finite(reward.data, "mdp reward");
    check_finite(mu0, "mdp mu0");
    for (std::size_t s = 0; s < n_states; ++s)
        for (std::size_t a = 0; a < n_actions; ++a) {
            double sum = 0.0;
            for (double p : p_row(s, a)) {
                if (p < 0.0) throw std::invalid_argument("mdp: negative transition probability");
                sum += p;
            }
            if (std::abs(sum - 1.0) > tol)
                throw std::invalid_argument("mdp: transition row does not sum to 1");
        }
    double mass = 0.0;
    for (double m : mu0) {
        if (m <= 0.0) throw std::invalid_argument("mdp: mu0 must be entrywise positive");
        mass += m;
    }
    if (std::abs(mass - 1.0) > tol) throw std::invalid_argument("mdp: mu0 does not sum to 1");
}

Policy Policy::uniform(std::size_t n_states, std::size_t n_actions) {
    Policy pi;
    pi.probs = Mat(n_states, n_actions, 1.0 / static_cast<double>(n_actions));
    return pi;
}

Policy Policy::deterministic(std::size_t n_states, std::size_t n_actions,
                             const std::vector<std::size_t>& actions) {
    if (actions.size() != n_states) throw std::invalid_argument("policy: action list shape mismatch");
    Policy pi;
    pi.probs = Mat(n_states, n_actions, 0.0);
    for (std::size_t s = 0; s < n_states; ++s) {
        if (actions[s] >= n_actions) throw std::invalid_argument("policy: action index out of range");
        pi.probs(s, actions[s]) = 1.0;
    }
    return pi;
}

void Policy::validate(double tol) const {
    for (std::size_t s = 0; s < probs.rows; ++s) {
        double sum = 0.0;
        for (double p : probs.row(s)) {
            if (p < 0.0) throw std::invalid_argument("policy: negative probability");
            sum += p;
        }
        if (std::abs(sum - 1.0) > tol) throw std::invalid_argument("policy: row does not sum to 1");
    }
}

ValueFn bellman_eval_apply(const TabularMdp& mdp, const Policy& policy, const ValueFn& v) {
    if (v.size() != mdp.n_states || policy.probs.rows != mdp.n_states ||
        policy.probs.cols != mdp.n_actions)
        throw std::invalid_argument("bellman_eval_apply: shape mismatch");
    ValueFn out(mdp.n_states);
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(mdp.n_states);
#pragma omp parallel for if (mdp.n_states >= kParallelStateThreshold)
    for (std::ptrdiff_t s = 0; s < n; ++s) out[s] = eval_state(mdp, policy, v, s);
    return out;
}

ValueFn bellman_opt_apply(const TabularMdp& mdp, const ValueFn& v) {
    if (v.size() != mdp.n_states) throw std::invalid_argument("bellman_opt_apply: shape mismatch");
    ValueFn out(mdp.n_states);
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(mdp.n_states);
#pragma omp parallel for if (mdp.n_states >= kParallelStateThreshold)
    for (std::ptrdiff_t s = 0; s < n; ++s) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < mdp.n_actions; ++a) {
            auto row = mdp.p_row(s, a);
            double pv = 0.0;
            for (std::size_t sp = 0; sp < mdp.n_states; ++sp) pv += row[sp] * v[sp];
            best = std::max(best, mdp.reward(s, a) + mdp.gamma * pv);
        }
        out[s] = best;
    }
    return out;
}

QFn q_from_v(const TabularMdp& mdp, const ValueFn& v) {
    if (v.size() != mdp.n_states) throw std::invalid_argument("q_from_v: shape mismatch");
    QFn q(mdp.n_states, mdp.n_actions);
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(mdp.n_states);
#pragma omp parallel for if (mdp.n_states >= kParallelStateThreshold)
    for (std::ptrdiff_t s = 0; s < n; ++s)
        for (std::size_t a = 0; a < mdp.n_actions; ++a) {
            auto row = mdp.p_row(s, a);
            double pv = 0.0;
            for (std::size_t sp = 0; sp < mdp.n_states; ++sp) pv += row[sp] * v[sp];
            q(s, a) = mdp.reward(s, a) + mdp.gamma * pv;
        }
    return q;
}

Policy greedy_policy(const TabularMdp& mdp, const ValueFn& v) {
    const QFn q = q_from_v(mdp, v);
    std::vector<std::size_t> actions(mdp.n_states, 0);
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
        double best = q(s, 0);
        for (std::size_t a = 1; a < mdp.n_actions; ++a)
            if (q(s, a) > best) {
                best = q(s, a);
                actions[s] = a;
            }
    }
    return Policy::deterministic(mdp.n_states, mdp.n_actions, actions);
}

ValueFn policy_evaluation(const TabularMdp& mdp, const Policy& policy, double tol,
                          bool linear_solve) {
    if (tol <= 0.0) throw std::invalid_argument("policy_evaluation: tol must be positive");
    if (linear_solve) {
        // (I - gamma P^pi) v = r^pi
        const std::size_t n = mdp.n_states;
        std::vector<double> a(n * n, 0.0);
        Vec b(n, 0.0);
        for (std::size_t s = 0; s < n; ++s) {
            a[s * n + s] = 1.0;
            for (std::size_t act = 0; act < mdp.n_actions; ++act) {
                const double pa = policy.probs(s, act);
                if (pa == 0.0) continue;
                b[s] += pa * mdp.reward(s, act);
                auto row = mdp.p_row(s, act);
                for (std::size_t sp = 0; sp < n; ++sp) a[s * n + sp] -= mdp.gamma * pa * row[sp];
            }
        }
        return solve_dense(std::move(a), std::move(b), n);
    }
    ValueFn v(mdp.n_states, 0.0);
    for (std::size_t it = 0; it < kMaxFixedPointIters; ++it) {
        ValueFn next = bellman_eval_apply(mdp, policy, v);
        const double res = sup_norm_diff(next, v);
        v = std::move(next);
        if (res <= tol) return v;
        if (!std::isfinite(res)) break;
    }
    throw std::runtime_error("policy_evaluation: did not converge (corrupted input?)");
}

OccupancyMeasure occupancy_measure(const TabularMdp& mdp, const Policy& policy) {
    // Flow equation of the dual LP: (I - gamma P^pi_*) d = mu0, then
    // mu(s,a) = d(s) pi(a|s).
    const std::size_t n = mdp.n_states;
    std::vector<double> a(n * n, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
        a[s * n + s] += 1.0;
        for (std::size_t act = 0; act < mdp.n_actions; ++act) {
            const double pa = policy.probs(s, act);
            if (pa == 0.0) continue;
            auto row = mdp.p_row(s, act);
            for (std::size_t sp = 0; sp < n; ++sp) a[sp * n + s] -= mdp.gamma * pa * row[sp];
        }
    }
    Vec d = solve_dense(std::move(a), mdp.mu0, n);
    OccupancyMeasure occ;
    occ.mass = Mat(n, mdp.n_actions);
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t act = 0; act < mdp.n_actions; ++act)
            occ.mass(s, act) = d[s] * policy.probs(s, act);
    return occ;
}

double policy_return(const TabularMdp& mdp, const Policy& policy, double tol) {
    const ValueFn v = policy_evaluation(mdp, policy, tol);
    return std::inner_product(v.begin(), v.end(), mdp.mu0.begin(), 0.0);
}

Vec solve_dense(std::vector<double> a, Vec b, std::size_t n) {
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
        if (std::abs(a[piv * n + col]) < 1e-14)
            throw std::runtime_error("solve_dense: singular matrix");
        if (piv != col) {
            for (std::size_t c = col; c < n; ++c) std::swap(a[piv * n + c], a[col * n + c]);
            std::swap(b[piv], b[col]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r * n + col] / a[col * n + col];
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
            b[r] -= f * b[col];
        }
    }
    Vec x(n, 0.0);
    for (std::size_t ri = n; ri-- > 0;) {
        double acc = b[ri];
        for (std::size_t c = ri + 1; c < n; ++c) acc -= a[ri * n + c] * x[c];
        x[ri] = acc / a[ri * n + ri];
    }
    return x;
}

double sup_norm_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace r2mdp
