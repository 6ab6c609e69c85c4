#include "r2mdp/regularizers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace r2mdp {

namespace {

void check_simplex(std::span<const double> row, double tol = 1e-9) {
    double sum = 0.0;
    for (double p : row) {
        if (p < -tol) throw std::domain_error("policy row has negative entries");
        sum += p;
    }
    if (std::abs(sum - 1.0) > tol) throw std::domain_error("policy row off the simplex");
}

std::vector<double> softmax(std::span<const double> q, std::span<const double> log_weights) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < q.size(); ++a)
        m = std::max(m, q[a] + (log_weights.empty() ? 0.0 : log_weights[a]));
    std::vector<double> out(q.size());
    double z = 0.0;
    for (std::size_t a = 0; a < q.size(); ++a) {
        out[a] = std::exp(q[a] + (log_weights.empty() ? 0.0 : log_weights[a]) - m);
        z += out[a];
    }
    for (double& p : out) p /= z;
    return out;
}

double logsumexp(std::span<const double> q, std::span<const double> log_weights) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < q.size(); ++a)
        m = std::max(m, q[a] + (log_weights.empty() ? 0.0 : log_weights[a]));
    double z = 0.0;
    for (std::size_t a = 0; a < q.size(); ++a)
        z += std::exp(q[a] + (log_weights.empty() ? 0.0 : log_weights[a]) - m);
    return m + std::log(z);
}

// Sparsemax support set and threshold tau (Lee et al. style): sort q
// descending, keep the largest k with 1 + k q_(k) > sum_{j<=k} q_(j).
struct SparsemaxResult {
    std::size_t support = 0;
    double tau = 0.0;
    std::vector<double> sorted;
};

SparsemaxResult sparsemax_threshold(std::span<const double> q) {
    SparsemaxResult r;
    r.sorted.assign(q.begin(), q.end());
    std::sort(r.sorted.begin(), r.sorted.end(), std::greater<>());
    double cum = 0.0;
    for (std::size_t k = 1; k <= r.sorted.size(); ++k) {
        cum += r.sorted[k - 1];
        if (1.0 + static_cast<double>(k) * r.sorted[k - 1] > cum) {
            r.support = k;
            r.tau = (cum - 1.0) / static_cast<double>(k);
        } else {
            break;
        }
    }
    return r;
}

std::vector<double> deterministic_argmax(std::span<const double> q) {
    std::size_t best = 0;
    for (std::size_t a = 1; a < q.size(); ++a)
        if (q[a] > q[best]) best = a;
    std::vector<double> out(q.size(), 0.0);
    out[best] = 1.0;
    return out;
}

std::vector<double> norm_subgradient(std::span<const double> pi, Lp p) {
    std::vector<double> g(pi.size(), 0.0);
    switch (p) {
        case Lp::L1:
            // pi >= 0 on the simplex, so the l1 norm is constant there.
            for (double& v : g) v = 1.0;
            break;
        case Lp::L2: {
            const double n = norm_eval(pi, Lp::L2);
            if (n > 0.0)
                for (std::size_t i = 0; i < pi.size(); ++i) g[i] = pi[i] / n;
            break;
        }
        case Lp::LInf: {
            std::size_t best = 0;
            for (std::size_t i = 1; i < pi.size(); ++i)
                if (pi[i] > pi[best]) best = i;
            g[best] = 1.0;
            break;
        }
    }
    return g;
}

}  // namespace

double reg_value(const Regularizer& reg, std::span<const double> policy_row) {
    check_simplex(policy_row);
    switch (reg.kind) {
        case Regularizer::Kind::Shannon: {
            double acc = 0.0;
            for (double p : policy_row)
                if (p > 0.0) acc += p * std::log(p);
            return acc;
        }
        case Regularizer::Kind::KL: {
            if (reg.reference.size() != policy_row.size())
                throw std::invalid_argument("KL reference shape mismatch");
            double acc = 0.0;
            for (std::size_t a = 0; a < policy_row.size(); ++a)
                if (policy_row[a] > 0.0) acc += policy_row[a] * std::log(policy_row[a] / reg.reference[a]);
            return acc;
        }
        case Regularizer::Kind::Tsallis: {
            const double n = norm_eval(policy_row, Lp::L2);
            return 0.5 * (n * n - 1.0);
        }
        case Regularizer::Kind::R2Norm:
            return reg.weight * norm_eval(policy_row, dual(reg.norm));
    }
    return 0.0;
}

double conjugate_value(const Regularizer& reg, std::span<const double> q_row) {
    switch (reg.kind) {
        case Regularizer::Kind::Shannon:
            return logsumexp(q_row, {});
        case Regularizer::Kind::KL: {
            std::vector<double> logd(reg.reference.size());
            for (std::size_t a = 0; a < logd.size(); ++a) logd[a] = std::log(reg.reference[a]);
            return logsumexp(q_row, logd);
        }
        case Regularizer::Kind::Tsallis: {
            const auto r = sparsemax_threshold(q_row);
            double acc = 0.0;
            for (std::size_t k = 0; k < r.support; ++k)
                acc += r.sorted[k] * r.sorted[k] - r.tau * r.tau;
            return 0.5 + 0.5 * acc;
        }
        case Regularizer::Kind::R2Norm: {
            const auto pi = conjugate_gradient(reg, q_row);
            double dot = 0.0;
            for (std::size_t a = 0; a < pi.size(); ++a) dot += pi[a] * q_row[a];
            return dot - reg.weight * norm_eval(pi, dual(reg.norm));
        }
    }
    return 0.0;
}

std::vector<double> conjugate_gradient(const Regularizer& reg, std::span<const double> q_row) {
    switch (reg.kind) {
        case Regularizer::Kind::Shannon:
            return softmax(q_row, {});
        case Regularizer::Kind::KL: {
            std::vector<double> logd(reg.reference.size());
            for (std::size_t a = 0; a < logd.size(); ++a) logd[a] = std::log(reg.reference[a]);
            return softmax(q_row, logd);
        }
        case Regularizer::Kind::Tsallis: {
            const auto r = sparsemax_threshold(q_row);
            std::vector<double> out(q_row.size());
            for (std::size_t a = 0; a < q_row.size(); ++a) out[a] = std::max(0.0, q_row[a] - r.tau);
            return out;
        }
        case Regularizer::Kind::R2Norm: {
            if (reg.weight == 0.0) return deterministic_argmax(q_row);
            const Lp d = dual(reg.norm);
            if (d == Lp::L2) return simplex_l2_penalized_argmax(q_row, reg.weight);
            if (d == Lp::L1) {
                // l1 norm is constant on the simplex; the maximizer is the
                // plain argmax vertex.
                return deterministic_argmax(q_row);
            }
            return simplex_norm_penalized_argmax(q_row, reg.weight, reg.norm, 0.0, Lp::L2);
        }
    }
    return {};
}

double support_entropy_set(const Regularizer& reg, std::span<const double> policy_row) {
    check_simplex(policy_row);
    switch (reg.kind) {
        case Regularizer::Kind::Shannon: {
            double acc = 0.0;
            for (double p : policy_row) {
                if (p <= 0.0) throw std::domain_error("Shannon interval set diverges at the boundary");
                acc += p * std::log(p);
            }
            return acc;
        }
        case Regularizer::Kind::KL: {
            double acc = 0.0;
            for (std::size_t a = 0; a < policy_row.size(); ++a) {
                const double p = policy_row[a];
                if (p <= 0.0) throw std::domain_error("KL interval set diverges at the boundary");
                acc += p * (std::log(p) - std::log(reg.reference[a]));
            }
            return acc;
        }
        case Regularizer::Kind::Tsallis: {
            double acc = 0.0;
            for (double p : policy_row) acc += -(1.0 - p) / 2.0 * p;
            return acc;
        }
        case Regularizer::Kind::R2Norm:
            throw std::invalid_argument("support_entropy_set: not an entropy-induced set");
    }
    return 0.0;
}

std::vector<double> simplex_projection(std::span<const double> x) {
    std::vector<double> u(x.begin(), x.end());
    std::sort(u.begin(), u.end(), std::greater<>());
    double cum = 0.0;
    double theta = 0.0;
    std::size_t rho = 0;
    for (std::size_t j = 1; j <= u.size(); ++j) {
        cum += u[j - 1];
        const double t = (cum - 1.0) / static_cast<double>(j);
        if (u[j - 1] - t > 0.0) {
            rho = j;
            theta = t;
        }
    }
    (void)rho;
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::max(0.0, x[i] - theta);
    return out;
}

std::vector<double> simplex_norm_penalized_argmax(std::span<const double> q, double a1, Lp n1,
                                                  double a2, Lp n2, double tol,
                                                  std::size_t max_iter) {
    const std::size_t dim = q.size();
    std::vector<double> pi(dim, 1.0 / static_cast<double>(dim));
    const double lipschitz = 1.0 + (a1 + a2) * static_cast<double>(dim);
    const double step = 1.0 / lipschitz;

    auto objective = [&](const std::vector<double>& p) {
        double dot = 0.0;
        for (std::size_t i = 0; i < dim; ++i) dot += p[i] * q[i];
        return dot - a1 * norm_eval(p, n1) - a2 * norm_eval(p, n2);
    };

    std::vector<double> best = pi;
    double best_obj = objective(pi);
    std::size_t stale = 0;
    for (std::size_t it = 0; it < max_iter; ++it) {
        const auto g1 = norm_subgradient(pi, n1);
        const auto g2 = norm_subgradient(pi, n2);
        std::vector<double> y(dim);
        for (std::size_t i = 0; i < dim; ++i) y[i] = pi[i] + step * (q[i] - a1 * g1[i] - a2 * g2[i]);
        pi = simplex_projection(y);
        const double obj = objective(pi);
        if (obj > best_obj + tol) {
            best_obj = obj;
            best = pi;
            stale = 0;
        } else {
            if (obj > best_obj) {
                best_obj = obj;
                best = pi;
            }
            if (++stale >= 50) return best;
        }
    }
    throw std::runtime_error("simplex_norm_penalized_argmax: did not converge");
}

std::vector<double> simplex_l2_penalized_argmax(std::span<const double> q, double kappa) {
    if (kappa <= 0.0) return deterministic_argmax(q);
    std::vector<double> sorted(q.begin(), q.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const std::size_t dim = sorted.size();
    // Find lambda with sum_a (q(a) - lambda)_+^2 = kappa^2; the left-hand
    // side is piecewise quadratic and decreasing in lambda.
    double s = 0.0, qq = 0.0;
    double lambda = sorted[0];
    for (std::size_t k = 1; k <= dim; ++k) {
        s += sorted[k - 1];
        qq += sorted[k - 1] * sorted[k - 1];
        // Value at the lower end of this segment (lambda = next sorted entry,
        // or -inf on the last segment).
        const double kd = static_cast<double>(k);
        if (k < dim) {
            const double lo = sorted[k];
            double f_lo = 0.0;
            for (std::size_t i = 0; i < k; ++i) {
                const double d = sorted[i] - lo;
                f_lo += d * d;
            }
            if (f_lo < kappa * kappa) continue;  // root lies further down
        }
        const double disc = s * s - kd * (qq - kappa * kappa);
        lambda = (s - std::sqrt(std::max(0.0, disc))) / kd;
        break;
    }
    std::vector<double> out(q.size());
    double z = 0.0;
    for (std::size_t a = 0; a < q.size(); ++a) {
        out[a] = std::max(0.0, q[a] - lambda);
        z += out[a];
    }
    if (z <= 0.0) return deterministic_argmax(q);
    for (double& p : out) p /= z;
    return out;
}

}  // namespace r2mdp
