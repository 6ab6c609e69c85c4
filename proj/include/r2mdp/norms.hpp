#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>

namespace r2mdp {

/// Supported vector norms. Only these three have exact dual-norm formulas,
/// which the ball support functions below rely on.
enum class Lp { L1, L2, LInf };

constexpr Lp dual(Lp p) noexcept {
    switch (p) {
        case Lp::L1: return Lp::LInf;
        case Lp::LInf: return Lp::L1;
        default: return Lp::L2;
    }
}

inline double norm_eval(std::span<const double> x, Lp p) {
    double acc = 0.0;
    switch (p) {
        case Lp::L1:
            for (double v : x) acc += std::abs(v);
            return acc;
        case Lp::L2:
            for (double v : x) acc += v * v;
            return std::sqrt(acc);
        case Lp::LInf:
            for (double v : x) acc = std::max(acc, std::abs(v));
            return acc;
    }
    return acc;
}

/// Support function of the origin-centered Lp ball of given radius,
/// sigma(y) = radius * ||y||_dual.
inline double support_ball(double radius, Lp p, std::span<const double> y) {
    if (radius < 0.0) throw std::domain_error("support_ball: negative radius");
    return radius * norm_eval(y, dual(p));
}

/// Dual exponent index q with 1/p + 1/q = 1 (p=1 -> q=inf and vice versa),
/// returned as the value of |S|^{1/q} for a given dimension. Used by the
/// bounded-radius check.
inline double dim_pow_inv_dual(std::size_t dim, Lp transition_norm) {
    switch (transition_norm) {
        case Lp::L1: return 1.0;                              // q = inf
        case Lp::L2: return std::sqrt(static_cast<double>(dim));
        case Lp::LInf: return static_cast<double>(dim);       // q = 1
    }
    return 1.0;
}

}  // namespace r2mdp
