#pragma once

#include <span>
#include <vector>

#include "r2mdp/norms.hpp"

namespace r2mdp {

/// Policy regularizer family: value Omega, conjugate Omega*, and conjugate
/// gradient (the unique maximizing policy row).
struct Regularizer {
    enum class Kind { Shannon, KL, Tsallis, R2Norm };

    Kind kind = Kind::Shannon;
    std::vector<double> reference;  // KL only, strictly positive distribution
    Lp norm = Lp::L2;               // R2Norm only: the ball norm (Omega uses its dual)
    double weight = 0.0;            // R2Norm only: alpha^r + alpha^P gamma ||v||

    static Regularizer shannon() { return {Kind::Shannon, {}, Lp::L2, 0.0}; }
    static Regularizer kl(std::vector<double> d) { return {Kind::KL, std::move(d), Lp::L2, 0.0}; }
    static Regularizer tsallis() { return {Kind::Tsallis, {}, Lp::L2, 0.0}; }
    static Regularizer r2norm(Lp ball_norm, double weight) {
        return {Kind::R2Norm, {}, ball_norm, weight};
    }
};

/// Omega(pi_s). Throws std::domain_error when the row leaves the simplex by
/// more than 1e-9. The 0 ln 0 := 0 convention applies.
double reg_value(const Regularizer& reg, std::span<const double> policy_row);

/// Omega*(q_s). Closed forms for Shannon/KL/Tsallis; numeric for R2Norm.
double conjugate_value(const Regularizer& reg, std::span<const double> q_row);

/// grad Omega*(q_s), the maximizer of <pi, q> - Omega(pi) over the simplex.
std::vector<double> conjugate_gradient(const Regularizer& reg, std::span<const double> q_row);

/// Support function sigma_{R_s(pi)}(-pi_s) of the policy-dependent interval
/// reward-uncertainty sets that induce Shannon, KL and Tsallis regularization.
/// Shannon/KL reject boundary rows (the interval sets are unbounded there).
double support_entropy_set(const Regularizer& reg, std::span<const double> policy_row);

/// Euclidean projection onto the probability simplex (sort-and-threshold).
std::vector<double> simplex_projection(std::span<const double> x);

/// Maximizes <pi, q> - a1 ||pi||_{n1} - a2 ||pi||_{n2} over the simplex by
/// projected gradient ascent. Generic path behind the R2Norm conjugate and the
/// s-rectangular greedy step; `tol` is on the objective.
std::vector<double> simplex_norm_penalized_argmax(std::span<const double> q, double a1, Lp n1,
                                                  double a2, Lp n2, double tol = 1e-10,
                                                  std::size_t max_iter = 100'000);

/// Exact maximizer of <pi, q> - kappa ||pi||_2 over the simplex via the KKT
/// conditions: pi(a) proportional to (q(a) - lambda)_+ with lambda the root of
/// sum (q(a) - lambda)_+^2 = kappa^2. Fast path for the l2 greedy step.
std::vector<double> simplex_l2_penalized_argmax(std::span<const double> q, double kappa);

}  // namespace r2mdp
