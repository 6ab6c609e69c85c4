#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "r2mdp/robust.hpp"

using namespace r2mdp;
using namespace testing;

namespace {

TabularMdp one_state_two_action() {
    // Self-loop, r0 = (1, 2), gamma = 0.5.
    TabularMdp mdp;
    mdp.n_states = 1;
    mdp.n_actions = 2;
    mdp.gamma = 0.5;
    mdp.mu0 = {1.0};
    mdp.reward = Mat(1, 2);
    mdp.reward(0, 0) = 1.0;
    mdp.reward(0, 1) = 2.0;
    mdp.transition = {1.0, 1.0};
    return mdp;
}

UncertaintySpec one_state_spec() {
    // alpha^r = (0, 0.5), alpha^P = 0.
    UncertaintySpec spec = UncertaintySpec::sarect_uniform(1, 2, 0.0, 0.0);
    spec.reward_radius(0, 1) = 0.5;
    return spec;
}

}  // namespace

TEST_CASE("robust_bellman_eval_apply") {
    const InnerSolver cf = InnerSolver::closed_form();
    SUBCASE("zero radii match the nominal operator") {
        std::mt19937_64 rng(31);
        const TabularMdp m = random_mdp(rng, 4, 3, 0.9);
        const Policy pi = random_policy(rng, 4, 3);
        const ValueFn v{0.3, -0.2, 1.1, 0.0};
        const auto spec = UncertaintySpec::sarect_uniform(4, 3, 0.0, 0.0);
        CHECK(max_abs_diff(robust_bellman_eval_apply(m, spec, pi, v, cf),
                           bellman_eval_apply(m, pi, v)) <= 1e-15);
        const auto sspec = UncertaintySpec::srect_uniform(4, 0.0, 0.0);
        CHECK(max_abs_diff(robust_bellman_eval_apply(m, sspec, pi, v, cf),
                           bellman_eval_apply(m, pi, v)) <= 1e-15);
    }
    SUBCASE("chain2 reward radius shifts by 0.1") {
        const TabularMdp m = chain2();
        const Policy stay = Policy::deterministic(2, 2, {0, 0});
        const auto spec = UncertaintySpec::sarect_uniform(2, 2, 0.1, 0.0);
        const ValueFn out = robust_bellman_eval_apply(m, spec, stay, {0.0, 2.0}, cf);
        CHECK(out[0] == doctest::Approx(-0.1));
        CHECK(out[1] == doctest::Approx(1.9));
    }
    SUBCASE("closed form vs iterative on 50 random instances") {
        std::mt19937_64 rng(32);
        const InnerSolver it = InnerSolver::iterative(1e-8);
        for (int t = 0; t < 50; ++t) {
            const std::size_t n = 2 + t % 3;
            const TabularMdp m = random_mdp(rng, n, 2, 0.9);
            const Policy pi = random_policy(rng, n, 2);
            ValueFn v(n);
            std::uniform_real_distribution<double> unif(-1.0, 1.0);
            for (double& x : v) x = unif(rng);
            const auto spec = (t % 2 == 0)
                                  ? UncertaintySpec::sarect_uniform(n, 2, 0.05, 0.01)
                                  : UncertaintySpec::srect_uniform(n, 0.05, 0.01);
            CHECK(max_abs_diff(robust_bellman_eval_apply(m, spec, pi, v, cf),
                               robust_bellman_eval_apply(m, spec, pi, v, it)) <= 1e-6);
        }
    }
}

TEST_CASE("robust_bellman_opt_apply") {
    const InnerSolver cf = InnerSolver::closed_form();
    SUBCASE("zero radii match bellman_opt_apply") {
        std::mt19937_64 rng(33);
        const TabularMdp m = random_mdp(rng, 5, 3, 0.9);
        ValueFn v(5);
        std::uniform_real_distribution<double> unif(-2.0, 2.0);
        for (double& x : v) x = unif(rng);
        const auto spec = UncertaintySpec::sarect_uniform(5, 3, 0.0, 0.0);
        CHECK(max_abs_diff(robust_bellman_opt_apply(m, spec, v, cf), bellman_opt_apply(m, v)) <=
              1e-12);
    }
    SUBCASE("one-state hand fixed point 3") {
        const TabularMdp m = one_state_two_action();
        const auto spec = one_state_spec();
        ValueFn v{0.0};
        for (int i = 0; i < 200; ++i) v = robust_bellman_opt_apply(m, spec, v, cf);
        CHECK(v[0] == doctest::Approx(3.0).epsilon(1e-10));
    }
    SUBCASE("srect optimum dominates fixed policies") {
        std::mt19937_64 rng(34);
        const TabularMdp m = random_mdp(rng, 3, 3, 0.9);
        const auto spec = UncertaintySpec::srect_uniform(3, 0.05, 0.01);
        const ValueFn v{0.4, -0.3, 0.8};
        const ValueFn opt = robust_bellman_opt_apply(m, spec, v, cf);
        for (int t = 0; t < 100; ++t) {
            const Policy pi = random_policy(rng, 3, 3);
            const ValueFn eval = robust_bellman_eval_apply(m, spec, pi, v, cf);
            for (std::size_t s = 0; s < 3; ++s) CHECK(opt[s] >= eval[s] - 1e-8);
        }
    }
}

TEST_CASE("worst_case_model") {
    std::mt19937_64 rng(35);
    const InnerSolver cf = InnerSolver::closed_form();
    SUBCASE("zero radii give the nominal model") {
        const TabularMdp m = random_mdp(rng, 3, 2, 0.9);
        const Policy pi = random_policy(rng, 3, 2);
        const auto spec = UncertaintySpec::sarect_uniform(3, 2, 0.0, 0.0);
        const PerturbedModel pm = worst_case_model(m, spec, pi, {0.1, 0.2, 0.3});
        CHECK(max_abs_diff(pm.transition, m.transition) <= 1e-15);
        CHECK(max_abs_diff(pm.reward.data, m.reward.data) <= 1e-15);
    }
    SUBCASE("v = 0 leaves the transitions unchanged") {
        const TabularMdp m = random_mdp(rng, 3, 2, 0.9);
        const Policy pi = random_policy(rng, 3, 2);
        const auto spec = UncertaintySpec::sarect_uniform(3, 2, 0.1, 0.05);
        const PerturbedModel pm = worst_case_model(m, spec, pi, ValueFn(3, 0.0));
        CHECK(max_abs_diff(pm.transition, m.transition) <= 1e-15);
        bool shifted = false;
        for (std::size_t i = 0; i < pm.reward.data.size(); ++i)
            if (pm.reward.data[i] != m.reward.data[i]) shifted = true;
        CHECK(shifted);
    }
    SUBCASE("evaluating the returned model reproduces the closed form") {
        for (int t = 0; t < 20; ++t) {
            const std::size_t n = 2 + t % 3;
            const TabularMdp m = random_mdp(rng, n, 2, 0.9);
            const Policy pi = random_policy(rng, n, 2);
            ValueFn v(n);
            std::uniform_real_distribution<double> unif(-1.0, 1.0);
            for (double& x : v) x = unif(rng);
            const auto spec = (t % 2 == 0)
                                  ? UncertaintySpec::sarect_uniform(n, 2, 0.08, 0.02)
                                  : UncertaintySpec::srect_uniform(n, 0.08, 0.02);
            const PerturbedModel pm = worst_case_model(m, spec, pi, v);
            TabularMdp worst = m;
            worst.transition = pm.transition;
            worst.reward = pm.reward;
            CHECK(max_abs_diff(bellman_eval_apply(worst, pi, v),
                               robust_bellman_eval_apply(m, spec, pi, v, cf)) <= 1e-10);
        }
    }
    SUBCASE("non-l2 norms rejected") {
        const TabularMdp m = random_mdp(rng, 2, 2, 0.9);
        const Policy pi = random_policy(rng, 2, 2);
        auto spec = UncertaintySpec::sarect_uniform(2, 2, 0.1, 0.0, Lp::L1);
        CHECK_THROWS_AS(worst_case_model(m, spec, pi, {0.1, 0.2}), std::invalid_argument);
    }
}

TEST_CASE("robust_policy_evaluation") {
    const InnerSolver cf = InnerSolver::closed_form();
    SUBCASE("zero radii match policy_evaluation") {
        std::mt19937_64 rng(36);
        const TabularMdp m = random_mdp(rng, 4, 3, 0.9);
        const Policy pi = random_policy(rng, 4, 3);
        const auto spec = UncertaintySpec::sarect_uniform(4, 3, 0.0, 0.0);
        CHECK(max_abs_diff(robust_policy_evaluation(m, spec, pi, 1e-12, cf),
                           policy_evaluation(m, pi, 1e-12)) <= 1e-10);
    }
    SUBCASE("chain2 fixed point (-0.2, 1.8)") {
        const TabularMdp m = chain2();
        const Policy stay = Policy::deterministic(2, 2, {0, 0});
        const auto spec = UncertaintySpec::sarect_uniform(2, 2, 0.1, 0.0);
        const ValueFn v = robust_policy_evaluation(m, spec, stay, 1e-12, cf);
        CHECK(v[0] == doctest::Approx(-0.2).epsilon(1e-9));
        CHECK(v[1] == doctest::Approx(1.8).epsilon(1e-9));
    }
    SUBCASE("robust value below nominal, monotone in radius") {
        std::mt19937_64 rng(37);
        const TabularMdp m = random_mdp(rng, 4, 2, 0.9);
        const Policy pi = random_policy(rng, 4, 2);
        const ValueFn nominal = policy_evaluation(m, pi, 1e-12);
        ValueFn prev = nominal;
        for (double radius : {1e-4, 1e-3, 1e-2, 1e-1}) {
            const auto spec = UncertaintySpec::sarect_uniform(4, 2, radius, radius / 10.0);
            const ValueFn v = robust_policy_evaluation(m, spec, pi, 1e-12, cf);
            for (std::size_t s = 0; s < 4; ++s) {
                CHECK(v[s] <= nominal[s] + 1e-9);
                CHECK(v[s] <= prev[s] + 1e-9);
            }
            prev = v;
        }
    }
    SUBCASE("feasibility against models sampled inside the set") {
        std::mt19937_64 rng(38);
        const TabularMdp m = random_mdp(rng, 3, 2, 0.9);
        const Policy pi = random_policy(rng, 3, 2);
        const double ar = 0.05, ap = 0.01, tol = 1e-10;
        const auto spec = UncertaintySpec::sarect_uniform(3, 2, ar, ap);
        const ValueFn v = robust_policy_evaluation(m, spec, pi, tol, cf);
        for (int t = 0; t < 100; ++t) {
            TabularMdp sampled = m;
            for (std::size_t s = 0; s < 3; ++s)
                for (std::size_t a = 0; a < 2; ++a) {
                    const auto rshift = sample_in_ball(rng, 1, ar, Lp::L2);
                    sampled.reward(s, a) += rshift[0];
                    const auto pshift = sample_in_ball(rng, 3, ap, Lp::L2);
                    auto row = sampled.p_row(s, a);
                    for (std::size_t sp = 0; sp < 3; ++sp) row[sp] += pshift[sp];
                }
            const ValueFn tv = bellman_eval_apply(sampled, pi, v);
            for (std::size_t s = 0; s < 3; ++s) CHECK(v[s] <= tv[s] + 10.0 * tol);
        }
    }
}

TEST_CASE("robust operators are gamma contractions") {
    std::mt19937_64 rng(39);
    const InnerSolver cf = InnerSolver::closed_form();
    const TabularMdp m = random_mdp(rng, 4, 3, 0.9);
    const Policy pi = random_policy(rng, 4, 3);
    const auto spec = UncertaintySpec::srect_uniform(4, 0.05, 0.01);
    std::uniform_real_distribution<double> unif(-3.0, 3.0);
    for (int t = 0; t < 500; ++t) {
        ValueFn v1(4), v2(4);
        for (double& x : v1) x = unif(rng);
        for (double& x : v2) x = unif(rng);
        const double gap = m.gamma * max_abs_diff(v1, v2);
        CHECK(max_abs_diff(robust_bellman_eval_apply(m, spec, pi, v1, cf),
                           robust_bellman_eval_apply(m, spec, pi, v2, cf)) <= gap + 1e-12);
    }
}

TEST_CASE("robust_mpi") {
    const InnerSolver cf = InnerSolver::closed_form();
    SUBCASE("zero radii reproduce value iteration") {
        std::mt19937_64 rng(40);
        const TabularMdp m = random_mdp(rng, 4, 3, 0.9);
        const auto spec = UncertaintySpec::sarect_uniform(4, 3, 0.0, 0.0);
        const MpiResult res = robust_mpi(m, spec, 1, 1e-10, cf);
        CHECK(max_abs_diff(res.value, ref_value_iteration(m)) <= 1e-7);
    }
    SUBCASE("one-state example converges to 3") {
        const MpiResult res = robust_mpi(one_state_two_action(), one_state_spec(), 1, 1e-12, cf);
        CHECK(res.value[0] == doctest::Approx(3.0).epsilon(1e-9));
        CHECK(res.policy.probs(0, 1) == 1.0);
    }
    SUBCASE("m=4 needs no more outer iterations than m=1") {
        std::mt19937_64 rng(41);
        const TabularMdp m = random_mdp(rng, 5, 3, 0.95);
        const auto spec = UncertaintySpec::sarect_uniform(5, 3, 1e-3, 1e-5);
        const MpiResult m1 = robust_mpi(m, spec, 1, 1e-8, cf);
        const MpiResult m4 = robust_mpi(m, spec, 4, 1e-8, cf);
        CHECK(m4.iterations <= m1.iterations);
        CHECK(max_abs_diff(m1.value, m4.value) <= 1e-5);
        CHECK(m1.residuals.size() == m1.iterations);
        CHECK(m1.wall_time_ns.size() == m1.iterations);
        for (std::size_t i = 1; i < m1.wall_time_ns.size(); ++i)
            CHECK(m1.wall_time_ns[i] >= m1.wall_time_ns[i - 1]);
    }
}

TEST_CASE("iterative_support") {
    std::mt19937_64 rng(42);
    const InnerSolver it = InnerSolver::iterative(1e-10);
    std::uniform_real_distribution<double> unif(-2.0, 2.0);
    for (Lp p : {Lp::L1, Lp::L2, Lp::LInf}) {
        for (int t = 0; t < 20; ++t) {
            std::vector<double> y(4);
            for (double& x : y) x = unif(rng);
            const double radius = 0.3;
            CHECK(iterative_support(radius, p, y, it) ==
                  doctest::Approx(support_ball(radius, p, y)).epsilon(1e-6));
        }
    }
    CHECK(iterative_support(0.0, Lp::L2, std::vector<double>{1.0, 2.0}, it) == 0.0);
}

TEST_CASE("uncertainty spec validation") {
    auto spec = UncertaintySpec::sarect_uniform(2, 2, 0.1, 0.1);
    CHECK_NOTHROW(spec.validate(2, 2));
    spec.reward_radius(0, 0) = -0.1;
    CHECK_THROWS_AS(spec.validate(2, 2), std::invalid_argument);
    auto sspec = UncertaintySpec::srect_uniform(3, 0.1, 0.1);
    CHECK_NOTHROW(sspec.validate(3, 5));
    CHECK_THROWS_AS(sspec.validate(4, 5), std::invalid_argument);
}
