#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "r2mdp/envs.hpp"
#include "r2mdp/learning.hpp"

using namespace r2mdp;
using namespace testing;

TEST_CASE("r2_td") {
    QFn q(2, 2, 0.0);
    q(1, 0) = 2.0;
    q(1, 1) = 1.0;
    Transition t{0, 0, 1.0, 1, false};
    SUBCASE("vanilla arithmetic") {
        CHECK(r2_td(q, t, 0.0, 0.0, 0.9, 0.0) == doctest::Approx(2.8));
    }
    SUBCASE("penalties subtracted") {
        CHECK(r2_td(q, t, 0.1, 0.01, 0.9, 3.0) == doctest::Approx(2.673));
    }
    SUBCASE("terminal drops the bootstrap") {
        QFn qt(1, 1, 1.0);
        const Transition done{0, 0, 1.0, 0, true};
        CHECK(r2_td(qt, done, 0.0, 0.0, 0.9, 0.0) == doctest::Approx(0.0));
    }
}

TEST_CASE("exact_v_norm") {
    CHECK(exact_v_norm(QFn(3, 2, 0.0), Lp::L2) == 0.0);
    QFn q(2, 2, 0.0);
    q(0, 0) = 3.0;
    q(0, 1) = -5.0;
    q(1, 0) = 1.0;
    q(1, 1) = 4.0;
    CHECK(exact_v_norm(q, Lp::L2) == doctest::Approx(5.0));
    CHECK(exact_v_norm(q, Lp::L1) == doctest::Approx(7.0));
    CHECK(exact_v_norm(q, Lp::LInf) == doctest::Approx(4.0));
}

TEST_CASE("replay buffer is a FIFO ring") {
    ReplayBuffer buf(3);
    for (std::size_t i = 0; i < 5; ++i) buf.push({i, 0, 0.0, 0, false});
    CHECK(buf.size() == 3);
    // Entries 3 and 4 overwrote the two oldest slots.
    bool saw[5] = {false, false, false, false, false};
    for (std::size_t i = 0; i < 3; ++i) saw[buf.at(i).state] = true;
    CHECK_FALSE(saw[0]);
    CHECK_FALSE(saw[1]);
    CHECK(saw[2]);
    CHECK(saw[3]);
    CHECK(saw[4]);
}

TEST_CASE("batch_norm_update") {
    QFn q(3, 2, 0.0);
    q(0, 0) = 3.0;
    q(1, 1) = 4.0;
    q(2, 0) = 0.0;
    ReplayBuffer buf(8);
    for (std::size_t s = 0; s < 3; ++s) buf.push({s, 0, 0.0, 0, false});
    std::mt19937_64 rng(71);
    SUBCASE("beta 1 with full coverage gives the batch value") {
        NormEstimator est{123.0, 1.0};
        // Batch of 256 draws from 3 states misses a state with prob ~3*(2/3)^256.
        est = batch_norm_update(est, buf, q, 256, rng);
        CHECK(est.value() == doctest::Approx(exact_v_norm(q, Lp::L2)));
    }
    SUBCASE("beta 0 leaves the estimate unchanged") {
        NormEstimator est{123.0, 0.0};
        est = batch_norm_update(est, buf, q, 64, rng);
        CHECK(est.estimate_sq == 123.0);
    }
    SUBCASE("duplicates in the batch are counted once") {
        ReplayBuffer rep(8);
        for (int i = 0; i < 8; ++i) rep.push({1, 0, 0.0, 0, false});  // only state 1
        NormEstimator est{0.0, 1.0};
        est = batch_norm_update(est, rep, q, 64, rng);
        CHECK(est.estimate_sq == doctest::Approx(16.0));  // v(1)^2 once, not 64 times
    }
    SUBCASE("errors") {
        ReplayBuffer empty(4);
        NormEstimator est{0.0, 0.5};
        CHECK_THROWS_AS(batch_norm_update(est, empty, q, 8, rng), std::logic_error);
        CHECK_THROWS_AS(batch_norm_update(est, buf, q, 0, rng), std::invalid_argument);
    }
    SUBCASE("converges to the exact norm on a frozen table") {
        std::mt19937_64 rng2(72);
        NormEstimator est{0.0, 0.1};
        for (int i = 0; i < 500; ++i) est = batch_norm_update(est, buf, q, 16, rng2);
        CHECK(est.value() == doctest::Approx(exact_v_norm(q, Lp::L2)).epsilon(0.05));
    }
}

TEST_CASE("q_learning determinism and degenerate radii") {
    const GridEnv maze = make_maze();
    LearningConfig cfg;
    cfg.max_steps = 20000;
    cfg.seed = 7;
    SUBCASE("same seed, same result") {
        const LearnResult a = q_learning(maze, cfg, Variant::vanilla());
        const LearnResult b = q_learning(maze, cfg, Variant::vanilla());
        CHECK(a.q.data == b.q.data);
        REQUIRE(a.rows.size() == b.rows.size());
        for (std::size_t i = 0; i < a.rows.size(); ++i) {
            CHECK(a.rows[i].episode_return == b.rows[i].episode_return);
            CHECK(a.rows[i].delta == b.rows[i].delta);
        }
    }
    SUBCASE("r2 with zero radii is bitwise vanilla") {
        const auto spec = UncertaintySpec::sarect_uniform(maze.n_states(), 4, 0.0, 0.0);
        const LearnResult v = q_learning(maze, cfg, Variant::vanilla());
        const LearnResult r = q_learning(maze, cfg, Variant::r2(spec));
        CHECK(v.q.data == r.q.data);
    }
    SUBCASE("different seeds differ") {
        const LearnResult a = q_learning(maze, cfg, Variant::vanilla());
        LearningConfig other = cfg;
        other.seed = 8;
        const LearnResult b = q_learning(maze, other, Variant::vanilla());
        CHECK(a.q.data != b.q.data);
    }
}

TEST_CASE("q iterates stay bounded and finite") {
    const GridEnv rover = make_mars_rover(0.1);
    LearningConfig cfg;
    cfg.max_steps = 50000;
    cfg.seed = 3;
    const auto spec = UncertaintySpec::sarect_uniform(rover.n_states(), 4, 0.01, 0.01);
    const LearnResult res = q_learning(rover, cfg, Variant::r2(spec));
    // Envelope: |q| <= (r_max + alpha^r + gamma alpha^P ||v||_cap) / (1 - gamma)
    // with r_max = 1 and a generous norm cap.
    const double cap = (1.0 + 0.01 + rover.gamma * 0.01 * 300.0) / (1.0 - rover.gamma);
    for (double x : res.q.data) {
        CHECK(std::isfinite(x));
        CHECK(std::abs(x) <= cap);
    }
    CHECK(res.episodes > 0);
    CHECK(res.update_times_ns.size() == cfg.max_steps);
}

TEST_CASE("step-size schedule satisfies robbins-monro") {
    // 1/(1+n)^0.75: partial sums diverge, squared sums converge.
    double sum = 0.0, sumsq = 0.0, sum_small = 0.0;
    for (int n = 0; n < 1000000; ++n) {
        const double b = 1.0 / std::pow(1.0 + n, 0.75);
        sum += b;
        sumsq += b * b;
        if (n < 1000) sum_small = sum;
    }
    CHECK(sum > 10.0 * sum_small / 3.0);  // still growing well past n=1000
    CHECK(sumsq < 3.0);                   // zeta(1.5) ~ 2.612
}

TEST_CASE("r2 and robust closed-form variants agree") {
    const GridEnv rover = make_mars_rover(0.1);
    LearningConfig cfg;
    cfg.max_steps = 300000;
    cfg.seed = 11;
    const auto spec = UncertaintySpec::sarect_uniform(rover.n_states(), 4, 0.01, 0.01);
    const LearnResult r2 = q_learning(rover, cfg, Variant::r2(spec));
    const LearnResult rob =
        q_learning(rover, cfg, Variant::robust(spec, InnerSolver::closed_form()));
    CHECK(max_abs_diff(r2.q.data, rob.q.data) <= 1e-2);
}

TEST_CASE("evaluate_policy_rollouts") {
    SUBCASE("deterministic env and policy give zero std") {
        const GridEnv rover = make_mars_rover(0.0);
        // Move right until the wall, then down: reaches the goal, avoids rocks.
        std::vector<std::size_t> actions(rover.n_states(), 3);
        for (std::size_t r = 0; r < rover.size; ++r)
            actions[r * rover.size + (rover.size - 1)] = 1;
        const Policy pi = Policy::deterministic(rover.n_states(), 4, actions);
        const RolloutStats st = evaluate_policy_rollouts(rover, pi, 20, 5);
        CHECK(st.stddev <= 1e-12);
        CHECK(st.stddev_discounted <= 1e-12);
        CHECK(st.mean > 0.5);  // reached the +1 goal with small step costs
    }
    SUBCASE("optimal nominal policy matches the model-based value") {
        const GridEnv rover = make_mars_rover(0.0);
        const TabularMdp mdp = rover.to_tabular_mdp();
        const ValueFn vstar = ref_value_iteration(mdp);
        const Policy pi = greedy_policy(mdp, vstar);
        const RolloutStats st = evaluate_policy_rollouts(rover, pi, 50, 6);
        const ValueFn vpi = policy_evaluation(mdp, pi, 1e-12);
        CHECK(st.mean_discounted == doctest::Approx(vpi[0]).epsilon(1e-9));
        CHECK(st.stddev_discounted <= 1e-12);
    }
    SUBCASE("episodes must be positive") {
        const GridEnv rover = make_mars_rover(0.0);
        CHECK_THROWS_AS(evaluate_policy_rollouts(rover, Policy::uniform(100, 4), 0, 1),
                        std::invalid_argument);
    }
}

TEST_CASE("greedy_from_q") {
    QFn q(2, 3, 0.0);
    q(0, 2) = 1.0;
    q(1, 0) = 1.0;
    q(1, 1) = 1.0;  // tie -> lowest index
    const Policy pi = greedy_from_q(q);
    CHECK(pi.probs(0, 2) == 1.0);
    CHECK(pi.probs(1, 0) == 1.0);
}
