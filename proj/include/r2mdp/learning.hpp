#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "r2mdp/envs.hpp"
#include "r2mdp/mdp.hpp"
#include "r2mdp/robust.hpp"

namespace r2mdp {

/// Value-norm estimation mode for the R2 TD target.
struct NormMode {
    enum class Kind { Exact, Batch };
    Kind kind = Kind::Exact;
    std::size_t batch_size = 64;
    double beta = 0.1;  // weight of the current batch in the moving average

    static NormMode exact() { return {}; }
    static NormMode batch(std::size_t batch_size, double beta) {
        return {Kind::Batch, batch_size, beta};
    }
};

struct LearningConfig {
    std::size_t max_steps = 100'000;
    std::uint64_t seed = 0;
    double epsilon0 = 1.0;
    double epsilon_decay = 0.995;  // per episode
    double epsilon_floor = 0.05;
    double step_power = 0.75;  // step size 1/(1+visits)^power
    NormMode norm_mode = NormMode::exact();
    std::size_t buffer_capacity = 100'000;
    std::size_t record_every = 1000;  // subsampling period of the step log
    std::size_t max_episode_steps = 100'000;
};

struct Transition {
    std::size_t state = 0;
    std::size_t action = 0;
    double reward = 0.0;
    std::size_t next_state = 0;
    bool done = false;
};

/// Fixed-capacity FIFO ring of transitions.
class ReplayBuffer {
  public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}
    void push(const Transition& t);
    std::size_t size() const { return entries_.size(); }
    const Transition& at(std::size_t i) const { return entries_[i]; }

  private:
    std::size_t capacity_;
    std::size_t head_ = 0;
    std::vector<Transition> entries_;
};

struct NormEstimator {
    double estimate_sq = 0.0;
    double beta = 0.1;

    double value() const;
};

struct Variant {
    enum class Kind { Vanilla, Robust, R2 };
    Kind kind = Kind::Vanilla;
    UncertaintySpec spec;  // Robust / R2
    InnerSolver solver;    // Robust only

    static Variant vanilla() { return {}; }
    static Variant robust(UncertaintySpec spec, InnerSolver solver) {
        return {Kind::Robust, std::move(spec), solver};
    }
    static Variant r2(UncertaintySpec spec) {
        return {Kind::R2, std::move(spec), InnerSolver::closed_form()};
    }

    const char* name() const;
};

struct RunRecordRow {
    std::size_t step = 0;
    std::size_t episode = 0;
    double episode_return = 0.0;  // cumulative within the current episode
    double delta = 0.0;
    std::int64_t wall_time_ns = 0;  // cumulative update time
};

struct LearnResult {
    QFn q;
    std::vector<RunRecordRow> rows;
    std::vector<std::int64_t> update_times_ns;  // one per update
    std::size_t episodes = 0;
    std::string variant;
    std::uint64_t seed = 0;
};

/// One R2 temporal-difference error. Terminal transitions drop the bootstrap.
double r2_td(const QFn& q, const Transition& t, double alpha_r, double alpha_p, double gamma,
             double v_norm);

/// ||max_b q(.,b)|| under the given norm (callers pass the dual transition
/// norm).
double exact_v_norm(const QFn& q, Lp norm);

/// One moving-average step of the batch norm estimator: draws batch_size
/// states uniformly with replacement from the buffer, sums v(s)^2 over the
/// distinct states drawn (duplicates counted once), and mixes the batch into
/// the running estimate with weight beta.
NormEstimator batch_norm_update(const NormEstimator& est, const ReplayBuffer& buffer, const QFn& q,
                                std::size_t batch_size, std::mt19937_64& rng);

/// Tabular epsilon-greedy q-learning on a grid env.
LearnResult q_learning(const GridEnv& env, const LearningConfig& cfg, const Variant& variant);

struct RolloutStats {
    double mean = 0.0;
    double stddev = 0.0;
    double mean_discounted = 0.0;
    double stddev_discounted = 0.0;
};

/// Monte-Carlo returns of a fixed policy (greedy rollouts; both undiscounted
/// and discounted sums reported).
RolloutStats evaluate_policy_rollouts(const GridEnv& env, const Policy& policy,
                                      std::size_t episodes, std::uint64_t seed,
                                      std::size_t max_episode_steps = 100'000);

/// Deterministic greedy policy of a q-table, lowest index on ties.
Policy greedy_from_q(const QFn& q);

}  // namespace r2mdp
