#include "r2mdp/learning.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace r2mdp {

namespace {

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::size_t argmax_row(const QFn& q, std::size_t s) {
    std::size_t best = 0;
    for (std::size_t a = 1; a < q.cols; ++a)
        if (q(s, a) > q(s, best)) best = a;
    return best;
}

/// Incrementally maintained v = max_b q(.,b) with running l1/l2 aggregates,
/// so the R2 target costs O(A) per update instead of O(S A).
struct ValueTracker {
    std::vector<double> v;
    double sumsq = 0.0;
    double sumabs = 0.0;
    std::size_t updates_since_refresh = 0;

    void init(const QFn& q) {
        v.assign(q.rows, 0.0);
        for (std::size_t s = 0; s < q.rows; ++s) v[s] = q(s, argmax_row(q, s));
        refresh();
    }
    void refresh() {
        sumsq = 0.0;
        sumabs = 0.0;
        for (double x : v) {
            sumsq += x * x;
            sumabs += std::abs(x);
        }
        updates_since_refresh = 0;
    }
    void on_q_update(const QFn& q, std::size_t s) {
        const double nv = q(s, argmax_row(q, s));
        sumsq += nv * nv - v[s] * v[s];
        sumabs += std::abs(nv) - std::abs(v[s]);
        v[s] = nv;
        if (++updates_since_refresh >= 8192) refresh();  // cancel float drift
    }
    double norm(Lp p) const {
        switch (p) {
            case Lp::L1: return sumabs;
            case Lp::L2: return std::sqrt(std::max(0.0, sumsq));
            case Lp::LInf: return norm_eval(v, Lp::LInf);
        }
        return 0.0;
    }
};

}  // namespace

void ReplayBuffer::push(const Transition& t) {
    if (capacity_ == 0) throw std::logic_error("replay buffer: zero capacity");
    if (entries_.size() < capacity_) {
        entries_.push_back(t);
    } else {
        entries_[head_] = t;
        head_ = (head_ + 1) % capacity_;
    }
}

double NormEstimator::value() const { return std::sqrt(std::max(0.0, estimate_sq)); }

const char* Variant::name() const {
    switch (kind) {
        case Kind::Vanilla: return "vanilla";
        case Kind::Robust: return "robust";
        case Kind::R2: return "r2";
    }
    return "?";
}

double r2_td(const QFn& q, const Transition& t, double alpha_r, double alpha_p, double gamma,
             double v_norm) {
    double target = t.reward - alpha_r - gamma * alpha_p * v_norm;
    if (!t.done) target += gamma * q(t.next_state, argmax_row(q, t.next_state));
    return target - q(t.state, t.action);
}

double exact_v_norm(const QFn& q, Lp norm) {
    std::vector<double> v(q.rows);
    for (std::size_t s = 0; s < q.rows; ++s) v[s] = q(s, argmax_row(q, s));
    return norm_eval(v, norm);
}

NormEstimator batch_norm_update(const NormEstimator& est, const ReplayBuffer& buffer, const QFn& q,
                                std::size_t batch_size, std::mt19937_64& rng) {
    if (buffer.size() == 0) throw std::logic_error("batch_norm_update: empty buffer");
    if (batch_size == 0) throw std::invalid_argument("batch_norm_update: batch_size must be >= 1");
    std::vector<std::size_t> states;
    states.reserve(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) {
        const auto idx = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(buffer.size()));
        states.push_back(buffer.at(std::min(idx, buffer.size() - 1)).state);
    }
    std::sort(states.begin(), states.end());
    states.erase(std::unique(states.begin(), states.end()), states.end());
    double batch_sq = 0.0;
    for (std::size_t s : states) {
        const double vs = q(s, argmax_row(q, s));
        batch_sq += vs * vs;
    }
    NormEstimator out = est;
    out.estimate_sq = (1.0 - est.beta) * est.estimate_sq + est.beta * batch_sq;
    return out;
}

LearnResult q_learning(const GridEnv& env, const LearningConfig& cfg, const Variant& variant) {
    const std::size_t n_states = env.n_states();
    const std::size_t n_actions = GridEnv::n_actions();
    if (variant.kind != Variant::Kind::Vanilla) variant.spec.validate(n_states, n_actions);

    std::mt19937_64 rng(cfg.seed);
    LearnResult result;
    result.q = QFn(n_states, n_actions, 0.0);
    result.variant = variant.name();
    result.seed = cfg.seed;
    result.update_times_ns.reserve(std::min<std::size_t>(cfg.max_steps, 1 << 22));

    Mat visits(n_states, n_actions, 0.0);
    ReplayBuffer buffer(cfg.buffer_capacity);
    NormEstimator estimator{0.0, cfg.norm_mode.beta};
    ValueTracker tracker;
    tracker.init(result.q);
    const Lp vnorm_kind = dual(variant.spec.transition_norm);

    std::size_t state = env.reset(rng);
    std::size_t episode = 0;
    std::size_t episode_steps = 0;
    double episode_return = 0.0;
    double epsilon = cfg.epsilon0;
    std::int64_t cumulative_ns = 0;

    for (std::size_t step = 0; step < cfg.max_steps; ++step) {
        std::size_t action;
        if (uniform01(rng) < std::max(cfg.epsilon_floor, epsilon))
            action = static_cast<std::size_t>(uniform01(rng) * 4.0) % 4;
        else
            action = argmax_row(result.q, state);

        const EnvStep es = env.step(state, action, rng);
        const Transition t{state, action, es.reward, es.next_state, es.done};
        buffer.push(t);

        if (variant.kind == Variant::Kind::R2 && cfg.norm_mode.kind == NormMode::Kind::Batch)
            estimator = batch_norm_update(estimator, buffer, result.q, cfg.norm_mode.batch_size, rng);

        const auto t0 = std::chrono::steady_clock::now();
        double delta;
        switch (variant.kind) {
            case Variant::Kind::Vanilla:
                delta = r2_td(result.q, t, 0.0, 0.0, env.gamma, 0.0);
                break;
            case Variant::Kind::R2: {
                const double vn = cfg.norm_mode.kind == NormMode::Kind::Exact
                                      ? tracker.norm(vnorm_kind)
                                      : estimator.value();
                delta = r2_td(result.q, t, variant.spec.ar(t.state, t.action),
                              variant.spec.ap(t.state, t.action), env.gamma, vn);
                break;
            }
            case Variant::Kind::Robust: {
                const double one = 1.0;
                const double sr = variant.solver.mode == InnerSolver::Mode::ClosedForm
                                      ? support_ball(variant.spec.ar(t.state, t.action),
                                                     variant.spec.reward_norm, {&one, 1})
                                      : iterative_support(variant.spec.ar(t.state, t.action),
                                                          variant.spec.reward_norm, {&one, 1},
                                                          variant.solver);
                const double sp = variant.solver.mode == InnerSolver::Mode::ClosedForm
                                      ? variant.spec.ap(t.state, t.action) *
                                            norm_eval(tracker.v, vnorm_kind)
                                      : iterative_support(variant.spec.ap(t.state, t.action),
                                                          variant.spec.transition_norm, tracker.v,
                                                          variant.solver);
                double target = t.reward - sr - env.gamma * sp;
                if (!t.done) target += env.gamma * result.q(t.next_state, argmax_row(result.q, t.next_state));
                delta = target - result.q(t.state, t.action);
                break;
            }
        }
        if (!std::isfinite(delta)) throw std::runtime_error("q_learning: non-finite TD error");
        visits(t.state, t.action) += 1.0;
        const double lr = 1.0 / std::pow(1.0 + visits(t.state, t.action), cfg.step_power);
        result.q(t.state, t.action) += lr * delta;
        tracker.on_q_update(result.q, t.state);
        const auto t1 = std::chrono::steady_clock::now();
        const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();
        cumulative_ns += ns;
        result.update_times_ns.push_back(ns);

        episode_return += es.reward;
        ++episode_steps;
        if (step % cfg.record_every == 0)
            result.rows.push_back({step, episode, episode_return, delta, cumulative_ns});

        if (es.done || episode_steps >= cfg.max_episode_steps) {
            state = env.reset(rng);
            ++episode;
            episode_steps = 0;
            episode_return = 0.0;
            epsilon *= cfg.epsilon_decay;
        } else {
            state = es.next_state;
        }
    }
    result.episodes = episode;
    return result;
}

Policy greedy_from_q(const QFn& q) {
    std::vector<std::size_t> actions(q.rows, 0);
    for (std::size_t s = 0; s < q.rows; ++s) actions[s] = argmax_row(q, s);
    return Policy::deterministic(q.rows, q.cols, actions);
}

RolloutStats evaluate_policy_rollouts(const GridEnv& env, const Policy& policy,
                                      std::size_t episodes, std::uint64_t seed,
                                      std::size_t max_episode_steps) {
    if (episodes < 1) throw std::invalid_argument("evaluate_policy_rollouts: episodes must be >= 1");
    std::mt19937_64 rng(seed);
    std::vector<double> returns, disc_returns;
    returns.reserve(episodes);
    disc_returns.reserve(episodes);
    for (std::size_t ep = 0; ep < episodes; ++ep) {
        std::size_t s = env.reset(rng);
        double ret = 0.0, dret = 0.0, g = 1.0;
        for (std::size_t t = 0; t < max_episode_steps && !env.terminal(s); ++t) {
            // sample the policy row
            const double u = uniform01(rng);
            double cum = 0.0;
            std::size_t a = policy.probs.cols - 1;
            for (std::size_t b = 0; b < policy.probs.cols; ++b) {
                cum += policy.probs(s, b);
                if (u < cum) {
                    a = b;
                    break;
                }
            }
            const EnvStep es = env.step(s, a, rng);
            ret += es.reward;
            dret += g * es.reward;
            g *= env.gamma;
            s = es.next_state;
            if (es.done) break;
        }
        returns.push_back(ret);
        disc_returns.push_back(dret);
    }
    auto stats = [&](const std::vector<double>& xs) {
        const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
        double var = 0.0;
        for (double x : xs) var += (x - mean) * (x - mean);
        var /= xs.size();
        return std::pair<double, double>(mean, std::sqrt(var));
    };
    RolloutStats out;
    std::tie(out.mean, out.stddev) = stats(returns);
    std::tie(out.mean_discounted, out.stddev_discounted) = stats(disc_returns);
    return out;
}

}  // namespace r2mdp
