#include "r2mdp/envs.hpp"

#include <cmath>
#include <stdexcept>

namespace r2mdp {

namespace {

/// Deterministic uniform double in [0,1); avoids implementation-defined
/// distribution adapters so seeded runs replay bit-exactly.
double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double enter_reward(const GridEnv& env, std::size_t cell) {
    if (env.is_terminal[cell]) return env.cell_reward[cell];
    return env.step_reward + env.cell_reward[cell];
}

}  // namespace

std::size_t GridEnv::move(std::size_t state, std::size_t action) const {
    std::size_t row = state / size;
    std::size_t col = state % size;
    switch (action) {
        case 0: if (row > 0) --row; break;          // up
        case 1: if (row + 1 < size) ++row; break;   // down
        case 2: if (col > 0) --col; break;          // left
        case 3: if (col + 1 < size) ++col; break;   // right
        default: throw std::invalid_argument("grid env: action out of range");
    }
    return row * size + col;
}

EnvStep GridEnv::step(std::size_t state, std::size_t action, std::mt19937_64& rng) const {
    if (state >= n_states()) throw std::invalid_argument("grid env: state out of range");
    if (terminal(state)) throw std::logic_error("grid env: cannot step a terminal state");
    std::size_t dir = action;
    if (slip > 0.0 && uniform01(rng) < slip)
        dir = static_cast<std::size_t>(uniform01(rng) * 4.0) % 4;
    const std::size_t next = move(state, dir);
    return {next, enter_reward(*this, next), terminal(next)};
}

std::size_t GridEnv::reset(std::mt19937_64& rng) const {
    const double u = uniform01(rng);
    double cum = 0.0;
    for (std::size_t s = 0; s < start_dist.size(); ++s) {
        cum += start_dist[s];
        if (u < cum) return s;
    }
    return start_dist.size() - 1;
}

TabularMdp GridEnv::to_tabular_mdp() const {
    TabularMdp mdp;
    mdp.n_states = n_states();
    mdp.n_actions = n_actions();
    mdp.gamma = gamma;
    mdp.transition.assign(mdp.n_states * mdp.n_actions * mdp.n_states, 0.0);
    mdp.reward = Mat(mdp.n_states, mdp.n_actions, 0.0);
    for (std::size_t s = 0; s < mdp.n_states; ++s)
        for (std::size_t a = 0; a < mdp.n_actions; ++a) {
            auto row = mdp.p_row(s, a);
            if (terminal(s)) {
                row[s] = 1.0;  // absorbing, zero reward
                continue;
            }
            row[move(s, a)] += 1.0 - slip;
            for (std::size_t d = 0; d < 4; ++d) row[move(s, d)] += slip / 4.0;
            double r = 0.0;
            r += (1.0 - slip) * enter_reward(*this, move(s, a));
            for (std::size_t d = 0; d < 4; ++d) r += slip / 4.0 * enter_reward(*this, move(s, d));
            mdp.reward(s, a) = r;
        }
    // Strictly positive version of the start distribution (the model
    // invariants require mu0 > 0 entrywise).
    const double tiny = 1e-9;
    mdp.mu0.assign(mdp.n_states, 0.0);
    const double scale = 1.0 - tiny * static_cast<double>(mdp.n_states);
    for (std::size_t s = 0; s < mdp.n_states; ++s) mdp.mu0[s] = scale * start_dist[s] + tiny;
    return mdp;
}

GridEnv make_maze() {
    GridEnv env;
    env.size = 5;
    env.cell_reward.assign(25, 0.0);
    env.is_terminal.assign(25, false);
    env.gamma = 0.9;
    env.slip = 0.0;
    env.step_reward = 0.0;
    env.is_terminal[0] = true;   // corner (0,0)
    env.cell_reward[0] = 1.0;
    env.is_terminal[24] = true;  // corner (4,4)
    env.cell_reward[24] = 10.0;
    env.start_dist.assign(25, 0.0);
    const double p = 1.0 / 23.0;
    for (std::size_t s = 0; s < 25; ++s)
        if (!env.is_terminal[s]) env.start_dist[s] = p;
    return env;
}

const std::vector<std::pair<std::size_t, std::size_t>>& mars_rover_rocks() {
    // Sub-diagonal line row = col + 2: hugging the short diagonal corridor
    // from below, so the corridor is the risky route under slip while the
    // top-edge route stays clear. The line starts at (3,1) and stops at
    // (7,5), leaving the left edge and the bottom row open so every cell
    // keeps a short route to the goal.
    static const std::vector<std::pair<std::size_t, std::size_t>> rocks = {
        {3, 1}, {4, 2}, {5, 3}, {6, 4}, {7, 5}};
    return rocks;
}

GridEnv make_mars_rover(double epsilon) {
    if (epsilon < 0.0 || epsilon > 1.0)
        throw std::domain_error("mars rover: slip probability out of [0,1]");
    GridEnv env;
    env.size = 10;
    env.cell_reward.assign(100, 0.0);
    env.is_terminal.assign(100, false);
    env.gamma = 0.95;
    env.slip = epsilon;
    env.step_reward = -0.01;
    env.is_terminal[99] = true;  // goal (9,9)
    env.cell_reward[99] = 1.0;
    for (const auto& [r, c] : mars_rover_rocks()) {
        env.is_terminal[r * 10 + c] = true;
        env.cell_reward[r * 10 + c] = -1.0;
    }
    env.start_dist.assign(100, 0.0);
    env.start_dist[0] = 1.0;  // (0,0)
    return env;
}

GridEnv perturb(const GridEnv& env, double new_epsilon) {
    if (new_epsilon < 0.0 || new_epsilon > 1.0)
        throw std::domain_error("perturb: slip probability out of [0,1]");
    GridEnv out = env;
    out.slip = new_epsilon;
    return out;
}

}  // namespace r2mdp
