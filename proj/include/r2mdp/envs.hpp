#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "r2mdp/mdp.hpp"

namespace r2mdp {

struct EnvStep {
    std::size_t next_state = 0;
    double reward = 0.0;
    bool done = false;
};

/// Shared grid description: square grid, row-major state ids, 4 movement
/// actions (0=up, 1=down, 2=left, 3=right), walls clip.
struct GridEnv {
    std::size_t size = 0;            // side length
    std::vector<double> cell_reward;  // reward granted on *entering* the cell
    std::vector<bool> is_terminal;
    double slip = 0.0;       // probability of moving in a uniformly random direction
    double step_reward = 0.0;  // added on every non-terminal entry
    double gamma = 0.9;
    Vec start_dist;  // simulator reset distribution (may have zero entries)

    std::size_t n_states() const { return size * size; }
    static constexpr std::size_t n_actions() { return 4; }

    std::size_t move(std::size_t state, std::size_t action) const;  // deterministic, clipped
    bool terminal(std::size_t state) const { return is_terminal[state]; }

    EnvStep step(std::size_t state, std::size_t action, std::mt19937_64& rng) const;
    std::size_t reset(std::mt19937_64& rng) const;

    /// Exact tabular export; terminals become absorbing zero-reward states and
    /// rewards are taken in expectation over the slip. The exported mu0 is a
    /// strictly positive version of the start distribution (tiny mass spread
    /// over the remaining states) so it satisfies the model invariants.
    TabularMdp to_tabular_mdp() const;
};

/// 5x5 grid with two absorbing goals of reward 1 (corner 0,0) and 10
/// (corner 4,4); deterministic moves; uniform start over non-terminal cells.
GridEnv make_maze();

/// 10x10 grid, start (0,0), goal (9,9) with reward +1, rock cells with reward
/// -1 on the sub-diagonal (row = col + 2) making the diagonal corridor the
/// risky short route; per-step reward -0.01; slip epsilon.
GridEnv make_mars_rover(double epsilon = 0.0);

/// Same layout with a new slip probability.
GridEnv perturb(const GridEnv& env, double new_epsilon);

/// Rock coordinates of the Mars Rover layout, (row, col) pairs.
const std::vector<std::pair<std::size_t, std::size_t>>& mars_rover_rocks();

}  // namespace r2mdp
