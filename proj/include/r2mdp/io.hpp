#pragma once

#include <string>

#include "r2mdp/envs.hpp"
#include "r2mdp/mdp.hpp"

namespace r2mdp {

/// MDP JSON: object with n_states, n_actions, gamma, mu0, reward[s][a],
/// transition[s][a][s']. Row stochasticity is checked at 1e-9 on load and the
/// rows are then renormalized exactly.
TabularMdp load_mdp_json(const std::string& path);
void save_mdp_json(const TabularMdp& mdp, const std::string& path);

/// Grid-env layout JSON: {"size", "gamma", "slip", "step_reward",
/// "terminals": [{"row","col","reward"}...], "uniform_start": bool or
/// "start": [{"row","col","prob"}...]}.
GridEnv load_env_json(const std::string& path);
void save_env_json(const GridEnv& env, const std::string& path);

}  // namespace r2mdp
