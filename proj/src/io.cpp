#include "r2mdp/io.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace r2mdp {

namespace {

using nlohmann::json;

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    json j;
    in >> j;
    return j;
}

void write_json(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
}

}  // namespace

TabularMdp load_mdp_json(const std::string& path) {
    const json j = read_json(path);
    TabularMdp mdp;
    mdp.n_states = j.at("n_states").get<std::size_t>();
    mdp.n_actions = j.at("n_actions").get<std::size_t>();
    mdp.gamma = j.at("gamma").get<double>();
    mdp.mu0 = j.at("mu0").get<std::vector<double>>();
    const auto& rew = j.at("reward");
    const auto& tr = j.at("transition");
    if (rew.size() != mdp.n_states || tr.size() != mdp.n_states)
        throw std::runtime_error(path + ": reward/transition outer dimension mismatch");
    mdp.reward = Mat(mdp.n_states, mdp.n_actions);
    mdp.transition.assign(mdp.n_states * mdp.n_actions * mdp.n_states, 0.0);
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
        if (rew[s].size() != mdp.n_actions || tr[s].size() != mdp.n_actions)
            throw std::runtime_error(path + ": action dimension mismatch");
        for (std::size_t a = 0; a < mdp.n_actions; ++a) {
            mdp.reward(s, a) = rew[s][a].get<double>();
            const auto& row = tr[s][a];
            if (row.size() != mdp.n_states)
                throw std::runtime_error(path + ": transition row dimension mismatch");
            double sum = 0.0;
            auto dst = mdp.p_row(s, a);
            for (std::size_t sp = 0; sp < mdp.n_states; ++sp) {
                dst[sp] = row[sp].get<double>();
                if (dst[sp] < 0.0)
                    throw std::runtime_error(path + ": negative transition probability");
                sum += dst[sp];
            }
            if (std::abs(sum - 1.0) > 1e-9)
                throw std::runtime_error(path + ": transition row does not sum to 1 (1e-9)");
            for (std::size_t sp = 0; sp < mdp.n_states; ++sp) dst[sp] /= sum;
        }
    }
    double mass = 0.0;
    for (double m : mdp.mu0) mass += m;
    if (std::abs(mass - 1.0) > 1e-9) throw std::runtime_error(path + ": mu0 does not sum to 1");
    for (double& m : mdp.mu0) m /= mass;
    mdp.validate();
    return mdp;
}

void save_mdp_json(const TabularMdp& mdp, const std::string& path) {
    json j;
    j["n_states"] = mdp.n_states;
    j["n_actions"] = mdp.n_actions;
    j["gamma"] = mdp.gamma;
    j["mu0"] = mdp.mu0;
    json rew = json::array();
    json tr = json::array();
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
        json rrow = json::array();
        json trow = json::array();
        for (std::size_t a = 0; a < mdp.n_actions; ++a) {
            rrow.push_back(mdp.reward(s, a));
            auto span = mdp.p_row(s, a);
            trow.push_back(std::vector<double>(span.begin(), span.end()));
        }
        rew.push_back(std::move(rrow));
        tr.push_back(std::move(trow));
    }
    j["reward"] = std::move(rew);
    j["transition"] = std::move(tr);
    write_json(j, path);
}

GridEnv load_env_json(const std::string& path) {
    const json j = read_json(path);
    GridEnv env;
    env.size = j.at("size").get<std::size_t>();
    env.gamma = j.at("gamma").get<double>();
    env.slip = j.value("slip", 0.0);
    env.step_reward = j.value("step_reward", 0.0);
    const std::size_t n = env.size * env.size;
    env.cell_reward.assign(n, 0.0);
    env.is_terminal.assign(n, false);
    for (const auto& t : j.at("terminals")) {
        const auto r = t.at("row").get<std::size_t>();
        const auto c = t.at("col").get<std::size_t>();
        if (r >= env.size || c >= env.size) throw std::runtime_error(path + ": terminal out of grid");
        env.is_terminal[r * env.size + c] = true;
        env.cell_reward[r * env.size + c] = t.at("reward").get<double>();
    }
    env.start_dist.assign(n, 0.0);
    if (j.value("uniform_start", false)) {
        std::size_t count = 0;
        for (bool t : env.is_terminal)
            if (!t) ++count;
        for (std::size_t s = 0; s < n; ++s)
            if (!env.is_terminal[s]) env.start_dist[s] = 1.0 / static_cast<double>(count);
    } else {
        for (const auto& st : j.at("start")) {
            const auto r = st.at("row").get<std::size_t>();
            const auto c = st.at("col").get<std::size_t>();
            env.start_dist[r * env.size + c] = st.at("prob").get<double>();
        }
        double mass = 0.0;
        for (double p : env.start_dist) mass += p;
        if (std::abs(mass - 1.0) > 1e-9) throw std::runtime_error(path + ": start dist not normalized");
    }
    return env;
}

void save_env_json(const GridEnv& env, const std::string& path) {
    json j;
    j["size"] = env.size;
    j["gamma"] = env.gamma;
    j["slip"] = env.slip;
    j["step_reward"] = env.step_reward;
    json terms = json::array();
    json start = json::array();
    for (std::size_t s = 0; s < env.n_states(); ++s) {
        const std::size_t r = s / env.size, c = s % env.size;
        if (env.is_terminal[s])
            terms.push_back({{"row", r}, {"col", c}, {"reward", env.cell_reward[s]}});
        if (env.start_dist[s] > 0.0)
            start.push_back({{"row", r}, {"col", c}, {"prob", env.start_dist[s]}});
    }
    j["terminals"] = std::move(terms);
    j["start"] = std::move(start);
    write_json(j, path);
}

}  // namespace r2mdp
