// Command-line front end: planning/learning experiment harness emitting CSV.
#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "r2mdp/envs.hpp"
#include "r2mdp/io.hpp"
#include "r2mdp/learning.hpp"
#include "r2mdp/mdp.hpp"
#include "r2mdp/r2.hpp"
#include "r2mdp/robust.hpp"

namespace {

using nlohmann::json;
using namespace r2mdp;

constexpr int kSchemaVersion = 1;
constexpr int kExitUsage = 2;
constexpr int kExitSolver = 3;
constexpr int kExitDivergence = 4;

struct Options {
    std::string config_path;
    std::string out_path;
    std::string solver_override;
    std::vector<std::uint64_t> seeds;
    bool quiet = false;
};

json load_config(const Options& opt) {
    if (opt.config_path.empty()) throw CLI::ValidationError("--config is required");
    std::ifstream in(opt.config_path);
    if (!in) throw std::runtime_error("cannot open config " + opt.config_path);
    json j;
    in >> j;
    return j;
}

Lp parse_norm(const std::string& s) {
    if (s == "l1") return Lp::L1;
    if (s == "l2") return Lp::L2;
    if (s == "linf") return Lp::LInf;
    throw std::runtime_error("unknown norm '" + s + "' (expected l1|l2|linf)");
}

UncertaintySpec spec_from_config(const json& cfg, std::size_t n_states, std::size_t n_actions) {
    const double ar = cfg.value("alpha_r", 0.0);
    const double ap = cfg.value("alpha_p", 0.0);
    const Lp rnorm = parse_norm(cfg.value("reward_norm", "l2"));
    const Lp tnorm = parse_norm(cfg.value("transition_norm", "l2"));
    const std::string rect = cfg.value("rectangularity", "sa");
    if (rect == "s") return UncertaintySpec::srect_uniform(n_states, ar, ap, rnorm, tnorm);
    if (rect == "sa")
        return UncertaintySpec::sarect_uniform(n_states, n_actions, ar, ap, rnorm, tnorm);
    throw std::runtime_error("unknown rectangularity '" + rect + "' (expected s|sa)");
}

InnerSolver solver_from(const json& cfg, const Options& opt) {
    std::string mode = cfg.value("solver", "closed");
    if (!opt.solver_override.empty()) mode = opt.solver_override;
    if (mode == "closed") return InnerSolver::closed_form();
    if (mode == "iterative") return InnerSolver::iterative(cfg.value("solver_tol", 1e-8));
    throw std::runtime_error("unknown solver '" + mode + "' (expected closed|iterative)");
}

GridEnv env_from_config(const json& cfg) {
    const std::string name = cfg.value("env", "maze");
    if (name == "maze") return make_maze();
    if (name == "mars-rover") return make_mars_rover(cfg.value("slip", 0.0));
    return load_env_json(name);  // path to a layout JSON
}

TabularMdp mdp_from_config(const json& cfg) {
    if (cfg.contains("mdp")) return load_mdp_json(cfg.at("mdp").get<std::string>());
    return env_from_config(cfg).to_tabular_mdp();
}

std::vector<std::uint64_t> seeds_from(const json& cfg, const Options& opt) {
    if (!opt.seeds.empty()) return opt.seeds;
    if (cfg.contains("seeds")) return cfg.at("seeds").get<std::vector<std::uint64_t>>();
    return {0};
}

std::size_t worker_count(std::size_t jobs) {
    std::size_t cap = std::thread::hardware_concurrency();
    if (const char* env = std::getenv("R2MDP_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) cap = static_cast<std::size_t>(v);
    }
    return std::max<std::size_t>(1, std::min(cap, jobs));
}

/// Runs fn(i) for i in [0, jobs) on a seed-ordered worker pool.
void parallel_for_jobs(std::size_t jobs, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = worker_count(jobs);
    if (workers == 1) {
        for (std::size_t i = 0; i < jobs; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = next.fetch_add(1); i < jobs; i = next.fetch_add(1)) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::ofstream open_out(const Options& opt) {
    if (opt.out_path.empty()) throw std::runtime_error("--out (or config \"out\") is required");
    std::ofstream out(opt.out_path);
    if (!out) throw std::runtime_error("cannot open " + opt.out_path + " for writing");
    return out;
}

std::string value_hash(const ValueFn& v) {
    std::uint64_t h = 1469598103934665603ull;
    for (double x : v) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(x));
        std::memcpy(&bits, &x, sizeof(bits));
        h = (h ^ bits) * 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

struct PlanOutcome {
    std::vector<double> residuals;
    std::vector<std::int64_t> wall_ns;
    ValueFn value;
};

/// Vanilla MPI shares the R2 driver with all radii at zero.
PlanOutcome run_planner(const std::string& algo, const TabularMdp& mdp, const json& cfg,
                        const Options& opt) {
    const double tol = cfg.value("tol", 1e-3);
    const std::size_t m = cfg.value("m", 1);
    const InnerSolver solver = solver_from(cfg, opt);
    const double eps_slack = cfg.value("epsilon", 1e-2);
    PlanOutcome out;
    auto timed_pe = [&](auto&& apply) {
        const auto t0 = std::chrono::steady_clock::now();
        ValueFn v(mdp.n_states, 0.0);
        for (std::size_t it = 0; it < kMaxFixedPointIters; ++it) {
            ValueFn next = apply(v);
            const double res = sup_norm_diff(next, v);
            v = std::move(next);
            out.residuals.push_back(res);
            out.wall_ns.push_back(std::chrono::duration_cast<std::chrono::nanoseconds>(
                                      std::chrono::steady_clock::now() - t0)
                                      .count());
            if (res <= tol) break;
            if (!std::isfinite(res)) throw std::runtime_error(algo + ": diverged");
        }
        out.value = std::move(v);
    };
    const Policy uniform = Policy::uniform(mdp.n_states, mdp.n_actions);
    if (algo == "vanilla-pe") {
        timed_pe([&](const ValueFn& v) { return bellman_eval_apply(mdp, uniform, v); });
    } else if (algo == "robust-pe") {
        const auto spec = spec_from_config(cfg, mdp.n_states, mdp.n_actions);
        timed_pe([&](const ValueFn& v) {
            return robust_bellman_eval_apply(mdp, spec, uniform, v, solver);
        });
    } else if (algo == "r2-pe") {
        const auto r2cfg = R2Config::with_uniform_epsilon(
            spec_from_config(cfg, mdp.n_states, mdp.n_actions), mdp.n_states, eps_slack);
        timed_pe([&](const ValueFn& v) { return r2_bellman_eval_apply(mdp, r2cfg, uniform, v); });
    } else if (algo == "vanilla-mpi" || algo == "r2-mpi") {
        auto spec = spec_from_config(cfg, mdp.n_states, mdp.n_actions);
        if (algo == "vanilla-mpi")
            spec = UncertaintySpec::sarect_uniform(mdp.n_states, mdp.n_actions, 0.0, 0.0);
        const auto r2cfg = R2Config::with_uniform_epsilon(spec, mdp.n_states, eps_slack);
        const auto result = r2_mpi(mdp, r2cfg, m, tol);
        out.residuals = result.residuals;
        out.wall_ns = result.wall_time_ns;
        out.value = result.value;
    } else if (algo == "robust-mpi") {
        const auto spec = spec_from_config(cfg, mdp.n_states, mdp.n_actions);
        const auto result = robust_mpi(mdp, spec, m, tol, solver);
        out.residuals = result.residuals;
        out.wall_ns = result.wall_time_ns;
        out.value = result.value;
    } else {
        throw std::runtime_error("unknown planning algorithm '" + algo + "'");
    }
    return out;
}

int cmd_plan(const Options& opt) {
    const json cfg = load_config(opt);
    const TabularMdp mdp = mdp_from_config(cfg);
    const std::string algo = cfg.at("algorithm").get<std::string>();
    const auto seeds = seeds_from(cfg, opt);
    std::vector<PlanOutcome> outcomes(seeds.size());
    parallel_for_jobs(seeds.size(),
                      [&](std::size_t i) { outcomes[i] = run_planner(algo, mdp, cfg, opt); });
    auto out = open_out(opt);
    out << "schema_version,seed,iter,residual,wall_time_ns\n";
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        const auto& o = outcomes[i];
        for (std::size_t it = 0; it < o.residuals.size(); ++it)
            out << kSchemaVersion << ',' << seeds[i] << ',' << it << ',' << o.residuals[it] << ','
                << o.wall_ns[it] << '\n';
        out << "# seed " << seeds[i] << " total_ns " << (o.wall_ns.empty() ? 0 : o.wall_ns.back())
            << " value_hash " << value_hash(o.value) << '\n';
    }
    if (!opt.quiet)
        std::cerr << algo << ": " << seeds.size() << " seed(s) -> " << opt.out_path << "\n";
    return 0;
}

int cmd_sweep_radius(const Options& opt) {
    const json cfg = load_config(opt);
    const TabularMdp mdp = mdp_from_config(cfg);
    const double tol = cfg.value("tol", 1e-10);
    const std::size_t m = cfg.value("m", 1);
    const std::string which = cfg.value("which_radius", "reward");
    if (which != "reward" && which != "transition")
        throw std::runtime_error("which_radius must be reward|transition");
    std::vector<double> grid;
    if (cfg.contains("radius_grid")) grid = cfg.at("radius_grid").get<std::vector<double>>();
    if (grid.empty()) throw std::runtime_error("radius_grid is required");

    const auto vanilla_cfg = R2Config::with_uniform_epsilon(
        UncertaintySpec::sarect_uniform(mdp.n_states, mdp.n_actions, 0.0, 0.0), mdp.n_states);
    const ValueFn v_vanilla = r2_mpi(mdp, vanilla_cfg, m, tol).value;

    struct Row {
        double radius;
        std::string alg;
        double distance;
    };
    std::vector<Row> rows(grid.size() * 2);
    parallel_for_jobs(grid.size(), [&](std::size_t i) {
        const double r = grid[i];
        const double ar = which == "reward" ? r : 0.0;
        const double ap = which == "transition" ? r : 0.0;
        const auto spec = UncertaintySpec::sarect_uniform(mdp.n_states, mdp.n_actions, ar, ap);
        const auto robust = robust_mpi(mdp, spec, m, tol, InnerSolver::closed_form());
        const auto r2 = r2_mpi(mdp, R2Config::with_uniform_epsilon(spec, mdp.n_states), m, tol);
        auto dist = [&](const ValueFn& v) {
            double acc = 0.0;
            for (std::size_t s = 0; s < v.size(); ++s)
                acc += (v[s] - v_vanilla[s]) * (v[s] - v_vanilla[s]);
            return std::sqrt(acc);
        };
        rows[2 * i] = {r, "robust", dist(robust.value)};
        rows[2 * i + 1] = {r, "r2", dist(r2.value)};
    });
    auto out = open_out(opt);
    out << "schema_version,radius,which_radius,alg,distance\n";
    out.precision(17);
    for (const auto& row : rows)
        out << kSchemaVersion << ',' << row.radius << ',' << which << ',' << row.alg << ','
            << row.distance << '\n';
    if (!opt.quiet) std::cerr << "sweep-radius: " << grid.size() << " radii -> " << opt.out_path << "\n";
    return 0;
}

Variant variant_from(const json& cfg, const Options& opt, std::size_t n_states,
                     std::size_t n_actions) {
    const std::string algo = cfg.at("algorithm").get<std::string>();
    if (algo == "q-vanilla") return Variant::vanilla();
    const auto spec = spec_from_config(cfg, n_states, n_actions);
    if (algo == "q-robust") return Variant::robust(spec, solver_from(cfg, opt));
    if (algo == "q-r2") return Variant::r2(spec);
    throw std::runtime_error("unknown learning algorithm '" + algo + "'");
}

LearningConfig learning_config_from(const json& cfg, std::uint64_t seed) {
    LearningConfig lc;
    lc.max_steps = cfg.value("max_steps", 100000);
    lc.seed = seed;
    lc.record_every = cfg.value("record_every", 1000);
    if (cfg.value("norm_mode", "exact") == "batch")
        lc.norm_mode = NormMode::batch(cfg.value("batch_size", 64), cfg.value("beta", 0.1));
    return lc;
}

int cmd_learn(const Options& opt) {
    const json cfg = load_config(opt);
    const GridEnv env = env_from_config(cfg);
    const Variant variant = variant_from(cfg, opt, env.n_states(), GridEnv::n_actions());
    const auto seeds = seeds_from(cfg, opt);
    std::vector<LearnResult> results(seeds.size());
    parallel_for_jobs(seeds.size(), [&](std::size_t i) {
        results[i] = q_learning(env, learning_config_from(cfg, seeds[i]), variant);
    });
    auto out = open_out(opt);
    out << "schema_version,step,episode,return,delta,wall_time_ns,variant,seed\n";
    out.precision(17);
    for (const auto& res : results) {
        for (const auto& row : res.rows)
            out << kSchemaVersion << ',' << row.step << ',' << row.episode << ','
                << row.episode_return << ',' << row.delta << ',' << row.wall_time_ns << ','
                << res.variant << ',' << res.seed << '\n';
        auto times = res.update_times_ns;
        std::nth_element(times.begin(), times.begin() + times.size() / 2, times.end());
        out << "# variant " << res.variant << " seed " << res.seed << " median_update_ns "
            << times[times.size() / 2] << '\n';
    }
    if (!opt.quiet) std::cerr << "learn: " << seeds.size() << " seed(s) -> " << opt.out_path << "\n";
    return 0;
}

int cmd_robust_eval(const Options& opt) {
    const json cfg = load_config(opt);
    const GridEnv nominal = env_from_config(cfg);
    std::vector<double> grid = cfg.value("epsilon_grid", std::vector<double>{0.0, 0.2, 0.4, 0.6, 0.8});
    const std::size_t episodes = cfg.value("episodes", 200);
    const auto seeds = seeds_from(cfg, opt);
    std::vector<std::string> variants = cfg.value("variants", std::vector<std::string>{"q-vanilla", "q-r2"});

    struct Cell {
        std::string variant;
        double epsilon;
        double mean, stddev;
    };
    // train per (variant, seed), then evaluate over the grid
    std::vector<std::vector<Policy>> policies(variants.size());
    for (auto& p : policies) p.resize(seeds.size());
    std::vector<std::pair<std::size_t, std::size_t>> jobs;
    for (std::size_t vi = 0; vi < variants.size(); ++vi)
        for (std::size_t si = 0; si < seeds.size(); ++si) jobs.emplace_back(vi, si);
    parallel_for_jobs(jobs.size(), [&](std::size_t k) {
        const auto [vi, si] = jobs[k];
        json vcfg = cfg;
        vcfg["algorithm"] = variants[vi];
        const Variant variant = variant_from(vcfg, opt, nominal.n_states(), GridEnv::n_actions());
        const auto res = q_learning(nominal, learning_config_from(cfg, seeds[si]), variant);
        policies[vi][si] = greedy_from_q(res.q);
    });
    std::vector<Cell> cells;
    for (std::size_t vi = 0; vi < variants.size(); ++vi)
        for (double eps : grid) {
            const GridEnv shifted = perturb(nominal, eps);
            std::vector<double> means(seeds.size());
            double sum = 0.0;
            for (std::size_t si = 0; si < seeds.size(); ++si) {
                const auto stats =
                    evaluate_policy_rollouts(shifted, policies[vi][si], episodes, /*seed=*/12345);
                means[si] = stats.mean;
                sum += stats.mean;
            }
            const double mean = sum / seeds.size();
            double var = 0.0;
            for (double m : means) var += (m - mean) * (m - mean);
            cells.push_back({variants[vi], eps, mean, std::sqrt(var / seeds.size())});
        }
    auto out = open_out(opt);
    out << "schema_version,variant,epsilon,mean_return,std_return,seeds\n";
    out.precision(17);
    for (const auto& c : cells)
        out << kSchemaVersion << ',' << c.variant << ',' << c.epsilon << ',' << c.mean << ','
            << c.stddev << ',' << seeds.size() << '\n';
    if (!opt.quiet) std::cerr << "robust-eval -> " << opt.out_path << "\n";
    return 0;
}

int cmd_validate(const std::string& path, bool quiet) {
    const TabularMdp mdp = load_mdp_json(path);
    if (!quiet)
        std::cout << "ok: " << mdp.n_states << " states, " << mdp.n_actions
                  << " actions, gamma " << mdp.gamma << "\n";
    return 0;
}

std::vector<std::uint64_t> parse_seed_range(const std::string& s) {
    const auto pos = s.find("..");
    std::vector<std::uint64_t> seeds;
    if (pos == std::string::npos) {
        seeds.push_back(std::stoull(s));
        return seeds;
    }
    const auto lo = std::stoull(s.substr(0, pos));
    const auto hi = std::stoull(s.substr(pos + 2));
    if (hi < lo) throw CLI::ValidationError("--seeds range must be n..m with m >= n");
    for (auto v = lo; v <= hi; ++v) seeds.push_back(v);
    return seeds;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tabular robust/twice-regularized MDP toolkit"};
    app.require_subcommand(1);

    Options opt;
    std::string seed_str, seeds_str, validate_path;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config_path, "experiment config JSON");
        sub->add_option("--seed", seed_str, "single seed");
        sub->add_option("--seeds", seeds_str, "seed range n..m");
        sub->add_option("--out", opt.out_path, "output CSV path");
        sub->add_option("--solver", opt.solver_override, "closed|iterative")
            ->check(CLI::IsMember({"closed", "iterative"}));
        sub->add_flag("--quiet", opt.quiet, "suppress progress output");
    };

    auto* plan = app.add_subcommand("plan", "run a planner and log convergence");
    auto* sweep = app.add_subcommand("sweep-radius", "distance-to-vanilla over a radius grid");
    auto* learn = app.add_subcommand("learn", "run tabular q-learning");
    auto* reval = app.add_subcommand("robust-eval", "evaluate trained policies under slip shifts");
    auto* validate = app.add_subcommand("validate", "load and invariant-check an MDP JSON");
    for (auto* sub : {plan, sweep, learn, reval}) add_common(sub);
    validate->add_option("mdp", validate_path, "MDP JSON path")->required();
    validate->add_flag("--quiet", opt.quiet, "suppress output");

    CLI11_PARSE(app, argc, argv);

    try {
        if (!seed_str.empty()) opt.seeds = {std::stoull(seed_str)};
        if (!seeds_str.empty()) opt.seeds = parse_seed_range(seeds_str);
        if (plan->parsed()) return cmd_plan(opt);
        if (sweep->parsed()) return cmd_sweep_radius(opt);
        if (learn->parsed()) return cmd_learn(opt);
        if (reval->parsed()) return cmd_robust_eval(opt);
        if (validate->parsed()) return cmd_validate(validate_path, opt.quiet);
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return kExitSolver;
    } catch (const std::runtime_error& e) {
        const std::string what = e.what();
        std::cerr << "error: " << what << "\n";
        return what.find("diverge") != std::string::npos ? kExitDivergence : kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
