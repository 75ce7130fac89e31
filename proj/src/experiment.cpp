#include "aac/experiment.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>

#include "aac/errors.hpp"
#include "aac/random.hpp"

namespace aac {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw ConfigError("cannot write " + p.string());
    return os;
}

std::vector<std::int64_t> checkpoint_steps(std::int64_t total, std::int64_t interval) {
    std::vector<std::int64_t> out;
    if (interval > 0)
        for (std::int64_t s = interval; s <= total; s += interval) out.push_back(s);
    if (out.empty() || out.back() != total) out.push_back(total);
    return out;
}

}  // namespace

TabularTask make_tabular_task(const TaskConfig& task) {
    switch (task.kind) {
        case TaskKind::gridworld: {
            auto g = make_gridworld(task.gridworld);
            return {std::move(g.mdp), std::move(g.terminal_states), task.max_steps};
        }
        case TaskKind::random_mdp:
            return {random_mdp(task.random), {}, task.max_steps};
        case TaskKind::chain:
            return {chain_mdp(task.chain_length, task.chain_gamma), {}, task.max_steps};
        case TaskKind::mdp_file:
            return {load_mdp_file(task.mdp_path), {}, task.max_steps};
        default:
            throw ConfigError("task is not tabular");
    }
}

std::unique_ptr<DiscreteEnv> make_env(const TaskConfig& task) {
    if (task.kind == TaskKind::cartpole) return std::make_unique<CartPoleEnv>(task.cartpole);
    if (task.kind == TaskKind::acrobot) return std::make_unique<AcrobotEnv>();
    auto t = make_tabular_task(task);
    return std::make_unique<TabularEnv>(std::move(t.mdp), std::move(t.terminal_states), t.max_steps);
}

FeatureMap make_features(const FeatureConfig& f, int observation_dim) {
    switch (f.kind) {
        case FeatureKind::identity:
            return FeatureMap::identity(observation_dim);
        case FeatureKind::polynomial:
            return FeatureMap::polynomial(observation_dim, f.degree);
        case FeatureKind::tile_coding: {
            if (f.low.size() != std::size_t(observation_dim) || f.high.size() != std::size_t(observation_dim))
                throw ConfigError("tile coding bounds must match the observation dimension");
            return FeatureMap::tile_coding(Eigen::Map<const Eigen::VectorXd>(f.low.data(), observation_dim),
                                           Eigen::Map<const Eigen::VectorXd>(f.high.data(), observation_dim),
                                           f.tiles, f.tilings);
        }
    }
    throw ConfigError("unknown feature kind");
}

TabularPolicy greedy_policy(const Eigen::MatrixXd& table) {
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(table.rows(), table.cols());
    for (Eigen::Index s = 0; s < table.rows(); ++s) {
        Eigen::Index best = 0;
        table.row(s).maxCoeff(&best);
        p(s, best) = 1.0;
    }
    return TabularPolicy(std::move(p));
}

// ---------------------------------------------------------------- solve

SolveResult solve_task(const ExperimentConfig& cfg) {
    if (!cfg.task.tabular()) throw ConfigError("solve needs a tabular task");
    const auto task = make_tabular_task(cfg.task);
    const EntropyConfig ent(cfg.aac.alpha);
    const auto init = TabularPolicy::uniform(task.mdp.n_states(), task.mdp.n_actions());
    SolveResult out{soft_policy_iteration(task.mdp, ent, init, cfg.solver.tol, cfg.solver.max_iter), 0.0, 0.0};
    out.eta_soft = tilde_eta(task.mdp, out.solution.policy, ent);
    out.eta_greedy = objective_eta(task.mdp, greedy_policy(out.solution.policy.probs()));
    return out;
}

void write_solution(const SolveResult& r, const std::string& dir) {
    fs::create_directories(dir);
    const auto& pi = r.solution.policy.probs();
    const auto& q = r.solution.values.q_alpha;
    const auto& v = r.solution.values.v_alpha;
    {
        auto os = open_out(fs::path(dir) / "policy.csv");
        os << "state,action,probability\n";
        for (Eigen::Index s = 0; s < pi.rows(); ++s)
            for (Eigen::Index a = 0; a < pi.cols(); ++a) os << s << ',' << a << ',' << fmt(pi(s, a)) << '\n';
    }
    {
        auto os = open_out(fs::path(dir) / "values.csv");
        os << "state,v_alpha\n";
        for (Eigen::Index s = 0; s < v.size(); ++s) os << s << ',' << fmt(v(s)) << '\n';
    }
    {
        auto os = open_out(fs::path(dir) / "q_values.csv");
        os << "state,action,q_alpha\n";
        for (Eigen::Index s = 0; s < q.rows(); ++s)
            for (Eigen::Index a = 0; a < q.cols(); ++a) os << s << ',' << a << ',' << fmt(q(s, a)) << '\n';
    }
    {
        auto os = open_out(fs::path(dir) / "summary.csv");
        os << "iterations,max_abs_advantage,eta_soft,eta_greedy\n";
        os << r.solution.iterations << ',' << fmt(r.solution.max_abs_advantage) << ',' << fmt(r.eta_soft) << ','
           << fmt(r.eta_greedy) << '\n';
    }
}

// ---------------------------------------------------------------- training

double greedy_eta(const AacAgent& agent, const TabularMdp& mdp) {
    const auto ns = mdp.n_states();
    Eigen::MatrixXd x(agent.features().output_dim(), ns);
    for (Eigen::Index s = 0; s < ns; ++s) x.col(s) = agent.features()(Eigen::VectorXd::Unit(ns, s));
    const Eigen::MatrixXd probs = agent.hybrid_policy_features(x);
    return objective_eta(mdp, greedy_policy(probs.transpose()));
}

RunResult run_training(const ExperimentConfig& cfg, double epsilon, std::uint64_t run_seed,
                       const std::string& snapshot_prefix) {
    RunResult out;
    out.epsilon = epsilon;
    out.seed = run_seed;

    AacConfig ac = cfg.aac;
    ac.epsilon = epsilon;
    ac.seed = run_seed;
    auto env = make_env(cfg.task);
    std::optional<TabularMdp> mdp;
    if (cfg.task.tabular()) {
        mdp = static_cast<TabularEnv&>(*env).mdp();
        ac.gamma = mdp->gamma();
    }
    AacAgent agent(make_features(cfg.features, env->observation_dim()), env->n_actions(), ac);

    TrainHooks hooks;
    hooks.checkpoint_interval = cfg.output.checkpoint_interval;
    const bool snapshots = cfg.output.snapshots && !snapshot_prefix.empty();
    if (mdp || snapshots) {
        hooks.on_checkpoint = [&](std::int64_t step, const AacAgent& a) {
            if (mdp) out.evals.push_back({step, greedy_eta(a, *mdp)});
            if (snapshots) {
                auto os = open_out(snapshot_prefix + "_step" + std::to_string(step) + ".snap");
                a.save(os);
            }
        };
    }
    out.log = train(agent, *env, hooks);
    // Make sure the final step is always evaluated.
    if (mdp && (out.evals.empty() || out.evals.back().step != ac.total_steps))
        out.evals.push_back({ac.total_steps, greedy_eta(agent, *mdp)});
    out.ok = true;
    return out;
}

// ---------------------------------------------------------------- aggregate

std::vector<AggregateRow> aggregate_runs(const std::vector<RunResult>& runs, const std::vector<double>& epsilons,
                                         std::int64_t total_steps, std::int64_t checkpoint_interval,
                                         int return_window) {
    std::vector<AggregateRow> rows;
    const auto steps = checkpoint_steps(total_steps, checkpoint_interval);
    auto summarise = [](std::vector<double>& xs, AggregateRow& row) {
        row.n = static_cast<int>(xs.size());
        if (xs.empty()) return;
        double sum = 0.0;
        for (double x : xs) sum += x;
        row.mean = sum / row.n;
        if (row.n > 1) {
            double ss = 0.0;
            for (double x : xs) ss += (x - row.mean) * (x - row.mean);
            row.stderr_ = std::sqrt(ss / (row.n - 1)) / std::sqrt(double(row.n));
        }
    };
    for (std::size_t e = 0; e < epsilons.size(); ++e) {
        for (std::int64_t step : steps) {
            std::vector<double> ret, eta;
            for (const auto& r : runs) {
                if (!r.ok || r.epsilon_index != e) continue;
                const double m = trailing_mean_return(r.log, step, static_cast<std::size_t>(return_window));
                if (!std::isnan(m)) ret.push_back(m);
                for (const auto& ev : r.evals)
                    if (ev.step == step) eta.push_back(ev.greedy_eta);
            }
            AggregateRow row{epsilons[e], step, "return", 0, 0.0, 0.0};
            summarise(ret, row);
            rows.push_back(row);
            if (!eta.empty()) {
                AggregateRow er{epsilons[e], step, "greedy_eta", 0, 0.0, 0.0};
                summarise(eta, er);
                rows.push_back(er);
            }
        }
    }
    return rows;
}

void write_aggregate_csv(std::ostream& os, const std::vector<AggregateRow>& rows) {
    os << "epsilon,step,metric,n,mean,stderr\n";
    for (const auto& r : rows)
        os << fmt(r.epsilon) << ',' << r.step << ',' << r.metric << ',' << r.n << ',' << fmt(r.mean) << ','
           << fmt(r.stderr_) << '\n';
}

void write_eval_csv(std::ostream& os, const std::vector<EvalPoint>& evals) {
    os << "step,greedy_eta\n";
    for (const auto& e : evals) os << e.step << ',' << fmt(e.greedy_eta) << '\n';
}

std::vector<EvalPoint> read_eval_csv(std::istream& is) {
    std::vector<EvalPoint> out;
    std::string line;
    if (!std::getline(is, line) || line != "step,greedy_eta") throw ConfigError("not an evaluation log");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw ConfigError("malformed evaluation row");
        EvalPoint p;
        auto r1 = std::from_chars(line.data(), line.data() + comma, p.step);
        auto r2 = std::from_chars(line.data() + comma + 1, line.data() + line.size(), p.greedy_eta);
        if (r1.ec != std::errc() || r2.ec != std::errc()) throw ConfigError("malformed evaluation row");
        out.push_back(p);
    }
    return out;
}

// ---------------------------------------------------------------- sweep

bool SweepResult::all_ok() const {
    for (const auto& r : runs)
        if (!r.ok) return false;
    return true;
}

std::string run_stem(std::size_t epsilon_index, std::size_t seed_index) {
    return "eps" + std::to_string(epsilon_index) + "_seed" + std::to_string(seed_index);
}

SweepResult run_sweep(const ExperimentConfig& cfg, const std::string& dir, int workers) {
    const auto epsilons = cfg.resolved_epsilons();
    if (epsilons.empty()) throw ConfigError("sweep.epsilons must not be empty");
    if (cfg.sweep.seeds.empty()) throw ConfigError("sweep.seeds must not be empty");
    if (workers <= 0) throw ConfigError("workers must be positive");
    for (double e : epsilons) {
        AacConfig probe = cfg.aac;
        probe.epsilon = e;
        probe.validate();
    }

    const fs::path runs_dir = fs::path(dir) / "runs";
    fs::create_directories(runs_dir);

    SweepResult result;
    for (std::size_t i = 0; i < epsilons.size(); ++i)
        for (std::size_t j = 0; j < cfg.sweep.seeds.size(); ++j) {
            RunResult r;
            r.epsilon_index = i;
            r.seed_index = j;
            r.epsilon = epsilons[i];
            r.seed = derive_seed(cfg.seed, i, cfg.sweep.seeds[j]);
            result.runs.push_back(std::move(r));
        }

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= result.runs.size()) return;
            RunResult& slot = result.runs[k];
            const std::string stem = run_stem(slot.epsilon_index, slot.seed_index);
            try {
                RunResult r = run_training(cfg, slot.epsilon, slot.seed, (runs_dir / stem).string());
                r.epsilon_index = slot.epsilon_index;
                r.seed_index = slot.seed_index;
                {
                    auto os = open_out(runs_dir / (stem + ".csv"));
                    r.log.write_csv(os);
                }
                if (!r.evals.empty()) {
                    auto os = open_out(runs_dir / (stem + "_eval.csv"));
                    write_eval_csv(os, r.evals);
                }
                slot = std::move(r);
            } catch (const std::exception& e) {
                slot.ok = false;
                slot.error = e.what();
            }
        }
    };
    const int n_threads = std::min<int>(workers, static_cast<int>(result.runs.size()));
    std::vector<std::thread> pool;
    for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    result.aggregate = aggregate_runs(result.runs, epsilons, cfg.aac.total_steps, cfg.output.checkpoint_interval,
                                      cfg.output.return_window);
    auto os = open_out(fs::path(dir) / "aggregate.csv");
    write_aggregate_csv(os, result.aggregate);
    return result;
}

}  // namespace aac
