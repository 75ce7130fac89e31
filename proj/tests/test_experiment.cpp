#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "aac/config.hpp"
#include "aac/errors.hpp"
#include "aac/experiment.hpp"
#include "test_helpers.hpp"

using namespace aac;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("aac_unit_" + name);
    fs::remove_all(p);
    return p;
}

// Hard optimal return by value iteration.
double optimal_eta(const TabularMdp& mdp) {
    const auto s_n = mdp.n_states(), a_n = mdp.n_actions();
    Eigen::VectorXd v = Eigen::VectorXd::Zero(s_n);
    for (int it = 0; it < 5000; ++it) {
        Eigen::VectorXd next(s_n);
        for (Eigen::Index s = 0; s < s_n; ++s) {
            double best = -1e300;
            for (Eigen::Index a = 0; a < a_n; ++a)
                best = std::max(best, mdp.reward()(s, a) + mdp.gamma() * mdp.transition().row(s * a_n + a).dot(v));
            next(s) = best;
        }
        if ((next - v).cwiseAbs().maxCoeff() < 1e-14) {
            v = next;
            break;
        }
        v = next;
    }
    return mdp.initial_dist().dot(v);
}

const char* kSmallGrid = R"(
schema_version: 1
seed: 5
task:
  kind: gridworld
  width: 3
  height: 2
  goals:
    - {cell: [2, 1], reward: 1.0}
  gamma: 0.9
  max_steps: 30
algorithm:
  alpha: 0.05
  lr_actor: 0.5
  lr_critic: 0.5
  polyak_rho: 0.1
  batch_size: 16
  total_steps: 1500
  learning_starts: 50
  hidden: 0
  bias: false
  zero_init: true
sweep:
  epsilons: [0.0, 1.0]
  epsilon_units: inverse_alpha
  seeds: 3
  workers: 1
output:
  checkpoint_interval: 500
)";

}  // namespace

TEST_CASE("config parsing") {
    SUBCASE("defaults") {
        const auto cfg = parse_config("");
        CHECK(cfg.schema_version == kSchemaVersion);
        CHECK(cfg.aac.lr_actor == 3e-3);
        CHECK(cfg.aac.lr_critic == 1e-2);
        CHECK(cfg.aac.polyak_rho == 0.01);
        CHECK(cfg.aac.batch_size == 64);
        CHECK(cfg.aac.buffer_capacity == 50000);
        CHECK(cfg.verify_instances == 50);
    }
    SUBCASE("small gridworld") {
        const auto cfg = parse_config(kSmallGrid);
        CHECK(cfg.seed == 5);
        CHECK(cfg.task.kind == TaskKind::gridworld);
        CHECK(cfg.task.gridworld.width == 3);
        CHECK(cfg.task.gridworld.goals.size() == 1);
        CHECK(cfg.task.max_steps == 30);
        CHECK(cfg.aac.hidden == 0);
        CHECK(cfg.sweep.seeds == std::vector<std::uint64_t>{0, 1, 2});
        const auto eps = cfg.resolved_epsilons();
        REQUIRE(eps.size() == 2);
        CHECK(eps[0] == 0.0);
        CHECK(eps[1] == doctest::Approx(20.0));
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(parse_config("bogus_key: 1\n"), ConfigError);
        CHECK_THROWS_AS(parse_config("algorithm: {alpha: 1.0, lr_actr: 0.1}\n"), ConfigError);
        CHECK_THROWS_AS(parse_config("schema_version: 2\n"), ConfigError);
        CHECK_THROWS_AS(parse_config("task: {kind: teleport}\n"), ConfigError);
        CHECK_THROWS_AS(parse_config("algorithm: {alpha: -1}\n"), ConfigError);
        CHECK_THROWS_AS(parse_config("algorithm: {alpha: [1, 2]}\n"), ConfigError);
        CHECK_THROWS_AS(parse_config("sweep: {epsilon_units: furlongs}\n"), ConfigError);
        CHECK_THROWS_AS(parse_config("{{{not yaml"), ConfigError);
        CHECK_THROWS_AS(load_config("/nonexistent/config.yaml"), ConfigError);
    }
    SUBCASE("every shipped config parses") {
        for (const auto& entry : fs::directory_iterator(fs::path(AAC_SOURCE_DIR) / "configs")) {
            if (entry.path().filename() == "one_state_model.yaml") continue;
            CAPTURE(entry.path().string());
            CHECK_NOTHROW(load_config(entry.path().string()));
        }
    }
}

TEST_CASE("model files") {
    const auto mdp = load_mdp_file(std::string(AAC_SOURCE_DIR) + "/configs/one_state_model.yaml");
    CHECK(mdp.n_states() == 1);
    CHECK(mdp.n_actions() == 2);
    CHECK(mdp.gamma() == 0.5);
    CHECK(mdp.reward()(0, 0) == 1.0);

    const auto dir = scratch("model");
    fs::create_directories(dir);
    {
        std::ofstream os(dir / "bad.yaml");
        os << "n_states: 1\nn_actions: 2\ngamma: 0.5\ntransition: [1.0]\nreward: [1.0, 0.0]\n";
    }
    CHECK_THROWS(load_mdp_file((dir / "bad.yaml").string()));
    {
        std::ofstream os(dir / "nonstochastic.yaml");
        os << "n_states: 1\nn_actions: 2\ngamma: 0.5\ntransition: [1.0, 0.5]\nreward: [1.0, 0.0]\n";
    }
    CHECK_THROWS(load_mdp_file((dir / "nonstochastic.yaml").string()));
}

TEST_CASE("solve") {
    SUBCASE("one-state task file") {
        const auto cfg = load_config(std::string(AAC_SOURCE_DIR) + "/configs/one_state.yaml");
        const auto res = solve_task(cfg);
        CHECK(std::abs(res.solution.values.v_alpha(0) - 2.0 * std::log(1.0 + std::exp(1.0))) < 1e-9);
        const auto dir = scratch("solve");
        write_solution(res, dir.string());
        const auto values = slurp(dir / "values.csv");
        CHECK(values.rfind("state,v_alpha\n0,2.62652", 0) == 0);
        CHECK(fs::exists(dir / "policy.csv"));
        CHECK(fs::exists(dir / "q_values.csv"));
        CHECK(fs::exists(dir / "summary.csv"));
    }
    SUBCASE("zero reward gives a uniform policy") {
        auto cfg = parse_config("task: {kind: random, n_states: 3, n_actions: 3, reward_low: 0, reward_high: 0}\n"
                                "algorithm: {alpha: 0.5}\n");
        const auto res = solve_task(cfg);
        CHECK((res.solution.policy.probs().array() - 1.0 / 3.0).abs().maxCoeff() < 1e-12);
    }
    SUBCASE("small temperature: greedy rollout reaches the hard optimum") {
        auto cfg = parse_config(kSmallGrid);
        cfg.aac.alpha = 0.01;
        const auto res = solve_task(cfg);
        const auto task = make_tabular_task(cfg.task);
        const double eta_star = optimal_eta(task.mdp);
        // Deterministic grid: one greedy rollout gives the discounted return.
        const auto greedy = greedy_policy(res.solution.policy.probs());
        TabularEnv env(task.mdp, task.terminal_states, 100);
        env.reset(0);
        double ret = 0.0, disc = 1.0;
        for (;;) {
            Eigen::Index a = 0;
            greedy.probs().row(env.state()).maxCoeff(&a);
            const auto r = env.step(static_cast<int>(a));
            ret += disc * r.reward;
            disc *= task.mdp.gamma();
            if (r.done) break;
        }
        CHECK(ret >= 0.99 * eta_star);
        CHECK(res.eta_greedy == doctest::Approx(eta_star).epsilon(1e-12));
    }
    SUBCASE("non-tabular task") {
        CHECK_THROWS_AS(solve_task(parse_config("task: {kind: cartpole}\n")), ConfigError);
    }
}

TEST_CASE("sweeps") {
    auto cfg = parse_config(kSmallGrid);

    SUBCASE("aggregate matches recomputation from the run files") {
        const auto dir = scratch("sweep");
        const auto res = run_sweep(cfg, dir.string(), 1);
        REQUIRE(res.all_ok());
        const auto eps = cfg.resolved_epsilons();
        for (const auto& row : res.aggregate) {
            std::vector<double> xs;
            for (std::size_t e = 0; e < eps.size(); ++e) {
                if (eps[e] != row.epsilon) continue;
                for (std::size_t j = 0; j < cfg.sweep.seeds.size(); ++j) {
                    const auto stem = run_stem(e, j);
                    if (row.metric == "return") {
                        std::ifstream is(dir / "runs" / (stem + ".csv"));
                        const auto log = TrainingLog::read_csv(is);
                        const double m = trailing_mean_return(log, row.step, 20);
                        if (!std::isnan(m)) xs.push_back(m);
                    } else {
                        std::ifstream is(dir / "runs" / (stem + "_eval.csv"));
                        for (const auto& p : read_eval_csv(is))
                            if (p.step == row.step) xs.push_back(p.greedy_eta);
                    }
                }
            }
            REQUIRE(static_cast<int>(xs.size()) == row.n);
            double mean = 0.0;
            for (double x : xs) mean += x / xs.size();
            double var = 0.0;
            for (double x : xs) var += (x - mean) * (x - mean) / (xs.size() - 1);
            CHECK(std::abs(row.mean - mean) < 1e-12);
            CHECK(std::abs(row.stderr_ - std::sqrt(var / xs.size())) < 1e-12);
        }
        const auto agg = slurp(dir / "aggregate.csv");
        CHECK(agg.rfind("epsilon,step,metric,n,mean,stderr\n", 0) == 0);

        // Same seed, more workers: identical bytes.
        const auto dir2 = scratch("sweep_threads");
        run_sweep(cfg, dir2.string(), 3);
        CHECK(slurp(dir / "aggregate.csv") == slurp(dir2 / "aggregate.csv"));
        for (const auto& entry : fs::directory_iterator(dir / "runs"))
            CHECK(slurp(entry.path()) == slurp(dir2 / "runs" / entry.path().filename()));
    }
    SUBCASE("one epsilon and one seed") {
        cfg.sweep.epsilons = {0.5};
        cfg.sweep.seeds = {7};
        const auto dir = scratch("sweep_single");
        const auto res = run_sweep(cfg, dir.string(), 1);
        REQUIRE(res.runs.size() == 1);
        const auto& run = res.runs[0];
        for (const auto& row : res.aggregate) {
            CHECK(row.stderr_ == 0.0);
            if (row.metric == "greedy_eta") {
                bool found = false;
                for (const auto& p : run.evals)
                    if (p.step == row.step) {
                        CHECK(row.mean == p.greedy_eta);
                        found = true;
                    }
                CHECK(found);
            } else if (row.n == 1) {
                CHECK(row.mean == trailing_mean_return(run.log, row.step, 20));
            }
        }
    }
    SUBCASE("invalid sweeps") {
        cfg.sweep.epsilons = {};
        CHECK_THROWS_AS(run_sweep(cfg, scratch("bad").string(), 1), ConfigError);
        cfg.sweep.epsilons = {2.0};  // beyond 1/alpha
        CHECK_THROWS_AS(run_sweep(cfg, scratch("bad").string(), 1), ConfigError);
    }
}

TEST_CASE("training runs are reproducible") {
    const auto cfg = parse_config(kSmallGrid);
    const auto a = run_training(cfg, 10.0, 99);
    const auto b = run_training(cfg, 10.0, 99);
    std::ostringstream sa, sb;
    a.log.write_csv(sa);
    b.log.write_csv(sb);
    CHECK(sa.str() == sb.str());
    REQUIRE(a.evals.size() == 3);
    CHECK(a.evals.back().step == 1500);
    const auto c = run_training(cfg, 10.0, 100);
    std::ostringstream sc;
    c.log.write_csv(sc);
    CHECK(sc.str() != sa.str());
}
