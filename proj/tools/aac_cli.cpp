// Command-line front end: solve | verify | train | sweep.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "aac/config.hpp"
#include "aac/errors.hpp"
#include "aac/experiment.hpp"
#include "aac/random.hpp"
#include "aac/verify.hpp"

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kPropertyFailure = 2, kNonConvergence = 3, kConfigError = 4 };

struct Options {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<int> instances;
    bool self_test = false;
};

aac::ExperimentConfig load(const Options& o) {
    aac::ExperimentConfig cfg = o.config_path.empty() ? aac::parse_config("") : aac::load_config(o.config_path);
    if (o.seed) cfg.seed = *o.seed;
    if (!o.out_dir.empty()) cfg.output.directory = o.out_dir;
    if (o.workers) cfg.sweep.workers = *o.workers;
    if (o.instances) cfg.verify_instances = *o.instances;
    return cfg;
}

int cmd_solve(const Options& o) {
    const auto cfg = load(o);
    const auto result = aac::solve_task(cfg);
    aac::write_solution(result, cfg.output.directory);
    std::cout << "soft policy iteration converged in " << result.solution.iterations
              << " improvement steps, ||A~||_inf = " << result.solution.max_abs_advantage << '\n'
              << "eta_soft = " << result.eta_soft << ", eta_greedy = " << result.eta_greedy << '\n'
              << "wrote " << cfg.output.directory << '\n';
    return kOk;
}

int cmd_verify(const Options& o) {
    const auto cfg = load(o);
    aac::VerifyOptions vo;
    vo.instances = cfg.verify_instances;
    vo.seed = cfg.seed;
    vo.self_test = o.self_test;
    if (vo.instances == 0) {
        std::cerr << "warning: 0 instances requested, nothing to verify\n";
        return kOk;
    }
    const auto report = aac::run_verify(vo);
    report.print(std::cout);
    if (!o.out_dir.empty() || !o.config_path.empty()) {
        std::filesystem::create_directories(cfg.output.directory);
        std::ofstream os(std::filesystem::path(cfg.output.directory) / "verify_report.csv");
        report.write_csv(os);
    }
    return report.all_passed() ? kOk : kPropertyFailure;
}

int cmd_train(const Options& o) {
    const auto cfg = load(o);
    namespace fs = std::filesystem;
    fs::create_directories(cfg.output.directory);
    const auto prefix = (fs::path(cfg.output.directory) / "train").string();
    const auto run = aac::run_training(cfg, cfg.aac.epsilon, aac::derive_seed(cfg.seed, 0, 0), prefix);
    {
        std::ofstream os(prefix + ".csv", std::ios::binary);
        run.log.write_csv(os);
    }
    if (!run.evals.empty()) {
        std::ofstream os(prefix + "_eval.csv", std::ios::binary);
        aac::write_eval_csv(os, run.evals);
    }
    std::cout << "episodes: " << run.log.rows.size();
    if (!run.log.rows.empty())
        std::cout << ", mean return of last " << cfg.output.return_window << ": "
                  << aac::trailing_mean_return(run.log, cfg.aac.total_steps, cfg.output.return_window);
    if (!run.evals.empty()) std::cout << ", final greedy eta: " << run.evals.back().greedy_eta;
    std::cout << '\n';
    return kOk;
}

int cmd_sweep(const Options& o) {
    const auto cfg = load(o);
    const auto result = aac::run_sweep(cfg, cfg.output.directory, cfg.sweep.workers);
    for (const auto& r : result.runs)
        if (!r.ok)
            std::cerr << "run " << aac::run_stem(r.epsilon_index, r.seed_index) << " failed: " << r.error << '\n';
    for (const auto& row : result.aggregate)
        if (row.step == cfg.aac.total_steps)
            std::cout << "epsilon " << row.epsilon << "  " << row.metric << " = " << row.mean << " +- "
                      << row.stderr_ << "  (n = " << row.n << ")\n";
    std::cout << "wrote " << cfg.output.directory << '\n';
    return result.all_ok() ? kOk : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Entropy-regularised RL toolkit: exact solvers, property checks and AAC training"};
    app.require_subcommand(1);
    Options o;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "YAML experiment config");
        sub->add_option("--out", o.out_dir, "output directory (overrides output.directory)");
        sub->add_option("--seed", o.seed, "master seed (overrides config)");
        sub->add_option("--workers", o.workers, "parallel workers for sweeps");
    };
    auto* solve = app.add_subcommand("solve", "solve a tabular task exactly by soft policy iteration");
    auto* verify = app.add_subcommand("verify", "run the property suites over random MDPs");
    auto* train = app.add_subcommand("train", "train one AAC agent");
    auto* sweep = app.add_subcommand("sweep", "train over an epsilon x seed grid and aggregate");
    for (auto* s : {solve, verify, train, sweep}) add_common(s);
    verify->add_flag("--self-test", o.self_test, "negative control: flip the advantage sign");
    verify->add_option("--instances", o.instances, "number of random instances");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kConfigError;
    }

    try {
        if (solve->parsed()) return cmd_solve(o);
        if (verify->parsed()) return cmd_verify(o);
        if (train->parsed()) return cmd_train(o);
        if (sweep->parsed()) return cmd_sweep(o);
    } catch (const aac::ConvergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNonConvergence;
    } catch (const aac::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kFailure;
}
