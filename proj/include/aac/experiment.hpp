#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "aac/advanced_policy.hpp"
#include "aac/agent.hpp"
#include "aac/config.hpp"

namespace aac {

struct TabularTask {
    TabularMdp mdp;
    std::vector<int> terminal_states;
    int max_steps = 200;
};

TabularTask make_tabular_task(const TaskConfig& task);
std::unique_ptr<DiscreteEnv> make_env(const TaskConfig& task);
FeatureMap make_features(const FeatureConfig& features, int observation_dim);

/// Argmax (first maximum on ties) of a probability or value table as a
/// deterministic policy.
TabularPolicy greedy_policy(const Eigen::MatrixXd& table);

struct SolveResult {
    SoftSolution solution;
    double eta_soft = 0.0;    ///< entropy-augmented objective of the solution
    double eta_greedy = 0.0;  ///< plain discounted return of its argmax policy
};

/// Soft policy iteration from the uniform policy. Throws ConvergenceError.
SolveResult solve_task(const ExperimentConfig& cfg);
/// policy.csv, values.csv, q_values.csv and summary.csv under `dir`.
void write_solution(const SolveResult& result, const std::string& dir);

/// Exact return of the agent's greedy policy on a tabular task with one-hot
/// observations.
double greedy_eta(const AacAgent& agent, const TabularMdp& mdp);

struct EvalPoint {
    std::int64_t step = 0;
    double greedy_eta = 0.0;
};

struct RunResult {
    std::size_t epsilon_index = 0;
    std::size_t seed_index = 0;
    double epsilon = 0.0;
    std::uint64_t seed = 0;
    TrainingLog log;
    std::vector<EvalPoint> evals;  ///< tabular tasks only
    bool ok = false;
    std::string error;
};

/// One training run at the given epsilon and run seed; writes nothing.
RunResult run_training(const ExperimentConfig& cfg, double epsilon, std::uint64_t run_seed,
                       const std::string& snapshot_prefix = "");

struct AggregateRow {
    double epsilon = 0.0;
    std::int64_t step = 0;
    std::string metric;  ///< "return" (trailing mean) or "greedy_eta"
    int n = 0;
    double mean = 0.0;
    double stderr_ = 0.0;
};

/// Per-epsilon mean and standard error across runs at each checkpoint step.
/// Runs with no finished episode by a checkpoint are left out of that row.
std::vector<AggregateRow> aggregate_runs(const std::vector<RunResult>& runs, const std::vector<double>& epsilons,
                                         std::int64_t total_steps, std::int64_t checkpoint_interval,
                                         int return_window);
void write_aggregate_csv(std::ostream& os, const std::vector<AggregateRow>& rows);
void write_eval_csv(std::ostream& os, const std::vector<EvalPoint>& evals);
std::vector<EvalPoint> read_eval_csv(std::istream& is);

struct SweepResult {
    std::vector<RunResult> runs;  ///< epsilon-major order
    std::vector<AggregateRow> aggregate;
    bool all_ok() const;
};

/// Fans the (epsilon, seed) grid out over `workers` threads, then writes
/// runs/eps<i>_seed<j>.csv, runs/eps<i>_seed<j>_eval.csv (tabular tasks) and
/// aggregate.csv under `dir`. Failed runs are reported, successful ones are
/// still written.
SweepResult run_sweep(const ExperimentConfig& cfg, const std::string& dir, int workers);

/// File stem of run (i, j).
std::string run_stem(std::size_t epsilon_index, std::size_t seed_index);

}  // namespace aac
