#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aac/agent.hpp"
#include "aac/envs.hpp"
#include "aac/mdp.hpp"

namespace aac {

inline constexpr int kSchemaVersion = 1;

enum class TaskKind { gridworld, random_mdp, chain, mdp_file, cartpole, acrobot };

struct TaskConfig {
    TaskKind kind = TaskKind::gridworld;
    GridworldSpec gridworld;
    RandomMdpSpec random;
    int chain_length = 4;
    double chain_gamma = 0.9;
    std::string mdp_path;
    int max_steps = 200;  ///< episode cap for tabular tasks
    CartPoleParams cartpole;

    bool tabular() const { return kind != TaskKind::cartpole && kind != TaskKind::acrobot; }
};

struct FeatureConfig {
    FeatureKind kind = FeatureKind::identity;
    int degree = 2;
    std::vector<double> low, high;
    int tiles = 8;
    int tilings = 4;
};

struct SolverConfig {
    double tol = 1e-10;
    int max_iter = 1000;
};

struct SweepConfig {
    std::vector<double> epsilons;
    /// When true the listed epsilons are multiples of 1/alpha.
    bool epsilon_per_alpha = false;
    std::vector<std::uint64_t> seeds;
    int workers = 1;
};

struct OutputConfig {
    std::string directory = "out";
    std::int64_t checkpoint_interval = 1000;
    bool snapshots = false;
    int return_window = 20;
};

struct ExperimentConfig {
    int schema_version = kSchemaVersion;
    std::uint64_t seed = 0;
    TaskConfig task;
    AacConfig aac;
    FeatureConfig features;
    SolverConfig solver;
    SweepConfig sweep;
    OutputConfig output;
    int verify_instances = 50;

    /// Sweep epsilons in absolute units.
    std::vector<double> resolved_epsilons() const;
};

/// Nested key-value YAML; see configs/ for annotated examples. Unknown keys
/// are rejected. Throws ConfigError.
ExperimentConfig parse_config(const std::string& text, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);

/// Model file: n_states, n_actions, gamma, transition (S*A*S values, rows in
/// sa_index order), reward (S*A values), optional initial_dist.
TabularMdp load_mdp_file(const std::string& path);

}  // namespace aac
