#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "aac/mdp.hpp"

namespace aac {

struct StepResult {
    Eigen::VectorXd observation;
    double reward = 0.0;
    bool done = false;       ///< episode over (terminal or truncated)
    bool truncated = false;  ///< ended by the step cap, not by a terminal state
};

/// Episodic environment with a finite action set.
///
/// step() after an episode ended throws ContractError until reset() is called.
class DiscreteEnv {
public:
    virtual ~DiscreteEnv() = default;
    virtual int observation_dim() const = 0;
    virtual int n_actions() const = 0;
    virtual Eigen::VectorXd reset(std::uint64_t seed) = 0;
    virtual StepResult step(int action) = 0;
    virtual std::unique_ptr<DiscreteEnv> clone() const = 0;
    virtual std::string name() const = 0;
};

// ---------------------------------------------------------------- tabular

struct GridCell {
    int x = 0;
    int y = 0;
    bool operator==(const GridCell&) const = default;
};

struct GridGoal {
    GridCell cell;
    double reward = 1.0;
};

/// Actions: 0 up (y-1), 1 right, 2 down, 3 left. Moving into a wall or off
/// the grid leaves the agent in place. Entering a goal pays its reward and
/// every other move pays -step_penalty. Goal cells are absorbing with zero
/// reward. With probability slip the intended action is replaced by one
/// drawn uniformly from all four.
struct GridworldSpec {
    int width = 1;
    int height = 1;
    std::vector<GridCell> walls;
    std::vector<GridGoal> goals;
    double step_penalty = 0.0;
    double slip = 0.0;
    double gamma = 0.9;
    GridCell start{0, 0};
};

/// Tabular model of a gridworld plus the mapping between cells and states.
struct Gridworld {
    TabularMdp mdp;
    std::vector<GridCell> cells;  ///< state index -> cell (walls excluded)
    std::vector<int> terminal_states;
};

Gridworld make_gridworld(const GridworldSpec& spec);
TabularMdp gridworld_to_mdp(const GridworldSpec& spec);

struct RandomMdpSpec {
    int n_states = 4;
    int n_actions = 2;
    double gamma = 0.9;
    double sparsity = 0.0;  ///< probability that a next-state entry is zeroed
    double reward_low = -1.0;
    double reward_high = 1.0;
    std::uint64_t seed = 0;
};

TabularMdp random_mdp(const RandomMdpSpec& spec);

/// Deterministic chain: action 0 moves left, action 1 moves right, both
/// clipped at the ends. Reward 1 for acting right in the rightmost state,
/// 0 otherwise. Starts in state 0.
TabularMdp chain_mdp(int n, double gamma);

/// Samples a TabularMdp with one-hot observations. Episodes end on entering
/// a terminal state or after max_steps.
class TabularEnv : public DiscreteEnv {
public:
    TabularEnv(TabularMdp mdp, std::vector<int> terminal_states, int max_steps);

    int observation_dim() const override { return static_cast<int>(mdp_.n_states()); }
    int n_actions() const override { return static_cast<int>(mdp_.n_actions()); }
    Eigen::VectorXd reset(std::uint64_t seed) override;
    StepResult step(int action) override;
    std::unique_ptr<DiscreteEnv> clone() const override;
    std::string name() const override { return "tabular"; }

    const TabularMdp& mdp() const { return mdp_; }
    int state() const { return state_; }
    Eigen::VectorXd one_hot(int state) const;

private:
    int sample_row(const Eigen::Ref<const Eigen::RowVectorXd>& dist);

    TabularMdp mdp_;
    std::vector<char> terminal_;
    int max_steps_;
    std::mt19937_64 rng_;
    int state_ = 0;
    int steps_ = 0;
    bool done_ = true;
};

// ---------------------------------------------------------------- physics

struct CartPoleParams {
    double gravity = 9.8;
    double mass_cart = 1.0;
    double mass_pole = 0.1;
    double half_length = 0.5;
    double force_mag = 10.0;
    double tau = 0.02;
    double x_threshold = 2.4;
    double theta_threshold = 12.0 * 3.14159265358979323846 / 180.0;
};

/// (x, x_dot, theta, theta_dot)
using CartPoleState = std::array<double, 4>;

struct CartPoleStep {
    CartPoleState state;
    double reward;
    bool done;
};

/// One Euler step; action 1 pushes right, 0 pushes left. The step cap is
/// the environment's concern, not this function's.
CartPoleStep cartpole_step(const CartPoleState& state, int action, const CartPoleParams& params = {});

class CartPoleEnv : public DiscreteEnv {
public:
    static constexpr int kMaxSteps = 500;

    explicit CartPoleEnv(CartPoleParams params = {}) : params_(params) {}

    int observation_dim() const override { return 4; }
    int n_actions() const override { return 2; }
    Eigen::VectorXd reset(std::uint64_t seed) override;
    StepResult step(int action) override;
    std::unique_ptr<DiscreteEnv> clone() const override;
    std::string name() const override { return "cartpole"; }

    const CartPoleState& state() const { return state_; }
    /// Starts an episode from an explicit state.
    void set_state(const CartPoleState& s);

private:
    Eigen::VectorXd observe() const;

    CartPoleParams params_;
    CartPoleState state_{};
    int steps_ = 0;
    bool done_ = true;
};

/// (theta1, theta2, dtheta1, dtheta2); theta1 = 0 hangs straight down.
using AcrobotState = std::array<double, 4>;

struct AcrobotStep {
    AcrobotState state;
    double reward;
    bool done;
};

/// One RK4 step of length 0.2 with torque action - 1 on the second joint,
/// followed by angle wrapping and velocity clipping. Reward -1, or 0 on the
/// step that lifts the tip above one link length over the pivot.
AcrobotStep acrobot_step(const AcrobotState& state, int action);

/// Time derivative of the acrobot state under a given torque.
AcrobotState acrobot_derivative(const AcrobotState& state, double torque);

class AcrobotEnv : public DiscreteEnv {
public:
    static constexpr int kMaxSteps = 500;

    int observation_dim() const override { return 6; }
    int n_actions() const override { return 3; }
    Eigen::VectorXd reset(std::uint64_t seed) override;
    StepResult step(int action) override;
    std::unique_ptr<DiscreteEnv> clone() const override;
    std::string name() const override { return "acrobot"; }

    const AcrobotState& state() const { return state_; }
    void set_state(const AcrobotState& s);

private:
    Eigen::VectorXd observe() const;

    AcrobotState state_{};
    int steps_ = 0;
    bool done_ = true;
};

}  // namespace aac
