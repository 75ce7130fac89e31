#include "aac/envs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>

#include "aac/errors.hpp"
#include "aac/random.hpp"

namespace aac {

// ---------------------------------------------------------------- gridworld

namespace {

constexpr int kDx[4] = {0, 1, 0, -1};
constexpr int kDy[4] = {-1, 0, 1, 0};

}  // namespace

Gridworld make_gridworld(const GridworldSpec& spec) {
    if (spec.width <= 0 || spec.height <= 0) throw ConfigError("gridworld needs positive size");
    if (!(spec.slip >= 0.0 && spec.slip < 1.0)) throw ConfigError("slip must lie in [0, 1)");
    if (spec.goals.empty()) throw ConfigError("gridworld needs at least one goal");

    auto inside = [&](GridCell c) { return c.x >= 0 && c.y >= 0 && c.x < spec.width && c.y < spec.height; };
    std::vector<int> index(static_cast<std::size_t>(spec.width * spec.height), -1);
    auto flat = [&](GridCell c) { return static_cast<std::size_t>(c.y * spec.width + c.x); };
    std::vector<char> is_wall(index.size(), 0);
    for (const auto& w : spec.walls) {
        if (!inside(w)) throw ConfigError("wall outside the grid");
        is_wall[flat(w)] = 1;
    }

    Gridworld out{TabularMdp(Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Zero(1, 1), 0.5,
                             Eigen::VectorXd::Ones(1)),
                  {}, {}};
    for (int y = 0; y < spec.height; ++y)
        for (int x = 0; x < spec.width; ++x)
            if (!is_wall[flat({x, y})]) {
                index[flat({x, y})] = static_cast<int>(out.cells.size());
                out.cells.push_back({x, y});
            }

    const int n = static_cast<int>(out.cells.size());
    std::vector<double> goal_reward(static_cast<std::size_t>(n), 0.0);
    std::vector<char> is_goal(static_cast<std::size_t>(n), 0);
    for (const auto& g : spec.goals) {
        if (!inside(g.cell) || is_wall[flat(g.cell)]) throw ConfigError("goal must be a free cell");
        const int s = index[flat(g.cell)];
        is_goal[s] = 1;
        goal_reward[s] = g.reward;
    }
    if (!inside(spec.start) || is_wall[flat(spec.start)]) throw ConfigError("start must be a free cell");
    const int start = index[flat(spec.start)];
    if (is_goal[start]) throw ConfigError("start cell is a goal");

    auto move = [&](int s, int a) {
        const GridCell c{out.cells[s].x + kDx[a], out.cells[s].y + kDy[a]};
        if (!inside(c) || is_wall[flat(c)]) return s;
        return index[flat(c)];
    };

    // Breadth-first search from the start over intended moves.
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::deque<int> frontier{start};
    seen[start] = 1;
    bool reachable = false;
    while (!frontier.empty()) {
        const int s = frontier.front();
        frontier.pop_front();
        if (is_goal[s]) {
            reachable = true;
            continue;
        }
        for (int a = 0; a < 4; ++a) {
            const int t = move(s, a);
            if (!seen[t]) {
                seen[t] = 1;
                frontier.push_back(t);
            }
        }
    }
    if (!reachable) throw ConfigError("no goal is reachable from the start cell");

    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n * 4, n);
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n, 4);
    for (int s = 0; s < n; ++s) {
        for (int a = 0; a < 4; ++a) {
            const auto row = sa_index(s, a, 4);
            if (is_goal[s]) {
                p(row, s) = 1.0;
                continue;
            }
            for (int b = 0; b < 4; ++b) {
                const double w = (b == a ? 1.0 - spec.slip : 0.0) + spec.slip / 4.0;
                if (w == 0.0) continue;
                const int t = move(s, b);
                p(row, t) += w;
                r(s, a) += w * (is_goal[t] ? goal_reward[t] : -spec.step_penalty);
            }
        }
        if (is_goal[s]) out.terminal_states.push_back(s);
    }
    Eigen::VectorXd init = Eigen::VectorXd::Zero(n);
    init(start) = 1.0;
    out.mdp = TabularMdp(std::move(p), std::move(r), spec.gamma, std::move(init));
    return out;
}

TabularMdp gridworld_to_mdp(const GridworldSpec& spec) { return make_gridworld(spec).mdp; }

TabularMdp random_mdp(const RandomMdpSpec& spec) {
    if (spec.n_states <= 0 || spec.n_actions <= 0) throw ConfigError("random MDP needs positive sizes");
    if (!(spec.sparsity >= 0.0 && spec.sparsity < 1.0)) throw ConfigError("sparsity must lie in [0, 1)");
    if (!(spec.reward_low <= spec.reward_high)) throw ConfigError("reward range is empty");
    std::mt19937_64 rng(spec.seed);
    const int ns = spec.n_states;
    const int na = spec.n_actions;
    Eigen::MatrixXd p(ns * na, ns);
    for (Eigen::Index row = 0; row < p.rows(); ++row) {
        for (int t = 0; t < ns; ++t) {
            const double w = uniform(rng, 0.05, 1.0);
            p(row, t) = uniform01(rng) < spec.sparsity ? 0.0 : w;
        }
        if (p.row(row).sum() == 0.0) p(row, static_cast<Eigen::Index>(uniform_index(rng, ns))) = 1.0;
        p.row(row) /= p.row(row).sum();
    }
    Eigen::MatrixXd r(ns, na);
    for (int s = 0; s < ns; ++s)
        for (int a = 0; a < na; ++a) r(s, a) = uniform(rng, spec.reward_low, spec.reward_high);
    Eigen::VectorXd init(ns);
    for (int s = 0; s < ns; ++s) init(s) = uniform(rng, 0.05, 1.0);
    init /= init.sum();
    return TabularMdp(std::move(p), std::move(r), spec.gamma, std::move(init));
}

TabularMdp chain_mdp(int n, double gamma) {
    if (n <= 0) throw ConfigError("chain length must be positive");
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n * 2, n);
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(n, 2);
    for (int s = 0; s < n; ++s) {
        p(sa_index(s, 0, 2), std::max(s - 1, 0)) = 1.0;
        p(sa_index(s, 1, 2), std::min(s + 1, n - 1)) = 1.0;
    }
    r(n - 1, 1) = 1.0;
    Eigen::VectorXd init = Eigen::VectorXd::Zero(n);
    init(0) = 1.0;
    return TabularMdp(std::move(p), std::move(r), gamma, std::move(init));
}

// ---------------------------------------------------------------- TabularEnv

TabularEnv::TabularEnv(TabularMdp mdp, std::vector<int> terminal_states, int max_steps)
    : mdp_(std::move(mdp)), terminal_(static_cast<std::size_t>(mdp_.n_states()), 0), max_steps_(max_steps) {
    if (max_steps_ <= 0) throw ConfigError("max_steps must be positive");
    for (int s : terminal_states) {
        if (s < 0 || s >= mdp_.n_states()) throw ConfigError("terminal state out of range");
        terminal_[static_cast<std::size_t>(s)] = 1;
    }
}

Eigen::VectorXd TabularEnv::one_hot(int state) const {
    Eigen::VectorXd o = Eigen::VectorXd::Zero(mdp_.n_states());
    o(state) = 1.0;
    return o;
}

int TabularEnv::sample_row(const Eigen::Ref<const Eigen::RowVectorXd>& dist) {
    const double u = uniform01(rng_);
    double acc = 0.0;
    int last = 0;
    for (Eigen::Index i = 0; i < dist.size(); ++i) {
        if (dist(i) <= 0.0) continue;
        acc += dist(i);
        last = static_cast<int>(i);
        if (u < acc) return last;
    }
    return last;
}

Eigen::VectorXd TabularEnv::reset(std::uint64_t seed) {
    rng_.seed(seed);
    state_ = sample_row(mdp_.initial_dist().transpose());
    steps_ = 0;
    done_ = terminal_[static_cast<std::size_t>(state_)] != 0;
    if (done_) throw ContractError("initial state is terminal");
    return one_hot(state_);
}

StepResult TabularEnv::step(int action) {
    if (done_) throw ContractError("step() called on a finished episode; call reset()");
    if (action < 0 || action >= mdp_.n_actions()) throw ContractError("action out of range");
    const double reward = mdp_.reward()(state_, action);
    state_ = sample_row(mdp_.transition().row(sa_index(state_, action, mdp_.n_actions())));
    ++steps_;
    StepResult out;
    out.observation = one_hot(state_);
    out.reward = reward;
    const bool terminal = terminal_[static_cast<std::size_t>(state_)] != 0;
    out.truncated = !terminal && steps_ >= max_steps_;
    out.done = terminal || out.truncated;
    done_ = out.done;
    return out;
}

std::unique_ptr<DiscreteEnv> TabularEnv::clone() const { return std::make_unique<TabularEnv>(*this); }

// ---------------------------------------------------------------- cart-pole

CartPoleStep cartpole_step(const CartPoleState& s, int action, const CartPoleParams& c) {
    if (action != 0 && action != 1) throw ContractError("cart-pole action must be 0 or 1");
    const double x = s[0], x_dot = s[1], theta = s[2], theta_dot = s[3];
    const double force = action == 1 ? c.force_mag : -c.force_mag;
    const double total_mass = c.mass_cart + c.mass_pole;
    const double pole_ml = c.mass_pole * c.half_length;
    const double cos_t = std::cos(theta);
    const double sin_t = std::sin(theta);
    const double temp = (force + pole_ml * theta_dot * theta_dot * sin_t) / total_mass;
    const double theta_acc = (c.gravity * sin_t - cos_t * temp) /
                             (c.half_length * (4.0 / 3.0 - c.mass_pole * cos_t * cos_t / total_mass));
    const double x_acc = temp - pole_ml * theta_acc * cos_t / total_mass;

    CartPoleStep out;
    out.state = {x + c.tau * x_dot, x_dot + c.tau * x_acc, theta + c.tau * theta_dot,
                 theta_dot + c.tau * theta_acc};
    out.reward = 1.0;
    out.done = out.state[0] < -c.x_threshold || out.state[0] > c.x_threshold ||
               out.state[2] < -c.theta_threshold || out.state[2] > c.theta_threshold;
    return out;
}

Eigen::VectorXd CartPoleEnv::observe() const { return Eigen::Map<const Eigen::Vector4d>(state_.data()); }

Eigen::VectorXd CartPoleEnv::reset(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (double& v : state_) v = uniform(rng, -0.05, 0.05);
    steps_ = 0;
    done_ = false;
    return observe();
}

void CartPoleEnv::set_state(const CartPoleState& s) {
    state_ = s;
    steps_ = 0;
    done_ = false;
}

StepResult CartPoleEnv::step(int action) {
    if (done_) throw ContractError("step() called on a finished episode; call reset()");
    const auto r = cartpole_step(state_, action, params_);
    state_ = r.state;
    ++steps_;
    StepResult out;
    out.observation = observe();
    out.reward = r.reward;
    out.truncated = !r.done && steps_ >= kMaxSteps;
    out.done = r.done || out.truncated;
    done_ = out.done;
    return out;
}

std::unique_ptr<DiscreteEnv> CartPoleEnv::clone() const { return std::make_unique<CartPoleEnv>(*this); }

// ---------------------------------------------------------------- acrobot

namespace {

constexpr double kLink1 = 1.0;
constexpr double kMass1 = 1.0, kMass2 = 1.0;
constexpr double kCom1 = 0.5, kCom2 = 0.5;
constexpr double kInertia = 1.0;
constexpr double kG = 9.8;
constexpr double kDt = 0.2;
constexpr double kMaxVel1 = 4.0 * std::numbers::pi;
constexpr double kMaxVel2 = 9.0 * std::numbers::pi;

double wrap_angle(double x) {
    const double pi = std::numbers::pi;
    while (x > pi) x -= 2.0 * pi;
    while (x < -pi) x += 2.0 * pi;
    return x;
}

AcrobotState axpy(const AcrobotState& x, double h, const AcrobotState& k) {
    return {x[0] + h * k[0], x[1] + h * k[1], x[2] + h * k[2], x[3] + h * k[3]};
}

}  // namespace

AcrobotState acrobot_derivative(const AcrobotState& s, double torque) {
    const double t1 = s[0], t2 = s[1], dt1 = s[2], dt2 = s[3];
    const double d1 = kMass1 * kCom1 * kCom1 +
                      kMass2 * (kLink1 * kLink1 + kCom2 * kCom2 + 2.0 * kLink1 * kCom2 * std::cos(t2)) +
                      2.0 * kInertia;
    const double d2 = kMass2 * (kCom2 * kCom2 + kLink1 * kCom2 * std::cos(t2)) + kInertia;
    // cos(angle - pi/2) written as sin(angle) so that mirrored states stay exact.
    const double phi2 = kMass2 * kCom2 * kG * std::sin(t1 + t2);
    const double phi1 = -kMass2 * kLink1 * kCom2 * dt2 * dt2 * std::sin(t2) -
                        2.0 * kMass2 * kLink1 * kCom2 * dt2 * dt1 * std::sin(t2) +
                        (kMass1 * kCom1 + kMass2 * kLink1) * kG * std::sin(t1) + phi2;
    const double ddt2 = (torque + d2 / d1 * phi1 - kMass2 * kLink1 * kCom2 * dt1 * dt1 * std::sin(t2) - phi2) /
                        (kMass2 * kCom2 * kCom2 + kInertia - d2 * d2 / d1);
    const double ddt1 = -(d2 * ddt2 + phi1) / d1;
    return {dt1, dt2, ddt1, ddt2};
}

AcrobotStep acrobot_step(const AcrobotState& s, int action) {
    if (action < 0 || action > 2) throw ContractError("acrobot action must be 0, 1 or 2");
    const double torque = static_cast<double>(action - 1);
    const auto k1 = acrobot_derivative(s, torque);
    const auto k2 = acrobot_derivative(axpy(s, kDt / 2.0, k1), torque);
    const auto k3 = acrobot_derivative(axpy(s, kDt / 2.0, k2), torque);
    const auto k4 = acrobot_derivative(axpy(s, kDt, k3), torque);
    AcrobotState next;
    for (int i = 0; i < 4; ++i) next[i] = s[i] + kDt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    next[0] = wrap_angle(next[0]);
    next[1] = wrap_angle(next[1]);
    next[2] = std::clamp(next[2], -kMaxVel1, kMaxVel1);
    next[3] = std::clamp(next[3], -kMaxVel2, kMaxVel2);

    AcrobotStep out;
    out.state = next;
    out.done = -std::cos(next[0]) - std::cos(next[1] + next[0]) > kLink1;
    out.reward = out.done ? 0.0 : -1.0;
    return out;
}

Eigen::VectorXd AcrobotEnv::observe() const {
    Eigen::VectorXd o(6);
    o << std::cos(state_[0]), std::sin(state_[0]), std::cos(state_[1]), std::sin(state_[1]), state_[2],
        state_[3];
    return o;
}

Eigen::VectorXd AcrobotEnv::reset(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (double& v : state_) v = uniform(rng, -0.1, 0.1);
    steps_ = 0;
    done_ = false;
    return observe();
}

void AcrobotEnv::set_state(const AcrobotState& s) {
    state_ = s;
    steps_ = 0;
    done_ = false;
}

StepResult AcrobotEnv::step(int action) {
    if (done_) throw ContractError("step() called on a finished episode; call reset()");
    const auto r = acrobot_step(state_, action);
    state_ = r.state;
    ++steps_;
    StepResult out;
    out.observation = observe();
    out.reward = r.reward;
    out.truncated = !r.done && steps_ >= kMaxSteps;
    out.done = r.done || out.truncated;
    done_ = out.done;
    return out;
}

std::unique_ptr<DiscreteEnv> AcrobotEnv::clone() const { return std::make_unique<AcrobotEnv>(*this); }

}  // namespace aac
