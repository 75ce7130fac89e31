#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "aac/approx.hpp"
#include "aac/envs.hpp"

namespace aac {

struct TransitionSample {
    Eigen::VectorXd s;
    int a = 0;
    double r = 0.0;
    Eigen::VectorXd s_next;
    bool done = false;  ///< true only for real terminal states, never for truncation
};

/// Fixed-capacity ring buffer with uniform sampling (with replacement).
class ReplayBuffer {
public:
    ReplayBuffer(std::size_t capacity, std::uint64_t seed);

    void push(TransitionSample sample);
    std::size_t size() const { return data_.size(); }
    std::size_t capacity() const { return capacity_; }
    const TransitionSample& operator[](std::size_t i) const { return data_[i]; }
    std::vector<TransitionSample> sample(std::size_t n);

private:
    std::size_t capacity_;
    std::size_t next_ = 0;
    std::vector<TransitionSample> data_;
    std::mt19937_64 rng_;
};

struct AacConfig {
    double alpha = 0.0;
    double epsilon = 0.0;
    double gamma = 0.99;
    double lr_actor = 3e-3;
    double lr_critic = 1e-2;
    double polyak_rho = 0.01;
    std::size_t buffer_capacity = 50000;
    std::size_t batch_size = 64;
    int steps_per_update = 1;        ///< environment steps between learning steps
    int target_update_interval = 1;  ///< learning steps between Polyak updates
    std::int64_t learning_starts = 0;
    std::int64_t total_steps = 50000;
    std::uint64_t seed = 0;
    bool allow_extrapolation = false;
    /// Critic target from a single sampled a' instead of the expectation.
    bool sampled_next_action = false;
    int hidden = 64;  ///< 0 gives linear actor and critic
    bool bias = true;
    bool zero_init = false;

    /// Throws ConfigError on an invalid combination.
    void validate() const;
    /// 1 - eps alpha, snapped to exactly 0 within 1e-12 of the Q-learning end.
    double actor_weight() const;
};

/// Actor, critic and target critic over a shared feature map.
class AacAgent {
public:
    AacAgent(FeatureMap features, int n_actions, AacConfig config);

    const AacConfig& config() const { return config_; }
    const FeatureMap& features() const { return features_; }
    int n_actions() const { return n_actions_; }
    Approximator& actor() { return actor_; }
    Approximator& critic() { return critic_; }
    Approximator& target_critic() { return target_; }
    const Approximator& actor() const { return actor_; }
    const Approximator& critic() const { return critic_; }
    const Approximator& target_critic() const { return target_; }

    /// pi'(.|s) = softmax((1 - eps alpha) logits + eps Q), floored at 1e-12
    /// and renormalised.
    Eigen::VectorXd hybrid_policy(const Eigen::VectorXd& observation) const;
    /// Same, for a feature matrix whose columns are samples. Returns A x B.
    Eigen::MatrixXd hybrid_policy_features(const Eigen::MatrixXd& features) const;

    int act(const Eigen::VectorXd& observation, std::mt19937_64& rng) const;
    int greedy_action(const Eigen::VectorXd& observation) const;

    /// Batch-mean ascent direction of E_{pi'}[Q - alpha log pi'] in actor
    /// parameters, before any step is taken.
    Eigen::VectorXd actor_gradient(const std::vector<TransitionSample>& batch) const;
    /// Applies one actor step; returns the pre-step gradient norm.
    double actor_update(const std::vector<TransitionSample>& batch);

    /// Regression targets r + gamma (1 - done) E_{a'~pi'}[Q_target - alpha log pi'].
    Eigen::VectorXd critic_targets(const std::vector<TransitionSample>& batch,
                                   std::mt19937_64* rng = nullptr) const;
    /// Batch-mean descent direction of 1/2 (target - Q)^2 (already negated,
    /// so it is applied with +lr). Writes the mean squared TD error.
    Eigen::VectorXd critic_gradient(const std::vector<TransitionSample>& batch, double* mse,
                                    std::mt19937_64* rng = nullptr) const;
    /// Applies one critic step; returns the pre-step mean squared TD error.
    double critic_update(const std::vector<TransitionSample>& batch, std::mt19937_64* rng = nullptr);

    void update_target() { polyak_update(target_, critic_, config_.polyak_rho); }

    /// actor, critic and target snapshots back to back.
    void save(std::ostream& os) const;
    void load(std::istream& is);

private:
    Eigen::MatrixXd hybrid_from_outputs(const Eigen::MatrixXd& logits, const Eigen::MatrixXd* q) const;
    Eigen::MatrixXd feature_matrix(const std::vector<TransitionSample>& batch, bool next) const;

    FeatureMap features_;
    int n_actions_;
    AacConfig config_;
    Approximator actor_;
    Approximator critic_;
    Approximator target_;
};

struct LogRow {
    std::int64_t step = 0;  ///< environment steps taken when the episode ended
    std::int64_t episode = 0;
    double episode_return = 0.0;
    double actor_grad_norm = 0.0;  ///< most recent learning step
    double critic_loss = 0.0;      ///< most recent learning step
    double entropy = 0.0;          ///< mean hybrid-policy entropy over the episode
    double epsilon = 0.0;
    std::uint64_t seed = 0;
};

struct TrainingLog {
    std::vector<LogRow> rows;

    void write_csv(std::ostream& os) const;
    static TrainingLog read_csv(std::istream& is);
};

struct TrainHooks {
    std::int64_t checkpoint_interval = 0;  ///< 0 disables the callback
    std::function<void(std::int64_t step, const AacAgent&)> on_checkpoint;
};

/// Runs the collect / learn / target-update loop for config.total_steps
/// environment steps. One log row per finished episode.
TrainingLog train(AacAgent& agent, DiscreteEnv& env, const TrainHooks& hooks = {});

/// Mean return of the last `window` episodes that ended at or before `step`
/// (NaN if none did).
double trailing_mean_return(const TrainingLog& log, std::int64_t step, std::size_t window);

}  // namespace aac
