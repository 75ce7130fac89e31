#pragma once

#include <Eigen/Dense>

namespace aac {

/// Flattened state-action index; fixes the row/column layout of every
/// (S*A)-sized matrix and of the transition array in model files.
inline Eigen::Index sa_index(Eigen::Index s, Eigen::Index a, Eigen::Index n_actions) {
    return s * n_actions + a;
}

/// Finite discounted MDP.
///
/// The transition tensor P[s][a][s'] is stored as an (S*A) x S matrix whose
/// row sa_index(s, a) is the next-state distribution of (s, a). The
/// constructor validates stochasticity (1e-12), 0 < gamma < 1 and the
/// initial distribution; an invalid model never exists.
class TabularMdp {
public:
    static constexpr double kStochasticTol = 1e-12;

    TabularMdp(Eigen::MatrixXd transition, Eigen::MatrixXd reward, double gamma,
               Eigen::VectorXd initial_dist);

    Eigen::Index n_states() const { return reward_.rows(); }
    Eigen::Index n_actions() const { return reward_.cols(); }
    Eigen::Index n_pairs() const { return reward_.size(); }

    const Eigen::MatrixXd& transition() const { return transition_; }
    double p(Eigen::Index s, Eigen::Index a, Eigen::Index next) const {
        return transition_(sa_index(s, a, n_actions()), next);
    }
    const Eigen::MatrixXd& reward() const { return reward_; }
    double gamma() const { return gamma_; }
    const Eigen::VectorXd& initial_dist() const { return initial_dist_; }

    /// Rewards in sa_index order.
    Eigen::VectorXd reward_flat() const;

private:
    Eigen::MatrixXd transition_;
    Eigen::MatrixXd reward_;
    double gamma_;
    Eigen::VectorXd initial_dist_;
};

/// Explicit stochastic policy pi(a|s) stored as an S x A table.
class TabularPolicy {
public:
    static constexpr double kStochasticTol = 1e-12;

    explicit TabularPolicy(Eigen::MatrixXd probs);

    static TabularPolicy uniform(Eigen::Index n_states, Eigen::Index n_actions);
    /// Per-state softmax of a logit table.
    static TabularPolicy softmax(const Eigen::MatrixXd& logits);

    Eigen::Index n_states() const { return probs_.rows(); }
    Eigen::Index n_actions() const { return probs_.cols(); }
    const Eigen::MatrixXd& probs() const { return probs_; }
    double operator()(Eigen::Index s, Eigen::Index a) const { return probs_(s, a); }

    bool strictly_positive() const { return (probs_.array() > 0.0).all(); }
    /// Elementwise log; throws DomainError on a zero entry.
    Eigen::MatrixXd log_probs() const;
    /// Probabilities in sa_index order.
    Eigen::VectorXd flat() const;

private:
    Eigen::MatrixXd probs_;
};

struct TransitionKernels {
    Eigen::MatrixXd state;         ///< S x S,  sum_a pi(a|s) P(s'|s,a)
    Eigen::MatrixXd state_action;  ///< SA x SA, P(s'|s,a) pi(a'|s')
};

struct CumulativeTransitions {
    Eigen::MatrixXd state;         ///< (I - gamma P_state)^-1
    Eigen::MatrixXd state_action;  ///< (I - gamma P_state_action)^-1
};

struct StateDistribution {
    Eigen::VectorXd rho;  ///< discounted visitation mass, total 1/(1-gamma)
};

struct ValueTables {
    Eigen::VectorXd v;
    Eigen::MatrixXd q;
};

void check_shapes(const TabularMdp& mdp, const TabularPolicy& policy);

TransitionKernels policy_transition_kernels(const TabularMdp& mdp, const TabularPolicy& policy);

CumulativeTransitions cumulative_transitions(const TabularMdp& mdp, const TabularPolicy& policy);

StateDistribution discounted_state_distribution(const TabularMdp& mdp,
                                                const TabularPolicy& policy);

ValueTables policy_values(const TabularMdp& mdp, const TabularPolicy& policy);

/// Expected discounted return from the initial distribution. Both
/// sum_s rho0 V and sum_s rho_pi sum_a pi r are evaluated; a disagreement
/// beyond 1e-9 raises NumericalError.
double objective_eta(const TabularMdp& mdp, const TabularPolicy& policy);

/// Solves (I - gamma K) X = rhs by dense LU. Throws NumericalError when the
/// system is numerically singular or the solution is not finite.
Eigen::MatrixXd solve_discounted(const Eigen::MatrixXd& kernel, double gamma,
                                 const Eigen::MatrixXd& rhs);

/// Absolute tolerance of the always-on two-formula cross-checks, scaled by
/// max(1, |value|) so that large-return models do not trip on rounding.
inline constexpr double kCrossCheckTol = 1e-9;
void cross_check(double a, double b, const char* what);

}  // namespace aac
