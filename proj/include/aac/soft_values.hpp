#pragma once

#include <Eigen/Dense>

#include "aac/mdp.hpp"

namespace aac {

/// Entropy temperature. alpha == 0 reduces every soft quantity to its
/// standard counterpart.
struct EntropyConfig {
    double alpha = 0.0;

    explicit EntropyConfig(double a);
};

/// Soft values with the first entropy term omitted from Q:
///   Q_a(s,a) = r(s,a) + gamma E[V_a(s')],  V_a(s) = sum_a pi (Q_a - alpha log pi).
struct SoftValueTables {
    Eigen::MatrixXd q_alpha;
    Eigen::VectorXd v_alpha;
};

/// Values of the entropy-augmented reward r - alpha log pi.
/// q_tilde = q_alpha - alpha log pi, v_tilde = sum_a pi q_tilde = v_alpha,
/// a_tilde = q_tilde - v_tilde (mean zero under pi).
struct CanonicalTables {
    Eigen::MatrixXd q_tilde;
    Eigen::VectorXd v_tilde;
    Eigen::MatrixXd a_tilde;
};

struct EtaDifference {
    double lhs = 0.0;  ///< eta~(pi') - eta~(pi)
    double rhs = 0.0;  ///< sum_s rho_pi' sum_a pi' (A~_pi - alpha log(pi'/pi))
};

/// alpha * log pi, with the convention 0 * log 0 = 0 when alpha == 0.
/// Throws DomainError for a zero probability when alpha > 0.
Eigen::MatrixXd scaled_log_policy(const TabularPolicy& policy, const EntropyConfig& cfg);

/// r~(s,a) = r(s,a) - alpha log pi(a|s)
Eigen::MatrixXd entropy_augmented_reward(const TabularMdp& mdp, const TabularPolicy& policy,
                                         const EntropyConfig& cfg);

/// Exact fixed point of the soft Bellman operator by a direct linear solve.
SoftValueTables soft_policy_evaluation(const TabularMdp& mdp, const TabularPolicy& policy,
                                       const EntropyConfig& cfg);

/// One application of T^pi on an action-value table.
Eigen::MatrixXd soft_bellman_q(const TabularMdp& mdp, const TabularPolicy& policy,
                               const EntropyConfig& cfg, const Eigen::MatrixXd& q);
/// One application of T^pi on a state-value vector.
Eigen::VectorXd soft_bellman_v(const TabularMdp& mdp, const TabularPolicy& policy,
                               const EntropyConfig& cfg, const Eigen::VectorXd& v);

CanonicalTables canonical_tables(const TabularPolicy& policy, const SoftValueTables& soft,
                                 const EntropyConfig& cfg);

/// Standard-form operators with reward r~.
Eigen::MatrixXd canonical_bellman_q(const TabularMdp& mdp, const TabularPolicy& policy,
                                    const EntropyConfig& cfg, const Eigen::MatrixXd& q_tilde);
Eigen::VectorXd canonical_bellman_v(const TabularMdp& mdp, const TabularPolicy& policy,
                                    const EntropyConfig& cfg, const Eigen::VectorXd& v_tilde);

/// Entropy-augmented objective sum_s rho_pi sum_a pi r~, cross-checked
/// against sum_s rho0 V~.
double tilde_eta(const TabularMdp& mdp, const TabularPolicy& policy, const EntropyConfig& cfg);

/// Both sides of the objective-difference identity. Not asserted here; the
/// caller decides what tolerance to hold it to.
EtaDifference eta_difference_identity(const TabularMdp& mdp, const TabularPolicy& pi,
                                      const TabularPolicy& pi_prime, const EntropyConfig& cfg);

/// Convenience: soft evaluation followed by canonical_tables.
CanonicalTables evaluate_canonical(const TabularMdp& mdp, const TabularPolicy& policy,
                                   const EntropyConfig& cfg);

/// Row-major reshape helpers between S x A tables and sa_index vectors.
Eigen::VectorXd flatten_table(const Eigen::MatrixXd& table);
Eigen::MatrixXd unflatten_table(const Eigen::VectorXd& flat, Eigen::Index n_states,
                                Eigen::Index n_actions);

}  // namespace aac
