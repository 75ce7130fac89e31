#include "aac/soft_values.hpp"

#include <cmath>

#include "aac/errors.hpp"

namespace aac {

EntropyConfig::EntropyConfig(double a) : alpha(a) {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw DomainError("alpha must be finite and >= 0");
}

Eigen::VectorXd flatten_table(const Eigen::MatrixXd& table) {
    Eigen::VectorXd out(table.size());
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        out.data(), table.rows(), table.cols()) = table;
    return out;
}

Eigen::MatrixXd unflatten_table(const Eigen::VectorXd& flat, Eigen::Index n_states,
                                Eigen::Index n_actions) {
    if (flat.size() != n_states * n_actions) throw ShapeError("flat table has the wrong size");
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        flat.data(), n_states, n_actions);
}

Eigen::MatrixXd scaled_log_policy(const TabularPolicy& policy, const EntropyConfig& cfg) {
    if (cfg.alpha == 0.0) return Eigen::MatrixXd::Zero(policy.n_states(), policy.n_actions());
    return cfg.alpha * policy.log_probs();
}

namespace {

// Expected next-state value sum_s' P(s'|s,a) v(s') as an S x A table.
Eigen::MatrixXd expected_next(const TabularMdp& mdp, const Eigen::VectorXd& v) {
    return unflatten_table(mdp.transition() * v, mdp.n_states(), mdp.n_actions());
}

Eigen::VectorXd policy_average(const TabularPolicy& policy, const Eigen::MatrixXd& table) {
    return (policy.probs().array() * table.array()).rowwise().sum();
}

}  // namespace

Eigen::MatrixXd entropy_augmented_reward(const TabularMdp& mdp, const TabularPolicy& policy,
                                         const EntropyConfig& cfg) {
    check_shapes(mdp, policy);
    return mdp.reward() - scaled_log_policy(policy, cfg);
}

SoftValueTables soft_policy_evaluation(const TabularMdp& mdp, const TabularPolicy& policy,
                                       const EntropyConfig& cfg) {
    check_shapes(mdp, policy);
    const Eigen::MatrixXd alog = scaled_log_policy(policy, cfg);
    // Entropy bonus collected at each next state; independent of Q, so the
    // fixed point is linear: (I - gamma P_bar) Q = r + gamma P h.
    const Eigen::VectorXd bonus = -policy_average(policy, alog);
    const Eigen::MatrixXd rhs = mdp.reward() + mdp.gamma() * expected_next(mdp, bonus);
    const auto kernels = policy_transition_kernels(mdp, policy);
    const Eigen::VectorXd qf = solve_discounted(kernels.state_action, mdp.gamma(), flatten_table(rhs));

    SoftValueTables out;
    out.q_alpha = unflatten_table(qf, mdp.n_states(), mdp.n_actions());
    out.v_alpha = policy_average(policy, out.q_alpha - alog);
    return out;
}

Eigen::MatrixXd soft_bellman_q(const TabularMdp& mdp, const TabularPolicy& policy,
                               const EntropyConfig& cfg, const Eigen::MatrixXd& q) {
    check_shapes(mdp, policy);
    if (q.rows() != mdp.n_states() || q.cols() != mdp.n_actions()) throw ShapeError("q shape");
    const Eigen::VectorXd next_v = policy_average(policy, q - scaled_log_policy(policy, cfg));
    return mdp.reward() + mdp.gamma() * expected_next(mdp, next_v);
}

Eigen::VectorXd soft_bellman_v(const TabularMdp& mdp, const TabularPolicy& policy,
                               const EntropyConfig& cfg, const Eigen::VectorXd& v) {
    check_shapes(mdp, policy);
    if (v.size() != mdp.n_states()) throw ShapeError("v shape");
    const Eigen::MatrixXd r_tilde = entropy_augmented_reward(mdp, policy, cfg);
    return policy_average(policy, r_tilde + mdp.gamma() * expected_next(mdp, v));
}

CanonicalTables canonical_tables(const TabularPolicy& policy, const SoftValueTables& soft,
                                 const EntropyConfig& cfg) {
    if (soft.q_alpha.rows() != policy.n_states() || soft.q_alpha.cols() != policy.n_actions() ||
        soft.v_alpha.size() != policy.n_states())
        throw ShapeError("soft tables do not match the policy");
    CanonicalTables out;
    out.q_tilde = soft.q_alpha - scaled_log_policy(policy, cfg);
    out.v_tilde = policy_average(policy, out.q_tilde);
    for (Eigen::Index s = 0; s < out.v_tilde.size(); ++s)
        cross_check(out.v_tilde(s), soft.v_alpha(s), "canonical V~ vs V_alpha");
    out.a_tilde = out.q_tilde.colwise() - out.v_tilde;
    return out;
}

CanonicalTables evaluate_canonical(const TabularMdp& mdp, const TabularPolicy& policy,
                                   const EntropyConfig& cfg) {
    return canonical_tables(policy, soft_policy_evaluation(mdp, policy, cfg), cfg);
}

Eigen::MatrixXd canonical_bellman_q(const TabularMdp& mdp, const TabularPolicy& policy,
                                    const EntropyConfig& cfg, const Eigen::MatrixXd& q_tilde) {
    check_shapes(mdp, policy);
    if (q_tilde.rows() != mdp.n_states() || q_tilde.cols() != mdp.n_actions())
        throw ShapeError("q_tilde shape");
    const Eigen::MatrixXd r_tilde = entropy_augmented_reward(mdp, policy, cfg);
    return r_tilde + mdp.gamma() * expected_next(mdp, policy_average(policy, q_tilde));
}

Eigen::VectorXd canonical_bellman_v(const TabularMdp& mdp, const TabularPolicy& policy,
                                    const EntropyConfig& cfg, const Eigen::VectorXd& v_tilde) {
    // Identical in form to the decoupled soft operator on V.
    return soft_bellman_v(mdp, policy, cfg, v_tilde);
}

double tilde_eta(const TabularMdp& mdp, const TabularPolicy& policy, const EntropyConfig& cfg) {
    const Eigen::MatrixXd r_tilde = entropy_augmented_reward(mdp, policy, cfg);
    const auto rho = discounted_state_distribution(mdp, policy).rho;
    const double from_occupancy = rho.dot(policy_average(policy, r_tilde));
    const auto canon = evaluate_canonical(mdp, policy, cfg);
    const double from_values = mdp.initial_dist().dot(canon.v_tilde);
    cross_check(from_occupancy, from_values, "tilde_eta");
    return from_occupancy;
}

EtaDifference eta_difference_identity(const TabularMdp& mdp, const TabularPolicy& pi,
                                      const TabularPolicy& pi_prime, const EntropyConfig& cfg) {
    check_shapes(mdp, pi);
    check_shapes(mdp, pi_prime);
    if (!pi.strictly_positive() || !pi_prime.strictly_positive())
        throw DomainError("objective-difference identity needs strictly positive policies");

    EtaDifference out;
    out.lhs = tilde_eta(mdp, pi_prime, cfg) - tilde_eta(mdp, pi, cfg);

    const auto canon = evaluate_canonical(mdp, pi, cfg);
    const Eigen::MatrixXd log_ratio = pi_prime.log_probs() - pi.log_probs();
    const Eigen::MatrixXd integrand = canon.a_tilde - cfg.alpha * log_ratio;
    const auto rho_prime = discounted_state_distribution(mdp, pi_prime).rho;
    out.rhs = rho_prime.dot(policy_average(pi_prime, integrand));
    return out;
}

}  // namespace aac
