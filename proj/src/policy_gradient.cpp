#include "aac/policy_gradient.hpp"

#include <cmath>

#include "aac/advanced_policy.hpp"
#include "aac/errors.hpp"

namespace aac {

namespace {

// Contract sum_a w(s,a) d log pi(a|s) / d theta(s,b) = w(s,b) - pi(s,b) sum_a w(s,a)
// where w already contains the pi(a|s) factor.
Eigen::MatrixXd contract_log_jacobian(const Eigen::MatrixXd& probs, const Eigen::MatrixXd& weighted) {
    const Eigen::VectorXd row_sum = weighted.rowwise().sum();
    return weighted - (probs.array().colwise() * row_sum.array()).matrix();
}

void require_same_policy(const SoftmaxPolicyParams& params, const SoftmaxPolicyParams& reference) {
    if (params.logits.rows() != reference.logits.rows() ||
        params.logits.cols() != reference.logits.cols())
        throw ShapeError("params and reference shapes differ");
    const double gap = (params.policy().probs() - reference.policy().probs()).cwiseAbs().maxCoeff();
    if (gap > 1e-12)
        throw ContractError("surrogate gradients are only defined at the reference policy");
}

Eigen::MatrixXd target_log_policy(const TabularPolicy& ref_pi, const EntropyConfig& cfg,
                                  const TabularMdp& mdp, double epsilon) {
    if (!(epsilon >= 0.0)) throw DomainError("epsilon must be >= 0");
    const auto canon = evaluate_canonical(mdp, ref_pi, cfg);
    return advanced_log_policy(ref_pi.log_probs(), canon.a_tilde, epsilon);
}

}  // namespace

GradientVector soft_policy_gradient(const TabularMdp& mdp, const SoftmaxPolicyParams& params,
                                    const EntropyConfig& cfg) {
    const auto pi = params.policy();
    check_shapes(mdp, pi);
    const auto canon = evaluate_canonical(mdp, pi, cfg);
    const auto rho = discounted_state_distribution(mdp, pi).rho;
    const Eigen::MatrixXd weighted = pi.probs().cwiseProduct(canon.a_tilde);
    return rho.asDiagonal() * contract_log_jacobian(pi.probs(), weighted);
}

Eigen::MatrixXd fisher_information(const TabularMdp& mdp, const SoftmaxPolicyParams& params) {
    const auto pi = params.policy();
    check_shapes(mdp, pi);
    const auto rho = discounted_state_distribution(mdp, pi).rho;
    const auto ns = mdp.n_states();
    const auto na = mdp.n_actions();
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(ns * na, ns * na);
    for (Eigen::Index s = 0; s < ns; ++s) {
        const Eigen::VectorXd p = pi.probs().row(s).transpose();
        for (Eigen::Index a = 0; a < na; ++a) {
            // grad_theta(s,.) log pi(a|s) = e_a - p
            Eigen::VectorXd score = -p;
            score(a) += 1.0;
            f.block(s * na, s * na, na, na) += rho(s) * p(a) * score * score.transpose();
        }
    }
    return f;
}

GradientVector natural_gradient(const TabularMdp& mdp, const SoftmaxPolicyParams& params,
                                const EntropyConfig& cfg) {
    const Eigen::MatrixXd f = fisher_information(mdp, params);
    const Eigen::VectorXd g = flatten_table(soft_policy_gradient(mdp, params, cfg));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(f);
    if (eig.info() != Eigen::Success) throw NumericalError("Fisher eigendecomposition failed");
    Eigen::VectorXd inv = eig.eigenvalues();
    for (Eigen::Index i = 0; i < inv.size(); ++i) inv(i) = inv(i) > kFisherCutoff ? 1.0 / inv(i) : 0.0;
    const Eigen::MatrixXd& u = eig.eigenvectors();
    const Eigen::VectorXd dtheta = u * inv.asDiagonal() * (u.transpose() * g);
    return unflatten_table(dtheta, mdp.n_states(), mdp.n_actions());
}

Eigen::MatrixXd policy_velocity(const SoftmaxPolicyParams& params, const Eigen::MatrixXd& dtheta) {
    const Eigen::MatrixXd p = params.policy().probs();
    if (dtheta.rows() != p.rows() || dtheta.cols() != p.cols()) throw ShapeError("dtheta shape");
    // d pi(a) = pi(a) (dtheta(a) - sum_b pi(b) dtheta(b))
    const Eigen::VectorXd mean = p.cwiseProduct(dtheta).rowwise().sum();
    return p.cwiseProduct(Eigen::MatrixXd(dtheta.colwise() - mean));
}

double surrogate_kl_objective(const TabularMdp& mdp, const SoftmaxPolicyParams& params,
                              const SoftmaxPolicyParams& reference, const EntropyConfig& cfg,
                              double epsilon) {
    const auto ref_pi = reference.policy();
    check_shapes(mdp, ref_pi);
    const Eigen::MatrixXd log_target = target_log_policy(ref_pi, cfg, mdp, epsilon);
    const auto rho = discounted_state_distribution(mdp, ref_pi).rho;
    const auto pi = params.policy();
    const Eigen::MatrixXd log_pi = pi.log_probs();
    const Eigen::VectorXd neg_kl = (pi.probs().array() * (log_target - log_pi).array()).rowwise().sum();
    return rho.dot(neg_kl);
}

double surrogate_l2_objective(const TabularMdp& mdp, const SoftmaxPolicyParams& params,
                              const SoftmaxPolicyParams& reference, const EntropyConfig& cfg,
                              double epsilon) {
    const auto ref_pi = reference.policy();
    check_shapes(mdp, ref_pi);
    const Eigen::MatrixXd target = target_log_policy(ref_pi, cfg, mdp, epsilon).array().exp();
    const auto rho = discounted_state_distribution(mdp, ref_pi).rho;
    const Eigen::MatrixXd diff = params.policy().probs() - target;
    return -0.5 * rho.dot(diff.cwiseAbs2().rowwise().sum());
}

GradientVector surrogate_kl_gradient(const TabularMdp& mdp, const SoftmaxPolicyParams& params,
                                     const SoftmaxPolicyParams& reference,
                                     const EntropyConfig& cfg, double epsilon) {
    require_same_policy(params, reference);
    const auto ref_pi = reference.policy();
    check_shapes(mdp, ref_pi);
    const Eigen::MatrixXd log_target = target_log_policy(ref_pi, cfg, mdp, epsilon);
    const auto rho = discounted_state_distribution(mdp, ref_pi).rho;
    const auto pi = params.policy();
    // grad J = sum_s rho_o sum_a pi grad(log pi) (log target - log pi); the
    // -1 from differentiating pi log pi vanishes because sum_a grad pi = 0.
    const Eigen::MatrixXd weighted = pi.probs().cwiseProduct(log_target - pi.log_probs());
    return rho.asDiagonal() * contract_log_jacobian(pi.probs(), weighted);
}

GradientVector surrogate_l2_gradient(const TabularMdp& mdp, const SoftmaxPolicyParams& params,
                                     const SoftmaxPolicyParams& reference,
                                     const EntropyConfig& cfg, double epsilon) {
    require_same_policy(params, reference);
    if (!(epsilon >= 0.0)) throw DomainError("epsilon must be >= 0");
    const auto pi = reference.policy();
    check_shapes(mdp, pi);
    const auto canon = evaluate_canonical(mdp, pi, cfg);
    const auto rho = discounted_state_distribution(mdp, pi).rho;
    const Eigen::MatrixXd& p = pi.probs();
    // sum_a w(a) d pi(a)/d theta(b) = pi(b) (w(b) - sum_a pi(a) w(a)),  w = pi A~
    const Eigen::MatrixXd w = p.cwiseProduct(canon.a_tilde);
    const Eigen::MatrixXd contracted = contract_log_jacobian(p, p.cwiseProduct(w));
    return epsilon * (rho.asDiagonal() * contracted);
}

GradientVector finite_difference_gradient(
    const std::function<double(const Eigen::MatrixXd&)>& objective, const Eigen::MatrixXd& params,
    double h) {
    if (!(h > 0.0)) throw DomainError("finite-difference step must be > 0");
    GradientVector g(params.rows(), params.cols());
    Eigen::MatrixXd probe = params;
    for (Eigen::Index i = 0; i < params.size(); ++i) {
        const double orig = probe.data()[i];
        probe.data()[i] = orig + h;
        const double up = objective(probe);
        probe.data()[i] = orig - h;
        const double down = objective(probe);
        probe.data()[i] = orig;
        g.data()[i] = (up - down) / (2.0 * h);
    }
    return g;
}

}  // namespace aac
