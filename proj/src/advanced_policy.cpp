#include "aac/advanced_policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace aac {

namespace {

double log_sum_exp(const Eigen::Ref<const Eigen::RowVectorXd>& x) {
    const double m = x.maxCoeff();
    return m + std::log((x.array() - m).exp().sum());
}

void check_epsilon(double epsilon, double alpha, bool allow_extrapolation) {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw DomainError("epsilon must be finite and >= 0");
    if (alpha > 0.0 && !allow_extrapolation && epsilon * alpha > 1.0 + 1e-12) {
        std::ostringstream os;
        os << "epsilon " << epsilon << " exceeds 1/alpha = " << 1.0 / alpha
           << " (set allow_extrapolation to go beyond the interpolation segment)";
        throw RangeError(os.str());
    }
}

}  // namespace

Eigen::MatrixXd recenter_advantage(const TabularPolicy& policy, const Eigen::MatrixXd& a_tilde) {
    if (a_tilde.rows() != policy.n_states() || a_tilde.cols() != policy.n_actions())
        throw ShapeError("advantage table does not match the policy");
    if (!a_tilde.allFinite()) throw DomainError("advantage table has non-finite entries");
    const Eigen::VectorXd mean = (policy.probs().array() * a_tilde.array()).rowwise().sum();
    const double worst = mean.cwiseAbs().maxCoeff();
    if (worst >= kRecenterTol) {
        std::ostringstream os;
        os << "advantage is not mean-zero under the policy (|sum pi A| = " << worst << ")";
        throw DomainError(os.str());
    }
    return a_tilde.colwise() - mean;
}

Eigen::MatrixXd advanced_log_policy(const Eigen::MatrixXd& log_base, const Eigen::MatrixXd& a,
                                    double epsilon, Eigen::VectorXd* log_norm) {
    Eigen::MatrixXd out = log_base + epsilon * a;
    if (log_norm) log_norm->resize(out.rows());
    for (Eigen::Index s = 0; s < out.rows(); ++s) {
        const double lse = log_sum_exp(out.row(s));
        out.row(s).array() -= lse;
        if (log_norm) (*log_norm)(s) = lse;
    }
    return out;
}

AdvancedPolicy advance(const AdvancedPolicySpec& spec) {
    check_epsilon(spec.epsilon, spec.alpha, spec.allow_extrapolation);
    if (spec.alpha < 0.0) throw DomainError("alpha must be >= 0");
    if (!spec.base.strictly_positive()) throw DomainError("advanced policy needs a strictly positive base");
    const Eigen::MatrixXd a = recenter_advantage(spec.base, spec.a_tilde);
    const auto ns = spec.base.n_states();

    PartitionValues z;
    if (spec.v_tilde) {
        if (spec.v_tilde->size() != ns) throw ShapeError("v_tilde size");
        // Z_Q = sum_a pi exp(eps Q~) with Q~ = A~ + V~, evaluated on its own.
        const Eigen::MatrixXd q = a.colwise() + *spec.v_tilde;
        const Eigen::MatrixXd shifted = spec.base.log_probs() + spec.epsilon * q;
        z.log_z_q.resize(ns);
        for (Eigen::Index s = 0; s < ns; ++s) z.log_z_q(s) = log_sum_exp(shifted.row(s));
    }

    if (spec.epsilon == 0.0) {
        z.log_z_a = Eigen::VectorXd::Zero(ns);
        return {spec.base, std::move(z)};
    }
    const Eigen::MatrixXd log_pi = advanced_log_policy(spec.base.log_probs(), a, spec.epsilon, &z.log_z_a);
    Eigen::MatrixXd probs = log_pi.array().exp();
    // exp of a normalised log row can be off by a few ulps; renormalise.
    for (Eigen::Index s = 0; s < ns; ++s) probs.row(s) /= probs.row(s).sum();
    return {TabularPolicy(std::move(probs)), std::move(z)};
}

TabularPolicy in_state_greedy(const TabularPolicy& policy, const CanonicalTables& canonical,
                              const EntropyConfig& cfg) {
    if (cfg.alpha <= 0.0) throw DomainError("in-state greedy optimisation requires alpha > 0");
    AdvancedPolicySpec spec{policy, canonical.a_tilde, cfg.alpha, 1.0 / cfg.alpha, false, std::nullopt};
    auto improved = advance(spec).policy;

    // Same policy reached through Q_alpha = Q~ + alpha log pi.
    const Eigen::MatrixXd q_alpha = canonical.q_tilde + cfg.alpha * policy.log_probs();
    const auto direct = TabularPolicy::softmax(q_alpha / cfg.alpha);
    const double gap = (direct.probs() - improved.probs()).cwiseAbs().maxCoeff();
    if (gap > 1e-10) {
        std::ostringstream os;
        os << "in-state greedy policy disagrees with softmax(Q/alpha) by " << gap;
        throw NumericalError(os.str());
    }
    return improved;
}

Eigen::VectorXd in_state_objective(const TabularPolicy& pi_prime, const TabularPolicy& pi,
                                   const Eigen::MatrixXd& a_tilde, const EntropyConfig& cfg) {
    const Eigen::MatrixXd log_ratio = cfg.alpha == 0.0
                                          ? Eigen::MatrixXd::Zero(pi.n_states(), pi.n_actions())
                                          : Eigen::MatrixXd(pi_prime.log_probs() - pi.log_probs());
    return (pi_prime.probs().array() * (a_tilde - cfg.alpha * log_ratio).array()).rowwise().sum();
}

SoftSolution soft_policy_iteration(const TabularMdp& mdp, const EntropyConfig& cfg,
                                   const TabularPolicy& init, double tol, int max_iter) {
    if (cfg.alpha <= 0.0) throw DomainError("soft policy iteration requires alpha > 0");
    if (!init.strictly_positive()) throw DomainError("initial policy must be strictly positive");
    check_shapes(mdp, init);

    TabularPolicy pi = init;
    std::vector<double> history;
    for (int it = 0;; ++it) {
        auto soft = soft_policy_evaluation(mdp, pi, cfg);
        const auto canon = canonical_tables(pi, soft, cfg);
        history.push_back(mdp.initial_dist().dot(canon.v_tilde));
        const double residual = canon.a_tilde.cwiseAbs().maxCoeff();
        if (residual < tol) return {std::move(pi), std::move(soft), it, residual, std::move(history)};
        if (it >= max_iter) {
            std::ostringstream os;
            os << "soft policy iteration did not reach ||A~|| < " << tol << " in " << max_iter
               << " iterations (last " << residual << ")";
            throw ConvergenceError(os.str(), pi, residual);
        }
        pi = in_state_greedy(pi, canon, cfg);
    }
}

std::vector<double> monotonic_improvement_curve(const TabularMdp& mdp, const TabularPolicy& policy,
                                                const EntropyConfig& cfg,
                                                const std::vector<double>& eps_grid) {
    if (!std::is_sorted(eps_grid.begin(), eps_grid.end()))
        throw ContractError("epsilon grid must be sorted ascending");
    const auto canon = evaluate_canonical(mdp, policy, cfg);
    std::vector<double> curve;
    curve.reserve(eps_grid.size());
    for (double eps : eps_grid) {
        AdvancedPolicySpec spec{policy, canon.a_tilde, cfg.alpha, eps, false, std::nullopt};
        curve.push_back(tilde_eta(mdp, advance(spec).policy, cfg));
    }
    return curve;
}

ImprovementGaps advanced_policy_improvement_check(const TabularMdp& mdp,
                                                  const TabularPolicy& policy,
                                                  const EntropyConfig& cfg, double epsilon) {
    if (!(epsilon > 0.0)) throw DomainError("improvement check needs epsilon > 0");
    const auto soft = soft_policy_evaluation(mdp, policy, cfg);
    const auto canon = canonical_tables(policy, soft, cfg);
    AdvancedPolicySpec spec{policy, canon.a_tilde, cfg.alpha, epsilon, false, std::nullopt};
    const auto advanced = advance(spec).policy;
    const auto soft_adv = soft_policy_evaluation(mdp, advanced, cfg);
    return {(soft_adv.q_alpha - soft.q_alpha).minCoeff(), (soft_adv.v_alpha - soft.v_alpha).minCoeff()};
}

Eigen::MatrixXd derivative_at_zero(const TabularPolicy& policy, const Eigen::MatrixXd& a_tilde) {
    return policy.probs().cwiseProduct(recenter_advantage(policy, a_tilde));
}

GaussianParams gaussian_advanced_approx(double mu, double sigma, double dq_da, double alpha,
                                        double epsilon) {
    if (!(sigma > 0.0)) throw DomainError("sigma must be > 0");
    if (!(epsilon >= 0.0)) throw DomainError("epsilon must be >= 0");
    if (!(alpha >= 0.0)) throw DomainError("alpha must be >= 0");
    const double shrink = 1.0 - epsilon * alpha;
    if (!(shrink > 0.0)) throw DomainError("epsilon * alpha >= 1: the approximate variance diverges");
    const double var = sigma * sigma / shrink;
    return {mu + epsilon * var * dq_da, std::sqrt(var)};
}

Eigen::VectorXd kl_divergence(const TabularPolicy& p, const TabularPolicy& q) {
    if (p.n_states() != q.n_states() || p.n_actions() != q.n_actions()) throw ShapeError("KL shapes");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(p.n_states());
    for (Eigen::Index s = 0; s < p.n_states(); ++s)
        for (Eigen::Index a = 0; a < p.n_actions(); ++a) {
            const double ps = p(s, a);
            if (ps == 0.0) continue;
            if (q(s, a) == 0.0) throw DomainError("KL divergence is infinite (q == 0 where p > 0)");
            out(s) += ps * (std::log(ps) - std::log(q(s, a)));
        }
    return out;
}

}  // namespace aac
