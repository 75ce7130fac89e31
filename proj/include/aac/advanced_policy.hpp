#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "aac/errors.hpp"
#include "aac/mdp.hpp"
#include "aac/soft_values.hpp"

namespace aac {

/// Inputs of the advanced policy pi'_eps = pi exp(eps A~) / Z_A.
///
/// epsilon is restricted to [0, 1/alpha] unless allow_extrapolation is set;
/// with alpha == 0 any epsilon >= 0 is on the segment. When v_tilde is given,
/// Z_Q = sum_a pi exp(eps Q~) is reported as well.
struct AdvancedPolicySpec {
    TabularPolicy base;
    Eigen::MatrixXd a_tilde;
    double alpha = 0.0;
    double epsilon = 0.0;
    bool allow_extrapolation = false;
    std::optional<Eigen::VectorXd> v_tilde;
};

/// Per-state partition functions, kept in log form so that large eps*Q~
/// never overflows. log_z_q is empty unless v_tilde was supplied.
struct PartitionValues {
    Eigen::VectorXd log_z_a;
    Eigen::VectorXd log_z_q;

    Eigen::VectorXd z_a() const { return log_z_a.array().exp(); }
    Eigen::VectorXd z_q() const { return log_z_q.array().exp(); }
};

struct AdvancedPolicy {
    TabularPolicy policy;
    PartitionValues partition;
};

/// Mean-zero tolerance: |sum_a pi A~| below this is re-centred, above it the
/// advantage table is rejected as inconsistent with the policy.
inline constexpr double kRecenterTol = 1e-6;

/// Returns a_tilde with its per-state pi-mean removed; throws DomainError if
/// any mean exceeds kRecenterTol.
Eigen::MatrixXd recenter_advantage(const TabularPolicy& policy, const Eigen::MatrixXd& a_tilde);

/// log pi + eps A - logsumexp(log pi + eps A), row by row, with a max shift.
/// No range checks; eps may be negative (finite-difference oracles use it).
/// When log_norm is non-null it receives the per-state logsumexp.
Eigen::MatrixXd advanced_log_policy(const Eigen::MatrixXd& log_base, const Eigen::MatrixXd& a,
                                    double epsilon, Eigen::VectorXd* log_norm = nullptr);

AdvancedPolicy advance(const AdvancedPolicySpec& spec);

/// Softmax-greedy improvement pi exp(A~/alpha)/Z, cross-checked against
/// softmax(Q_alpha/alpha) at 1e-10. Requires alpha > 0.
TabularPolicy in_state_greedy(const TabularPolicy& policy, const CanonicalTables& canonical,
                              const EntropyConfig& cfg);

/// sum_a pi'(A~ - alpha log(pi'/pi)) for every state.
Eigen::VectorXd in_state_objective(const TabularPolicy& pi_prime, const TabularPolicy& pi,
                                   const Eigen::MatrixXd& a_tilde, const EntropyConfig& cfg);

struct SoftSolution {
    TabularPolicy policy;
    SoftValueTables values;
    int iterations = 0;             ///< improvement steps taken
    double max_abs_advantage = 0.0; ///< final ||A~||_inf
    std::vector<double> eta_history;
};

/// Raised when soft policy iteration hits max_iter; carries the last iterate.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, TabularPolicy last, double residual)
        : Error(what), last_iterate(std::move(last)), max_abs_advantage(residual) {}
    TabularPolicy last_iterate;
    double max_abs_advantage;
};

/// Alternates exact soft evaluation and in-state greedy improvement until
/// ||A~||_inf < tol.
SoftSolution soft_policy_iteration(const TabularMdp& mdp, const EntropyConfig& cfg,
                                   const TabularPolicy& init, double tol, int max_iter);

/// Exact eta~ of pi'_eps at each grid point (grid ascending in [0, 1/alpha]).
std::vector<double> monotonic_improvement_curve(const TabularMdp& mdp, const TabularPolicy& policy,
                                                const EntropyConfig& cfg,
                                                const std::vector<double>& eps_grid);

struct ImprovementGaps {
    double q_gap_min = 0.0;
    double v_gap_min = 0.0;
};

/// min over (s,a) of Q_a^{pi'_eps} - Q_a^pi and min over s of the V gap.
ImprovementGaps advanced_policy_improvement_check(const TabularMdp& mdp,
                                                  const TabularPolicy& policy,
                                                  const EntropyConfig& cfg, double epsilon);

/// d pi'_eps / d eps at eps = 0, i.e. pi * A~ elementwise.
Eigen::MatrixXd derivative_at_zero(const TabularPolicy& policy, const Eigen::MatrixXd& a_tilde);

struct GaussianParams {
    double mu = 0.0;
    double sigma = 1.0;
};

/// Gaussian approximation of the advanced policy for a peaked Gaussian base:
/// sigma'^2 = sigma^2 / (1 - eps alpha), mu' = mu + eps sigma'^2 dQ/da.
GaussianParams gaussian_advanced_approx(double mu, double sigma, double dq_da, double alpha,
                                        double epsilon);

/// Per-state KL(p | q). Throws DomainError where p > 0 but q == 0.
Eigen::VectorXd kl_divergence(const TabularPolicy& p, const TabularPolicy& q);

}  // namespace aac
