#pragma once

#include <functional>

#include <Eigen/Dense>

#include "aac/mdp.hpp"
#include "aac/soft_values.hpp"

namespace aac {

/// Tabular softmax parameterisation: pi(.|s) = softmax(logits.row(s)).
/// Logits carry a per-state gauge freedom (adding a constant to a row does
/// not change the policy).
struct SoftmaxPolicyParams {
    Eigen::MatrixXd logits;

    TabularPolicy policy() const { return TabularPolicy::softmax(logits); }
};

/// Gradient with respect to the logit table; same S x A shape.
using GradientVector = Eigen::MatrixXd;

/// Exact gradient of eta~ with respect to the logits:
/// sum_s rho_pi sum_a pi grad(log pi) A~, with exact rho_pi and A~.
GradientVector soft_policy_gradient(const TabularMdp& mdp, const SoftmaxPolicyParams& params,
                                    const EntropyConfig& cfg);

/// Fisher information over the flattened logits (sa_index layout):
/// sum_{s,a} rho pi (grad log pi)(grad log pi)^T. Symmetric PSD, singular
/// along per-state constant shifts.
Eigen::MatrixXd fisher_information(const TabularMdp& mdp, const SoftmaxPolicyParams& params);

/// Eigenvalues of the Fisher matrix below this are treated as zero.
inline constexpr double kFisherCutoff = 1e-10;

/// d theta / d eps along the advanced-policy path at eps = 0: F^+ g.
GradientVector natural_gradient(const TabularMdp& mdp, const SoftmaxPolicyParams& params,
                                const EntropyConfig& cfg);

/// Policy velocity sum_b (d pi(a|s) / d theta(s,b)) dtheta(s,b) induced by a
/// logit direction.
Eigen::MatrixXd policy_velocity(const SoftmaxPolicyParams& params, const Eigen::MatrixXd& dtheta);

/// Surrogate J_eps(pi, pi_o) = -sum_s rho_{pi_o}(s) KL(pi | pi'_eps(pi_o)).
/// Used as the finite-difference target for surrogate_kl_gradient.
double surrogate_kl_objective(const TabularMdp& mdp, const SoftmaxPolicyParams& params,
                              const SoftmaxPolicyParams& reference, const EntropyConfig& cfg,
                              double epsilon);

/// Surrogate J = -1/2 sum_{s,a} rho_{pi_o} (pi - pi'_eps(pi_o))^2.
double surrogate_l2_objective(const TabularMdp& mdp, const SoftmaxPolicyParams& params,
                              const SoftmaxPolicyParams& reference, const EntropyConfig& cfg,
                              double epsilon);

/// Gradient of the KL surrogate, valid only at params == reference (same
/// policy within 1e-12), where it equals eps times the soft policy gradient.
GradientVector surrogate_kl_gradient(const TabularMdp& mdp, const SoftmaxPolicyParams& params,
                                     const SoftmaxPolicyParams& reference,
                                     const EntropyConfig& cfg, double epsilon);

/// First-order gradient of the L2 surrogate at params == reference:
/// eps sum rho pi A~ grad(pi). Exact up to O(eps^2).
GradientVector surrogate_l2_gradient(const TabularMdp& mdp, const SoftmaxPolicyParams& params,
                                     const SoftmaxPolicyParams& reference,
                                     const EntropyConfig& cfg, double epsilon);

/// Coordinate-wise central differences.
GradientVector finite_difference_gradient(
    const std::function<double(const Eigen::MatrixXd&)>& objective, const Eigen::MatrixXd& params,
    double h);

}  // namespace aac
