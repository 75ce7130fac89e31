#include <doctest.h>

#include <cmath>

#include "aac/advanced_policy.hpp"
#include "aac/policy_gradient.hpp"
#include "test_helpers.hpp"

using namespace aac;
using aac::test::max_abs;

namespace {

double rel_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).norm() / std::max(1e-12, std::max(a.norm(), b.norm()));
}

SoftmaxPolicyParams optimal_params(const TabularMdp& mdp, const EntropyConfig& cfg) {
    const auto sol = soft_policy_iteration(mdp, cfg, TabularPolicy::uniform(mdp.n_states(), mdp.n_actions()),
                                           1e-12, 500);
    return {sol.policy.probs().array().log().matrix()};
}

struct Problem {
    TabularMdp mdp;
    EntropyConfig cfg;
    SoftmaxPolicyParams params;
};

Problem random_problem(int i, std::mt19937_64& rng) {
    const int s = 1 + i % 6, a = 2 + i % 3;
    const double alphas[] = {0.1, 0.5, 1.0};
    return {aac::test::random_model(2000 + i, s, a, 0.6 + 0.01 * i, i % 2 ? 0.3 : 0.0), EntropyConfig(alphas[i % 3]),
            {aac::test::random_table(rng, s, a)}};
}

const SoftmaxPolicyParams kUniform1{Eigen::MatrixXd::Zero(1, 2)};

}  // namespace

TEST_CASE("soft policy gradient") {
    const auto mdp = aac::test::one_state_mdp();
    const EntropyConfig cfg(1.0);
    const auto g = soft_policy_gradient(mdp, kUniform1, cfg);
    CHECK(g(0, 0) == doctest::Approx(0.5).epsilon(1e-13));
    CHECK(g(0, 1) == doctest::Approx(-0.5).epsilon(1e-13));

    const auto m = aac::test::random_model(2100, 5, 3, 0.9);
    const EntropyConfig c(0.5);
    CHECK(soft_policy_gradient(m, optimal_params(m, c), c).norm() < 1e-8);

    std::mt19937_64 rng(21);
    for (int i = 0; i < 30; ++i) {
        auto p = random_problem(i, rng);
        const auto analytic = soft_policy_gradient(p.mdp, p.params, p.cfg);
        const auto fd = finite_difference_gradient(
            [&](const Eigen::MatrixXd& th) { return tilde_eta(p.mdp, TabularPolicy::softmax(th), p.cfg); },
            p.params.logits, 1e-6);
        CHECK(rel_error(analytic, fd) < 1e-5);
    }
}

TEST_CASE("Fisher information") {
    const auto mdp = aac::test::one_state_mdp();
    const auto f = fisher_information(mdp, kUniform1);
    Eigen::MatrixXd expected(2, 2);
    expected << 0.5, -0.5, -0.5, 0.5;
    CHECK(max_abs(f - expected) < 1e-14);

    std::mt19937_64 rng(22);
    for (int i = 0; i < 20; ++i) {
        auto p = random_problem(i, rng);
        const auto fi = fisher_information(p.mdp, p.params);
        CHECK(max_abs(fi - fi.transpose()) < 1e-14);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fi);
        CHECK(es.eigenvalues().minCoeff() >= -1e-12);
        const auto s_n = p.mdp.n_states(), a_n = p.mdp.n_actions();
        for (Eigen::Index s = 0; s < s_n; ++s) {
            Eigen::VectorXd shift = Eigen::VectorXd::Zero(s_n * a_n);
            shift.segment(s * a_n, a_n).setConstant(1.7);
            CHECK(max_abs(fi * shift) < 1e-10);
        }
    }
}

TEST_CASE("natural gradient") {
    const auto mdp = aac::test::one_state_mdp();
    const EntropyConfig cfg(1.0);
    const auto ng = natural_gradient(mdp, kUniform1, cfg);
    const auto vel = policy_velocity(kUniform1, ng);
    CHECK(vel(0, 0) == doctest::Approx(0.25).epsilon(1e-10));
    CHECK(vel(0, 1) == doctest::Approx(-0.25).epsilon(1e-10));

    const auto m = aac::test::random_model(2200, 4, 3, 0.8);
    const EntropyConfig c(1.0);
    CHECK(natural_gradient(m, optimal_params(m, c), c).norm() < 1e-8);

    std::mt19937_64 rng(23);
    for (int i = 0; i < 20; ++i) {
        auto p = random_problem(i, rng);
        const auto pi = p.params.policy();
        const auto at = evaluate_canonical(p.mdp, pi, p.cfg).a_tilde;
        const auto v = policy_velocity(p.params, natural_gradient(p.mdp, p.params, p.cfg));
        CHECK(max_abs(v - derivative_at_zero(pi, at)) < 1e-7);
    }
}

TEST_CASE("KL surrogate gradient") {
    const auto mdp = aac::test::one_state_mdp();
    const EntropyConfig cfg(1.0);
    CHECK(max_abs(surrogate_kl_gradient(mdp, kUniform1, kUniform1, cfg, 0.0)) == 0.0);
    const auto g = surrogate_kl_gradient(mdp, kUniform1, kUniform1, cfg, 1.0);
    CHECK(g(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(g(0, 1) == doctest::Approx(-0.5).epsilon(1e-12));

    std::mt19937_64 rng(24);
    for (int i = 0; i < 30; ++i) {
        auto p = random_problem(i, rng);
        const double eps = 0.5 / p.cfg.alpha;
        const auto analytic = surrogate_kl_gradient(p.mdp, p.params, p.params, p.cfg, eps);
        CHECK(max_abs(analytic - eps * soft_policy_gradient(p.mdp, p.params, p.cfg)) < 1e-10);
        const auto fd = finite_difference_gradient(
            [&](const Eigen::MatrixXd& th) {
                return surrogate_kl_objective(p.mdp, {th}, p.params, p.cfg, eps);
            },
            p.params.logits, 1e-6);
        CHECK(rel_error(analytic, fd) < 1e-5);
    }

    // The same objective built by hand from advance and kl_divergence.
    auto p = random_problem(4, rng);
    const double eps = 0.7;
    const auto pi_o = p.params.policy();
    const auto at = evaluate_canonical(p.mdp, pi_o, p.cfg).a_tilde;
    const auto target = advance({pi_o, at, p.cfg.alpha, eps, true, std::nullopt}).policy;
    const auto rho = discounted_state_distribution(p.mdp, pi_o).rho;
    std::mt19937_64 r2(5);
    const Eigen::MatrixXd other = p.params.logits + 0.3 * aac::test::random_table(r2, p.mdp.n_states(), p.mdp.n_actions());
    const double by_hand = -rho.dot(kl_divergence(TabularPolicy::softmax(other), target));
    CHECK(surrogate_kl_objective(p.mdp, {other}, p.params, p.cfg, eps) == doctest::Approx(by_hand).epsilon(1e-12));
}

TEST_CASE("L2 surrogate gradient") {
    const auto mdp = aac::test::one_state_mdp();
    const EntropyConfig cfg(1.0);
    CHECK(max_abs(surrogate_l2_gradient(mdp, kUniform1, kUniform1, cfg, 0.0)) == 0.0);
    // rho * sum_a pi(a) dpi(a)/dtheta A~(a) with rho = 2, dpi/dtheta = [[.25,-.25],[-.25,.25]].
    const auto g = surrogate_l2_gradient(mdp, kUniform1, kUniform1, cfg, 1.0);
    CHECK(g(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(g(0, 1) == doctest::Approx(-0.25).epsilon(1e-12));

    std::mt19937_64 rng(25);
    for (int i = 0; i < 30; ++i) {
        auto p = random_problem(i, rng);
        const double eps = 1e-7;
        const auto analytic = surrogate_l2_gradient(p.mdp, p.params, p.params, p.cfg, eps);
        const auto fd = finite_difference_gradient(
            [&](const Eigen::MatrixXd& th) {
                return surrogate_l2_objective(p.mdp, {th}, p.params, p.cfg, eps);
            },
            p.params.logits, 1e-7);
        CHECK(rel_error(analytic, fd) < 1e-5);
    }

    SUBCASE("vanishes together with the policy gradient") {
        const auto m = aac::test::random_model(2300, 4, 3, 0.8);
        const EntropyConfig c(0.5);
        const auto opt = optimal_params(m, c);
        CHECK(surrogate_l2_gradient(m, opt, opt, c, 1.0).norm() < 1e-8);
        std::mt19937_64 r3(7);
        const SoftmaxPolicyParams near{opt.logits + 1e-3 * aac::test::random_table(r3, 4, 3)};
        CHECK(soft_policy_gradient(m, near, c).norm() > 1e-7);
        CHECK(surrogate_l2_gradient(m, near, near, c, 1.0).norm() > 1e-8);
    }
}

TEST_CASE("finite-difference helper") {
    Eigen::MatrixXd th(1, 2);
    th << 1.0, 2.0;
    CHECK(max_abs(finite_difference_gradient([](const Eigen::MatrixXd&) { return 3.0; }, th, 1e-4)) == 0.0);
    const auto g = finite_difference_gradient([](const Eigen::MatrixXd& x) { return x.squaredNorm(); }, th, 1e-4);
    CHECK(std::abs(g(0, 0) - 2.0) < 1e-8);
    CHECK(std::abs(g(0, 1) - 4.0) < 1e-8);
}
