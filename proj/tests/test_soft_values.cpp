#include <doctest.h>

#include <cmath>

#include "aac/errors.hpp"
#include "aac/soft_values.hpp"
#include "test_helpers.hpp"

using namespace aac;
using aac::test::max_abs;

namespace {

const double kLog2 = std::log(2.0);

// Value iteration on Q_a(s,a) = r + gamma sum_s' P sum_a' pi (Q_a - alpha log pi).
Eigen::MatrixXd soft_q_by_iteration(const TabularMdp& mdp, const TabularPolicy& pi, double alpha) {
    const auto s_n = mdp.n_states(), a_n = mdp.n_actions();
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(s_n, a_n);
    for (int it = 0; it < 100000; ++it) {
        Eigen::VectorXd v(s_n);
        for (Eigen::Index s = 0; s < s_n; ++s) {
            double acc = 0.0;
            for (Eigen::Index a = 0; a < a_n; ++a) acc += pi(s, a) * (q(s, a) - alpha * std::log(pi(s, a)));
            v(s) = acc;
        }
        Eigen::MatrixXd next(s_n, a_n);
        for (Eigen::Index s = 0; s < s_n; ++s)
            for (Eigen::Index a = 0; a < a_n; ++a)
                next(s, a) = mdp.reward()(s, a) + mdp.gamma() * mdp.transition().row(s * a_n + a).dot(v);
        const double diff = max_abs(next - q);
        q = next;
        if (diff < 1e-13) break;
    }
    return q;
}

}  // namespace

TEST_CASE("entropy-augmented reward") {
    const auto swap = aac::test::swap_mdp(0.9);
    const auto uni = TabularPolicy::uniform(2, 2);
    CHECK_THROWS_AS(EntropyConfig(-1.0), DomainError);

    const auto r0 = entropy_augmented_reward(aac::test::swap_mdp(0.9, Eigen::MatrixXd::Constant(2, 2, 0.3)), uni,
                                             EntropyConfig(0.0));
    CHECK(max_abs(r0.array() - 0.3) == 0.0);

    const auto r1 = entropy_augmented_reward(swap, uni, EntropyConfig(1.0));
    CHECK(max_abs(r1.array() - kLog2) < 1e-15);

    Eigen::MatrixXd det(2, 2);
    det << 1, 0, 0, 1;
    Eigen::MatrixXd r(2, 2);
    r << 0.4, -0.2, 0.7, 1.1;
    CHECK_THROWS_AS(entropy_augmented_reward(aac::test::swap_mdp(0.9, r), TabularPolicy(det), EntropyConfig(0.5)),
                    DomainError);
    const auto rd = entropy_augmented_reward(aac::test::swap_mdp(0.9, r), TabularPolicy(det), EntropyConfig(0.0));
    CHECK(rd(0, 0) == 0.4);
    CHECK(rd(1, 1) == 1.1);
    const auto scaled = scaled_log_policy(TabularPolicy(det), EntropyConfig(0.0));
    CHECK(max_abs(scaled) == 0.0);
}

TEST_CASE("soft policy evaluation") {
    const auto mdp = aac::test::one_state_mdp();
    const auto pi = TabularPolicy::uniform(1, 2);

    SUBCASE("one state, alpha 1") {
        const auto sv = soft_policy_evaluation(mdp, pi, EntropyConfig(1.0));
        CHECK(sv.v_alpha(0) == doctest::Approx(1.0 + 2.0 * kLog2).epsilon(1e-14));
        CHECK(sv.q_alpha(0, 0) == doctest::Approx(1.5 + kLog2).epsilon(1e-14));
        CHECK(sv.q_alpha(0, 1) == doctest::Approx(0.5 + kLog2).epsilon(1e-14));
        CHECK(sv.v_alpha(0) == doctest::Approx(2.386294).epsilon(1e-6));
    }
    SUBCASE("alpha 0 reduces to the standard values") {
        std::mt19937_64 rng(2);
        for (int i = 0; i < 10; ++i) {
            const auto m = aac::test::random_model(40 + i, 5, 3);
            const auto p = TabularPolicy::softmax(aac::test::random_table(rng, 5, 3));
            const auto sv = soft_policy_evaluation(m, p, EntropyConfig(0.0));
            const auto hv = policy_values(m, p);
            CHECK(max_abs(sv.q_alpha - hv.q) < 1e-10);
            CHECK(max_abs(sv.v_alpha - hv.v) < 1e-10);
        }
    }
    SUBCASE("random model against value iteration") {
        std::mt19937_64 rng(8);
        for (int i = 0; i < 10; ++i) {
            const auto m = aac::test::random_model(60 + i, 4, 3, 0.8, 0.3);
            const auto p = TabularPolicy::softmax(aac::test::random_table(rng, 4, 3));
            const auto sv = soft_policy_evaluation(m, p, EntropyConfig(0.3));
            CHECK(max_abs(sv.q_alpha - soft_q_by_iteration(m, p, 0.3)) < 1e-10);
        }
    }
}

TEST_CASE("soft Bellman operators") {
    const auto mdp = aac::test::one_state_mdp();
    const auto pi = TabularPolicy::uniform(1, 2);
    const EntropyConfig cfg(1.0);
    const auto sv = soft_policy_evaluation(mdp, pi, cfg);

    CHECK(max_abs(soft_bellman_q(mdp, pi, cfg, sv.q_alpha) - sv.q_alpha) < 1e-12);
    CHECK(max_abs(soft_bellman_v(mdp, pi, cfg, sv.v_alpha) - sv.v_alpha) < 1e-12);

    // Hand unrolling from zero: Q1 = r + g log2, Q2 = r + g (0.5 + 1.5 log2).
    const Eigen::MatrixXd q2 = soft_bellman_q(mdp, pi, cfg, soft_bellman_q(mdp, pi, cfg, Eigen::MatrixXd::Zero(1, 2)));
    CHECK(q2(0, 0) == doctest::Approx(1.0 + 0.5 * (0.5 + 1.5 * kLog2)).epsilon(1e-14));
    CHECK(q2(0, 1) == doctest::Approx(0.5 * (0.5 + 1.5 * kLog2)).epsilon(1e-14));

    SUBCASE("contraction") {
        std::mt19937_64 rng(31);
        for (int i = 0; i < 100; ++i) {
            const int s = 1 + i % 5, a = 2 + i % 3;
            const auto m = aac::test::random_model(200 + i, s, a, 0.5 + 0.004 * i);
            const auto p = TabularPolicy::softmax(aac::test::random_table(rng, s, a));
            const EntropyConfig c(0.5);
            const Eigen::MatrixXd q1 = aac::test::random_table(rng, s, a, -5, 5);
            const Eigen::MatrixXd q2r = aac::test::random_table(rng, s, a, -5, 5);
            const double lhs = max_abs(soft_bellman_q(m, p, c, q1) - soft_bellman_q(m, p, c, q2r));
            CHECK(lhs <= m.gamma() * max_abs(q1 - q2r) + 1e-12);
            const Eigen::VectorXd v1 = aac::test::random_table(rng, s, 1, -5, 5);
            const Eigen::VectorXd v2 = aac::test::random_table(rng, s, 1, -5, 5);
            CHECK(max_abs(soft_bellman_v(m, p, c, v1) - soft_bellman_v(m, p, c, v2)) <=
                  m.gamma() * max_abs(v1 - v2) + 1e-12);
        }
    }
}

TEST_CASE("canonical tables") {
    const auto mdp = aac::test::one_state_mdp();
    const auto pi = TabularPolicy::uniform(1, 2);
    const EntropyConfig cfg(1.0);
    const auto ct = evaluate_canonical(mdp, pi, cfg);
    CHECK(ct.a_tilde(0, 0) == doctest::Approx(0.5).epsilon(1e-13));
    CHECK(ct.a_tilde(0, 1) == doctest::Approx(-0.5).epsilon(1e-13));
    CHECK(ct.v_tilde(0) == doctest::Approx(1.0 + 2.0 * kLog2).epsilon(1e-14));

    CHECK(max_abs(canonical_bellman_q(mdp, pi, cfg, ct.q_tilde) - ct.q_tilde) < 1e-12);
    CHECK(max_abs(canonical_bellman_v(mdp, pi, cfg, ct.v_tilde) - ct.v_tilde) < 1e-12);

    SUBCASE("alpha 0 gives the standard advantage") {
        const auto m = aac::test::random_model(3, 4, 2);
        std::mt19937_64 rng(1);
        const auto p = TabularPolicy::softmax(aac::test::random_table(rng, 4, 2));
        const auto c0 = evaluate_canonical(m, p, EntropyConfig(0.0));
        const auto hv = policy_values(m, p);
        CHECK(max_abs(c0.a_tilde - (hv.q.colwise() - hv.v)) < 1e-10);
    }
    SUBCASE("operator identity and mean-zero advantage on random models") {
        std::mt19937_64 rng(12);
        for (int i = 0; i < 20; ++i) {
            const int s = 1 + i % 7, a = 2 + i % 3;
            const auto m = aac::test::random_model(300 + i, s, a, 0.85, i % 2 ? 0.3 : 0.0);
            const auto p = TabularPolicy::softmax(aac::test::random_table(rng, s, a));
            const EntropyConfig c(0.2 + 0.1 * (i % 5));
            const Eigen::MatrixXd q = aac::test::random_table(rng, s, a, -3, 3);
            const Eigen::MatrixXd log_term = c.alpha * p.probs().array().log().matrix();
            const Eigen::MatrixXd lhs = canonical_bellman_q(m, p, c, q - log_term);
            const Eigen::MatrixXd rhs = soft_bellman_q(m, p, c, q) - log_term;
            CHECK(max_abs(lhs - rhs) < 1e-10);
            const auto t = evaluate_canonical(m, p, c);
            CHECK(max_abs(p.probs().cwiseProduct(t.a_tilde).rowwise().sum()) < 1e-10);
        }
    }
    SUBCASE("zero reward, deterministic policy") {
        Eigen::MatrixXd det(2, 2);
        det << 1, 0, 0, 1;
        const auto t = evaluate_canonical(aac::test::swap_mdp(0.9), TabularPolicy(det), EntropyConfig(0.0));
        CHECK(max_abs(t.q_tilde) == 0.0);
    }
}

TEST_CASE("entropy-augmented objective") {
    const auto mdp = aac::test::one_state_mdp();
    const auto pi = TabularPolicy::uniform(1, 2);
    const double eta = tilde_eta(mdp, pi, EntropyConfig(1.0));
    CHECK(eta == doctest::Approx(2.386294).epsilon(1e-6));
    CHECK(eta == doctest::Approx(evaluate_canonical(mdp, pi, EntropyConfig(1.0)).v_tilde(0)).epsilon(1e-14));

    std::mt19937_64 rng(5);
    for (int i = 0; i < 10; ++i) {
        const auto m = aac::test::random_model(500 + i, 5, 3, 0.9, 0.2);
        const auto p = TabularPolicy::softmax(aac::test::random_table(rng, 5, 3));
        CHECK(tilde_eta(m, p, EntropyConfig(0.0)) == doctest::Approx(objective_eta(m, p)).epsilon(1e-12));
        const EntropyConfig c(0.7);
        const auto t = evaluate_canonical(m, p, c);
        CHECK(tilde_eta(m, p, c) == doctest::Approx(m.initial_dist().dot(t.v_tilde)).epsilon(1e-9));
    }
}

TEST_CASE("objective-difference identity") {
    const auto mdp = aac::test::one_state_mdp();
    const auto pi = TabularPolicy::uniform(1, 2);
    const EntropyConfig cfg(1.0);

    const auto same = eta_difference_identity(mdp, pi, pi, cfg);
    CHECK(std::abs(same.lhs) < 1e-14);
    CHECK(std::abs(same.rhs) < 1e-14);

    const double e = std::exp(1.0);
    Eigen::MatrixXd pp(1, 2);
    pp << e / (1 + e), 1 / (1 + e);
    const auto d = eta_difference_identity(mdp, pi, TabularPolicy(pp), cfg);
    const double closed = 2.0 * std::log((1.0 + e) / 2.0) - 1.0;
    CHECK(d.lhs == doctest::Approx(closed).epsilon(1e-12));
    CHECK(d.rhs == doctest::Approx(closed).epsilon(1e-12));
    CHECK(closed == doctest::Approx(0.240230).epsilon(1e-5));

    std::mt19937_64 rng(77);
    for (int i = 0; i < 50; ++i) {
        const int s = 1 + i % 8, a = 2 + i % 3;
        const auto m = aac::test::random_model(700 + i, s, a, 0.5 + 0.009 * i, i % 2 ? 0.4 : 0.0);
        const auto p = TabularPolicy::softmax(aac::test::random_table(rng, s, a));
        const auto q = TabularPolicy::softmax(aac::test::random_table(rng, s, a));
        const auto id = eta_difference_identity(m, p, q, EntropyConfig(0.1 * (1 + i % 10)));
        CHECK(std::abs(id.lhs - id.rhs) < 1e-9);
    }
}
