#include "aac/verify.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>

#include "aac/advanced_policy.hpp"
#include "aac/envs.hpp"
#include "aac/errors.hpp"
#include "aac/policy_gradient.hpp"
#include "aac/random.hpp"

namespace aac {

bool VerifyReport::all_passed() const {
    return std::all_of(properties.begin(), properties.end(), [](const auto& p) { return p.passed(); });
}

const PropertyResult* VerifyReport::find(const std::string& name) const {
    for (const auto& p : properties)
        if (p.name == name) return &p;
    return nullptr;
}

void VerifyReport::write_csv(std::ostream& os) const {
    os << "property,passed,checks,failures,worst,tolerance\n";
    os << std::setprecision(6);
    for (const auto& p : properties)
        os << p.name << ',' << (p.passed() ? 1 : 0) << ',' << p.checks << ',' << p.failures << ','
           << p.worst << ',' << p.tolerance << '\n';
}

void VerifyReport::print(std::ostream& os) const {
    os << "verified " << instances << " random instances\n";
    for (const auto& p : properties) {
        os << (p.passed() ? "PASS " : "FAIL ") << std::left << std::setw(30) << p.name << std::right
           << " checks=" << std::setw(6) << p.checks << "  worst=" << std::scientific << std::setprecision(3)
           << p.worst << "  tol=" << p.tolerance << std::defaultfloat;
        if (!p.note.empty()) os << "  (" << p.note << ")";
        os << '\n';
    }
}

VerifyInstance make_verify_instance(std::uint64_t seed, int index) {
    std::mt19937_64 rng(derive_seed(seed, 0x7e51, static_cast<std::uint64_t>(index)));
    static constexpr double kAlphas[] = {0.1, 0.5, 1.0};
    RandomMdpSpec spec;
    spec.n_states = 1 + static_cast<int>(uniform_index(rng, 8));
    spec.n_actions = 2 + static_cast<int>(uniform_index(rng, 3));
    spec.gamma = uniform(rng, 0.5, 0.95);
    spec.sparsity = uniform01(rng) < 0.5 ? 0.0 : 0.4;
    spec.seed = rng();
    const double alpha = kAlphas[uniform_index(rng, 3)];
    auto logits = [&] {
        Eigen::MatrixXd l(spec.n_states, spec.n_actions);
        for (Eigen::Index i = 0; i < l.size(); ++i) l.data()[i] = uniform(rng, -2.0, 2.0);
        return l;
    };
    Eigen::MatrixXd l1 = logits();
    Eigen::MatrixXd l2 = logits();
    return {random_mdp(spec), EntropyConfig(alpha), std::move(l1), std::move(l2)};
}

namespace {

class Tracker {
public:
    Tracker(std::string name, double tol) { r_.name = std::move(name), r_.tolerance = tol; }

    /// Records one check whose violation measure is `v` (NaN counts as a failure).
    void record(double v) {
        ++r_.checks;
        if (std::isnan(v) || v > r_.tolerance) ++r_.failures;
        if (std::isnan(v) || v > r_.worst) r_.worst = std::isnan(v) ? INFINITY : v;
    }
    void fail(const std::string& why) {
        ++r_.checks;
        ++r_.failures;
        r_.worst = INFINITY;
        if (r_.note.empty()) r_.note = why;
    }
    PropertyResult& result() { return r_; }

private:
    PropertyResult r_;
};

std::vector<double> epsilon_grid(double alpha, int points) {
    std::vector<double> g;
    for (int k = 0; k < points; ++k) g.push_back(double(k) / double(points - 1) / alpha);
    return g;
}

double max_abs(const Eigen::MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

double row_spread(const Eigen::MatrixXd& m) {
    double worst = 0.0;
    for (Eigen::Index s = 0; s < m.rows(); ++s) worst = std::max(worst, m.row(s).maxCoeff() - m.row(s).minCoeff());
    return worst;
}

double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).norm() / std::max(b.norm(), 1e-12);
}

}  // namespace

VerifyReport run_verify(const VerifyOptions& options) {
    if (options.instances < 0) throw ConfigError("instance count must be >= 0");

    Tracker mdp_consistency("mdp_consistency", 1e-9);
    Tracker lemma1("lemma1_identity", 1e-9);
    Tracker mean_zero("advantage_mean_zero", 1e-9);
    Tracker contraction("bellman_contraction", 1e-12);
    Tracker alpha_limit("alpha_zero_limit", 1e-5);
    Tracker normalization("advance_normalization", 1e-12);
    Tracker z_bounds("partition_bounds", 1e-9);
    Tracker logit_line("logit_line", 1e-10);
    Tracker maximality("in_state_maximality", 1e-12);
    Tracker max_value("in_state_max_value", 1e-9);
    Tracker improvement("in_state_improvement", 1e-10);
    Tracker monotone("monotone_improvement", 1e-10);
    Tracker q_improve("q_v_improvement", 1e-9);
    Tracker planted("planted_optimum_fixed", 1e-9);
    Tracker kl_mono("kl_monotone", 1e-12);
    Tracker derivative("derivative_at_zero_fd", 1e-7);
    Tracker pg_fd("policy_gradient_fd", 1e-5);
    Tracker fixed_point("fixed_point_equivalence", 0.0);
    Tracker natural("natural_gradient_velocity", 1e-7);
    Tracker kl_surrogate("kl_surrogate_equals_pg", 1e-10);
    Tracker spi("soft_optimality", 1e-8);
    if (options.self_test) monotone.result().note = "self-test: advantage sign flipped";

    for (int i = 0; i < options.instances; ++i) {
        const VerifyInstance inst = make_verify_instance(options.seed, i);
        const TabularMdp& mdp = inst.mdp;
        const EntropyConfig& cfg = inst.cfg;
        const double alpha = cfg.alpha;
        const double gamma = mdp.gamma();
        const SoftmaxPolicyParams params{inst.logits};
        const TabularPolicy pi = params.policy();
        const TabularPolicy pi2 = TabularPolicy::softmax(inst.logits_other);
        std::mt19937_64 rng(derive_seed(options.seed, 0xcafe, static_cast<std::uint64_t>(i)));

        // --- tabular evaluation
        {
            const auto k = policy_transition_kernels(mdp, pi);
            const auto c = cumulative_transitions(mdp, pi);
            const auto ns = mdp.n_states();
            const auto nsa = mdp.n_pairs();
            const Eigen::MatrixXd is = Eigen::MatrixXd::Identity(ns, ns);
            const Eigen::MatrixXd isa = Eigen::MatrixXd::Identity(nsa, nsa);
            mdp_consistency.record(max_abs(c.state * (is - gamma * k.state) - is) * 10.0);
            mdp_consistency.record(max_abs(c.state_action * (isa - gamma * k.state_action) - isa) * 10.0);
            const auto rho = discounted_state_distribution(mdp, pi).rho;
            mdp_consistency.record(std::abs(rho.sum() - 1.0 / (1.0 - gamma)));
            const auto vals = policy_values(mdp, pi);
            const Eigen::VectorXd qf = flatten_table(vals.q);
            mdp_consistency.record(max_abs(qf - (mdp.reward_flat() + gamma * k.state_action * qf)));
            try {
                objective_eta(mdp, pi);
                mdp_consistency.record(0.0);
            } catch (const NumericalError& e) {
                mdp_consistency.fail(e.what());
            }
        }

        // --- soft values
        const CanonicalTables canon = evaluate_canonical(mdp, pi, cfg);
        {
            const auto d = eta_difference_identity(mdp, pi, pi2, cfg);
            lemma1.record(std::abs(d.lhs - d.rhs));
            mean_zero.record(max_abs(pi.probs().cwiseProduct(canon.a_tilde).rowwise().sum()));

            Eigen::MatrixXd q1(mdp.n_states(), mdp.n_actions()), q2(mdp.n_states(), mdp.n_actions());
            for (Eigen::Index j = 0; j < q1.size(); ++j) {
                q1.data()[j] = uniform(rng, -5.0, 5.0);
                q2.data()[j] = uniform(rng, -5.0, 5.0);
            }
            const double dq = max_abs(q1 - q2);
            contraction.record(max_abs(soft_bellman_q(mdp, pi, cfg, q1) - soft_bellman_q(mdp, pi, cfg, q2)) -
                               gamma * dq);
            const Eigen::VectorXd v1 = q1.col(0), v2 = q2.col(0);
            contraction.record(max_abs(soft_bellman_v(mdp, pi, cfg, v1) - soft_bellman_v(mdp, pi, cfg, v2)) -
                               gamma * max_abs(v1 - v2));

            const EntropyConfig tiny(1e-8);
            const auto soft = soft_policy_evaluation(mdp, pi, tiny);
            const auto hard = policy_values(mdp, pi);
            alpha_limit.record(max_abs(soft.q_alpha - hard.q));
            alpha_limit.record(max_abs(soft.v_alpha - hard.v));
        }

        // --- advanced policy along the epsilon segment
        const auto grid = epsilon_grid(alpha, 21);
        {
            Eigen::MatrixXd greedy_log;
            {
                AdvancedPolicySpec end{pi, canon.a_tilde, alpha, 1.0 / alpha, false, canon.v_tilde};
                const auto adv = advance(end);
                greedy_log = adv.policy.log_probs();
                const Eigen::VectorXd lhs = alpha * adv.partition.log_z_q;
                for (Eigen::Index s = 0; s < lhs.size(); ++s)
                    z_bounds.record((canon.v_tilde(s) - lhs(s)) / std::max(1.0, std::abs(lhs(s))));
                z_bounds.record(max_abs(adv.partition.log_z_a -
                                        (adv.partition.log_z_q - canon.v_tilde / alpha)));
            }
            Eigen::VectorXd prev_kl;
            for (double eps : grid) {
                AdvancedPolicySpec spec{pi, canon.a_tilde, alpha, eps, false, std::nullopt};
                const auto adv = advance(spec);
                normalization.record(max_abs(adv.policy.probs().rowwise().sum().array() - 1.0));
                z_bounds.record(std::max(0.0, -adv.partition.log_z_a.minCoeff()));
                const Eigen::MatrixXd line = (1.0 - eps * alpha) * pi.log_probs() + eps * alpha * greedy_log;
                logit_line.record(row_spread(adv.policy.log_probs() - line));
                const Eigen::VectorXd kl = kl_divergence(adv.policy, pi);
                if (prev_kl.size()) kl_mono.record(std::max(0.0, (prev_kl - kl).maxCoeff()));
                prev_kl = kl;
            }
            // Large |eps A~| must stay finite in log space.
            const double scale = 700.0 / std::max(max_abs(canon.a_tilde), 1e-300);
            const Eigen::MatrixXd big = advanced_log_policy(pi.log_probs(), canon.a_tilde, scale);
            normalization.record(big.allFinite() ? 0.0 : INFINITY);
        }

        // --- in-state greedy optimisation
        {
            const TabularPolicy greedy = in_state_greedy(pi, canon, cfg);
            const Eigen::VectorXd best = in_state_objective(greedy, pi, canon.a_tilde, cfg);
            AdvancedPolicySpec end{pi, canon.a_tilde, alpha, 1.0 / alpha, false, std::nullopt};
            const Eigen::VectorXd log_z = advance(end).partition.log_z_a;
            max_value.record(max_abs(best - alpha * log_z) / std::max(1.0, max_abs(best)));
            for (int k = 0; k < 100; ++k) {
                Eigen::MatrixXd other(pi.n_states(), pi.n_actions());
                for (Eigen::Index j = 0; j < other.size(); ++j) other.data()[j] = uniform(rng, 0.01, 1.0);
                other = other.array().colwise() / other.rowwise().sum().array();
                const double lambda = uniform(rng, 0.01, 1.0);
                Eigen::MatrixXd mixed = (1.0 - lambda) * greedy.probs() + lambda * other;
                mixed = mixed.array().colwise() / mixed.rowwise().sum().array();
                const Eigen::VectorXd val = in_state_objective(TabularPolicy(mixed), pi, canon.a_tilde, cfg);
                maximality.record((val - best).maxCoeff());
            }
            const double base_eta = tilde_eta(mdp, pi, cfg);
            improvement.record((base_eta - tilde_eta(mdp, greedy, cfg)) / std::max(1.0, std::abs(base_eta)));
        }

        // --- monotone improvement over the 21-point grid
        {
            const double sign = options.self_test ? -1.0 : 1.0;
            std::vector<double> curve;
            for (double eps : grid) {
                AdvancedPolicySpec spec{pi, sign * canon.a_tilde, alpha, eps, false, std::nullopt};
                curve.push_back(tilde_eta(mdp, advance(spec).policy, cfg));
            }
            if (!options.self_test) {
                const auto lib = monotonic_improvement_curve(mdp, pi, cfg, grid);
                for (std::size_t k = 0; k < lib.size(); ++k)
                    monotone.record(std::abs(lib[k] - curve[k]) * 1e-2);
            }
            for (std::size_t k = 1; k < curve.size(); ++k) monotone.record(curve[k - 1] - curve[k]);

            for (double eps : {0.25 / alpha, 0.5 / alpha, 1.0 / alpha}) {
                const auto gaps = advanced_policy_improvement_check(mdp, pi, cfg, eps);
                q_improve.record(-gaps.q_gap_min);
                q_improve.record(-gaps.v_gap_min);
            }
        }

        // --- Theorem-4 derivative by central differences in epsilon
        {
            const double h = 1e-5;
            const Eigen::MatrixXd up = advanced_log_policy(pi.log_probs(), canon.a_tilde, h).array().exp();
            const Eigen::MatrixXd dn = advanced_log_policy(pi.log_probs(), canon.a_tilde, -h).array().exp();
            derivative.record(max_abs((up - dn) / (2.0 * h) - derivative_at_zero(pi, canon.a_tilde)));
        }

        // --- gradients
        const GradientVector pg = soft_policy_gradient(mdp, params, cfg);
        {
            auto objective = [&](const Eigen::MatrixXd& th) {
                return tilde_eta(mdp, TabularPolicy::softmax(th), cfg);
            };
            pg_fd.record(rel_err(finite_difference_gradient(objective, params.logits, 1e-6), pg));

            const Eigen::MatrixXd velocity = policy_velocity(params, natural_gradient(mdp, params, cfg));
            natural.record(max_abs(velocity - derivative_at_zero(pi, canon.a_tilde)));

            for (double eps : {0.0, 0.3 / alpha, 1.0 / alpha, 2.5 / alpha}) {
                const auto g = surrogate_kl_gradient(mdp, params, params, cfg, eps);
                kl_surrogate.record(max_abs(g - eps * pg));
            }
        }

        // --- soft optimality, planted optimum and fixed-point equivalence
        {
            try {
                const auto sol = soft_policy_iteration(mdp, cfg, pi, 1e-11, 500);
                spi.record(sol.max_abs_advantage);
                const auto opt_canon = evaluate_canonical(mdp, sol.policy, cfg);
                for (double eps : grid) {
                    AdvancedPolicySpec spec{sol.policy, opt_canon.a_tilde, alpha, eps, false, std::nullopt};
                    planted.record(max_abs(advance(spec).policy.probs() - sol.policy.probs()));
                }
                // Both directions of ||PG|| < 1e-8 <=> ||A~|| < 1e-6, at the
                // optimum and at the random starting policy.
                const Eigen::MatrixXd opt_logits = sol.policy.log_probs();
                const SoftmaxPolicyParams opt_params{opt_logits};
                const TabularPolicy opt_pi = opt_params.policy();
                const std::pair<double, double> cases[] = {
                    {soft_policy_gradient(mdp, opt_params, cfg).norm(),
                     evaluate_canonical(mdp, opt_pi, cfg).a_tilde.cwiseAbs().maxCoeff()},
                    {pg.norm(), max_abs(canon.a_tilde)}};
                for (const auto& [g, a] : cases) {
                    const bool small_g = g < 1e-8;
                    const bool small_a = a < 1e-6;
                    fixed_point.record(small_g == small_a ? 0.0 : 1.0);
                }
            } catch (const ConvergenceError& e) {
                spi.fail(e.what());
            }
        }
    }

    VerifyReport report;
    report.instances = options.instances;
    for (Tracker* t : {&mdp_consistency, &lemma1, &mean_zero, &contraction, &alpha_limit, &normalization,
                       &z_bounds, &logit_line, &maximality, &max_value, &improvement, &monotone, &q_improve,
                       &planted, &kl_mono, &derivative, &pg_fd, &fixed_point, &natural, &kl_surrogate, &spi})
        report.properties.push_back(t->result());
    return report;
}

}  // namespace aac
