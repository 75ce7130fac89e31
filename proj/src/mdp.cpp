#include "aac/mdp.hpp"

#include <cmath>
#include <sstream>

#include "aac/errors.hpp"

namespace aac {

namespace {

void check_stochastic_rows(const Eigen::MatrixXd& m, double tol, const char* what) {
    if (!m.allFinite()) throw DomainError(std::string(what) + " contains non-finite entries");
    if ((m.array() < 0.0).any()) throw DomainError(std::string(what) + " has negative entries");
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const double sum = m.row(r).sum();
        if (std::abs(sum - 1.0) > tol) {
            std::ostringstream os;
            os << what << " row " << r << " sums to " << sum;
            throw DomainError(os.str());
        }
    }
}

}  // namespace

TabularMdp::TabularMdp(Eigen::MatrixXd transition, Eigen::MatrixXd reward, double gamma,
                       Eigen::VectorXd initial_dist)
    : transition_(std::move(transition)),
      reward_(std::move(reward)),
      gamma_(gamma),
      initial_dist_(std::move(initial_dist)) {
    const auto s = reward_.rows();
    const auto a = reward_.cols();
    if (s <= 0 || a <= 0) throw ShapeError("MDP needs at least one state and one action");
    if (transition_.rows() != s * a || transition_.cols() != s)
        throw ShapeError("transition must be (S*A) x S");
    if (initial_dist_.size() != s) throw ShapeError("initial_dist must have S entries");
    if (!(gamma_ > 0.0 && gamma_ < 1.0)) throw DomainError("gamma must lie in (0, 1)");
    if (!reward_.allFinite()) throw DomainError("reward contains non-finite entries");
    check_stochastic_rows(transition_, kStochasticTol, "transition");
    check_stochastic_rows(initial_dist_.transpose(), kStochasticTol, "initial_dist");
}

Eigen::VectorXd TabularMdp::reward_flat() const {
    // Row-major flattening of the S x A table.
    Eigen::VectorXd out(n_pairs());
    for (Eigen::Index s = 0; s < n_states(); ++s)
        for (Eigen::Index a = 0; a < n_actions(); ++a) out(sa_index(s, a, n_actions())) = reward_(s, a);
    return out;
}

TabularPolicy::TabularPolicy(Eigen::MatrixXd probs) : probs_(std::move(probs)) {
    if (probs_.rows() <= 0 || probs_.cols() <= 0) throw ShapeError("empty policy table");
    check_stochastic_rows(probs_, kStochasticTol, "policy");
}

TabularPolicy TabularPolicy::uniform(Eigen::Index n_states, Eigen::Index n_actions) {
    return TabularPolicy(Eigen::MatrixXd::Constant(n_states, n_actions, 1.0 / double(n_actions)));
}

TabularPolicy TabularPolicy::softmax(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd p(logits.rows(), logits.cols());
    for (Eigen::Index s = 0; s < logits.rows(); ++s) {
        const double m = logits.row(s).maxCoeff();
        p.row(s) = (logits.row(s).array() - m).exp();
        p.row(s) /= p.row(s).sum();
    }
    return TabularPolicy(std::move(p));
}

Eigen::MatrixXd TabularPolicy::log_probs() const {
    if (!strictly_positive()) throw DomainError("log of a zero policy probability");
    return probs_.array().log().matrix();
}

Eigen::VectorXd TabularPolicy::flat() const {
    Eigen::VectorXd out(probs_.size());
    for (Eigen::Index s = 0; s < n_states(); ++s)
        for (Eigen::Index a = 0; a < n_actions(); ++a) out(sa_index(s, a, n_actions())) = probs_(s, a);
    return out;
}

void check_shapes(const TabularMdp& mdp, const TabularPolicy& policy) {
    if (policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions())
        throw ShapeError("policy shape does not match the MDP");
}

TransitionKernels policy_transition_kernels(const TabularMdp& mdp, const TabularPolicy& policy) {
    check_shapes(mdp, policy);
    const auto ns = mdp.n_states();
    const auto na = mdp.n_actions();
    const auto& P = mdp.transition();

    TransitionKernels k;
    k.state = Eigen::MatrixXd::Zero(ns, ns);
    for (Eigen::Index s = 0; s < ns; ++s)
        for (Eigen::Index a = 0; a < na; ++a) k.state.row(s) += policy(s, a) * P.row(sa_index(s, a, na));

    // P_bar[(s,a)][(s',a')] = P(s'|s,a) pi(a'|s')
    k.state_action.resize(ns * na, ns * na);
    for (Eigen::Index row = 0; row < ns * na; ++row)
        for (Eigen::Index next = 0; next < ns; ++next)
            for (Eigen::Index a2 = 0; a2 < na; ++a2)
                k.state_action(row, sa_index(next, a2, na)) = P(row, next) * policy(next, a2);
    return k;
}

Eigen::MatrixXd solve_discounted(const Eigen::MatrixXd& kernel, double gamma,
                                 const Eigen::MatrixXd& rhs) {
    const auto n = kernel.rows();
    Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n) - gamma * kernel;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
    if (!(lu.rcond() > 1e-14)) throw NumericalError("discounted system is numerically singular");
    Eigen::MatrixXd x = lu.solve(rhs);
    if (!x.allFinite()) throw NumericalError("discounted solve produced non-finite values");
    return x;
}

CumulativeTransitions cumulative_transitions(const TabularMdp& mdp, const TabularPolicy& policy) {
    const auto k = policy_transition_kernels(mdp, policy);
    CumulativeTransitions g;
    g.state = solve_discounted(k.state, mdp.gamma(),
                               Eigen::MatrixXd::Identity(k.state.rows(), k.state.rows()));
    g.state_action = solve_discounted(
        k.state_action, mdp.gamma(),
        Eigen::MatrixXd::Identity(k.state_action.rows(), k.state_action.rows()));
    return g;
}

StateDistribution discounted_state_distribution(const TabularMdp& mdp,
                                                const TabularPolicy& policy) {
    const auto k = policy_transition_kernels(mdp, policy);
    // rho^T = rho0^T (I - gamma P)^-1  <=>  (I - gamma P^T) rho = rho0
    Eigen::VectorXd rho = solve_discounted(k.state.transpose(), mdp.gamma(), mdp.initial_dist());
    return {std::move(rho)};
}

ValueTables policy_values(const TabularMdp& mdp, const TabularPolicy& policy) {
    const auto k = policy_transition_kernels(mdp, policy);
    const Eigen::VectorXd qf = solve_discounted(k.state_action, mdp.gamma(), mdp.reward_flat());
    ValueTables out;
    out.q = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        qf.data(), mdp.n_states(), mdp.n_actions());
    out.v = (policy.probs().array() * out.q.array()).rowwise().sum();
    return out;
}

void cross_check(double a, double b, const char* what) {
    if (!(std::abs(a - b) <= kCrossCheckTol * std::max(1.0, std::abs(a)))) {
        std::ostringstream os;
        os.precision(17);
        os << what << ": cross-check failed (" << a << " vs " << b << ")";
        throw NumericalError(os.str());
    }
}

double objective_eta(const TabularMdp& mdp, const TabularPolicy& policy) {
    const auto values = policy_values(mdp, policy);
    const double from_values = mdp.initial_dist().dot(values.v);
    const auto rho = discounted_state_distribution(mdp, policy).rho;
    const Eigen::VectorXd expected_r = (policy.probs().array() * mdp.reward().array()).rowwise().sum();
    const double from_occupancy = rho.dot(expected_r);
    cross_check(from_values, from_occupancy, "objective_eta");
    return from_values;
}

}  // namespace aac
