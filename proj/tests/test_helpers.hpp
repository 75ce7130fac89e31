#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "aac/envs.hpp"
#include "aac/mdp.hpp"
#include "aac/random.hpp"

namespace aac::test {

/// One state, two actions, r = (1, 0), gamma = 0.5.
inline TabularMdp one_state_mdp() {
    Eigen::MatrixXd p = Eigen::MatrixXd::Ones(2, 1);
    Eigen::MatrixXd r(1, 2);
    r << 1.0, 0.0;
    return TabularMdp(p, r, 0.5, Eigen::VectorXd::Ones(1));
}

/// Two states; both actions move to the other state.
inline TabularMdp swap_mdp(double gamma, Eigen::MatrixXd reward = Eigen::MatrixXd::Zero(2, 2)) {
    Eigen::MatrixXd p(4, 2);
    p << 0, 1, 0, 1, 1, 0, 1, 0;
    return TabularMdp(p, reward, gamma, Eigen::VectorXd::Constant(2, 0.5));
}

inline TabularMdp random_model(std::uint64_t seed, int s, int a, double gamma = 0.9, double sparsity = 0.0) {
    RandomMdpSpec spec;
    spec.n_states = s;
    spec.n_actions = a;
    spec.gamma = gamma;
    spec.sparsity = sparsity;
    spec.seed = seed;
    return random_mdp(spec);
}

inline Eigen::MatrixXd random_table(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                                    double lo = -2.0, double hi = 2.0) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, lo, hi);
    return m;
}

inline double max_abs(const Eigen::MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace aac::test
