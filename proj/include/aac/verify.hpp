#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "aac/mdp.hpp"
#include "aac/soft_values.hpp"

namespace aac {

struct VerifyOptions {
    int instances = 50;
    std::uint64_t seed = 0;
    /// Negative control: the monotonicity check is run on a sign-flipped
    /// advantage and is expected to fail.
    bool self_test = false;
};

struct PropertyResult {
    std::string name;
    double tolerance = 0.0;
    double worst = 0.0;  ///< largest violation measure seen; passes iff worst <= tolerance
    int checks = 0;
    int failures = 0;
    std::string note;

    bool passed() const { return failures == 0; }
};

struct VerifyReport {
    int instances = 0;
    std::vector<PropertyResult> properties;

    bool all_passed() const;
    const PropertyResult* find(const std::string& name) const;
    /// name,passed,checks,failures,worst,tolerance
    void write_csv(std::ostream& os) const;
    void print(std::ostream& os) const;
};

/// A random test problem: MDP, temperature, and two strictly positive
/// policies.
struct VerifyInstance {
    TabularMdp mdp;
    EntropyConfig cfg;
    Eigen::MatrixXd logits;
    Eigen::MatrixXd logits_other;
};

/// Instance `index` of the stream defined by `seed`: up to 8 states, 2 to 4
/// actions, alpha in {0.1, 0.5, 1.0}, gamma in [0.5, 0.95].
VerifyInstance make_verify_instance(std::uint64_t seed, int index);

VerifyReport run_verify(const VerifyOptions& options);

}  // namespace aac
