#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace aac {

enum class FeatureKind { identity, polynomial, tile_coding };

/// Deterministic observation -> feature vector map.
class FeatureMap {
public:
    static FeatureMap identity(int dim);
    /// Constant term plus every monomial of total degree 1..degree.
    static FeatureMap polynomial(int dim, int degree);
    /// n_tilings uniform grids with tiles_per_dim cells per axis over
    /// [low, high], each shifted by k/n_tilings of a cell. Observations are
    /// clipped to the box. One active binary feature per tiling.
    static FeatureMap tile_coding(Eigen::VectorXd low, Eigen::VectorXd high, int tiles_per_dim,
                                  int n_tilings);

    FeatureKind kind() const { return kind_; }
    int input_dim() const { return input_dim_; }
    int output_dim() const { return output_dim_; }

    Eigen::VectorXd operator()(const Eigen::VectorXd& obs) const;

private:
    FeatureMap() = default;

    FeatureKind kind_ = FeatureKind::identity;
    int input_dim_ = 0;
    int output_dim_ = 0;
    int degree_ = 1;
    std::vector<std::vector<int>> monomials_;
    Eigen::VectorXd low_, high_;
    int tiles_ = 1;
    int tilings_ = 1;
};

/// Layer sizes of a one-hidden-layer tanh perceptron (hidden == 0 gives a
/// plain linear map).
struct NetworkSpec {
    int input_dim = 1;
    int hidden = 64;
    int output_dim = 1;
    bool bias = true;

    std::int64_t param_count() const;
    std::uint64_t hash() const;
    bool operator==(const NetworkSpec&) const = default;
};

/// Differentiable approximator with a flat parameter vector.
///
/// Parameter layout, column-major within each matrix:
///   hidden > 0:  W1 (hidden x in), b1, W2 (out x hidden), b2
///   hidden == 0: W (out x in), b
/// Biases are omitted entirely when spec.bias is false.
class Approximator {
public:
    explicit Approximator(NetworkSpec spec);

    /// Weights and biases drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    static Approximator initialized(NetworkSpec spec, std::mt19937_64& rng);

    const NetworkSpec& spec() const { return spec_; }
    const Eigen::VectorXd& params() const { return params_; }
    Eigen::VectorXd& params() { return params_; }

    Eigen::VectorXd forward(const Eigen::VectorXd& features) const;
    /// Columns of `features` are samples; returns out x batch.
    Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& features) const;

    /// Gradient of <output, cotangent> with respect to params.
    Eigen::VectorXd param_gradient(const Eigen::VectorXd& features,
                                   const Eigen::VectorXd& cotangent) const;
    /// Sum over columns of the per-sample gradients.
    Eigen::VectorXd param_gradient_batch(const Eigen::MatrixXd& features,
                                         const Eigen::MatrixXd& cotangents) const;

    /// Forward pass that keeps the hidden activations for a later backward
    /// pass on the same inputs and parameters.
    struct Cache {
        Eigen::MatrixXd hidden;  ///< empty for linear networks
        Eigen::MatrixXd output;
    };
    Cache forward_cached(const Eigen::MatrixXd& features) const;
    Eigen::VectorXd param_gradient_cached(const Eigen::MatrixXd& features, const Cache& cache,
                                          const Eigen::MatrixXd& cotangents) const;

private:
    void check_input(Eigen::Index rows) const;

    NetworkSpec spec_;
    Eigen::VectorXd params_;
};

/// params += learning_rate * gradient (ascent on the gradient's objective).
void sgd_step(Approximator& approx, const Eigen::VectorXd& gradient, double learning_rate);

/// target = rho * online + (1 - rho) * target.
void polyak_update(Approximator& target, const Approximator& online, double rho);

/// Binary snapshot: 8-byte magic "AACSNAP1", u64 spec hash, u64 count, then
/// count little-endian float64 values.
void write_snapshot(std::ostream& os, const Approximator& approx);
Approximator read_snapshot(std::istream& is, const NetworkSpec& spec);
void save_snapshot(const std::string& path, const Approximator& approx);
Approximator load_snapshot(const std::string& path, const NetworkSpec& spec);

}  // namespace aac
