#include "aac/approx.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "aac/errors.hpp"
#include "aac/random.hpp"

namespace aac {

namespace {

// tanh through the vectorised exp; absolute error stays at a few ulp of 1.
void tanh_inplace(Eigen::MatrixXd& m) {
    auto a = m.array();
    const Eigen::ArrayXXd t = (-2.0 * a.abs()).exp();
    a = a.sign() * (1.0 - t) / (1.0 + t);
}

void enumerate_monomials(int dim, int degree, int start, std::vector<int>& current,
                         std::vector<std::vector<int>>& out) {
    if (!current.empty()) out.push_back(current);
    if (static_cast<int>(current.size()) == degree) return;
    for (int i = start; i < dim; ++i) {
        current.push_back(i);
        enumerate_monomials(dim, degree, i, current, out);
        current.pop_back();
    }
}

}  // namespace

FeatureMap FeatureMap::identity(int dim) {
    if (dim <= 0) throw ShapeError("feature dimension must be positive");
    FeatureMap f;
    f.kind_ = FeatureKind::identity;
    f.input_dim_ = f.output_dim_ = dim;
    return f;
}

FeatureMap FeatureMap::polynomial(int dim, int degree) {
    if (dim <= 0 || degree < 1) throw ShapeError("polynomial features need dim > 0 and degree >= 1");
    FeatureMap f;
    f.kind_ = FeatureKind::polynomial;
    f.input_dim_ = dim;
    f.degree_ = degree;
    std::vector<int> current;
    enumerate_monomials(dim, degree, 0, current, f.monomials_);
    f.output_dim_ = 1 + static_cast<int>(f.monomials_.size());
    return f;
}

FeatureMap FeatureMap::tile_coding(Eigen::VectorXd low, Eigen::VectorXd high, int tiles_per_dim,
                                   int n_tilings) {
    if (low.size() != high.size() || low.size() == 0) throw ShapeError("tile bounds mismatch");
    if (tiles_per_dim < 1 || n_tilings < 1) throw ShapeError("tile counts must be positive");
    if (!((high - low).array() > 0.0).all()) throw DomainError("tile bounds must satisfy low < high");
    FeatureMap f;
    f.kind_ = FeatureKind::tile_coding;
    f.input_dim_ = static_cast<int>(low.size());
    f.low_ = std::move(low);
    f.high_ = std::move(high);
    f.tiles_ = tiles_per_dim;
    f.tilings_ = n_tilings;
    const double per_tiling = std::pow(double(tiles_per_dim + 1), f.input_dim_);
    if (per_tiling * n_tilings > 1e7) throw ShapeError("tile coding too large");
    f.output_dim_ = static_cast<int>(per_tiling) * n_tilings;
    return f;
}

Eigen::VectorXd FeatureMap::operator()(const Eigen::VectorXd& obs) const {
    if (obs.size() != input_dim_) throw ShapeError("observation dimension mismatch");
    switch (kind_) {
        case FeatureKind::identity:
            return obs;
        case FeatureKind::polynomial: {
            Eigen::VectorXd out(output_dim_);
            out(0) = 1.0;
            for (std::size_t m = 0; m < monomials_.size(); ++m) {
                double v = 1.0;
                for (int i : monomials_[m]) v *= obs(i);
                out(static_cast<Eigen::Index>(m) + 1) = v;
            }
            return out;
        }
        case FeatureKind::tile_coding: {
            // Each tiling has tiles+1 cells per axis so that the shifted grid
            // still covers the whole box.
            Eigen::VectorXd out = Eigen::VectorXd::Zero(output_dim_);
            const int cells = tiles_ + 1;
            const int per_tiling = output_dim_ / tilings_;
            for (int t = 0; t < tilings_; ++t) {
                const double shift = double(t) / double(tilings_);
                int index = 0;
                for (int d = input_dim_ - 1; d >= 0; --d) {
                    const double x = std::clamp(obs(d), low_(d), high_(d));
                    const double u = (x - low_(d)) / (high_(d) - low_(d)) * tiles_ + shift;
                    const int cell = std::clamp(static_cast<int>(std::floor(u)), 0, cells - 1);
                    index = index * cells + cell;
                }
                out(t * per_tiling + index) = 1.0;
            }
            return out;
        }
    }
    return obs;
}

std::int64_t NetworkSpec::param_count() const {
    const std::int64_t b = bias ? 1 : 0;
    if (hidden == 0) return std::int64_t(output_dim) * input_dim + b * output_dim;
    return std::int64_t(hidden) * input_dim + b * hidden + std::int64_t(output_dim) * hidden +
           b * output_dim;
}

std::uint64_t NetworkSpec::hash() const {
    // FNV-1a over the four fields.
    std::uint64_t h = 1469598103934665603ull;
    const std::int64_t fields[] = {input_dim, hidden, output_dim, bias ? 1 : 0};
    for (std::int64_t f : fields)
        for (int byte = 0; byte < 8; ++byte) {
            h ^= static_cast<std::uint64_t>((f >> (8 * byte)) & 0xff);
            h *= 1099511628211ull;
        }
    return h;
}

Approximator::Approximator(NetworkSpec spec) : spec_(spec) {
    if (spec_.input_dim <= 0 || spec_.output_dim <= 0 || spec_.hidden < 0)
        throw ShapeError("invalid network spec");
    params_ = Eigen::VectorXd::Zero(spec_.param_count());
}

Approximator Approximator::initialized(NetworkSpec spec, std::mt19937_64& rng) {
    Approximator net(spec);
    double* p = net.params_.data();
    auto fill = [&](std::int64_t count, int fan_in) {
        const double bound = 1.0 / std::sqrt(double(fan_in));
        for (std::int64_t i = 0; i < count; ++i) *p++ = uniform(rng, -bound, bound);
    };
    if (spec.hidden == 0) {
        fill(std::int64_t(spec.output_dim) * spec.input_dim, spec.input_dim);
        if (spec.bias) fill(spec.output_dim, spec.input_dim);
    } else {
        fill(std::int64_t(spec.hidden) * spec.input_dim, spec.input_dim);
        if (spec.bias) fill(spec.hidden, spec.input_dim);
        fill(std::int64_t(spec.output_dim) * spec.hidden, spec.hidden);
        if (spec.bias) fill(spec.output_dim, spec.hidden);
    }
    return net;
}

void Approximator::check_input(Eigen::Index rows) const {
    if (rows != spec_.input_dim) throw ShapeError("feature dimension does not match the network");
}

Approximator::Cache Approximator::forward_cached(const Eigen::MatrixXd& x) const {
    check_input(x.rows());
    const double* p = params_.data();
    const int in = spec_.input_dim;
    const int out = spec_.output_dim;
    Cache c;
    if (spec_.hidden == 0) {
        Eigen::Map<const Eigen::MatrixXd> w(p, out, in);
        c.output.noalias() = w * x;
        if (spec_.bias) c.output.colwise() += Eigen::Map<const Eigen::VectorXd>(p + out * in, out);
        return c;
    }
    const int h = spec_.hidden;
    Eigen::Map<const Eigen::MatrixXd> w1(p, h, in);
    p += std::int64_t(h) * in;
    c.hidden.noalias() = w1 * x;
    if (spec_.bias) {
        c.hidden.colwise() += Eigen::Map<const Eigen::VectorXd>(p, h);
        p += h;
    }
    tanh_inplace(c.hidden);
    Eigen::Map<const Eigen::MatrixXd> w2(p, out, h);
    p += std::int64_t(out) * h;
    c.output.noalias() = w2 * c.hidden;
    if (spec_.bias) c.output.colwise() += Eigen::Map<const Eigen::VectorXd>(p, out);
    return c;
}

Eigen::MatrixXd Approximator::forward_batch(const Eigen::MatrixXd& x) const { return forward_cached(x).output; }

Eigen::VectorXd Approximator::forward(const Eigen::VectorXd& features) const {
    return forward_batch(features);
}

Eigen::VectorXd Approximator::param_gradient_cached(const Eigen::MatrixXd& x, const Cache& cache,
                                                    const Eigen::MatrixXd& cot) const {
    check_input(x.rows());
    if (cot.rows() != spec_.output_dim || cot.cols() != x.cols())
        throw ShapeError("cotangent shape does not match the network output");
    Eigen::VectorXd grad(params_.size());
    double* g = grad.data();
    const int in = spec_.input_dim;
    const int out = spec_.output_dim;
    if (spec_.hidden == 0) {
        Eigen::Map<Eigen::MatrixXd>(g, out, in).noalias() = cot * x.transpose();
        if (spec_.bias) Eigen::Map<Eigen::VectorXd>(g + out * in, out) = cot.rowwise().sum();
        return grad;
    }
    const int h = spec_.hidden;
    if (cache.hidden.rows() != h || cache.hidden.cols() != x.cols()) throw ShapeError("stale forward cache");
    const double* w2p = params_.data() + std::int64_t(h) * in + (spec_.bias ? h : 0);
    Eigen::Map<const Eigen::MatrixXd> w2(w2p, out, h);
    const Eigen::MatrixXd& act = cache.hidden;

    Eigen::MatrixXd d_pre;
    d_pre.noalias() = w2.transpose() * cot;
    d_pre.array() *= 1.0 - act.array().square();
    Eigen::Map<Eigen::MatrixXd>(g, h, in).noalias() = d_pre * x.transpose();
    g += std::int64_t(h) * in;
    if (spec_.bias) {
        Eigen::Map<Eigen::VectorXd>(g, h) = d_pre.rowwise().sum();
        g += h;
    }
    Eigen::Map<Eigen::MatrixXd>(g, out, h).noalias() = cot * act.transpose();
    g += std::int64_t(out) * h;
    if (spec_.bias) Eigen::Map<Eigen::VectorXd>(g, out) = cot.rowwise().sum();
    return grad;
}

Eigen::VectorXd Approximator::param_gradient_batch(const Eigen::MatrixXd& x, const Eigen::MatrixXd& cot) const {
    return param_gradient_cached(x, forward_cached(x), cot);
}

Eigen::VectorXd Approximator::param_gradient(const Eigen::VectorXd& features,
                                             const Eigen::VectorXd& cotangent) const {
    return param_gradient_batch(features, cotangent);
}

void sgd_step(Approximator& approx, const Eigen::VectorXd& gradient, double learning_rate) {
    if (gradient.size() != approx.params().size()) throw ShapeError("gradient size mismatch");
    approx.params() += learning_rate * gradient;
}

void polyak_update(Approximator& target, const Approximator& online, double rho) {
    if (!(target.spec() == online.spec())) throw ShapeError("polyak update between different networks");
    if (!(rho >= 0.0 && rho <= 1.0)) throw DomainError("polyak rho must lie in [0, 1]");
    if (rho == 1.0) {
        target.params() = online.params();
        return;
    }
    target.params() = rho * online.params() + (1.0 - rho) * target.params();
}

namespace {
constexpr char kMagic[8] = {'A', 'A', 'C', 'S', 'N', 'A', 'P', '1'};
}

void write_snapshot(std::ostream& os, const Approximator& approx) {
    const std::uint64_t hash = approx.spec().hash();
    const std::uint64_t count = static_cast<std::uint64_t>(approx.params().size());
    os.write(kMagic, sizeof kMagic);
    os.write(reinterpret_cast<const char*>(&hash), sizeof hash);
    os.write(reinterpret_cast<const char*>(&count), sizeof count);
    os.write(reinterpret_cast<const char*>(approx.params().data()),
             static_cast<std::streamsize>(count * sizeof(double)));
    if (!os) throw ConfigError("failed to write parameter snapshot");
}

Approximator read_snapshot(std::istream& is, const NetworkSpec& spec) {
    char magic[8];
    std::uint64_t hash = 0, count = 0;
    is.read(magic, sizeof magic);
    is.read(reinterpret_cast<char*>(&hash), sizeof hash);
    is.read(reinterpret_cast<char*>(&count), sizeof count);
    if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0) throw ConfigError("not a parameter snapshot");
    if (hash != spec.hash()) throw ConfigError("snapshot was written for a different network spec");
    Approximator net(spec);
    if (count != static_cast<std::uint64_t>(net.params().size()))
        throw ConfigError("snapshot parameter count mismatch");
    is.read(reinterpret_cast<char*>(net.params().data()), static_cast<std::streamsize>(count * sizeof(double)));
    if (!is) throw ConfigError("truncated parameter snapshot");
    return net;
}

void save_snapshot(const std::string& path, const Approximator& approx) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot open " + path);
    write_snapshot(os, approx);
}

Approximator load_snapshot(const std::string& path, const NetworkSpec& spec) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open " + path);
    return read_snapshot(is, spec);
}

}  // namespace aac
