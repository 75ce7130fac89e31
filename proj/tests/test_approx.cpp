#include <doctest.h>

#include <cmath>
#include <sstream>

#include "aac/approx.hpp"
#include "aac/errors.hpp"
#include "test_helpers.hpp"

using namespace aac;
using aac::test::max_abs;

namespace {

// Layer-by-layer evaluation straight from the documented parameter layout.
Eigen::VectorXd reference_forward(const NetworkSpec& spec, const Eigen::VectorXd& p, const Eigen::VectorXd& x) {
    std::size_t k = 0;
    auto take = [&](int rows, int cols) {
        Eigen::MatrixXd m(rows, cols);
        for (int c = 0; c < cols; ++c)
            for (int r = 0; r < rows; ++r) m(r, c) = p(static_cast<Eigen::Index>(k++));
        return m;
    };
    if (spec.hidden == 0) {
        const Eigen::MatrixXd w = take(spec.output_dim, spec.input_dim);
        Eigen::VectorXd y = w * x;
        if (spec.bias) y += take(spec.output_dim, 1).col(0);
        return y;
    }
    const Eigen::MatrixXd w1 = take(spec.hidden, spec.input_dim);
    Eigen::VectorXd h = w1 * x;
    if (spec.bias) h += take(spec.hidden, 1).col(0);
    for (Eigen::Index i = 0; i < h.size(); ++i) h(i) = std::tanh(h(i));
    const Eigen::MatrixXd w2 = take(spec.output_dim, spec.hidden);
    Eigen::VectorXd y = w2 * h;
    if (spec.bias) y += take(spec.output_dim, 1).col(0);
    return y;
}

NetworkSpec random_spec(std::mt19937_64& rng) {
    NetworkSpec s;
    s.input_dim = 1 + static_cast<int>(uniform_index(rng, 5));
    s.hidden = static_cast<int>(uniform_index(rng, 3)) * 4;
    s.output_dim = 1 + static_cast<int>(uniform_index(rng, 4));
    s.bias = uniform01(rng) < 0.7;
    return s;
}

}  // namespace

TEST_CASE("feature maps") {
    Eigen::VectorXd obs(3);
    obs << 0.5, -2.0, 3.0;
    const auto id = FeatureMap::identity(3);
    CHECK(id.output_dim() == 3);
    CHECK(max_abs(id(obs) - obs) == 0.0);
    CHECK_THROWS_AS(id(Eigen::VectorXd::Zero(2)), ShapeError);

    SUBCASE("polynomial") {
        const auto poly = FeatureMap::polynomial(3, 2);
        CHECK(poly.output_dim() == 10);  // 1 + 3 + 6
        const Eigen::VectorXd f = poly(obs);
        CHECK(f(0) == 1.0);
        // Every pairwise product and square appears exactly once.
        std::vector<double> expected = {0.5, -2.0, 3.0, 0.25, -1.0, 1.5, 4.0, -6.0, 9.0};
        std::vector<double> got(f.data() + 1, f.data() + f.size());
        std::sort(expected.begin(), expected.end());
        std::sort(got.begin(), got.end());
        for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(expected[i]));
        CHECK(FeatureMap::polynomial(4, 3).output_dim() == 35);  // C(7, 3)
    }
    SUBCASE("tile coding") {
        Eigen::VectorXd lo(2), hi(2);
        lo << -1.0, -1.0;
        hi << 1.0, 1.0;
        const auto tc = FeatureMap::tile_coding(lo, hi, 4, 3);
        std::mt19937_64 rng(3);
        for (int i = 0; i < 50; ++i) {
            Eigen::VectorXd x(2);
            x << uniform(rng, -1.5, 1.5), uniform(rng, -1.5, 1.5);
            const Eigen::VectorXd f = tc(x);
            CHECK(f.size() == tc.output_dim());
            CHECK(f.sum() == 3.0);
            CHECK(((f.array() == 0.0) || (f.array() == 1.0)).all());
        }
        Eigen::VectorXd a(2), b(2);
        a << 0.1, 0.1;
        b << 0.1001, 0.1;
        CHECK(max_abs(tc(a) - tc(b)) == 0.0);
        CHECK_THROWS_AS(FeatureMap::tile_coding(hi, lo, 4, 3), DomainError);
    }
}

TEST_CASE("forward pass") {
    const NetworkSpec lin{3, 0, 3, false};
    Approximator zero(lin);
    Eigen::VectorXd x(3);
    x << 1.0, -2.0, 0.5;
    CHECK(max_abs(zero.forward(x)) == 0.0);

    Approximator ident(lin);
    Eigen::Map<Eigen::MatrixXd>(ident.params().data(), 3, 3) = Eigen::MatrixXd::Identity(3, 3);
    CHECK(max_abs(ident.forward(x) - x) == 0.0);

    std::mt19937_64 rng(31);
    for (int i = 0; i < 20; ++i) {
        const auto spec = random_spec(rng);
        const auto net = Approximator::initialized(spec, rng);
        CHECK(net.params().size() == spec.param_count());
        const Eigen::MatrixXd xs = aac::test::random_table(rng, spec.input_dim, 5);
        const Eigen::MatrixXd batch = net.forward_batch(xs);
        for (int c = 0; c < 5; ++c) {
            const Eigen::VectorXd ref = reference_forward(spec, net.params(), xs.col(c));
            CHECK(max_abs(net.forward(xs.col(c)) - ref) < 1e-14);
            CHECK(max_abs(batch.col(c) - ref) < 1e-14);
        }
    }
    CHECK_THROWS_AS(zero.forward(Eigen::VectorXd::Zero(2)), ShapeError);
}

TEST_CASE("initialisation bounds") {
    std::mt19937_64 rng(2);
    const NetworkSpec spec{9, 16, 2, true};
    const auto net = Approximator::initialized(spec, rng);
    const Eigen::VectorXd& p = net.params();
    CHECK(p.head(9 * 16 + 16).cwiseAbs().maxCoeff() <= 1.0 / 3.0);
    CHECK(p.tail(2 * 16 + 2).cwiseAbs().maxCoeff() <= 0.25);
    std::mt19937_64 rng2(2);
    CHECK(max_abs(Approximator::initialized(spec, rng2).params() - p) == 0.0);
}

TEST_CASE("parameter gradient") {
    const NetworkSpec lin{3, 0, 2, true};
    std::mt19937_64 rng(5);
    const auto net = Approximator::initialized(lin, rng);
    Eigen::VectorXd x(3), cot(2);
    x << 1.0, 2.0, -1.0;
    cot << 0.5, -3.0;
    CHECK(max_abs(net.param_gradient(x, Eigen::VectorXd::Zero(2))) == 0.0);
    const Eigen::VectorXd g = net.param_gradient(x, cot);
    const Eigen::MatrixXd outer = cot * x.transpose();
    CHECK(max_abs(Eigen::Map<const Eigen::MatrixXd>(g.data(), 2, 3) - outer) < 1e-15);
    CHECK(max_abs(g.tail(2) - cot) < 1e-15);

    SUBCASE("finite differences on random networks") {
        for (int i = 0; i < 20; ++i) {
            const auto spec = random_spec(rng);
            auto n = Approximator::initialized(spec, rng);
            const Eigen::MatrixXd xs = aac::test::random_table(rng, spec.input_dim, 3);
            const Eigen::MatrixXd cs = aac::test::random_table(rng, spec.output_dim, 3);
            const Eigen::VectorXd analytic = n.param_gradient_batch(xs, cs);
            Eigen::VectorXd fd(analytic.size());
            const double h = 1e-6;
            for (Eigen::Index k = 0; k < fd.size(); ++k) {
                const double keep = n.params()(k);
                n.params()(k) = keep + h;
                const double up = n.forward_batch(xs).cwiseProduct(cs).sum();
                n.params()(k) = keep - h;
                const double down = n.forward_batch(xs).cwiseProduct(cs).sum();
                n.params()(k) = keep;
                fd(k) = (up - down) / (2 * h);
            }
            CHECK((analytic - fd).norm() <= 1e-6 * std::max(1.0, analytic.norm()));

            Eigen::VectorXd per_sample = Eigen::VectorXd::Zero(analytic.size());
            for (int c = 0; c < 3; ++c) per_sample += n.param_gradient(xs.col(c), cs.col(c));
            CHECK(max_abs(per_sample - analytic) < 1e-12);
            const auto cache = n.forward_cached(xs);
            CHECK(max_abs(n.param_gradient_cached(xs, cache, cs) - analytic) == 0.0);
        }
    }
}

TEST_CASE("SGD and Polyak updates") {
    const NetworkSpec spec{1, 0, 2, false};
    Approximator a(spec), b(spec);
    a.params() << 0.0, 2.0;
    b.params() << 2.0, 0.0;

    Approximator t = a;
    polyak_update(t, b, 0.5);
    CHECK(t.params()(0) == 1.0);
    CHECK(t.params()(1) == 1.0);

    t = a;
    polyak_update(t, b, 0.0);
    CHECK(max_abs(t.params() - a.params()) == 0.0);
    polyak_update(t, b, 1.0);
    CHECK(max_abs(t.params() - b.params()) == 0.0);
    CHECK_THROWS_AS(polyak_update(t, b, 1.5), DomainError);
    CHECK_THROWS_AS(polyak_update(t, Approximator(NetworkSpec{2, 0, 2, false}), 0.5), ShapeError);

    Eigen::VectorXd g(2);
    g << 1.0, -1.0;
    sgd_step(a, g, 0.25);
    CHECK(a.params()(0) == 0.25);
    CHECK(a.params()(1) == 1.75);
}

TEST_CASE("snapshots") {
    std::mt19937_64 rng(8);
    const NetworkSpec spec{4, 8, 3, true};
    const auto net = Approximator::initialized(spec, rng);
    std::stringstream ss;
    write_snapshot(ss, net);
    CHECK(ss.str().substr(0, 8) == "AACSNAP1");
    CHECK(ss.str().size() == 24 + 8 * static_cast<std::size_t>(spec.param_count()));
    const auto back = read_snapshot(ss, spec);
    CHECK(max_abs(back.params() - net.params()) == 0.0);

    std::stringstream wrong(ss.str());
    CHECK_THROWS_AS(read_snapshot(wrong, NetworkSpec{4, 8, 2, true}), ConfigError);
    std::stringstream truncated(ss.str().substr(0, 40));
    CHECK_THROWS_AS(read_snapshot(truncated, spec), ConfigError);
    std::stringstream junk("not a snapshot at all, definitely");
    CHECK_THROWS_AS(read_snapshot(junk, spec), ConfigError);
    CHECK(spec.hash() != NetworkSpec({4, 8, 3, false}).hash());
}
