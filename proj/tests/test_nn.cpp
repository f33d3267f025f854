#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "rheston/nn.hpp"

using namespace rheston;
using namespace rheston::nn;

namespace {

Matrix random_batch(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    std::normal_distribution<double> d;
    Matrix m(rows, cols);
    for (double& x : m.storage()) x = d(rng);
    return m;
}

// Scalar test loss sum_{r,c} coef(r,c) * out(r,c)^2 / 2 and its output gradient.
struct QuadLoss {
    Matrix coef;
    double value(const Matrix& out) const {
        double s = 0.0;
        for (std::size_t i = 0; i < out.storage().size(); ++i) s += 0.5 * coef.storage()[i] * out.storage()[i] * out.storage()[i];
        return s;
    }
    Matrix grad(const Matrix& out) const {
        Matrix g(out.rows(), out.cols());
        for (std::size_t i = 0; i < out.storage().size(); ++i) g.storage()[i] = coef.storage()[i] * out.storage()[i];
        return g;
    }
};

void set_identity(DenseNet& net, std::size_t layer) {
    const LayerLayout& L = net.layers()[layer];
    for (std::size_t o = 0; o < L.out; ++o) {
        for (std::size_t i = 0; i < L.in; ++i) net.params()[L.weights + o * L.in + i] = o == i ? 1.0 : 0.0;
        net.params()[L.bias + o] = 0.0;
    }
}

}  // namespace

TEST_CASE("layout") {
    const DenseNet net({4, 5, 5, 5, 2});
    CHECK(net.layers().size() == 4);
    std::size_t expected = 0;
    for (std::size_t l = 0; l < 4; ++l) {
        const LayerLayout& L = net.layers()[l];
        CHECK(L.in == net.dims()[l]);
        CHECK(L.out == net.dims()[l + 1]);
        CHECK(L.normalised == (l < 3));
        expected += L.in * L.out + L.out + (L.normalised ? 2 * L.out : 0);
    }
    CHECK(net.params().size() == expected);
    for (std::size_t l = 0; l < 3; ++l) {
        for (const double s : net.running_std(l)) CHECK(s > 0.0);
    }
    CHECK_THROWS_AS(DenseNet({3}), std::invalid_argument);
    CHECK_THROWS_AS(DenseNet({3, 0, 1}), std::invalid_argument);
}

TEST_CASE("initialisation") {
    DenseNet net({6, 5, 5, 1});
    std::mt19937_64 rng(1);
    net.initialise(rng);
    for (const LayerLayout& L : net.layers()) {
        const double limit = std::sqrt(6.0 / static_cast<double>(L.in + L.out));
        for (std::size_t i = 0; i < L.in * L.out; ++i) CHECK(std::abs(net.params()[L.weights + i]) <= limit);
        for (std::size_t o = 0; o < L.out; ++o) {
            CHECK(net.params()[L.bias + o] == 0.0);
            if (L.normalised) {
                CHECK(net.params()[L.gamma + o] == 1.0);
                CHECK(net.params()[L.beta + o] == 0.0);
            }
        }
    }
}

TEST_CASE("forward examples") {
    std::mt19937_64 rng(2);
    SUBCASE("neutralised batch norm leaves ReLU of the input") {
        DenseNet net({3, 3, 3});
        net.initialise(rng);
        set_identity(net, 0);
        set_identity(net, 1);
        const Matrix x = random_batch(32, 3, rng);
        const LayerLayout& L = net.layers()[0];
        for (std::size_t c = 0; c < 3; ++c) {
            double m = 0.0, v = 0.0;
            for (std::size_t r = 0; r < 32; ++r) m += x(r, c);
            m /= 32.0;
            for (std::size_t r = 0; r < 32; ++r) v += (x(r, c) - m) * (x(r, c) - m);
            net.params()[L.gamma + c] = std::sqrt(v / 32.0 + kBatchNormEps);
            net.params()[L.beta + c] = m;
        }
        const Matrix y = forward(net, x, true);
        for (std::size_t r = 0; r < 32; ++r) {
            for (std::size_t c = 0; c < 3; ++c) CHECK(y(r, c) == doctest::Approx(std::max(x(r, c), 0.0)).epsilon(1e-13));
        }
    }
    SUBCASE("constant input column is mapped to zero") {
        DenseNet net({1, 1, 1});
        net.initialise(rng);
        set_identity(net, 0);
        set_identity(net, 1);
        const Matrix x(16, 1, 3.7);
        const Matrix y = forward(net, x, true);
        for (const double v : y.storage()) CHECK(std::abs(v) <= 1e-12);
    }
    SUBCASE("batch statistics of hidden units") {
        DenseNet net({4, 5, 5, 5, 1});
        net.initialise(rng);
        for (const LayerLayout& L : net.layers()) {
            if (!L.normalised) continue;
            for (std::size_t o = 0; o < L.out; ++o) {
                net.params()[L.gamma + o] = 0.5 + 0.1 * static_cast<double>(o);
                net.params()[L.beta + o] = -0.2 + 0.05 * static_cast<double>(o);
            }
        }
        ForwardCache cache;
        forward(net, random_batch(64, 4, rng), true, &cache);
        for (std::size_t l = 0; l < 3; ++l) {
            const LayerLayout& L = net.layers()[l];
            for (std::size_t o = 0; o < L.out; ++o) {
                const double* y = cache.pre_relu[l].data() + o * 64;
                double m = 0.0, v = 0.0;
                for (std::size_t r = 0; r < 64; ++r) m += y[r];
                m /= 64.0;
                for (std::size_t r = 0; r < 64; ++r) v += (y[r] - m) * (y[r] - m);
                CHECK(std::abs(m - net.params()[L.beta + o]) <= 1e-6);
                CHECK(std::abs(std::sqrt(v / 64.0) - net.params()[L.gamma + o]) <= 1e-3);
            }
        }
    }
    SUBCASE("shape errors") {
        DenseNet net({2, 3, 1});
        CHECK_THROWS_AS(forward(net, Matrix(4, 3), false), std::invalid_argument);
        CHECK_THROWS_AS(forward(net, Matrix(1, 2), true), std::invalid_argument);
    }
}

TEST_CASE("inference uses running statistics and leaves the net unchanged") {
    std::mt19937_64 rng(3);
    DenseNet net({2, 4, 1});
    net.initialise(rng);
    const Matrix x = random_batch(10, 2, rng);
    const DenseNet before = net;
    const Matrix a = forward(net, x, false);
    CHECK(net == before);
    const Matrix b = predict(net, x);
    CHECK(a == b);
    forward(net, x, true);
    CHECK_FALSE(net == before);
}

TEST_CASE("gradients against central differences") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 5; ++trial) {
        DenseNet net({3, 5, 5, 5, 2});
        net.initialise(rng);
        // Move gamma/beta/bias away from their initial values.
        std::uniform_real_distribution<double> u(-0.5, 0.5);
        for (double& p : net.params()) p += u(rng);
        const Matrix x = random_batch(20, 3, rng);
        QuadLoss loss{random_batch(20, 2, rng)};
        ForwardCache cache;
        DenseNet work = net;
        const Matrix out = forward(work, x, true, &cache);
        const std::vector<double> g = backward(net, cache, loss.grad(out));
        REQUIRE(g.size() == net.params().size());
        std::uniform_int_distribution<std::size_t> pick(0, g.size() - 1);
        double worst = 0.0;
        for (int k = 0; k < 100; ++k) {
            const std::size_t i = pick(rng);
            const double h = 1e-5;
            DenseNet plus = net, minus = net;
            plus.params()[i] += h;
            minus.params()[i] -= h;
            const double fd = (loss.value(forward(plus, x, true)) - loss.value(forward(minus, x, true))) / (2 * h);
            const double err = std::abs(fd - g[i]) / std::max(1.0, std::abs(fd));
            worst = std::max(worst, err);
        }
        CHECK(worst <= 1e-5);
    }
}

TEST_CASE("gradient of a linear net is the normal-equation residual") {
    std::mt19937_64 rng(5);
    DenseNet net({3, 1});
    net.initialise(rng);
    const Matrix x = random_batch(8, 3, rng);
    const Matrix target = random_batch(8, 1, rng);
    ForwardCache cache;
    const Matrix out = forward(net, x, true, &cache);
    Matrix grad(8, 1);
    for (std::size_t r = 0; r < 8; ++r) grad(r, 0) = out(r, 0) - target(r, 0);
    const auto g = backward(net, cache, grad);
    for (std::size_t c = 0; c < 3; ++c) {
        double expected = 0.0;
        for (std::size_t r = 0; r < 8; ++r) expected += x(r, c) * grad(r, 0);
        CHECK(g[c] == doctest::Approx(expected).epsilon(1e-13));
    }
    double bias = 0.0;
    for (std::size_t r = 0; r < 8; ++r) bias += grad(r, 0);
    CHECK(g[3] == doctest::Approx(bias).epsilon(1e-13));
}

TEST_CASE("zero output gradient") {
    std::mt19937_64 rng(6);
    DenseNet net({3, 5, 5, 1});
    net.initialise(rng);
    ForwardCache cache;
    forward(net, random_batch(12, 3, rng), true, &cache);
    for (const double g : backward(net, cache, Matrix(12, 1))) CHECK(g == 0.0);
}

TEST_CASE("optimiser steps") {
    SUBCASE("plain gradient step") {
        OptimState opt = make_optimiser(3, 1.0, 0);
        CHECK(opt.mode() == OptimMode::sgd);
        std::vector<double> p{1.0, 2.0, 3.0};
        step(opt, p, {0.5, -1.0, 0.0});
        CHECK(p == std::vector<double>{0.5, 3.0, 3.0});
    }
    SUBCASE("first Adam step has the size of the learning rate") {
        OptimState opt = make_optimiser(2, 0.01, 10);
        CHECK(opt.mode() == OptimMode::adam);
        std::vector<double> p{0.0, 0.0};
        step(opt, p, {3.0, -1e-3});
        CHECK(p[0] == doctest::Approx(-0.01).epsilon(1e-6));
        CHECK(p[1] == doctest::Approx(0.01).epsilon(1e-4));
    }
    SUBCASE("hand-over after the switch iteration") {
        OptimState opt = make_optimiser(1, 0.1, 2);
        std::vector<double> p{0.0};
        step(opt, p, {1.0});
        step(opt, p, {1.0});
        CHECK(opt.mode() == OptimMode::sgd);
        const double before = p[0];
        step(opt, p, {2.0});
        CHECK(p[0] == doctest::Approx(before - 0.2).epsilon(1e-15));
    }
    SUBCASE("quadratic bowl") {
        const std::vector<double> centre{1.5, -2.0, 0.25, 4.0};
        const std::vector<double> curv{1.0, 3.0, 0.5, 2.0};
        OptimState opt = make_optimiser(4, 0.05, 1400);
        std::vector<double> p(4, 0.0);
        for (int it = 0; it < 2000; ++it) {
            std::vector<double> g(4);
            for (std::size_t i = 0; i < 4; ++i) g[i] = curv[i] * (p[i] - centre[i]);
            step(opt, p, g);
        }
        for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(p[i] - centre[i]) <= 1e-6);
    }
    SUBCASE("shape mismatch") {
        OptimState opt = make_optimiser(2, 0.1, 0);
        std::vector<double> p{0.0, 0.0};
        CHECK_THROWS_AS(step(opt, p, {1.0}), std::invalid_argument);
    }
}

TEST_CASE("training is deterministic") {
    auto run = [] {
        std::mt19937_64 rng(7);
        DenseNet net({3, 5, 5, 1});
        net.initialise(rng);
        OptimState opt = make_optimiser(net.params().size(), 0.01, 5);
        QuadLoss loss{Matrix(16, 1, 1.0)};
        for (int it = 0; it < 10; ++it) {
            const Matrix x = random_batch(16, 3, rng);
            ForwardCache cache;
            const Matrix out = forward(net, x, true, &cache);
            step(opt, net.params(), backward(net, cache, loss.grad(out)));
        }
        return net;
    };
    CHECK(run() == run());
}

TEST_CASE("running averages converge") {
    std::mt19937_64 rng(8);
    DenseNet net({2, 3, 1});
    net.initialise(rng);
    std::normal_distribution<double> d;
    const Matrix x = [&] {
        Matrix m(256, 2);
        for (std::size_t r = 0; r < 256; ++r) {
            m(r, 0) = 2.0 + 0.5 * d(rng);
            m(r, 1) = -1.0 + 3.0 * d(rng);
        }
        return m;
    }();
    ForwardCache cache;
    for (int it = 0; it < 1000; ++it) forward(net, x, true, &cache);
    for (std::size_t o = 0; o < 3; ++o) {
        // Recover the batch statistics of the affine output from the cache.
        const double s = 1.0 / cache.inv_std[0][o];
        const LayerLayout& L = net.layers()[0];
        double m = net.params()[L.bias + o];
        for (std::size_t i = 0; i < 2; ++i) {
            double col = 0.0;
            for (std::size_t r = 0; r < 256; ++r) col += x(r, i);
            m += net.params()[L.weights + o * 2 + i] * col / 256.0;
        }
        CHECK(net.running_mean(0)[o] == doctest::Approx(m).epsilon(0.02));
        CHECK(net.running_std(0)[o] == doctest::Approx(s).epsilon(0.02));
    }
}

TEST_CASE("checkpoint round trip") {
    std::mt19937_64 rng(9);
    DenseNet net({12, 5, 5, 5, 2});
    net.initialise(rng);
    forward(net, random_batch(30, 12, rng), true);
    std::stringstream ss;
    save(ss, net);
    const DenseNet back = load(ss);
    CHECK(back == net);
    const Matrix x = random_batch(5, 12, rng);
    CHECK(predict(back, x) == predict(net, x));
    std::stringstream bad("XXXX");
    CHECK_THROWS(load(bad));
    std::stringstream full;
    save(full, net);
    std::stringstream cut(full.str().substr(0, full.str().size() - 8));
    CHECK_THROWS(load(cut));
}
