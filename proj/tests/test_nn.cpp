#include <doctest.h>

#include <cmath>

#include "treeball/nn.hpp"

using namespace treeball;
using namespace treeball::nn;

TEST_CASE("gelu values and identities") {
    CHECK(gelu(0.0) == 0.0);
    // gelu(x) -> x for large x (erf form).
    CHECK(std::abs(gelu(10.0) - 10.0) < 1e-6);
    // Odd-part identity: gelu(x) - gelu(-x) = x.
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        const double x = rng.uniform_sym(4.0);
        CHECK(gelu(x) - gelu(-x) == doctest::Approx(x).epsilon(1e-12));
    }
    // Gradient against finite differences.
    for (int i = 0; i < 100; ++i) {
        const double x = rng.uniform_sym(3.0);
        const double fd = (gelu(x + 1e-6) - gelu(x - 1e-6)) / 2e-6;
        CHECK(gelu_grad(x) == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("forward: zero params produce zero output, bias-only case") {
    MlpParams p(3, 4, 2);
    Vec x = {1.0, -2.0, 0.5};
    Vec y = mlp_forward(p, x);
    CHECK(y == Vec{0.0, 0.0});
    p.b2 = {0.7, -0.3};
    Vec zero = {0.0, 0.0, 0.0};
    CHECK(mlp_forward(p, zero) == Vec{0.7, -0.3});
}

TEST_CASE("forward determinism and shape checks") {
    Rng rng(5);
    MlpParams p(6, 8, 3);
    init_mlp(p, rng);
    Vec x(6);
    for (double& v : x) v = rng.uniform_sym(1.0);
    CHECK(mlp_forward(p, x) == mlp_forward(p, x));
    Vec bad(5, 0.0);
    CHECK_THROWS_AS(mlp_forward(p, bad), std::invalid_argument);
}

TEST_CASE("backward matches central finite differences") {
    Rng rng(17);
    for (int trial = 0; trial < 12; ++trial) {
        const int d_in = 2 + rng.uniform_int(4);
        const int d_h = 2 + rng.uniform_int(5);
        const int d_out = 1 + rng.uniform_int(3);
        MlpParams p(d_in, d_h, d_out);
        init_mlp(p, rng);
        Vec x(d_in), dy(d_out);
        for (double& v : x) v = rng.uniform_sym(1.5);
        for (double& v : dy) v = rng.uniform_sym(1.0);
        MlpCache cache;
        mlp_forward(p, x, &cache);
        const MlpGrads g = mlp_backward(p, cache, dy);

        const auto loss = [&](const MlpParams& q, const Vec& xin) {
            const Vec y = mlp_forward(q, xin);
            double s = 0.0;
            for (int i = 0; i < d_out; ++i) s += y[i] * dy[i];
            return s;
        };
        const double h = 1e-4;
        // Weight gradients (sample a few entries).
        for (int rep = 0; rep < 10; ++rep) {
            const int r = rng.uniform_int(d_h), c = rng.uniform_int(d_in);
            MlpParams q = p;
            q.w1.at(r, c) += h;
            const double up = loss(q, x);
            q.w1.at(r, c) -= 2 * h;
            const double dn = loss(q, x);
            const double fd = (up - dn) / (2 * h);
            CHECK(std::abs(g.dw1.at(r, c) - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
        }
        for (int rep = 0; rep < 10; ++rep) {
            const int r = rng.uniform_int(d_out), c = rng.uniform_int(d_h);
            MlpParams q = p;
            q.w2.at(r, c) += h;
            const double up = loss(q, x);
            q.w2.at(r, c) -= 2 * h;
            const double dn = loss(q, x);
            const double fd = (up - dn) / (2 * h);
            CHECK(std::abs(g.dw2.at(r, c) - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
        }
        // Input gradient.
        for (int axis = 0; axis < d_in; ++axis) {
            Vec xp = x, xm = x;
            xp[axis] += h;
            xm[axis] -= h;
            const double fd = (loss(p, xp) - loss(p, xm)) / (2 * h);
            CHECK(std::abs(g.dx[axis] - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
        }
    }
}

TEST_CASE("zero upstream gradient yields zero parameter gradients") {
    Rng rng(23);
    MlpParams p(4, 5, 2);
    init_mlp(p, rng);
    Vec x = {0.3, -0.4, 1.0, 0.2};
    MlpCache cache;
    mlp_forward(p, x, &cache);
    const MlpGrads g = mlp_backward(p, cache, Vec{0.0, 0.0});
    for (double v : g.dw1.a) CHECK(v == 0.0);
    for (double v : g.dw2.a) CHECK(v == 0.0);
    for (double v : g.db1) CHECK(v == 0.0);
    for (double v : g.db2) CHECK(v == 0.0);
}

TEST_CASE("adam: first bias-corrected step, no-op cases, decoupled decay") {
    // Single scalar parameter, constant gradient 1, lr 0.1: step is -0.1.
    double param = 0.0;
    Adam opt(AdamConfig{0.1, 0.9, 0.999, 1e-8, 0.0});
    opt.register_block(std::span<double>(&param, 1), true);
    const double g = 1.0;
    opt.step({std::span<const double>(&g, 1)});
    CHECK(param == doctest::Approx(-0.1).epsilon(1e-7));

    // Zero gradient, zero decay: untouched.
    double p2 = 0.5;
    Adam opt2(AdamConfig{0.1, 0.9, 0.999, 1e-8, 0.0});
    opt2.register_block(std::span<double>(&p2, 1), true);
    const double z = 0.0;
    opt2.step({std::span<const double>(&z, 1)});
    CHECK(p2 == doctest::Approx(0.5).epsilon(1e-12));

    // Weight decay 0.01 decays a zero-gradient weight multiplicatively.
    double p3 = 2.0;
    Adam opt3(AdamConfig{0.1, 0.9, 0.999, 1e-8, 0.01});
    opt3.register_block(std::span<double>(&p3, 1), true);
    opt3.step({std::span<const double>(&z, 1)});
    CHECK(p3 == doctest::Approx(2.0 - 0.1 * 0.01 * 2.0).epsilon(1e-12));
}

TEST_CASE("seeded init is reproducible") {
    Rng a(42), b(42);
    MlpParams p1(5, 7, 3), p2(5, 7, 3);
    init_mlp(p1, a);
    init_mlp(p2, b);
    CHECK(p1.w1.a == p2.w1.a);
    CHECK(p1.w2.a == p2.w2.a);
}
