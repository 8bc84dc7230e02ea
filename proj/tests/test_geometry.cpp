#include <doctest.h>

#include <cmath>
#include <functional>

#include "treeball/geometry.hpp"

using namespace treeball;
using namespace treeball::geometry;

namespace {

Vec random_point(Rng& rng, int dim, double max_norm_sq_times_c, double c) {
    // Direction uniform-ish, radius uniform up to the requested bound.
    Vec v(dim);
    for (double& x : v) x = rng.uniform_sym(1.0);
    const double n = norm(v);
    const double target = std::sqrt(max_norm_sq_times_c / c) * rng.uniform();
    for (double& x : v) x = x / n * target;
    return v;
}

double fd_directional(const std::function<double(const Vec&)>& f, const Vec& x,
                      const Vec& dir, double h) {
    Vec xp = x, xm = x;
    for (size_t i = 0; i < x.size(); ++i) {
        xp[i] += h * dir[i];
        xm[i] -= h * dir[i];
    }
    return (f(xp) - f(xm)) / (2.0 * h);
}

}  // namespace

TEST_CASE("curvature validation") {
    CHECK_THROWS_AS(Curvature(0.0), std::domain_error);
    CHECK_THROWS_AS(Curvature(-1.0), std::domain_error);
    CHECK(Curvature(2.5).c == 2.5);
}

TEST_CASE("distance identities at the origin") {
    Curvature c(1.0);
    Vec zero(4, 0.0);
    CHECK(geodesic_distance(zero, zero, c) == 0.0);
    Vec x = {0.1, -0.2, 0.05, 0.0};
    CHECK(geodesic_distance(x, x, c) == 0.0);
    CHECK(distance_to_origin(zero, c) == 0.0);
}

TEST_CASE("exp map closed form: |v| = 0.5 lands at tanh(0.5) and distance 1") {
    Curvature c(1.0);
    Vec v = {0.5, 0.0, 0.0};
    Vec z = exp_map_origin(v, c);
    CHECK(norm(z) == doctest::Approx(std::tanh(0.5)).epsilon(1e-12));
    // d(0, exp(v)) = 2|v| for c = 1.
    Vec zero(3, 0.0);
    CHECK(geodesic_distance(zero, z, c) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(distance_to_origin(z, c) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("distance_to_origin closed form at |x| = tanh(0.5)") {
    Curvature c(1.0);
    Vec x = {0.4621171572600098, 0.0};
    CHECK(distance_to_origin(x, c) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("exp map fixed point and direction preservation") {
    Curvature c(2.0);
    Vec zero(5, 0.0);
    CHECK(norm(exp_map_origin(zero, c)) == 0.0);
    Rng rng(7);
    for (int i = 0; i < 50; ++i) {
        Vec v(5);
        for (double& x : v) x = rng.uniform_sym(2.0);
        Vec z = exp_map_origin(v, c);
        // z is parallel to v: cross terms vanish.
        const double cosangle = dot(v, z) / (norm(v) * norm(z));
        CHECK(cosangle == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(norm(z) < 1.0 / std::sqrt(c.c));
    }
}

TEST_CASE("log map norm at tanh(1)") {
    Curvature c(1.0);
    Vec x = {std::tanh(1.0), 0.0, 0.0};
    CHECK(norm(log_map_origin(x, c)) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("exp/log round trip over curvatures and dims") {
    for (double cv : {0.5, 1.0, 2.0}) {
        Curvature c(cv);
        for (int dim : {2, 8, 128}) {
            Rng rng(fnv1a64("roundtrip") + dim + static_cast<int>(cv * 10));
            for (int i = 0; i < 120; ++i) {
                Vec x = random_point(rng, dim, (1.0 - 10 * kBallEps), cv);
                Vec v = log_map_origin(x, c);
                Vec back = exp_map_origin(v, c);
                double err = 0.0;
                for (size_t k = 0; k < x.size(); ++k)
                    err = std::max(err, std::abs(back[k] - x[k]));
                CHECK(err < 1e-9);
            }
        }
    }
}

TEST_CASE("project_to_ball clamps norm and keeps interior points") {
    Curvature c(1.0);
    Vec inside = {0.3, 0.4};
    CHECK(project_to_ball(inside, c) == inside);
    Vec outside = {2.0, 0.0};
    Vec clamped = project_to_ball(outside, c);
    CHECK(norm(clamped) == doctest::Approx(1.0 - kBallEps).epsilon(1e-12));
    CHECK(clamped[1] == 0.0);
    Vec zero(2, 0.0);
    CHECK(project_to_ball(zero, c) == zero);
    CHECK(in_ball(clamped, c));
}

TEST_CASE("ball invariant violations raise domain errors") {
    Curvature c(1.0);
    Vec outside = {0.999999, 0.0};
    Vec ok = {0.1, 0.1};
    CHECK_THROWS_AS(geodesic_distance(outside, ok, c), std::domain_error);
    CHECK_THROWS_AS(geodesic_distance(ok, outside, c), std::domain_error);
    CHECK_THROWS_AS(distance_to_origin(outside, c), std::domain_error);
    CHECK_THROWS_AS(log_map_origin(outside, c), std::domain_error);
}

TEST_CASE("metric axioms on random triples") {
    for (double cv : {0.5, 1.0, 2.0}) {
        Curvature c(cv);
        for (int dim : {2, 8, 128}) {
            Rng rng(fnv1a64("axioms") * dim + static_cast<int>(cv * 2));
            for (int i = 0; i < 60; ++i) {
                Vec a = random_point(rng, dim, 0.9, cv);
                Vec b = random_point(rng, dim, 0.9, cv);
                Vec d = random_point(rng, dim, 0.9, cv);
                const double ab = geodesic_distance(a, b, c);
                const double ba = geodesic_distance(b, a, c);
                const double ad = geodesic_distance(a, d, c);
                const double db = geodesic_distance(d, b, c);
                CHECK(ab >= 0.0);
                CHECK(std::abs(ab - ba) < 1e-10);
                CHECK(ab <= ad + db + 1e-8);
            }
        }
    }
}

TEST_CASE("closed-form origin distance equals the general formula") {
    for (double cv : {0.5, 1.0, 2.0}) {
        Curvature c(cv);
        Rng rng(fnv1a64("origin-agreement") + static_cast<int>(cv * 4));
        Vec zero(8, 0.0);
        for (int i = 0; i < 1000; ++i) {
            Vec x = random_point(rng, 8, 0.95, cv);
            CHECK(std::abs(geodesic_distance(zero, x, c) - distance_to_origin(x, c)) <
                  1e-10);
        }
    }
}

TEST_CASE("distance_to_origin strictly increases with the norm") {
    Curvature c(1.3);
    Rng rng(11);
    Vec radii;
    for (int i = 0; i < 200; ++i) radii.push_back(rng.uniform() * 0.8);
    std::sort(radii.begin(), radii.end());
    double prev = -1.0;
    for (double r : radii) {
        Vec x = {r, 0.0};
        const double d = distance_to_origin(x, c);
        CHECK(d > prev);
        prev = d;
    }
}

TEST_CASE("origin-distance gradient: norm 2 near the origin, FD agreement elsewhere") {
    Curvature c(1.0);
    Vec tiny = {1e-9, 0.0, 0.0};
    CHECK(norm(grad_distance_to_origin(tiny, c)) == doctest::Approx(2.0).epsilon(1e-9));
    Vec zero(3, 0.0);
    CHECK_THROWS_AS(grad_distance_to_origin(zero, c), std::domain_error);

    for (double cv : {0.5, 1.0, 2.0}) {
        Curvature cc(cv);
        Rng rng(fnv1a64("grad-d0") + static_cast<int>(cv * 8));
        for (int i = 0; i < 200; ++i) {
            Vec x = random_point(rng, 6, 0.8, cv);
            if (norm(x) < 1e-3) continue;
            const Vec g = grad_distance_to_origin(x, cc);
            for (int axis = 0; axis < 6; ++axis) {
                Vec dir(6, 0.0);
                dir[axis] = 1.0;
                const double fd = fd_directional(
                    [&](const Vec& p) { return distance_to_origin(p, cc); }, x, dir, 1e-5);
                const double denom = std::max(std::abs(fd), 1e-6);
                CHECK(std::abs(g[axis] - fd) / denom < 1e-4);
            }
        }
    }
}

TEST_CASE("pairwise distance gradient matches finite differences") {
    for (double cv : {0.5, 1.0, 2.0}) {
        Curvature c(cv);
        Rng rng(fnv1a64("grad-pair") + static_cast<int>(cv * 16));
        int checked = 0;
        while (checked < 170) {
            Vec x = random_point(rng, 5, 0.8, cv);
            Vec y = random_point(rng, 5, 0.8, cv);
            Vec diff(5);
            for (int i = 0; i < 5; ++i) diff[i] = x[i] - y[i];
            if (norm(diff) < 1e-2) continue;
            ++checked;
            const GeodesicGrad g = grad_geodesic_distance(x, y, c);
            for (int axis = 0; axis < 5; ++axis) {
                Vec dir(5, 0.0);
                dir[axis] = 1.0;
                const double fdx = fd_directional(
                    [&](const Vec& p) { return geodesic_distance(p, y, c); }, x, dir, 1e-5);
                const double fdy = fd_directional(
                    [&](const Vec& p) { return geodesic_distance(x, p, c); }, y, dir, 1e-5);
                CHECK(std::abs(g.dx[axis] - fdx) / std::max(std::abs(fdx), 1e-6) < 1e-4);
                CHECK(std::abs(g.dy[axis] - fdy) / std::max(std::abs(fdy), 1e-6) < 1e-4);
            }
            // Curvature derivative against central differences on c.
            const double h = 1e-6 * cv;
            const double fdc = (geodesic_distance(x, y, Curvature(cv + h)) -
                                geodesic_distance(x, y, Curvature(cv - h))) /
                               (2.0 * h);
            CHECK(std::abs(g.dc - fdc) / std::max(std::abs(fdc), 1e-6) < 1e-4);
        }
    }
}

TEST_CASE("gradient symmetry under argument swap") {
    Curvature c(1.0);
    Rng rng(99);
    for (int i = 0; i < 50; ++i) {
        Vec x = random_point(rng, 4, 0.8, 1.0);
        Vec y = random_point(rng, 4, 0.8, 1.0);
        Vec diff(4);
        for (int k = 0; k < 4; ++k) diff[k] = x[k] - y[k];
        if (norm(diff) < 1e-3) continue;
        const GeodesicGrad g1 = grad_geodesic_distance(x, y, c);
        const GeodesicGrad g2 = grad_geodesic_distance(y, x, c);
        for (int k = 0; k < 4; ++k) {
            CHECK(g1.dx[k] == doctest::Approx(g2.dy[k]).epsilon(1e-12));
            CHECK(g1.dy[k] == doctest::Approx(g2.dx[k]).epsilon(1e-12));
        }
    }
}

TEST_CASE("coincident points are rejected by the pairwise gradient") {
    Curvature c(1.0);
    Vec x = {0.2, 0.3};
    CHECK_THROWS_AS(grad_geodesic_distance(x, x, c), std::domain_error);
}

TEST_CASE("exp map backward matches finite differences (incl. curvature)") {
    for (double cv : {0.5, 1.0, 2.0}) {
        Rng rng(fnv1a64("exp-backward") + static_cast<int>(cv * 32));
        for (int i = 0; i < 100; ++i) {
            Vec v(4);
            for (double& x : v) x = rng.uniform_sym(1.5);
            Vec dz(4);
            for (double& x : dz) x = rng.uniform_sym(1.0);
            const ExpMapGrad g = exp_map_origin_backward(v, Curvature(cv), dz);
            for (int axis = 0; axis < 4; ++axis) {
                Vec dir(4, 0.0);
                dir[axis] = 1.0;
                const double fd = fd_directional(
                    [&](const Vec& p) {
                        const Vec z = exp_map_origin(p, Curvature(cv));
                        double s = 0.0;
                        for (int k = 0; k < 4; ++k) s += z[k] * dz[k];
                        return s;
                    },
                    v, dir, 1e-6);
                CHECK(std::abs(g.dv[axis] - fd) / std::max(std::abs(fd), 1e-5) < 1e-4);
            }
            const double h = 1e-6 * cv;
            const auto dotz = [&](double cc) {
                const Vec z = exp_map_origin(v, Curvature(cc));
                double s = 0.0;
                for (int k = 0; k < 4; ++k) s += z[k] * dz[k];
                return s;
            };
            const double fdc = (dotz(cv + h) - dotz(cv - h)) / (2.0 * h);
            CHECK(std::abs(g.dc - fdc) / std::max(std::abs(fdc), 1e-5) < 1e-3);
        }
    }
}

TEST_CASE("projection backward: pass-through and clamp Jacobian") {
    Curvature c(1.0);
    Vec inside = {0.2, 0.1};
    Vec dz = {1.0, -0.5};
    CHECK(project_to_ball_backward(inside, c, dz) == dz);
    CHECK(project_to_ball_backward_dc(inside, c, dz) == 0.0);

    Vec outside = {1.5, 0.7};
    const Vec g = project_to_ball_backward(outside, c, dz);
    for (int axis = 0; axis < 2; ++axis) {
        Vec dir(2, 0.0);
        dir[axis] = 1.0;
        const double fd = fd_directional(
            [&](const Vec& p) {
                const Vec z = project_to_ball(p, c);
                return z[0] * dz[0] + z[1] * dz[1];
            },
            outside, dir, 1e-6);
        CHECK(std::abs(g[axis] - fd) / std::max(std::abs(fd), 1e-6) < 1e-4);
    }
    const double h = 1e-7;
    const auto dotz = [&](double cc) {
        const Vec z = project_to_ball(outside, Curvature(cc));
        return z[0] * dz[0] + z[1] * dz[1];
    };
    const double fdc = (dotz(1.0 + h) - dotz(1.0 - h)) / (2.0 * h);
    CHECK(project_to_ball_backward_dc(outside, c, dz) ==
          doctest::Approx(fdc).epsilon(1e-4));
}
