#include "treeball/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace treeball::geometry {

namespace {

void require_same_dim(const Vec& x, const Vec& y) {
    if (x.size() != y.size())
        throw std::invalid_argument("geometry: dimension mismatch");
}

// Squared-distance threshold below which two points count as coincident for
// gradient purposes.
constexpr double kCoincidentSq = 1e-18;

}  // namespace

Curvature::Curvature(double c_) : c(c_) {
    if (!(c_ > 0.0) || !std::isfinite(c_))
        throw std::domain_error("Curvature: c must be positive and finite");
}

double dot(const Vec& x, const Vec& y) {
    require_same_dim(x, y);
    double s = 0.0;
    for (size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

double squared_norm(const Vec& x) { return dot(x, x); }

double norm(const Vec& x) { return std::sqrt(squared_norm(x)); }

bool in_ball(const Vec& x, Curvature c) {
    return c.c * squared_norm(x) < 1.0 - kBallEps;
}

void require_in_ball(const Vec& x, Curvature c) {
    if (!in_ball(x, c))
        throw std::domain_error("geometry: point violates the ball invariant");
}

double geodesic_distance(const Vec& x, const Vec& y, Curvature c) {
    require_same_dim(x, y);
    require_in_ball(x, c);
    require_in_ball(y, c);
    double u = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        u += d * d;
    }
    const double alpha = 1.0 - c.c * squared_norm(x);
    const double beta = 1.0 - c.c * squared_norm(y);
    const double t = 2.0 * c.c * u / (alpha * beta);
    // acosh(1 + t) evaluated as asinh(sqrt(t(t+2))), accurate for small t.
    return std::asinh(std::sqrt(t * (t + 2.0))) / std::sqrt(c.c);
}

double distance_to_origin(const Vec& x, Curvature c) {
    require_in_ball(x, c);
    const double sc = std::sqrt(c.c);
    return 2.0 / sc * std::atanh(sc * norm(x));
}

Vec exp_map_origin(const Vec& v, Curvature c) {
    const double t = norm(v);
    const double s = std::sqrt(c.c) * t;
    if (s < 1e-12) return v;  // tanh(s)/s -> 1
    const double scale = std::tanh(s) / s;
    Vec z(v.size());
    for (size_t i = 0; i < v.size(); ++i) z[i] = scale * v[i];
    return z;
}

Vec log_map_origin(const Vec& x, Curvature c) {
    require_in_ball(x, c);
    const double r = norm(x);
    const double s = std::sqrt(c.c) * r;
    if (s < 1e-12) return x;
    const double scale = std::atanh(s) / s;
    Vec v(x.size());
    for (size_t i = 0; i < x.size(); ++i) v[i] = scale * x[i];
    return v;
}

Vec project_to_ball(const Vec& x, Curvature c) {
    const double sq = c.c * squared_norm(x);
    if (sq < 1.0 - kBallEps) return x;
    const double r = std::sqrt(sq / c.c);
    const double target = (1.0 - kBallEps) / std::sqrt(c.c);
    Vec z(x.size());
    for (size_t i = 0; i < x.size(); ++i) z[i] = x[i] * (target / r);
    return z;
}

Vec grad_distance_to_origin(const Vec& x, Curvature c) {
    require_in_ball(x, c);
    const double r = norm(x);
    if (r == 0.0)
        throw std::domain_error("grad_distance_to_origin: undefined at the origin");
    const double denom = r * (1.0 - c.c * r * r);
    Vec g(x.size());
    for (size_t i = 0; i < x.size(); ++i) g[i] = 2.0 * x[i] / denom;
    return g;
}

double grad_distance_to_origin_wrt_c(const Vec& x, Curvature c) {
    require_in_ball(x, c);
    const double r = norm(x);
    const double sc = std::sqrt(c.c);
    return -std::atanh(sc * r) / (c.c * sc) + r / (c.c * (1.0 - c.c * r * r));
}

GeodesicGrad grad_geodesic_distance(const Vec& x, const Vec& y, Curvature c) {
    require_same_dim(x, y);
    require_in_ball(x, c);
    require_in_ball(y, c);
    double u = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        u += d * d;
    }
    if (u < kCoincidentSq)
        throw std::domain_error("grad_geodesic_distance: points coincide");
    const double nx = squared_norm(x), ny = squared_norm(y);
    const double alpha = 1.0 - c.c * nx;
    const double beta = 1.0 - c.c * ny;
    const double t = 2.0 * c.c * u / (alpha * beta);
    const double denom = std::sqrt(t * (t + 2.0));  // sqrt(A^2 - 1), A = 1 + t
    const double sc = std::sqrt(c.c);
    const double k = 1.0 / (sc * denom);

    GeodesicGrad g;
    g.dx.resize(x.size());
    g.dy.resize(y.size());
    const double pair_coef = 4.0 * c.c / (alpha * beta);
    const double self_x = 4.0 * c.c * c.c * u / (alpha * alpha * beta);
    const double self_y = 4.0 * c.c * c.c * u / (alpha * beta * beta);
    for (size_t i = 0; i < x.size(); ++i) {
        g.dx[i] = k * (pair_coef * (x[i] - y[i]) + self_x * x[i]);
        g.dy[i] = k * (pair_coef * (y[i] - x[i]) + self_y * y[i]);
    }
    const double dist = std::asinh(denom) / sc;
    const double dt_dc = 2.0 * u / (alpha * beta) +
                         2.0 * c.c * u * (nx / alpha + ny / beta) / (alpha * beta);
    g.dc = -dist / (2.0 * c.c) + k * dt_dc;
    return g;
}

ExpMapGrad exp_map_origin_backward(const Vec& v, Curvature c, const Vec& dz) {
    require_same_dim(v, dz);
    ExpMapGrad out;
    out.dv.resize(v.size());
    const double t = norm(v);
    const double a = std::sqrt(c.c);
    const double s = a * t;
    const double vdz = dot(v, dz);
    if (s < 1e-6) {
        // Series around s = 0: g = 1 - s^2/3, g'(t)/t = -2c/3, dc factor -t^2/3.
        const double g = 1.0 - s * s / 3.0;
        for (size_t i = 0; i < v.size(); ++i)
            out.dv[i] = g * dz[i] - (2.0 * c.c / 3.0) * vdz * v[i];
        out.dc = -t * t / 3.0 * vdz;
        return out;
    }
    const double th = std::tanh(s);
    const double sech2 = 1.0 - th * th;
    const double g = th / s;
    const double gprime = (s * sech2 - th) / (a * t * t);  // dg/dt
    for (size_t i = 0; i < v.size(); ++i)
        out.dv[i] = g * dz[i] + gprime / t * vdz * v[i];
    out.dc = vdz * (s * sech2 - th) / (2.0 * a * a * a * t);
    return out;
}

Vec project_to_ball_backward(const Vec& x, Curvature c, const Vec& dz) {
    require_same_dim(x, dz);
    const double sq = c.c * squared_norm(x);
    if (sq < 1.0 - kBallEps) return dz;
    // z = rho * x/|x| with rho fixed; Jacobian is rho/|x| (I - unit unit^T).
    const double r = std::sqrt(sq / c.c);
    const double rho = (1.0 - kBallEps) / std::sqrt(c.c);
    const double xd = dot(x, dz) / (r * r);
    Vec dx(x.size());
    for (size_t i = 0; i < x.size(); ++i)
        dx[i] = rho / r * (dz[i] - xd * x[i]);
    return dx;
}

double project_to_ball_backward_dc(const Vec& x, Curvature c, const Vec& dz) {
    const double sq = c.c * squared_norm(x);
    if (sq < 1.0 - kBallEps) return 0.0;
    // z = rho(c) * unit(x), rho = (1 - eps)/sqrt(c): drho/dc = -rho/(2c).
    const double r = std::sqrt(sq / c.c);
    const double rho = (1.0 - kBallEps) / std::sqrt(c.c);
    return -rho / (2.0 * c.c) * dot(x, dz) / r;
}

}  // namespace treeball::geometry
