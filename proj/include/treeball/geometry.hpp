#pragma once

#include <vector>

#include "treeball/common.hpp"

namespace treeball::geometry {

// Safety margin keeping atanh and the distance cross-ratio finite in 64-bit
// arithmetic: every point is kept at squared norm c*|x|^2 <= (1 - kBallEps)^2.
inline constexpr double kBallEps = 1e-5;

struct Curvature {
    double c;
    explicit Curvature(double c_);
};

bool in_ball(const Vec& x, Curvature c);
void require_in_ball(const Vec& x, Curvature c);

double norm(const Vec& x);
double squared_norm(const Vec& x);
double dot(const Vec& x, const Vec& y);

// Geodesic distance on the Poincare ball of curvature -c.
double geodesic_distance(const Vec& x, const Vec& y, Curvature c);

// Closed form of geodesic_distance(0, x): (2/sqrt(c)) * atanh(sqrt(c)*|x|).
double distance_to_origin(const Vec& x, Curvature c);

// Exponential map at the origin; total after the |v| -> 0 limit.
Vec exp_map_origin(const Vec& v, Curvature c);

// Inverse of exp_map_origin on the open ball.
Vec log_map_origin(const Vec& x, Curvature c);

// Rescales x to norm (1 - kBallEps)/sqrt(c) when outside the safe region;
// interior points pass through unchanged.
Vec project_to_ball(const Vec& x, Curvature c);

// Analytic gradients. Each matches central finite differences away from the
// boundary and coincidence singularities; conditioning problems throw.
Vec grad_distance_to_origin(const Vec& x, Curvature c);

struct GeodesicGrad {
    Vec dx;
    Vec dy;
    double dc;  // derivative w.r.t. the curvature magnitude c
};
GeodesicGrad grad_geodesic_distance(const Vec& x, const Vec& y, Curvature c);

// Derivative of distance_to_origin w.r.t. c at fixed coordinates.
double grad_distance_to_origin_wrt_c(const Vec& x, Curvature c);

// Backward pass of exp_map_origin: given dL/dz for z = exp_map_origin(v, c),
// accumulates dL/dv and dL/dc.
struct ExpMapGrad {
    Vec dv;
    double dc;
};
ExpMapGrad exp_map_origin_backward(const Vec& v, Curvature c, const Vec& dz);

// Backward pass of project_to_ball (exact Jacobian of the rescale branch).
Vec project_to_ball_backward(const Vec& x, Curvature c, const Vec& dz);

// Curvature sensitivity of the clamp radius: the d(project)/dc contribution
// through the target norm (zero on the pass-through branch).
double project_to_ball_backward_dc(const Vec& x, Curvature c, const Vec& dz);

}  // namespace treeball::geometry
