#pragma once

#include "finsler/geom.hpp"
#include "finsler/measure.hpp"
#include "finsler/metric.hpp"

namespace finsler {

/// Sampled curvature bounds over a region. k_lower is the minimum of
/// Ric_inf over unit directions (so Ric_inf >= k_lower F^2 on the samples);
/// delta is the maximum of |S|/F. Reported extrema, not certified bounds.
struct CurvatureBounds {
    double k_lower = 0.0;
    double delta = 0.0;
    BallSpec region;
    int samples = 0;

    /// K >= 0 with Ric_inf >= -K on the sample set.
    double K() const { return std::max(0.0, -k_lower); }
    /// The combination K + delta^2 entering every comparison bound.
    double k_plus_delta_sq() const { return K() + delta * delta; }
};

/// State of the geodesic flow.
struct GeodesicState {
    Point2 x;
    Vec2 v;
};

/// One RK4 step of the geodesic equation xdot' = -2 G(x, xdot).
GeodesicState geodesic_step(const MetricModel& m, GeodesicState s, double dt);

/// Geodesic spray coefficients G^i(x, y); the geodesic equation reads
/// xdot' = -2 G(x, xdot). Standard formula
///   G^i = g^{il} ( (F^2)_{x^k y^l} y^k - (F^2)_{x^l} ) / 4,
/// with x-derivatives by central differences.
Vec2 spray_coefficients(const MetricModel& m, Point2 x, Vec2 y);

/// Ricci curvature Ric(y): trace of the spray curvature
///   R^i_k = 2 dG^i/dx^k - y^j d2G^i/dx^j dy^k + 2 G^j d2G^i/dy^j dy^k
///           - dG^i/dy^j dG^j/dy^k,
/// nested central differences with one level of Richardson extrapolation.
double ricci(const MetricModel& m, Point2 x, Vec2 y);

/// Distortion tau = log( sqrt(det g(x,y)) / e^{Phi(x)} ).
double distortion(const MetricModel& m, const MeasureModel& mu, Point2 x, Vec2 y);

/// S-curvature: rate of change of the distortion along the geodesic with
/// initial data (x, y); 1-homogeneous in y.
double s_curvature(const MetricModel& m, const MeasureModel& mu, Point2 x, Vec2 y);

/// Sdot: second derivative of the distortion along the geodesic; 2-homogeneous.
double s_curvature_rate(const MetricModel& m, const MeasureModel& mu, Point2 x, Vec2 y);

/// Ric_inf(y) = Ric(y) + Sdot(x, y).
double weighted_ricci_inf(const MetricModel& m, const MeasureModel& mu, Point2 x, Vec2 y);

/// Ric_N(y) = Ric(y) + Sdot(x, y) - S(x, y)^2 / (N - 2); N must differ from 2.
double weighted_ricci_n(const MetricModel& m, const MeasureModel& mu, Point2 x, Vec2 y, double N);

CurvatureBounds curvature_bounds(const MetricModel& m, const MeasureModel& mu,
                                 const BallSpec& region, int samples);

}  // namespace finsler
