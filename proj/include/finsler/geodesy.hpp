#pragma once

#include <optional>
#include <string>
#include <vector>

#include "finsler/curvature.hpp"
#include "finsler/eikonal.hpp"
#include "finsler/grid.hpp"
#include "finsler/measure.hpp"

namespace finsler {

struct PathSample {
    double t = 0.0;
    Point2 x;
    Vec2 v;
};

struct GeodesicPath {
    std::vector<PathSample> samples;
    Point2 endpoint() const { return samples.back().x; }
    /// max |F(x,v) - F(x0,v0)| along the path; RK4 conservation check.
    double speed_drift(const MetricModel& m) const;
};

/// Integrates the geodesic from (x, v) for time T with RK4 step dt.
/// Throws GeodesicEscapeError if the path leaves the chart.
GeodesicPath geodesic_shoot(const MetricModel& m, Point2 x, Vec2 v, double T, double dt);

/// Node mask of the forward ball {d(x0, .) < R} with antialiased boundary
/// weights (linear interpolation of d across the level set).
struct BallMask {
    Grid2D grid;
    double R = 0.0;
    std::vector<double> weight;  // in [0, 1]
    bool clipped = false;        // ball touches the grid rim (reported, not fatal)

    double w(int i, int j) const { return weight[grid.idx(i, j)]; }
    /// Measure of the ball: sum of w * e^Phi * h^2.
    double volume(const MeasureModel& mu) const;
    /// Count of fully interior nodes.
    size_t node_count() const;
};

BallMask forward_ball(const DistanceField& df, double R);

/// Polar volume density sigma(x0, r, theta) with dm = sigma dr dtheta:
/// sigma = e^Phi |cross(gamma', J)| from pairs of nearby geodesic shoots.
struct PolarDensity {
    Point2 base;
    std::vector<double> r;
    std::vector<double> theta;
    std::vector<double> sigma;      // theta-major: sigma[it * r.size() + ir]
    std::vector<uint8_t> valid;     // 0 past the cut locus / conjugate point

    double at(size_t it, size_t ir) const { return sigma[it * r.size() + ir]; }
    bool ok(size_t it, size_t ir) const { return valid[it * r.size() + ir] != 0; }
};

struct PolarOptions {
    double integrate_dt = 1e-3;
    double dtheta = 1e-4;
    /// Optional distance field for the minimality test |d - r| <= cut_slack_cells * h.
    const DistanceField* minimality_field = nullptr;
    double cut_slack_cells = 3.0;
};

PolarDensity polar_density(const MetricModel& m, const MeasureModel& mu, Point2 x0,
                           const std::vector<double>& r_list, const std::vector<double>& theta_list,
                           const PolarOptions& opt = {});

/// Laplacian of the distance function by the divergence route:
/// div_m(Legendre^{-1}(dd)) with conservative face fluxes.
ScalarField laplacian_of_distance(const MetricModel& m, const MeasureModel& mu,
                                  const DistanceField& df);

/// One checked inequality with margins; margin >= -tol means no violation.
struct ComparisonReport {
    std::string name;
    double worst_margin = 0.0;    // min over samples of (bound - value)
    double worst_rel_margin = 0.0;
    size_t checked = 0;
    size_t violations = 0;        // margin < -tol count
    double tol = 0.0;
    bool pass = true;
    std::vector<std::pair<double, double>> profile;  // (r or ratio, margin)
};

/// Pointwise Laplacian comparison  Delta r <= n/r + r (K + delta^2)/3  along
/// sampled rays, plus the integrated form over [r1, r2]; also cross-checks the
/// polar route against the divergence route away from the center.
struct LaplacianComparisonResult {
    ComparisonReport pointwise;
    ComparisonReport integrated;
    double route_agreement = 0.0;  // median relative gap between the two routes
};

LaplacianComparisonResult check_laplacian_comparison(const MetricModel& m, const MeasureModel& mu,
                                                     Point2 x0, const DistanceField& df,
                                                     const CurvatureBounds& bounds, double r1,
                                                     double r2, double tol = 0.05);

/// Bishop-Gromov volume comparison: the sigma-ratio bound per ray and the
/// ball-volume ratio bound (exponent n + 1 = 3).
struct VolumeComparisonResult {
    ComparisonReport sigma_ratio;
    ComparisonReport ball_ratio;
    double ball_r1 = 0.0, ball_r2 = 0.0;
    double vol_r1 = 0.0, vol_r2 = 0.0;
    bool clipped = false;
};

VolumeComparisonResult check_volume_comparison(const MetricModel& m, const MeasureModel& mu,
                                               Point2 x0, const DistanceField& df,
                                               const CurvatureBounds& bounds, double r1, double r2,
                                               double tol = 0.05);

/// max over a dyadic radius grid of m(B_2r)/m(B_r), against the bound
/// 2^{n+1} e^{(K + delta^2) R^2 / 6}.
struct DoublingResult {
    double observed = 0.0;
    double bound = 0.0;
    bool clipped = false;
    std::vector<std::pair<double, double>> ratios;  // (r, ratio)
};

DoublingResult doubling_constant(const MetricModel& m, const MeasureModel& mu, Point2 x0,
                                 const DistanceField& df, const CurvatureBounds& bounds, double R);

void write_csv_distance(const DistanceField& df, const std::string& path);
void write_csv_polar(const PolarDensity& pd, const std::string& path);

}  // namespace finsler
