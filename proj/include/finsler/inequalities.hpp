#pragma once

#include <functional>
#include <vector>

#include "finsler/curvature.hpp"
#include "finsler/eikonal.hpp"
#include "finsler/geodesy.hpp"
#include "finsler/grid.hpp"
#include "finsler/heatflow.hpp"
#include "finsler/report.hpp"

namespace finsler {

/// Non-increasing weight profile xi on [0, infinity) with xi = 0 past 1 and
/// the step condition xi(t + min(1-t, 1/2)/2) >= alpha xi(t) on (0, 1).
struct WeightProfile {
    std::function<double(double)> xi;
    double alpha = 1.0;

    static WeightProfile indicator();
    /// 1 on [0, delta], linear down to 0 at 1 (the cutoff used in the
    /// log-lemma); alpha computed from the profile.
    static WeightProfile linear_taper(double delta);

    /// Numerically validates monotonicity and the step condition.
    void validate() const;
};

/// Parabolic cylinder B_{delta R}(x0) x (s - delta R^2, s).
struct ParabolicCylinder {
    Point2 x0;
    double R = 1.0;
    double s = 1.0;
    double delta = 1.0;

    double t_lo() const { return s - delta * R * R; }
    double t_hi() const { return s; }
};

/// Deterministic test-function dictionary: tensor spline bumps at three
/// scales, coordinate monomials up to degree two, and seeded random smooth
/// fields.
std::vector<ScalarField> test_dictionary(const Grid2D& grid, const BallSpec& ball, uint64_t seed);

/// Optimal p = 2 Poincare constant on the ball (reciprocal of the smallest
/// nonzero generalized eigenvalue of the symmetrized weighted Rayleigh
/// quotient); for p != 2, the best constant over the test dictionary improved
/// by deterministic pattern search.
double poincare_constant(const MetricModel& m, const MeasureModel& mu, const BallMask& ball,
                         double p, uint64_t seed = 0);

/// Internal result carrying the discrete eigenfunction alongside the constant.
struct PoincareSolve {
    double constant = 0.0;
    double eigenvalue = 0.0;
    ScalarField eigenfunction;
    int iterations = 0;
};
PoincareSolve poincare_eigensolve(const MetricModel& m, const MeasureModel& mu,
                                  const BallMask& ball);

InequalityReport weighted_poincare_check(const MetricModel& m, const MeasureModel& mu,
                                         const DistanceField& df, Point2 x0, double R,
                                         const WeightProfile& profile, double p,
                                         const CurvatureBounds& bounds, uint64_t seed = 0);

InequalityReport sobolev_check(const MetricModel& m, const MeasureModel& mu,
                               const DistanceField& df, Point2 x0, double R, double nu,
                               const CurvatureBounds& bounds, uint64_t seed = 0);

struct MeanValueOptions {
    double nu = 4.0;
    double residual_tol = 0.05;
    bool gate = true;  // require the declared sub/super side to hold first
    std::vector<double> scale_fractions{1.0, 1.0 / std::sqrt(2.0), 0.5};
};

InequalityReport mean_value_check(const MetricModel& m, const MeasureModel& mu,
                                  const SpaceTimeField& u, const DistanceField& df,
                                  const ParabolicCylinder& cyl, double p, double cyl_delta,
                                  double cyl_delta_prime, const ScalarField& f, ParabolicSide side,
                                  const CurvatureBounds& bounds, double lambda,
                                  const MeanValueOptions& opt = {});

InequalityReport gradient_estimate_check(const MetricModel& m, const MeasureModel& mu,
                                         const SpaceTimeField& u, const DistanceField& df,
                                         const ParabolicCylinder& cyl,
                                         const CurvatureBounds& bounds,
                                         const MeanValueOptions& opt = {});

InequalityReport log_levelset_check(const MetricModel& m, const MeasureModel& mu,
                                    const SpaceTimeField& u, const DistanceField& df,
                                    const ParabolicCylinder& cyl, double cyl_delta, double tau,
                                    const CurvatureBounds& bounds);

/// Abstract nested family on a weighted atom set, for the iteration lemma of
/// the Harnack proof chain.
struct MeasuredFamily {
    std::vector<double> sigmas;                 // in (0, 1], ascending, last = 1
    std::vector<std::vector<uint8_t>> member;   // per sigma: atom membership
    std::vector<double> weight;                 // atom measures
};

struct IterationLemmaResult {
    bool alpha_hypothesis = false;
    bool tail_hypothesis = false;
    bool hypothesis_fail = false;
    std::vector<std::string> failed;   // which hypothesis failed and where
    double conclusion_constant = 0.0;  // C0 from direct computation
    double worst_alpha_ratio = 0.0;
};

IterationLemmaResult iteration_lemma_check(const MeasuredFamily& family,
                                           const std::vector<double>& g, double alpha0,
                                           double gamma, double C);

struct HarnackOptions {
    double nu = 4.0;
    double residual_tol = 0.05;
    bool gate = true;
    double stability_tol = 0.10;
    std::vector<double> scale_fractions{1.0, 1.0 / std::sqrt(2.0), 0.5};
};

InequalityReport harnack_check(const MetricModel& m, const MeasureModel& mu,
                               const SpaceTimeField& u, const DistanceField& df,
                               const ParabolicCylinder& cyl, double eps, double tau, double delta,
                               const CurvatureBounds& bounds, const HarnackOptions& opt = {});

/// sup/inf of u over the Harnack subcylinders; shared by the checker and the
/// quadrature oracles in the tests.
struct HarnackWindows {
    double sup_minus = 0.0;
    double inf_plus = 0.0;
};
HarnackWindows harnack_windows(const SpaceTimeField& u, const DistanceField& df,
                               const ParabolicCylinder& cyl, double eps, double tau, double delta);

}  // namespace finsler
