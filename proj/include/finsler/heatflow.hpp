#pragma once

#include <functional>
#include <string>
#include <vector>

#include "finsler/grid.hpp"
#include "finsler/measure.hpp"
#include "finsler/metric.hpp"

namespace finsler {

/// du raised through the inverse Legendre transform per node; nodes whose
/// differential is below threshold * field scale get the zero vector.
VecField gradient_field(const MetricModel& m, const ScalarField& u, double threshold = 1e-9);

/// Finsler Laplacian div_m(grad u) in conservative divergence form: face
/// fluxes e^Phi (Legendre^{-1} du)^i differenced per cell, divided by e^Phi.
/// Interior nodes only; the rim stays zero.
ScalarField finsler_laplacian(const MetricModel& m, const MeasureModel& mu, const ScalarField& u);

struct BoundaryCondition {
    enum class Type { Dirichlet, Periodic };
    Type type = Type::Dirichlet;
    std::function<double(Point2, double)> value;  // Dirichlet data g(x, t)

    static BoundaryCondition dirichlet(std::function<double(Point2, double)> g) {
        return {Type::Dirichlet, std::move(g)};
    }
    static BoundaryCondition dirichlet_const(double c) {
        return {Type::Dirichlet, [c](Point2, double) { return c; }};
    }
    static BoundaryCondition periodic() { return {Type::Periodic, nullptr}; }
};

struct HeatOptions {
    int fixed_point_max = 5;
    double fixed_point_tol = 1e-10;
    int snapshot_stride = 1;
    bool enforce_positivity = true;
};

struct HeatRunLog {
    std::vector<int> fp_iterations;     // per time step
    std::vector<double> fp_updates;     // final fixed-point update per step
    std::vector<double> mass;           // integral u dm per step (incl. t = 0)
    std::vector<double> energy;         // integral F*^2(du) dm per snapshot
    double min_value = 0.0;
    int steps = 0;
};

struct HeatResult {
    SpaceTimeField field;
    HeatRunLog log;
};

/// Semi-implicit heat flow: per step the dual tensor g*(x, du) is frozen at
/// the current iterate and the linear weighted-Laplacian system is solved
/// implicitly; at most fixed_point_max re-linearizations per step.
HeatResult heat_solve(const MetricModel& m, const MeasureModel& mu, const ScalarField& u0,
                      double T, double dt, const BoundaryCondition& bc, const HeatOptions& opt = {});

enum class ParabolicSide { Sub, Super };

/// Weak-form residual of (Delta - d_t) u >= -fu (Sub) or <= fu (Super)
/// against a family of nonnegative tent test functions.
struct ResidualReport {
    ParabolicSide side = ParabolicSide::Sub;
    double worst = 0.0;   // most violating normalized pairing
    size_t tents = 0;
    size_t intervals = 0;

    /// Sub passes when worst >= -tol; Super when worst <= tol.
    bool pass(double tol) const {
        return side == ParabolicSide::Sub ? worst >= -tol : worst <= tol;
    }
};

ResidualReport parabolic_residual(const MetricModel& m, const MeasureModel& mu,
                                  const SpaceTimeField& u, const ScalarField& f,
                                  ParabolicSide side);

/// Discrete check of the pointwise Bochner-Weitzenboeck identity
///   Delta^{grad u}[F^2(grad u)/2] - d(Delta u)(grad u)
///       = Ric_inf(grad u) + |Hess u|^2_{HS(grad u)}
/// over nodes of the region where du is not degenerate.
struct BochnerReport {
    double max_residual = 0.0;
    double mean_residual = 0.0;
    size_t nodes = 0;
};

BochnerReport bochner_check(const MetricModel& m, const MeasureModel& mu, const ScalarField& u,
                            const BallSpec& region, double du_threshold = 1e-7);

/// Weighted n-point discrete energy integral F*^2(du) dm.
double dirichlet_energy(const MetricModel& m, const MeasureModel& mu, const ScalarField& u);

}  // namespace finsler
