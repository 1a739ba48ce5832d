#pragma once

#include "finsler/grid.hpp"
#include "finsler/metric.hpp"

namespace finsler {

enum class SweepDirection { Forward, Backward };

/// Finsler distance field d(x0, .) (Forward) or d(., x0) (Backward) on a grid,
/// from fast sweeping on the anisotropic eikonal equation F*(x, dd) = 1.
struct DistanceField {
    Point2 base;
    SweepDirection direction = SweepDirection::Forward;
    Grid2D grid;
    std::vector<double> d;
    int sweep_cycles = 0;
    double last_update = 0.0;

    double at(int i, int j) const { return d[grid.idx(i, j)]; }
    double interp(Point2 p) const {
        ScalarField f;
        f.grid = grid;
        f.v = d;  // cheap copy is fine at desk scale; hot paths use at()
        return f.interp(p);
    }
    ScalarField as_field() const {
        ScalarField f(grid);
        f.v = d;
        return f;
    }
};

struct EikonalOptions {
    double tolerance = 1e-8;
    int max_cycles = 4000;
    /// Nodes within this many grid cells of the base point are seeded with
    /// the local Minkowski distance and kept frozen (rarefaction fan fix).
    double seed_radius_cells = 3.0;
};

/// Lax-Friedrichs fast sweeping (8 orderings per cycle); Backward solves with
/// the reverse metric F(x, -y), i.e. Hamiltonian F*(x, -dd).
DistanceField distance_field(const MetricModel& m, Point2 x0, const Grid2D& grid,
                             SweepDirection dir = SweepDirection::Forward,
                             const EikonalOptions& opt = {});

/// Median of |F*(x, dd) - 1| over nodes with d < r_max (excludes the seed
/// disk and the grid rim); the sweeping consistency measure.
double eikonal_residual_median(const MetricModel& m, const DistanceField& df, double r_max);

}  // namespace finsler
