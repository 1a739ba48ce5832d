#include "finsler/eikonal.hpp"

#include <algorithm>
#include <cmath>

#include "finsler/errors.hpp"

namespace finsler {

namespace {

constexpr double kFar = 1e10;

/// Per-node artificial viscosity: |dF*/dxi| <= 1 / min_dir F(x, u), which is
/// 1/lambda(x) for the Riemannian kinds and 1/(1 - |b|) for Randers.
double viscosity_bound(const MetricModel& m, Point2 x) {
    if (m.kind == MetricKind::Randers) return 1.0 / (1.0 - norm(m.drift));
    return 1.0 / m.lambda(x);
}

}  // namespace

DistanceField distance_field(const MetricModel& m, Point2 x0, const Grid2D& grid,
                             SweepDirection dir, const EikonalOptions& opt) {
    DistanceField df;
    df.base = x0;
    df.direction = dir;
    df.grid = grid;
    df.d.assign(grid.size(), kFar);

    auto [si, sj] = grid.nearest(x0);
    const double h = grid.h;
    const bool fwd = dir == SweepDirection::Forward;

    // F* at the (possibly reversed) covector; closed form, hot loop.
    auto ham = [&](Point2 x, double px, double py) {
        return fwd ? dual_metric_fast(m, x, {px, py}) : dual_metric_fast(m, x, {-px, -py});
    };
    // Local Minkowski distance used for the frozen seed disk.
    auto seed_dist = [&](Point2 z) {
        Vec2 w = fwd ? z - x0 : x0 - z;
        return eval_metric(m, x0, w);
    };

    std::vector<uint8_t> frozen(grid.size(), 0);
    const double seed_r = opt.seed_radius_cells * h;
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i) {
            Point2 p = grid.node(i, j);
            if (norm(p - grid.node(si, sj)) <= seed_r + 1e-12) {
                df.d[grid.idx(i, j)] = seed_dist(p);
                frozen[grid.idx(i, j)] = 1;
            }
        }

    std::vector<double> sigma(grid.size());
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i) sigma[grid.idx(i, j)] = viscosity_bound(m, grid.node(i, j));

    auto sweep_node = [&](int i, int j) -> double {
        const size_t id = grid.idx(i, j);
        if (frozen[id]) return 0.0;
        const double de = df.d[grid.idx(std::min(i + 1, grid.nx - 1), j)];
        const double dw = df.d[grid.idx(std::max(i - 1, 0), j)];
        const double dn = df.d[grid.idx(i, std::min(j + 1, grid.ny - 1))];
        const double ds = df.d[grid.idx(i, std::max(j - 1, 0))];
        if (de >= kFar && dw >= kFar && dn >= kFar && ds >= kFar) return 0.0;
        const double sg = sigma[id];
        const double px = (de - dw) / (2.0 * h);
        const double py = (dn - ds) / (2.0 * h);
        const double rhs = 1.0 - ham(grid.node(i, j), px, py) +
                           sg * (de + dw) / (2.0 * h) + sg * (dn + ds) / (2.0 * h);
        const double cand = rhs / (2.0 * sg / h);
        const double old = df.d[id];
        if (cand < old) {
            df.d[id] = cand;
            return old >= kFar ? kFar : old - cand;
        }
        return 0.0;
    };

    // Monotone one-sided extrapolation keeps the rim from blocking sweeps.
    auto fix_boundary = [&]() {
        auto relax = [&](size_t id, double v) {
            if (!frozen[id] && v < df.d[id]) df.d[id] = v;
        };
        for (int i = 0; i < grid.nx; ++i) {
            relax(grid.idx(i, 0), std::max(2.0 * df.d[grid.idx(i, 1)] - df.d[grid.idx(i, 2)],
                                           df.d[grid.idx(i, 2)]));
            relax(grid.idx(i, grid.ny - 1),
                  std::max(2.0 * df.d[grid.idx(i, grid.ny - 2)] - df.d[grid.idx(i, grid.ny - 3)],
                           df.d[grid.idx(i, grid.ny - 3)]));
        }
        for (int j = 0; j < grid.ny; ++j) {
            relax(grid.idx(0, j), std::max(2.0 * df.d[grid.idx(1, j)] - df.d[grid.idx(2, j)],
                                           df.d[grid.idx(2, j)]));
            relax(grid.idx(grid.nx - 1, j),
                  std::max(2.0 * df.d[grid.idx(grid.nx - 2, j)] - df.d[grid.idx(grid.nx - 3, j)],
                           df.d[grid.idx(grid.nx - 3, j)]));
        }
    };

    for (int cycle = 0; cycle < opt.max_cycles; ++cycle) {
        double max_update = 0.0;
        for (int order = 0; order < 8; ++order) {
            const bool iup = order & 1, jup = order & 2, jmajor = order & 4;
            if (jmajor) {
                for (int j = jup ? 0 : grid.ny - 1; jup ? j < grid.ny : j >= 0; j += jup ? 1 : -1)
                    for (int i = iup ? 0 : grid.nx - 1; iup ? i < grid.nx : i >= 0;
                         i += iup ? 1 : -1)
                        max_update = std::max(max_update, sweep_node(i, j));
            } else {
                for (int i = iup ? 0 : grid.nx - 1; iup ? i < grid.nx : i >= 0; i += iup ? 1 : -1)
                    for (int j = jup ? 0 : grid.ny - 1; jup ? j < grid.ny : j >= 0;
                         j += jup ? 1 : -1)
                        max_update = std::max(max_update, sweep_node(i, j));
            }
            fix_boundary();
        }
        df.sweep_cycles = cycle + 1;
        df.last_update = max_update;
        if (max_update < opt.tolerance) return df;
    }
    throw NoConvergenceError("distance_field: sweeping stalled at update " +
                             std::to_string(df.last_update));
}

double eikonal_residual_median(const MetricModel& m, const DistanceField& df, double r_max) {
    const Grid2D& g = df.grid;
    ScalarField dist = df.as_field();
    CovecField dd = differential(dist);
    std::vector<double> res;
    auto [si, sj] = g.nearest(df.base);
    const double seed_r = 4.0 * g.h;
    for (int j = 1; j < g.ny - 1; ++j)
        for (int i = 1; i < g.nx - 1; ++i) {
            if (df.at(i, j) >= r_max) continue;
            if (norm(g.node(i, j) - g.node(si, sj)) <= seed_r) continue;
            Covec2 p = dd.at(i, j);
            double f = df.direction == SweepDirection::Forward
                           ? dual_metric_fast(m, g.node(i, j), p)
                           : dual_metric_fast(m, g.node(i, j), -p);
            res.push_back(std::abs(f - 1.0));
        }
    if (res.empty()) return 0.0;
    std::nth_element(res.begin(), res.begin() + res.size() / 2, res.end());
    return res[res.size() / 2];
}

}  // namespace finsler
