#include "finsler/heatflow.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>

#include "finsler/curvature.hpp"
#include "finsler/errors.hpp"

namespace finsler {

namespace {

struct FaceData {
    // x-faces: between (i,j) and (i+1,j); y-faces: between (i,j) and (i,j+1).
    // Periodic grids wrap the last column/row onto the first.
    std::vector<Mat2> ax, ay;       // dual tensors per face
    std::vector<double> wx, wy;     // e^Phi at face centers
    int nfx = 0, nfy = 0, nx = 0, ny = 0;
    bool periodic = false;

    size_t fx(int i, int j) const { return static_cast<size_t>(j) * nfx + i; }
    size_t fy(int i, int j) const { return static_cast<size_t>(j) * nx + i; }
};

/// Differential of u at face centers: exact difference along the face,
/// averaged central difference across it.
struct FaceDifferential {
    std::vector<Covec2> x, y;
};

int wrap(int i, int n) { return i < 0 ? i + n : (i >= n ? i - n : i); }

FaceDifferential face_differential(const Grid2D& g, const std::vector<double>& u, bool periodic) {
    FaceDifferential fd;
    const int nfx = periodic ? g.nx : g.nx - 1;
    const int nfy = periodic ? g.ny : g.ny - 1;
    fd.x.assign(static_cast<size_t>(nfx) * g.ny, {0, 0});
    fd.y.assign(static_cast<size_t>(g.nx) * nfy, {0, 0});
    auto at = [&](int i, int j) { return u[g.idx(wrap(i, g.nx), wrap(j, g.ny))]; };
    const double invh = 1.0 / g.h;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < nfx; ++i) {
            double along = (at(i + 1, j) - at(i, j)) * invh;
            double trans;
            if (periodic || (j > 0 && j < g.ny - 1))
                trans = (at(i, j + 1) + at(i + 1, j + 1) - at(i, j - 1) - at(i + 1, j - 1)) *
                        (0.25 * invh);
            else if (j == 0)
                trans = (at(i, 1) + at(i + 1, 1) - at(i, 0) - at(i + 1, 0)) * (0.5 * invh);
            else
                trans = (at(i, j) + at(i + 1, j) - at(i, j - 1) - at(i + 1, j - 1)) * (0.5 * invh);
            fd.x[static_cast<size_t>(j) * nfx + i] = {along, trans};
        }
    for (int j = 0; j < nfy; ++j)
        for (int i = 0; i < g.nx; ++i) {
            double along = (at(i, j + 1) - at(i, j)) * invh;
            double trans;
            if (periodic || (i > 0 && i < g.nx - 1))
                trans = (at(i + 1, j) + at(i + 1, j + 1) - at(i - 1, j) - at(i - 1, j + 1)) *
                        (0.25 * invh);
            else if (i == 0)
                trans = (at(1, j) + at(1, j + 1) - at(0, j) - at(0, j + 1)) * (0.5 * invh);
            else
                trans = (at(i, j) + at(i, j + 1) - at(i - 1, j) - at(i - 1, j + 1)) * (0.5 * invh);
            fd.y[static_cast<size_t>(j) * g.nx + i] = {trans, along};
        }
    return fd;
}

FaceData build_faces(const MetricModel& m, const MeasureModel& mu, const Grid2D& g, bool periodic,
                     const FaceDifferential* du) {
    FaceData f;
    f.nx = g.nx;
    f.ny = g.ny;
    f.periodic = periodic;
    f.nfx = periodic ? g.nx : g.nx - 1;
    f.nfy = periodic ? g.ny : g.ny - 1;
    f.ax.resize(static_cast<size_t>(f.nfx) * g.ny);
    f.wx.resize(f.ax.size());
    f.ay.resize(static_cast<size_t>(g.nx) * f.nfy);
    f.wy.resize(f.ay.size());
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < f.nfx; ++i) {
            Point2 xf{g.origin.x + (i + 0.5) * g.h, g.origin.y + j * g.h};
            size_t id = f.fx(i, j);
            f.wx[id] = mu.density(xf);
            f.ax[id] = dual_tensor(m, xf, du ? du->x[id] : Covec2{1.0, 0.0});
        }
    for (int j = 0; j < f.nfy; ++j)
        for (int i = 0; i < g.nx; ++i) {
            Point2 xf{g.origin.x + i * g.h, g.origin.y + (j + 0.5) * g.h};
            size_t id = f.fy(i, j);
            f.wy[id] = mu.density(xf);
            f.ay[id] = dual_tensor(m, xf, du ? du->y[id] : Covec2{1.0, 0.0});
        }
    return f;
}

}  // namespace

VecField gradient_field(const MetricModel& m, const ScalarField& u, double threshold) {
    CovecField du = differential(u);
    double scale = 0.0;
    for (const auto& c : du.v) scale = std::max(scale, norm(c));
    VecField out(u.grid);
    const double floor_norm = threshold * std::max(scale, 1e-300);
    for (int j = 0; j < u.grid.ny; ++j)
        for (int i = 0; i < u.grid.nx; ++i) {
            Covec2 c = du.at(i, j);
            out.at(i, j) =
                norm(c) <= floor_norm ? Vec2{0.0, 0.0} : legendre_inverse_fast(m, u.grid.node(i, j), c);
        }
    return out;
}

ScalarField finsler_laplacian(const MetricModel& m, const MeasureModel& mu, const ScalarField& u) {
    const Grid2D& g = u.grid;
    FaceDifferential fd = face_differential(g, u.v, false);
    ScalarField lap(g, 0.0);
    const int nfx = g.nx - 1;
    auto flux_x = [&](int i, int j) {
        Point2 xf{g.origin.x + (i + 0.5) * g.h, g.origin.y + j * g.h};
        Vec2 grad = legendre_inverse_fast(m, xf, fd.x[static_cast<size_t>(j) * nfx + i]);
        return mu.density(xf) * grad.x;
    };
    auto flux_y = [&](int i, int j) {
        Point2 xf{g.origin.x + i * g.h, g.origin.y + (j + 0.5) * g.h};
        Vec2 grad = legendre_inverse_fast(m, xf, fd.y[static_cast<size_t>(j) * g.nx + i]);
        return mu.density(xf) * grad.y;
    };
    for (int j = 1; j < g.ny - 1; ++j)
        for (int i = 1; i < g.nx - 1; ++i) {
            double div = (flux_x(i, j) - flux_x(i - 1, j) + flux_y(i, j) - flux_y(i, j - 1)) / g.h;
            lap.at(i, j) = div / mu.density(g.node(i, j));
        }
    return lap;
}

double dirichlet_energy(const MetricModel& m, const MeasureModel& mu, const ScalarField& u) {
    CovecField du = differential(u);
    double e = 0.0;
    for (int j = 0; j < u.grid.ny; ++j)
        for (int i = 0; i < u.grid.nx; ++i) {
            Point2 p = u.grid.node(i, j);
            double f = dual_metric_fast(m, p, du.at(i, j));
            e += f * f * mu.density(p);
        }
    return e * u.grid.h * u.grid.h;
}

HeatResult heat_solve(const MetricModel& m, const MeasureModel& mu, const ScalarField& u0,
                      double T, double dt, const BoundaryCondition& bc, const HeatOptions& opt) {
    const Grid2D& g = u0.grid;
    const bool periodic = bc.type == BoundaryCondition::Type::Periodic;
    const size_t n = g.size();
    const int steps = static_cast<int>(std::llround(T / dt));
    if (steps < 1) throw InvalidArgumentError("heat_solve: T/dt < 1");

    std::vector<double> density(n);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) density[g.idx(i, j)] = mu.density(g.node(i, j));

    // Coefficients depend on du only for non-Riemannian metrics.
    const bool lagged = !m.riemannian();

    using SpMat = Eigen::SparseMatrix<double>;
    using Triplet = Eigen::Triplet<double>;
    Eigen::SparseLU<SpMat> lu;
    bool factored = false;

    auto assemble = [&](const FaceData& f) {
        std::vector<Triplet> trip;
        trip.reserve(n * 9);
        auto add = [&](size_t row, int i, int j, double val) {
            trip.emplace_back(static_cast<int>(row),
                              static_cast<int>(g.idx(wrap(i, g.nx), wrap(j, g.ny))), val);
        };
        for (int j = 0; j < g.ny; ++j) {
            for (int i = 0; i < g.nx; ++i) {
                const size_t row = g.idx(i, j);
                if (!periodic && g.on_boundary(i, j)) {
                    trip.emplace_back(static_cast<int>(row), static_cast<int>(row), 1.0);
                    continue;
                }
                add(row, i, j, 1.0);
                const double c = dt / (g.h * g.h * density[row]);
                // Four faces around the node; each contributes its tensor flux.
                struct FaceRef {
                    double w;
                    Mat2 a;
                    int oi, oj;   // node across the face
                    int axis;     // 0: x-face, 1: y-face
                    double sign;  // + outgoing on the positive side
                };
                const size_t fe = f.fx(i, j), fw = f.fx(wrap(i - 1, g.nx), j);
                const size_t fn = f.fy(i, j), fs = f.fy(i, wrap(j - 1, g.ny));
                FaceRef faces[4] = {
                    {f.wx[fe], f.ax[fe], i + 1, j, 0, 1.0},
                    {f.wx[fw], f.ax[fw], i - 1, j, 0, -1.0},
                    {f.wy[fn], f.ay[fn], i, j + 1, 1, 1.0},
                    {f.wy[fs], f.ay[fs], i, j - 1, 1, -1.0},
                };
                for (const auto& fc : faces) {
                    const double diag = fc.axis == 0 ? fc.a.a11 : fc.a.a22;
                    const double offd = 0.5 * (fc.a.a12 + fc.a.a21);
                    // Aligned part: w * a_nn * (u_across - u_here) / h.
                    add(row, fc.oi, fc.oj, -c * fc.w * diag);
                    add(row, i, j, c * fc.w * diag);
                    // Transverse part: w * a_nt * averaged cross difference
                    // over the two nodes sharing the face.
                    if (offd != 0.0) {
                        const double q = -c * fc.sign * fc.w * offd * 0.25;
                        if (fc.axis == 0) {
                            add(row, i, j + 1, q);
                            add(row, fc.oi, j + 1, q);
                            add(row, i, j - 1, -q);
                            add(row, fc.oi, j - 1, -q);
                        } else {
                            add(row, i + 1, j, q);
                            add(row, i + 1, fc.oj, q);
                            add(row, i - 1, j, -q);
                            add(row, i - 1, fc.oj, -q);
                        }
                    }
                }
            }
        }
        SpMat A(static_cast<int>(n), static_cast<int>(n));
        A.setFromTriplets(trip.begin(), trip.end());
        return A;
    };

    HeatResult result;
    result.field.grid = g;
    result.field.t0 = 0.0;
    result.field.dt = dt * opt.snapshot_stride;
    result.log.steps = steps;

    auto mass_of = [&](const std::vector<double>& u) {
        double s = 0.0;
        for (size_t k = 0; k < n; ++k) s += u[k] * density[k];
        return s * g.h * g.h;
    };

    std::vector<double> u = u0.v;
    result.field.frames.push_back(u);
    result.log.mass.push_back(mass_of(u));
    {
        ScalarField f0(g);
        f0.v = u;
        result.log.energy.push_back(dirichlet_energy(m, mu, f0));
    }

    FaceData faces = build_faces(m, mu, g, periodic, nullptr);
    if (!lagged) {
        lu.compute(assemble(faces));
        if (lu.info() != Eigen::Success) throw NoConvergenceError("heat_solve: factorization failed");
        factored = true;
    }

    Eigen::VectorXd rhs(static_cast<long>(n)), sol(static_cast<long>(n));
    double minval = 1e300;
    for (int step = 0; step < steps; ++step) {
        const double t_next = (step + 1) * dt;
        for (size_t k = 0; k < n; ++k) rhs[static_cast<long>(k)] = u[k];
        if (!periodic) {
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i < g.nx; ++i)
                    if (g.on_boundary(i, j))
                        rhs[static_cast<long>(g.idx(i, j))] = bc.value(g.node(i, j), t_next);
        }

        std::vector<double> iterate = u;
        int used = 0;
        double update = 0.0;
        double scale = 1e-300;
        for (double v : u) scale = std::max(scale, std::abs(v));
        for (int l = 0; l < std::max(1, opt.fixed_point_max); ++l) {
            ++used;
            if (lagged) {
                FaceDifferential fd = face_differential(g, iterate, periodic);
                faces = build_faces(m, mu, g, periodic, &fd);
                lu.compute(assemble(faces));
                if (lu.info() != Eigen::Success)
                    throw NoConvergenceError("heat_solve: factorization failed");
                factored = true;
            } else if (!factored) {
                lu.compute(assemble(faces));
                factored = true;
            }
            sol = lu.solve(rhs);
            if (lu.info() != Eigen::Success) throw NoConvergenceError("heat_solve: solve failed");
            update = 0.0;
            for (size_t k = 0; k < n; ++k)
                update = std::max(update, std::abs(sol[static_cast<long>(k)] - iterate[k]));
            for (size_t k = 0; k < n; ++k) iterate[k] = sol[static_cast<long>(k)];
            if (!lagged || update < opt.fixed_point_tol * scale) break;
        }
        u = iterate;
        result.log.fp_iterations.push_back(used);
        result.log.fp_updates.push_back(update);
        result.log.mass.push_back(mass_of(u));
        for (double v : u) minval = std::min(minval, v);
        if (opt.enforce_positivity && minval <= 0.0)
            throw StabilityFailureError("heat_solve: non-positive value at t = " +
                                        std::to_string(t_next));
        if ((step + 1) % opt.snapshot_stride == 0) {
            result.field.frames.push_back(u);
            ScalarField fu(g);
            fu.v = u;
            result.log.energy.push_back(dirichlet_energy(m, mu, fu));
        }
    }
    result.log.min_value = minval;
    return result;
}

ResidualReport parabolic_residual(const MetricModel& m, const MeasureModel& mu,
                                  const SpaceTimeField& u, const ScalarField& f,
                                  ParabolicSide side) {
    const Grid2D& g = u.grid;
    if (u.frames.size() < 2) throw InvalidArgumentError("parabolic_residual: need >= 2 frames");
    ResidualReport rep;
    rep.side = side;

    // Tent centers on every 4th interior node, two widths.
    struct Tent {
        int ci, cj, w;
    };
    std::vector<Tent> tents;
    for (int w : {3, 6})
        for (int j = w + 1; j < g.ny - w - 1; j += 4)
            for (int i = w + 1; i < g.nx - w - 1; i += 4) tents.push_back({i, j, w});
    rep.tents = tents.size();
    if (tents.empty()) throw InvalidArgumentError("parabolic_residual: grid too small for tents");

    std::vector<double> density(g.size());
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) density[g.idx(i, j)] = mu.density(g.node(i, j));

    double worst = side == ParabolicSide::Sub ? 1e300 : -1e300;
    const double h2 = g.h * g.h;
    ScalarField frame(g), lap(g);
    for (size_t k = 0; k + 1 < u.frames.size(); ++k) {
        frame.v = u.frames[k + 1];
        lap = finsler_laplacian(m, mu, frame);
        const auto& unew = u.frames[k + 1];
        const auto& uold = u.frames[k];
        for (const auto& t : tents) {
            double flux = 0.0, time = 0.0, force = 0.0, mag = 0.0;
            for (int dj = -t.w + 1; dj < t.w; ++dj)
                for (int di = -t.w + 1; di < t.w; ++di) {
                    const int i = t.ci + di, j = t.cj + dj;
                    const double phi = (1.0 - std::abs(di) / double(t.w)) *
                                       (1.0 - std::abs(dj) / double(t.w));
                    const size_t id = g.idx(i, j);
                    const double wcell = phi * density[id] * h2;
                    const double lv = lap.v[id];
                    const double tv = (unew[id] - uold[id]) / u.dt;
                    flux += wcell * lv;
                    time += wcell * tv;
                    force += wcell * f.v[id] * unew[id];
                    mag += std::abs(wcell * lv) + std::abs(wcell * tv) +
                           std::abs(wcell * f.v[id] * unew[id]);
                }
            const double denom = std::max(mag, 1e-300);
            if (side == ParabolicSide::Sub)
                worst = std::min(worst, (flux - time + force) / denom);
            else
                worst = std::max(worst, (flux - time - force) / denom);
        }
        ++rep.intervals;
    }
    rep.worst = worst;
    return rep;
}

BochnerReport bochner_check(const MetricModel& m, const MeasureModel& mu, const ScalarField& u,
                            const BallSpec& region, double du_threshold) {
    const Grid2D& g = u.grid;
    CovecField du = differential(u);
    double scale = 0.0;
    for (const auto& c : du.v) scale = std::max(scale, norm(c));
    const double floor_norm = du_threshold * std::max(scale, 1e-300);

    // grad u and w = F^2(grad u)/2 on all nodes (needed by the stencils).
    VecField grad(g);
    ScalarField w(g, 0.0);
    std::vector<uint8_t> usable(g.size(), 0);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            Covec2 c = du.at(i, j);
            if (norm(c) <= floor_norm) continue;
            Point2 p = g.node(i, j);
            Vec2 v = legendre_inverse_fast(m, p, c);
            grad.at(i, j) = v;
            double fv = eval_metric(m, p, v);
            w.at(i, j) = 0.5 * fv * fv;
            usable[g.idx(i, j)] = 1;
        }

    ScalarField lap = finsler_laplacian(m, mu, u);
    CovecField dlap = differential(lap);

    // Weighted Laplacian of w with reference vector grad u, face-based.
    const int nfx = g.nx - 1;
    FaceDifferential fdu = face_differential(g, u.v, false);
    auto ref_tensor_x = [&](int i, int j) {
        Point2 xf{g.origin.x + (i + 0.5) * g.h, g.origin.y + j * g.h};
        Covec2 c = fdu.x[static_cast<size_t>(j) * nfx + i];
        return std::pair<Mat2, double>(dual_tensor(m, xf, c), mu.density(xf));
    };
    auto ref_tensor_y = [&](int i, int j) {
        Point2 xf{g.origin.x + i * g.h, g.origin.y + (j + 0.5) * g.h};
        Covec2 c = fdu.y[static_cast<size_t>(j) * g.nx + i];
        return std::pair<Mat2, double>(dual_tensor(m, xf, c), mu.density(xf));
    };
    FaceDifferential fdw = face_differential(g, w.v, false);
    auto wflux_x = [&](int i, int j) {
        auto [a, dens] = ref_tensor_x(i, j);
        Covec2 c = fdw.x[static_cast<size_t>(j) * nfx + i];
        Vec2 v = a.apply_up(c);
        return dens * v.x;
    };
    auto wflux_y = [&](int i, int j) {
        auto [a, dens] = ref_tensor_y(i, j);
        Covec2 c = fdw.y[static_cast<size_t>(j) * g.nx + i];
        Vec2 v = a.apply_up(c);
        return dens * v.y;
    };

    BochnerReport rep;
    double sum = 0.0;
    const double hy_rel = 1e-4;
    for (int j = 2; j < g.ny - 2; ++j) {
        for (int i = 2; i < g.nx - 2; ++i) {
            Point2 p = g.node(i, j);
            if (norm(p - region.center) > region.radius) continue;
            // All five stencil nodes of the weighted Laplacian must be usable.
            if (!usable[g.idx(i, j)] || !usable[g.idx(i - 1, j)] || !usable[g.idx(i + 1, j)] ||
                !usable[g.idx(i, j - 1)] || !usable[g.idx(i, j + 1)])
                continue;
            Vec2 V = grad.at(i, j);

            double t1 = (wflux_x(i, j) - wflux_x(i - 1, j) + wflux_y(i, j) - wflux_y(i, j - 1)) /
                        (g.h * mu.density(p));
            double t2 = pair(dlap.at(i, j), V);
            double t3 = weighted_ricci_inf(m, mu, p, V);

            // Hessian with Chern correction from the spray coefficients.
            Mat2 hess;
            hess.a11 = (u.at(i + 1, j) - 2.0 * u.at(i, j) + u.at(i - 1, j)) / (g.h * g.h);
            hess.a22 = (u.at(i, j + 1) - 2.0 * u.at(i, j) + u.at(i, j - 1)) / (g.h * g.h);
            hess.a12 = (u.at(i + 1, j + 1) - u.at(i + 1, j - 1) - u.at(i - 1, j + 1) +
                        u.at(i - 1, j - 1)) /
                       (4.0 * g.h * g.h);
            hess.a21 = hess.a12;
            if (!m.minkowski()) {
                const double hy = hy_rel * norm(V);
                Covec2 dup = du.at(i, j);
                for (int a = 0; a < 2; ++a)
                    for (int b = a; b < 2; ++b) {
                        Vec2 ypp = V, ypm = V, ymp = V, ymm = V;
                        Vec2 second;
                        if (a == b) {
                            Vec2 yp = V, ym = V;
                            yp[a] += hy;
                            ym[a] -= hy;
                            second = (1.0 / (hy * hy)) *
                                     (spray_coefficients(m, p, yp) -
                                      2.0 * spray_coefficients(m, p, V) +
                                      spray_coefficients(m, p, ym));
                        } else {
                            ypp[a] += hy; ypp[b] += hy;
                            ypm[a] += hy; ypm[b] -= hy;
                            ymp[a] -= hy; ymp[b] += hy;
                            ymm[a] -= hy; ymm[b] -= hy;
                            second = (0.25 / (hy * hy)) *
                                     (spray_coefficients(m, p, ypp) - spray_coefficients(m, p, ypm) -
                                      spray_coefficients(m, p, ymp) + spray_coefficients(m, p, ymm));
                        }
                        // Gamma^k_{ab} = d2 G^k / dy^a dy^b; subtract Gamma^k_{ab} du_k.
                        double corr = second.x * dup.x + second.y * dup.y;
                        hess.at(a, b) -= corr;
                        if (a != b) hess.at(b, a) -= corr;
                    }
            }
            Mat2 ginv = fundamental_tensor(m, p, V).inverse();
            Mat2 prod = (ginv * hess) * (ginv * hess);
            double t4 = prod.trace();

            double res = std::abs(t1 - t2 - t3 - t4);
            rep.max_residual = std::max(rep.max_residual, res);
            sum += res;
            ++rep.nodes;
        }
    }
    if (rep.nodes < 10)
        throw DegenerateRegionError("bochner_check: fewer than 10 usable nodes in region");
    rep.mean_residual = sum / static_cast<double>(rep.nodes);
    return rep;
}

}  // namespace finsler
