#include "finsler/inequalities.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>

#include "finsler/errors.hpp"
#include "finsler/sampling.hpp"

namespace finsler {

namespace {

double sq(double v) { return v * v; }

/// Quadratic form matrix of the symmetrized dual energy
/// (F*^2(xi) + F*^2(-xi)) / 2; exact for every built-in metric kind
/// (for Randers the odd part of F*^2 is linear in xi times F*, and the
/// symmetrization is the quadratic alpha*^2 + beta*^2).
Mat2 symmetrized_dual_form(const MetricModel& m, Point2 x) {
    if (m.riemannian()) {
        const double inv = 1.0 / sq(m.lambda(x));
        return {inv, 0.0, 0.0, inv};
    }
    const double b2 = sq(m.drift.x) + sq(m.drift.y);
    const double om = 1.0 - b2;
    Mat2 q;
    q.a11 = (om + 2.0 * m.drift.x * m.drift.x) / sq(om);
    q.a22 = (om + 2.0 * m.drift.y * m.drift.y) / sq(om);
    q.a12 = 2.0 * m.drift.x * m.drift.y / sq(om);
    q.a21 = q.a12;
    return q;
}

double dual_p(const MetricModel& m, Point2 x, Covec2 xi, double p) {
    return std::pow(dual_metric_fast(m, x, xi), p);
}

struct BallQuadrature {
    std::vector<size_t> nodes;     // grid indices with positive weight
    std::vector<double> w;         // fractional weight * density * h^2
    std::vector<uint8_t> crisp;    // weight >= 1/2 (for sup/inf)
};

BallQuadrature ball_quadrature(const BallMask& mask, const MeasureModel& mu) {
    BallQuadrature q;
    const Grid2D& g = mask.grid;
    const double h2 = g.h * g.h;
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            double w = mask.w(i, j);
            if (w <= 0.0) continue;
            q.nodes.push_back(g.idx(i, j));
            q.w.push_back(w * mu.density(g.node(i, j)) * h2);
            q.crisp.push_back(w >= 0.5 ? 1 : 0);
        }
    return q;
}

/// Trapezoid weights in time over a frame window.
std::vector<double> time_weights(size_t k0, size_t k1, double dt) {
    std::vector<double> tw(k1 - k0 + 1, dt);
    if (tw.size() > 1) {
        tw.front() = 0.5 * dt;
        tw.back() = 0.5 * dt;
    }
    return tw;
}

Verdict stability_verdict(const std::vector<std::pair<double, double>>& series, double kd,
                          double slack_factor) {
    if (series.empty()) return Verdict::Inconclusive;
    double lo = 1e300, hi = -1e300;
    for (auto& [scale, c] : series) {
        if (!std::isfinite(c)) return Verdict::Inconclusive;
        // Remove the permitted exponential growth before comparing scales.
        double normalized = c - kd * scale * scale;  // constants live in log space
        lo = std::min(lo, normalized);
        hi = std::max(hi, normalized);
    }
    return (hi - lo) <= slack_factor ? Verdict::Consistent : Verdict::Inconclusive;
}

}  // namespace

WeightProfile WeightProfile::indicator() {
    WeightProfile p;
    p.xi = [](double t) { return t <= 1.0 ? 1.0 : 0.0; };
    p.alpha = 1.0;
    return p;
}

WeightProfile WeightProfile::linear_taper(double delta) {
    if (!(delta > 0.0 && delta < 1.0))
        throw InvalidArgumentError("linear_taper: delta must lie in (0,1)");
    WeightProfile p;
    p.xi = [delta](double t) {
        if (t <= delta) return 1.0;
        if (t >= 1.0) return 0.0;
        return (1.0 - t) / (1.0 - delta);
    };
    // Worst step ratio of the profile over the sampled step condition.
    double alpha = 1.0;
    for (int k = 1; k < 1000; ++k) {
        double t = k / 1000.0;
        double xt = p.xi(t);
        if (xt <= 0.0) continue;
        double step = 0.5 * std::min(1.0 - t, 0.5);
        alpha = std::min(alpha, p.xi(t + step) / xt);
    }
    p.alpha = std::max(alpha, 1e-9);
    return p;
}

void WeightProfile::validate() const {
    if (!xi) throw InvalidArgumentError("WeightProfile: missing xi");
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw InvalidArgumentError("WeightProfile: alpha must lie in (0,1]");
    double prev = xi(0.0);
    if (prev > 1.0 + 1e-12 || prev < 0.0) throw InvalidArgumentError("WeightProfile: range");
    for (int k = 1; k <= 2000; ++k) {
        double t = 2.0 * k / 2000.0;
        double v = xi(t);
        if (v > prev + 1e-12) throw InvalidArgumentError("WeightProfile: xi must be non-increasing");
        prev = v;
        if (t > 1.0 + 1e-9 && v > 0.0)
            throw InvalidArgumentError("WeightProfile: xi must vanish past 1");
    }
    for (int k = 1; k < 1000; ++k) {
        double t = k / 1000.0;
        double xt = xi(t);
        if (xt <= 0.0) continue;
        double step = 0.5 * std::min(1.0 - t, 0.5);
        if (xi(t + step) + 1e-12 < alpha * xt)
            throw InvalidArgumentError("WeightProfile: step condition fails at t = " +
                                       std::to_string(t));
    }
}

std::vector<ScalarField> test_dictionary(const Grid2D& grid, const BallSpec& ball, uint64_t seed) {
    std::vector<ScalarField> dict;
    auto bump = [](double s) {
        double q = 1.0 - s * s;
        return q > 0.0 ? q * q * q : 0.0;
    };
    // Tensor spline bumps at three scales on lattices covering the ball.
    for (double wfrac : {0.9, 0.45, 0.225}) {
        const double w = wfrac * ball.radius;
        const int span = static_cast<int>(std::floor(ball.radius / w)) + 1;
        for (int j = -span; j <= span; ++j)
            for (int i = -span; i <= span; ++i) {
                Point2 c{ball.center.x + i * w, ball.center.y + j * w};
                if (norm(c - ball.center) > ball.radius) continue;
                dict.push_back(ScalarField::sample(grid, [&](Point2 p) {
                    return bump((p.x - c.x) / w) * bump((p.y - c.y) / w);
                }));
            }
    }
    // Monomials up to degree two in ball-relative coordinates.
    const double R = ball.radius;
    const Point2 c = ball.center;
    auto add = [&](auto&& f) { dict.push_back(ScalarField::sample(grid, f)); };
    add([&](Point2 p) { return (p.x - c.x) / R; });
    add([&](Point2 p) { return (p.y - c.y) / R; });
    add([&](Point2 p) { return sq((p.x - c.x) / R); });
    add([&](Point2 p) { return (p.x - c.x) * (p.y - c.y) / (R * R); });
    add([&](Point2 p) { return sq((p.y - c.y) / R); });
    // Seeded random smooth fields (sums of plane waves).
    SplitMix64 rng(seed * 7919 + 13);
    for (int k = 0; k < 20; ++k) {
        struct Wave {
            double kx, ky, phase, amp;
        };
        std::vector<Wave> waves;
        for (int q = 0; q < 6; ++q)
            waves.push_back({rng.uniform(-4.0, 4.0) / R, rng.uniform(-4.0, 4.0) / R,
                             rng.uniform(0.0, 2.0 * M_PI), rng.uniform(0.3, 1.0)});
        add([&, waves](Point2 p) {
            double v = 0.0;
            for (const auto& wv : waves)
                v += wv.amp * std::cos(wv.kx * (p.x - c.x) + wv.ky * (p.y - c.y) + wv.phase);
            return v;
        });
    }
    return dict;
}

PoincareSolve poincare_eigensolve(const MetricModel& m, const MeasureModel& mu,
                                  const BallMask& ball) {
    const Grid2D& g = ball.grid;
    // Degrees of freedom: nodes with positive ball weight.
    std::vector<int> dof(g.size(), -1);
    std::vector<size_t> nodes;
    for (size_t k = 0; k < g.size(); ++k)
        if (ball.weight[k] > 1e-9) {
            dof[k] = static_cast<int>(nodes.size());
            nodes.push_back(k);
        }
    const int n = static_cast<int>(nodes.size());
    if (n < 32) throw EigenFailureError("poincare_eigensolve: ball too small on this grid");

    std::vector<double> mass(static_cast<size_t>(n), 0.0);
    for (int k = 0; k < n; ++k) {
        size_t id = nodes[static_cast<size_t>(k)];
        int i = static_cast<int>(id % static_cast<size_t>(g.nx));
        int j = static_cast<int>(id / static_cast<size_t>(g.nx));
        mass[static_cast<size_t>(k)] =
            ball.weight[id] * mu.density(g.node(i, j)) * g.h * g.h;
    }

    // Symmetrized-dual Dirichlet form, assembled per face as a quadratic form
    // of (aligned difference, averaged transverse difference).
    using Triplet = Eigen::Triplet<double>;
    std::vector<Triplet> trip;
    struct Entry {
        int id;
        double c;
    };
    auto add_face = [&](std::vector<Entry>& L1, std::vector<Entry>& L2, const Mat2& q, double wf) {
        auto emit = [&](const std::vector<Entry>& A, const std::vector<Entry>& B, double coef) {
            if (coef == 0.0) return;
            for (const auto& a : A)
                for (const auto& b : B)
                    trip.emplace_back(a.id, b.id, coef * a.c * b.c);
        };
        emit(L1, L1, wf * q.a11);
        emit(L1, L2, wf * q.a12);
        emit(L2, L1, wf * q.a21);
        emit(L2, L2, wf * q.a22);
    };
    const double h2 = g.h * g.h;
    auto node_dof = [&](int i, int j) -> int {
        if (i < 0 || i >= g.nx || j < 0 || j >= g.ny) return -1;
        return dof[g.idx(i, j)];
    };
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            // x-face (i,j)-(i+1,j)
            if (i + 1 < g.nx) {
                int a = node_dof(i, j), b = node_dof(i + 1, j);
                if (a >= 0 && b >= 0) {
                    Point2 xf{g.origin.x + (i + 0.5) * g.h, g.origin.y + j * g.h};
                    double wf = std::min(ball.weight[nodes[static_cast<size_t>(a)]],
                                         ball.weight[nodes[static_cast<size_t>(b)]]) *
                                mu.density(xf) * h2;
                    Mat2 q = symmetrized_dual_form(m, xf);
                    std::vector<Entry> L1{{b, 1.0 / g.h}, {a, -1.0 / g.h}};
                    std::vector<Entry> L2;
                    int up_a = node_dof(i, j + 1), up_b = node_dof(i + 1, j + 1);
                    int dn_a = node_dof(i, j - 1), dn_b = node_dof(i + 1, j - 1);
                    if (up_a >= 0 && up_b >= 0 && dn_a >= 0 && dn_b >= 0)
                        L2 = {{up_a, 0.25 / g.h},
                              {up_b, 0.25 / g.h},
                              {dn_a, -0.25 / g.h},
                              {dn_b, -0.25 / g.h}};
                    add_face(L1, L2, q, wf);
                }
            }
            // y-face (i,j)-(i,j+1)
            if (j + 1 < g.ny) {
                int a = node_dof(i, j), b = node_dof(i, j + 1);
                if (a >= 0 && b >= 0) {
                    Point2 xf{g.origin.x + i * g.h, g.origin.y + (j + 0.5) * g.h};
                    double wf = std::min(ball.weight[nodes[static_cast<size_t>(a)]],
                                         ball.weight[nodes[static_cast<size_t>(b)]]) *
                                mu.density(xf) * h2;
                    Mat2 q = symmetrized_dual_form(m, xf);
                    std::vector<Entry> L1{{b, 1.0 / g.h}, {a, -1.0 / g.h}};
                    std::vector<Entry> L2;
                    int rt_a = node_dof(i + 1, j), rt_b = node_dof(i + 1, j + 1);
                    int lf_a = node_dof(i - 1, j), lf_b = node_dof(i - 1, j + 1);
                    if (rt_a >= 0 && rt_b >= 0 && lf_a >= 0 && lf_b >= 0)
                        L2 = {{rt_a, 0.25 / g.h},
                              {rt_b, 0.25 / g.h},
                              {lf_a, -0.25 / g.h},
                              {lf_b, -0.25 / g.h}};
                    // The tensor acts on (d_x, d_y); for a y-face the aligned
                    // slot is the second one.
                    Mat2 swapped{q.a22, q.a21, q.a12, q.a11};
                    add_face(L1, L2, swapped, wf);
                }
            }
        }
    }
    Eigen::SparseMatrix<double> A(n, n);
    A.setFromTriplets(trip.begin(), trip.end());

    double total_mass = 0.0;
    for (double v : mass) total_mass += v;

    auto deflate = [&](Eigen::VectorXd& v) {
        double mean = 0.0;
        for (int k = 0; k < n; ++k) mean += mass[static_cast<size_t>(k)] * v[k];
        mean /= total_mass;
        for (int k = 0; k < n; ++k) v[k] -= mean;
    };
    auto rayleigh = [&](const Eigen::VectorXd& v) {
        double num = v.dot(A * v);
        double den = 0.0;
        for (int k = 0; k < n; ++k) den += mass[static_cast<size_t>(k)] * v[k] * v[k];
        return num / den;
    };

    // Shifted inverse iteration with deflation of the constant kernel.
    Eigen::VectorXd v(n);
    SplitMix64 rng(2024);
    for (int k = 0; k < n; ++k) v[k] = rng.uniform() - 0.5;
    deflate(v);
    const double sigma = 0.1 * std::max(rayleigh(v), 1e-12);
    Eigen::SparseMatrix<double> As = A;
    for (int k = 0; k < n; ++k) As.coeffRef(k, k) += sigma * mass[static_cast<size_t>(k)];
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(As);
    if (ldlt.info() != Eigen::Success)
        throw EigenFailureError("poincare_eigensolve: factorization failed");

    double lam = rayleigh(v), lam_prev = 0.0;
    int it = 0;
    Eigen::VectorXd rhs(n);
    for (; it < 800; ++it) {
        for (int k = 0; k < n; ++k) rhs[k] = mass[static_cast<size_t>(k)] * v[k];
        v = ldlt.solve(rhs);
        deflate(v);
        double nrm = 0.0;
        for (int k = 0; k < n; ++k) nrm += mass[static_cast<size_t>(k)] * v[k] * v[k];
        v /= std::sqrt(nrm);
        lam_prev = lam;
        lam = rayleigh(v);
        if (it > 3 && std::abs(lam - lam_prev) <= 1e-12 * std::abs(lam)) break;
    }
    if (!(lam > 0.0) || !std::isfinite(lam))
        throw EigenFailureError("poincare_eigensolve: nonpositive eigenvalue");

    PoincareSolve out;
    out.eigenvalue = lam;
    out.constant = 1.0 / lam;
    out.iterations = it;
    out.eigenfunction = ScalarField(g, 0.0);
    for (int k = 0; k < n; ++k) out.eigenfunction.v[nodes[static_cast<size_t>(k)]] = v[k];
    return out;
}

double poincare_constant(const MetricModel& m, const MeasureModel& mu, const BallMask& ball,
                         double p, uint64_t seed) {
    if (p < 1.0) throw InvalidArgumentError("poincare_constant: p must be >= 1");
    if (p == 2.0) return poincare_eigensolve(m, mu, ball).constant;

    // p != 2: best ratio over the dictionary, then deterministic pattern
    // search on the top candidates' coefficients.
    BallQuadrature q = ball_quadrature(ball, mu);
    BallSpec spec{{0, 0}, ball.R};
    // The mask does not carry its center; recover it as the weighted centroid.
    double cx = 0.0, cy = 0.0, tw = 0.0;
    for (size_t k = 0; k < q.nodes.size(); ++k) {
        size_t id = q.nodes[k];
        int i = static_cast<int>(id % static_cast<size_t>(ball.grid.nx));
        int j = static_cast<int>(id / static_cast<size_t>(ball.grid.nx));
        Point2 pnode = ball.grid.node(i, j);
        cx += q.w[k] * pnode.x;
        cy += q.w[k] * pnode.y;
        tw += q.w[k];
    }
    spec.center = {cx / tw, cy / tw};
    auto dict = test_dictionary(ball.grid, spec, seed);

    auto ratio_of = [&](const ScalarField& u) {
        CovecField du = differential(u);
        double mean = 0.0;
        for (size_t k = 0; k < q.nodes.size(); ++k) mean += q.w[k] * u.v[q.nodes[k]];
        mean /= tw;
        double lhs = 0.0, rhs = 0.0;
        for (size_t k = 0; k < q.nodes.size(); ++k) {
            size_t id = q.nodes[k];
            int i = static_cast<int>(id % static_cast<size_t>(ball.grid.nx));
            int j = static_cast<int>(id / static_cast<size_t>(ball.grid.nx));
            lhs += q.w[k] * std::pow(std::abs(u.v[id] - mean), p);
            rhs += q.w[k] * dual_p(m, ball.grid.node(i, j), du.v[id], p);
        }
        return rhs > 1e-300 ? lhs / rhs : 0.0;
    };

    std::vector<std::pair<double, size_t>> ranked;
    for (size_t k = 0; k < dict.size(); ++k) ranked.push_back({ratio_of(dict[k]), k});
    std::sort(ranked.begin(), ranked.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    double best = ranked.front().first;

    // Pattern search over combinations of the top candidates.
    const size_t top = std::min<size_t>(6, ranked.size());
    std::vector<double> coef(top, 0.0);
    coef[0] = 1.0;
    auto combo_ratio = [&](const std::vector<double>& c) {
        ScalarField u(ball.grid, 0.0);
        for (size_t t = 0; t < top; ++t) {
            if (c[t] == 0.0) continue;
            const auto& d = dict[ranked[t].second];
            for (size_t k = 0; k < u.v.size(); ++k) u.v[k] += c[t] * d.v[k];
        }
        return ratio_of(u);
    };
    double step = 0.5;
    for (int round = 0; round < 3; ++round) {
        for (size_t t = 0; t < top; ++t) {
            for (double sgn : {1.0, -1.0}) {
                auto c = coef;
                c[t] += sgn * step;
                double r = combo_ratio(c);
                if (r > best) {
                    best = r;
                    coef = c;
                }
            }
        }
        step *= 0.5;
    }
    return best;
}

InequalityReport weighted_poincare_check(const MetricModel& m, const MeasureModel& mu,
                                         const DistanceField& df, Point2 x0, double R,
                                         const WeightProfile& profile, double p,
                                         const CurvatureBounds& bounds, uint64_t seed) {
    profile.validate();
    InequalityReport rep;
    rep.name = "weighted-poincare";
    rep.rhs_shape = "d1 exp(d2 (K+delta^2) R^2) R^p int F*^p(du) Psi dm";
    const double kd = bounds.k_plus_delta_sq();

    auto run_scale = [&](double Rk) -> double {
        const Grid2D& g = df.grid;
        // Psi from the profile and the forward distance field.
        std::vector<double> psi(g.size(), 0.0);
        std::vector<double> cellw(g.size(), 0.0);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                double d = df.at(i, j);
                psi[g.idx(i, j)] = profile.xi(d / Rk);
                cellw[g.idx(i, j)] = mu.density(g.node(i, j)) * g.h * g.h;
            }
        auto dict = test_dictionary(g, {x0, Rk}, seed);
        if (p == 2.0) {
            BallMask mask = forward_ball(df, Rk);
            dict.push_back(poincare_eigensolve(m, mu, mask).eigenfunction);
        }
        double worst = 0.0;
        for (const auto& u : dict) {
            CovecField du = differential(u);
            double wsum = 0.0, usum = 0.0;
            for (size_t k = 0; k < psi.size(); ++k) {
                if (psi[k] <= 0.0) continue;
                wsum += psi[k] * cellw[k];
                usum += psi[k] * cellw[k] * u.v[k];
            }
            if (wsum <= 0.0) continue;
            const double upsi = usum / wsum;
            double lhs = 0.0, rhs = 0.0;
            for (int j = 0; j < g.ny; ++j)
                for (int i = 0; i < g.nx; ++i) {
                    size_t k = g.idx(i, j);
                    if (psi[k] <= 0.0) continue;
                    lhs += psi[k] * cellw[k] * std::pow(std::abs(u.v[k] - upsi), p);
                    rhs += psi[k] * cellw[k] * dual_p(m, g.node(i, j), du.v[k], p);
                }
            rhs *= std::pow(Rk, p);
            if (rhs > 1e-300) worst = std::max(worst, lhs / rhs);
        }
        return worst;
    };

    for (double frac : {0.25, 0.5, 1.0}) {
        double c = run_scale(frac * R);
        rep.scale_series.push_back({frac * R, std::log(std::max(c, 1e-300))});
    }
    double c_full = std::exp(rep.scale_series.back().second);
    rep.empirical_constant = c_full;
    rep.lhs = c_full;
    rep.verdict = stability_verdict(rep.scale_series, kd, std::log(10.0));
    rep.details["K_plus_delta_sq"] = kd;
    rep.details["p"] = p;
    rep.details["alpha"] = profile.alpha;
    rep.note = "scale_series stores log of the empirical constant";
    return rep;
}

InequalityReport sobolev_check(const MetricModel& m, const MeasureModel& mu,
                               const DistanceField& df, Point2 x0, double R, double nu,
                               const CurvatureBounds& bounds, uint64_t seed) {
    if (!(nu > 2.0)) throw InvalidArgumentError("sobolev_check: nu must exceed 2");
    InequalityReport rep;
    rep.name = "sobolev";
    rep.rhs_shape = "exp(c(1+(K+delta^2)R^2)) m(B_R)^{-2/nu} R^2 int (F*^2(du) + R^{-2} u^2) dm";
    const double kd = bounds.k_plus_delta_sq();
    const double expo = 2.0 * nu / (nu - 2.0);

    auto run_scale = [&](double Rk) -> double {
        BallMask mask = forward_ball(df, Rk);
        BallQuadrature q = ball_quadrature(mask, mu);
        const double vol = mask.volume(mu);
        auto dict = test_dictionary(df.grid, {x0, Rk}, seed);
        // The bump of the module example.
        dict.push_back(ScalarField::sample(df.grid, [&](Point2 p) {
            return std::max(0.0, 1.0 - norm(p - x0) / Rk);
        }));
        double worst = 0.0;
        for (const auto& u : dict) {
            CovecField du = differential(u);
            double lhs_int = 0.0, rhs_int = 0.0;
            for (size_t k = 0; k < q.nodes.size(); ++k) {
                size_t id = q.nodes[k];
                int i = static_cast<int>(id % static_cast<size_t>(df.grid.nx));
                int j = static_cast<int>(id / static_cast<size_t>(df.grid.nx));
                lhs_int += q.w[k] * std::pow(std::abs(u.v[id]), expo);
                rhs_int += q.w[k] * (sq(dual_metric_fast(m, df.grid.node(i, j), du.v[id])) +
                                     u.v[id] * u.v[id] / (Rk * Rk));
            }
            double lhs = std::pow(lhs_int, (nu - 2.0) / nu);
            double rhs = std::pow(vol, -2.0 / nu) * Rk * Rk * rhs_int;
            if (rhs > 1e-300) worst = std::max(worst, lhs / rhs);
        }
        return worst;
    };

    for (double frac : {0.5, 0.75, 1.0}) {
        double c = run_scale(frac * R);
        rep.scale_series.push_back({frac * R, std::log(std::max(c, 1e-300))});
    }
    rep.empirical_constant = std::exp(rep.scale_series.back().second);
    rep.lhs = rep.empirical_constant;
    rep.verdict = stability_verdict(rep.scale_series, kd, std::log(10.0));
    rep.details["nu"] = nu;
    rep.details["K_plus_delta_sq"] = kd;
    rep.note = "scale_series stores log of the empirical constant";
    return rep;
}

InequalityReport mean_value_check(const MetricModel& m, const MeasureModel& mu,
                                  const SpaceTimeField& u, const DistanceField& df,
                                  const ParabolicCylinder& cyl, double p, double cyl_delta,
                                  double cyl_delta_prime, const ScalarField& f, ParabolicSide side,
                                  const CurvatureBounds& bounds, double lambda,
                                  const MeanValueOptions& opt) {
    if (!(0.0 < cyl_delta && cyl_delta < cyl_delta_prime && cyl_delta_prime <= 1.0))
        throw InvalidArgumentError("mean_value_check: need 0 < delta < delta' <= 1");
    if (opt.gate) {
        ResidualReport gate = parabolic_residual(m, mu, u, f, side);
        if (!gate.pass(opt.residual_tol))
            throw SideMismatchError("mean_value_check: declared side fails the residual gate (" +
                                    std::to_string(gate.worst) + ")");
    }
    InequalityReport rep;
    rep.name = side == ParabolicSide::Sub ? "mean-value-sub" : "mean-value-super";
    rep.rhs_shape = side == ParabolicSide::Sub
                        ? "e^{C(1+(K+d^2)R^2)} (7L^2+2AR^2)^{1+nu/2} (d'-d)^{-(2+nu)} R^{-2} "
                          "m(B_R)^{-1} int_{Q_d'} u^p"
                        : "e^{C(1+(K+d^2)R^2)} (3L^6+AR^2)^{1+nu/2} (d'-d)^{-(2+nu)} R^{-2} "
                          "m(B_R)^{-1} int_{Q_d'} u^{-p}";
    const double kd = bounds.k_plus_delta_sq();
    double amax = 0.0;
    for (double v : f.v) amax = std::max(amax, v);

    auto run_scale = [&](double Rk, double sk) -> double {
        BallMask inner = forward_ball(df, cyl_delta * Rk);
        BallMask outer = forward_ball(df, cyl_delta_prime * Rk);
        BallMask full = forward_ball(df, Rk);
        BallQuadrature qo = ball_quadrature(outer, mu);
        BallQuadrature qi = ball_quadrature(inner, mu);
        const double mB = full.volume(mu);
        // Window coverage.
        const double lo_i = sk - cyl_delta * Rk * Rk, lo_o = sk - cyl_delta_prime * Rk * Rk;
        if (lo_o < u.t0 - 1e-9 || sk > u.tmax() + 1e-9) return std::nan("");
        auto [k0i, k1i] = u.window(lo_i, sk);
        auto [k0o, k1o] = u.window(lo_o, sk);
        auto tw = time_weights(k0o, k1o, u.dt);
        double sup = 0.0, integral = 0.0;
        for (size_t k = k0i; k <= k1i; ++k)
            for (size_t n = 0; n < qi.nodes.size(); ++n)
                if (qi.crisp[n]) {
                    double val = u.frames[k][qi.nodes[n]];
                    double vp = side == ParabolicSide::Sub ? std::pow(val, p) : std::pow(val, -p);
                    sup = std::max(sup, vp);
                }
        for (size_t k = k0o; k <= k1o; ++k) {
            double frame_sum = 0.0;
            for (size_t n = 0; n < qo.nodes.size(); ++n) {
                double val = u.frames[k][qo.nodes[n]];
                frame_sum +=
                    qo.w[n] * (side == ParabolicSide::Sub ? std::pow(val, p) : std::pow(val, -p));
            }
            integral += tw[k - k0o] * frame_sum;
        }
        const double xi_factor =
            side == ParabolicSide::Sub
                ? std::pow(7.0 * lambda * lambda + 2.0 * amax * Rk * Rk, 1.0 + opt.nu / 2.0)
                : std::pow(3.0 * std::pow(lambda, 6.0) + amax * Rk * Rk, 1.0 + opt.nu / 2.0);
        const double rhs_core = xi_factor *
                                std::pow(cyl_delta_prime - cyl_delta, -(2.0 + opt.nu)) *
                                integral / (Rk * Rk * mB);
        if (!(rhs_core > 0.0) || !(sup > 0.0)) return std::nan("");
        return std::log(sup / rhs_core) / (1.0 + kd * Rk * Rk);
    };

    for (double frac : opt.scale_fractions) {
        double Rk = cyl.R * frac;
        double sk = cyl.s * frac * frac;
        double c = run_scale(Rk, sk);
        if (std::isfinite(c)) rep.scale_series.push_back({Rk, c});
    }
    if (!rep.scale_series.empty()) {
        rep.empirical_constant = rep.scale_series.front().second;
        rep.lhs = rep.empirical_constant;
    }
    rep.verdict = stability_verdict(rep.scale_series, 0.0, std::log(10.0));
    rep.details["p"] = p;
    rep.details["nu"] = opt.nu;
    rep.details["lambda"] = lambda;
    rep.details["A_sup_f"] = amax;
    rep.details["K_plus_delta_sq"] = kd;
    return rep;
}

InequalityReport gradient_estimate_check(const MetricModel& m, const MeasureModel& mu,
                                         const SpaceTimeField& u, const DistanceField& df,
                                         const ParabolicCylinder& cyl,
                                         const CurvatureBounds& bounds,
                                         const MeanValueOptions& opt) {
    InequalityReport rep;
    rep.name = "gradient-estimate";
    rep.rhs_shape =
        "e^{C(1+(K+d^2)R^2)} (1+K R^2)^{1+nu/2} R^{-4} m(B_R)^{-1} int_{Q_{3/4}} u^2";
    const double kd = bounds.k_plus_delta_sq();
    const double K = bounds.K();

    auto run_scale = [&](double Rk, double sk) -> double {
        BallMask half = forward_ball(df, 0.5 * Rk);
        BallMask three4 = forward_ball(df, 0.75 * Rk);
        BallMask full = forward_ball(df, Rk);
        const double mB = full.volume(mu);
        BallQuadrature q34 = ball_quadrature(three4, mu);
        const double lo_h = sk - 0.5 * Rk * Rk, lo_34 = sk - 0.75 * Rk * Rk;
        if (lo_34 < u.t0 - 1e-9 || sk > u.tmax() + 1e-9) return std::nan("");
        auto [k0h, k1h] = u.window(lo_h, sk);
        auto [k034, k134] = u.window(lo_34, sk);
        auto tw = time_weights(k034, k134, u.dt);
        double sup_grad = 0.0;
        for (size_t k = k0h; k <= k1h; ++k) {
            ScalarField frame = u.frame(k);
            VecField grad = gradient_field(m, frame);
            for (int j = 0; j < df.grid.ny; ++j)
                for (int i = 0; i < df.grid.nx; ++i) {
                    if (half.w(i, j) < 0.5 || df.grid.on_boundary(i, j)) continue;
                    double fv = eval_metric(m, df.grid.node(i, j), grad.at(i, j));
                    sup_grad = std::max(sup_grad, fv * fv);
                }
        }
        double integral = 0.0;
        for (size_t k = k034; k <= k134; ++k) {
            double fs = 0.0;
            for (size_t n = 0; n < q34.nodes.size(); ++n)
                fs += q34.w[n] * sq(u.frames[k][q34.nodes[n]]);
            integral += tw[k - k034] * fs;
        }
        const double rhs_core = std::pow(1.0 + K * Rk * Rk, 1.0 + opt.nu / 2.0) * integral /
                                (std::pow(Rk, 4.0) * mB);
        if (!(rhs_core > 0.0) || !(sup_grad > 0.0)) return std::nan("");
        return std::log(sup_grad / rhs_core) / (1.0 + kd * Rk * Rk);
    };

    for (double frac : opt.scale_fractions) {
        double c = run_scale(cyl.R * frac, cyl.s * frac * frac);
        if (std::isfinite(c)) rep.scale_series.push_back({cyl.R * frac, c});
    }
    if (!rep.scale_series.empty()) {
        rep.empirical_constant = rep.scale_series.front().second;
        rep.lhs = rep.empirical_constant;
    }
    rep.verdict = stability_verdict(rep.scale_series, 0.0, std::log(10.0));
    rep.details["nu"] = opt.nu;
    rep.details["K"] = K;
    rep.details["K_plus_delta_sq"] = kd;
    return rep;
}

InequalityReport log_levelset_check(const MetricModel& m, const MeasureModel& mu,
                                    const SpaceTimeField& u, const DistanceField& df,
                                    const ParabolicCylinder& cyl, double cyl_delta, double tau,
                                    const CurvatureBounds& bounds) {
    (void)m;
    if (!(0.0 < cyl_delta && cyl_delta < 1.0) || !(0.0 < tau && tau < 1.0))
        throw InvalidArgumentError("log_levelset_check: delta, tau must lie in (0,1)");
    InequalityReport rep;
    rep.name = "log-levelset";
    rep.rhs_shape = "C0 m(Q) / lambda";

    const Grid2D& g = df.grid;
    const double R = cyl.R, s = cyl.s;
    const double sprime = s - tau * R * R;

    // Cutoff psi = zeta(d/R), zeta the linear taper profile.
    WeightProfile zeta = WeightProfile::linear_taper(cyl_delta);
    std::vector<double> psi2(g.size(), 0.0), cellw(g.size(), 0.0);
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            size_t k = g.idx(i, j);
            psi2[k] = sq(zeta.xi(df.at(i, j) / R));
            cellw[k] = mu.density(g.node(i, j)) * g.h * g.h;
        }

    // c = psi^2-weighted mean of w = -log u at time s'.
    auto [ks0, ks1] = u.window(sprime, sprime);
    (void)ks1;
    double num = 0.0, den = 0.0;
    for (size_t k = 0; k < g.size(); ++k) {
        if (psi2[k] <= 0.0) continue;
        num += psi2[k] * cellw[k] * (-std::log(u.frames[ks0][k]));
        den += psi2[k] * cellw[k];
    }
    const double c = num / den;
    rep.details["c"] = c;

    BallMask inner = forward_ball(df, cyl_delta * R);
    auto [kq0, kq1] = u.window(s - R * R, s);
    auto [kp0, kp1] = u.window(sprime, s);
    auto [km0, km1] = u.window(s - R * R, sprime);
    double mQ = 0.0;
    {
        BallMask full = forward_ball(df, R);
        mQ = full.volume(mu) * (u.time(kq1) - u.time(kq0));
    }

    double worst = 0.0;
    for (int lk = 0; lk < 16; ++lk) {
        const double lam = 0.5 * std::pow(16.0, lk / 15.0);  // log grid on [0.5, 8]
        double plus = 0.0, minus = 0.0;
        for (size_t k = kp0; k <= kp1; ++k)
            for (size_t n = 0; n < g.size(); ++n) {
                if (inner.weight[n] < 0.5) continue;
                if (std::log(u.frames[k][n]) < -lam - c) plus += cellw[n] * u.dt;
            }
        for (size_t k = km0; k <= km1; ++k)
            for (size_t n = 0; n < g.size(); ++n) {
                if (inner.weight[n] < 0.5) continue;
                if (std::log(u.frames[k][n]) > lam - c) minus += cellw[n] * u.dt;
            }
        double prod = std::max(plus, minus) * lam / mQ;
        worst = std::max(worst, prod);
        rep.scale_series.push_back({lam, prod});
    }
    rep.empirical_constant = worst;
    rep.lhs = worst;
    rep.verdict = std::isfinite(worst) ? Verdict::Consistent : Verdict::Inconclusive;
    rep.details["K_plus_delta_sq"] = bounds.k_plus_delta_sq();
    rep.note = "scale_series stores (lambda, lambda * measure / m(Q))";
    return rep;
}

IterationLemmaResult iteration_lemma_check(const MeasuredFamily& family,
                                           const std::vector<double>& g, double alpha0,
                                           double gamma, double C) {
    if (family.sigmas.size() < 2)
        throw InvalidArgumentError("iteration_lemma_check: need at least two nested sets");
    IterationLemmaResult out;
    const size_t ns = family.sigmas.size();
    const size_t atoms = family.weight.size();
    const bool alpha0_inf = !std::isfinite(alpha0);

    auto norm_on = [&](size_t si, double a) -> double {
        // (int_{U_sigma} g^a)^{1/a}; a = inf -> ess sup.
        if (!std::isfinite(a)) {
            double s = 0.0;
            for (size_t k = 0; k < atoms; ++k)
                if (family.member[si][k]) s = std::max(s, g[k]);
            return s;
        }
        double s = 0.0;
        for (size_t k = 0; k < atoms; ++k)
            if (family.member[si][k]) s += family.weight[k] * std::pow(g[k], a);
        return std::pow(s, 1.0 / a);
    };
    double mU = 0.0;
    for (size_t k = 0; k < atoms; ++k)
        if (family.member[ns - 1][k]) mU += family.weight[k];

    // Hypothesis (alpha) on consecutive sigma pairs and a dyadic alpha grid.
    out.alpha_hypothesis = true;
    std::vector<double> alphas;
    double a0 = std::min(1.0, alpha0_inf ? 1.0 : alpha0 / 2.0);
    for (double a = a0; a > a0 / 8.0 - 1e-12; a *= 0.5) alphas.push_back(a);
    for (size_t si = 0; si + 1 < ns; ++si) {
        const double sp = family.sigmas[si], sg = family.sigmas[si + 1];
        for (double a : alphas) {
            double lhs = norm_on(si, alpha0);
            double scale = std::pow(C * std::pow(sg - sp, -gamma) / mU,
                                    1.0 / a - (alpha0_inf ? 0.0 : 1.0 / alpha0));
            double rhs = scale * norm_on(si + 1, a);
            out.worst_alpha_ratio = std::max(out.worst_alpha_ratio, lhs / std::max(rhs, 1e-300));
            if (lhs > rhs * (1.0 + 1e-9)) {
                out.alpha_hypothesis = false;
                out.failed.push_back("alpha at sigma'=" + std::to_string(sp) +
                                     ", alpha=" + std::to_string(a));
            }
        }
    }

    // Hypothesis (Lcondi2): tail bound on log g over U.
    out.tail_hypothesis = true;
    for (double lam : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0}) {
        double tail = 0.0;
        for (size_t k = 0; k < atoms; ++k)
            if (family.member[ns - 1][k] && std::log(g[k]) > lam) tail += family.weight[k];
        if (tail > C * mU / lam * (1.0 + 1e-9)) {
            out.tail_hypothesis = false;
            out.failed.push_back("Lcondi2 at lambda=" + std::to_string(lam));
        }
    }
    out.hypothesis_fail = !(out.alpha_hypothesis && out.tail_hypothesis);
    out.conclusion_constant =
        norm_on(0, alpha0) / (alpha0_inf ? 1.0 : std::pow(mU, 1.0 / alpha0));
    return out;
}

HarnackWindows harnack_windows(const SpaceTimeField& u, const DistanceField& df,
                               const ParabolicCylinder& cyl, double eps, double tau,
                               double delta) {
    BallMask inner = forward_ball(df, delta * cyl.R);
    const double R2 = cyl.R * cyl.R;
    auto [m0, m1] = u.window(cyl.s - delta * R2, cyl.s - tau * R2);
    auto [p0, p1] = u.window(cyl.s - eps * R2, cyl.s);
    HarnackWindows hw;
    hw.sup_minus = 0.0;
    hw.inf_plus = 1e300;
    for (size_t k = m0; k <= m1; ++k)
        for (size_t n = 0; n < inner.weight.size(); ++n)
            if (inner.weight[n] >= 0.5) hw.sup_minus = std::max(hw.sup_minus, u.frames[k][n]);
    for (size_t k = p0; k <= p1; ++k)
        for (size_t n = 0; n < inner.weight.size(); ++n)
            if (inner.weight[n] >= 0.5) hw.inf_plus = std::min(hw.inf_plus, u.frames[k][n]);
    return hw;
}

InequalityReport harnack_check(const MetricModel& m, const MeasureModel& mu,
                               const SpaceTimeField& u, const DistanceField& df,
                               const ParabolicCylinder& cyl, double eps, double tau, double delta,
                               const CurvatureBounds& bounds, const HarnackOptions& opt) {
    if (!(0.0 < eps && eps < tau && tau < delta && delta < 1.0))
        throw InvalidArgumentError("harnack_check: need 0 < eps < tau < delta < 1");
    if (opt.gate) {
        ScalarField zero(u.grid, 0.0);
        ResidualReport sub = parabolic_residual(m, mu, u, zero, ParabolicSide::Sub);
        ResidualReport sup = parabolic_residual(m, mu, u, zero, ParabolicSide::Super);
        if (!sub.pass(opt.residual_tol) || !sup.pass(opt.residual_tol))
            throw SideMismatchError("harnack_check: field is not a solution (residuals " +
                                    std::to_string(sub.worst) + ", " + std::to_string(sup.worst) +
                                    ")");
    }
    InequalityReport rep;
    rep.name = "harnack";
    rep.rhs_shape = "sup_{Q-} u <= e^{C(1+(K+delta^2)R^2)} inf_{Q+} u";
    const double kd = bounds.k_plus_delta_sq();

    for (double frac : opt.scale_fractions) {
        const double Rk = cyl.R * frac;
        const double sk = cyl.s * frac * frac;
        if (sk - delta * Rk * Rk < u.t0 - 1e-9 || sk > u.tmax() + 1e-9) continue;
        ParabolicCylinder ck{cyl.x0, Rk, sk, 1.0};
        HarnackWindows hw = harnack_windows(u, df, ck, eps, tau, delta);
        if (!(hw.sup_minus > 0.0) || !(hw.inf_plus < 1e300)) continue;
        double c = std::log(hw.sup_minus / hw.inf_plus) / (1.0 + kd * Rk * Rk);
        rep.scale_series.push_back({Rk, c});
        if (frac == opt.scale_fractions.front()) {
            rep.lhs = hw.sup_minus;
            rep.rhs = hw.inf_plus;
            rep.empirical_constant = c;
            rep.details["ratio"] = hw.sup_minus / hw.inf_plus;
        }
    }
    // Harnack ratio is >= 1 for genuine solutions; the residual gate already
    // vouched for u, so a ratio below 1 is a checker defect, not a finding.
    double stability = 0.0;
    if (rep.scale_series.size() >= 2) {
        double lo = 1e300, hi = -1e300;
        for (auto& [scale, c] : rep.scale_series) {
            lo = std::min(lo, c);
            hi = std::max(hi, c);
        }
        stability = (hi - lo) / std::max(1e-300, std::abs(hi));
        rep.details["stability"] = stability;
        rep.verdict = stability <= opt.stability_tol ? Verdict::Consistent : Verdict::Inconclusive;
    } else {
        rep.verdict = Verdict::Inconclusive;
    }
    rep.details["K_plus_delta_sq"] = kd;
    rep.details["eps"] = eps;
    rep.details["tau"] = tau;
    rep.details["delta"] = delta;
    return rep;
}

}  // namespace finsler
