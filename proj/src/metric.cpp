#include "finsler/metric.hpp"

#include <algorithm>
#include <cmath>

#include "finsler/errors.hpp"
#include "finsler/sampling.hpp"

namespace finsler {

namespace {

constexpr double kTinyNorm = 1e-300;

double sq(double v) { return v * v; }

/// F^2 with the scalar pieces needed by the analytic derivative formulas.
double f_squared(const MetricModel& m, Point2 x, Vec2 y) {
    const double f = eval_metric(m, x, y);
    return f * f;
}

Mat2 fundamental_tensor_analytic(const MetricModel& m, Point2 x, Vec2 y) {
    if (m.riemannian()) {
        const double l2 = sq(m.lambda(x));
        return {l2, 0.0, 0.0, l2};
    }
    // Randers: g = (F/a)(I - y y^T / a^2) + (y/a + b)(y/a + b)^T, a = |y|.
    const double a = norm(y);
    const Covec2 b = m.drift;
    const double beta = b.x * y.x + b.y * y.y;
    const double f = a + beta;
    Mat2 g;
    const double ux = y.x / a, uy = y.y / a;
    const double ratio = f / a;
    g.a11 = ratio * (1.0 - ux * ux) + sq(ux + b.x);
    g.a22 = ratio * (1.0 - uy * uy) + sq(uy + b.y);
    g.a12 = ratio * (-ux * uy) + (ux + b.x) * (uy + b.y);
    g.a21 = g.a12;
    return g;
}

Sym3 cartan_tensor_analytic(const MetricModel& m, Point2 x, Vec2 y) {
    (void)x;
    Sym3 c;
    if (m.riemannian()) return c;
    // Randers: C_ijk = [ sym(d_ij b_k)/a - (beta sym(d_ij y_k) + sym(b_k y_i y_j))/a^3
    //                    + 3 beta y_i y_j y_k / a^5 ] / 2.
    const double a = norm(y);
    const Covec2 b = m.drift;
    const double beta = b.x * y.x + b.y * y.y;
    const double a3 = a * a * a;
    const double a5 = a3 * a * a;
    auto comp = [&](int i, int j, int k) {
        auto yv = [&](int p) { return p == 0 ? y.x : y.y; };
        auto bv = [&](int p) { return p == 0 ? b.x : b.y; };
        auto kron = [](int p, int q) { return p == q ? 1.0 : 0.0; };
        double delta_b = kron(i, j) * bv(k) + kron(i, k) * bv(j) + kron(j, k) * bv(i);
        double delta_y = kron(i, j) * yv(k) + kron(i, k) * yv(j) + kron(j, k) * yv(i);
        double byy = bv(k) * yv(i) * yv(j) + bv(j) * yv(i) * yv(k) + bv(i) * yv(j) * yv(k);
        return 0.5 * (delta_b / a - (beta * delta_y + byy) / a3 + 3.0 * beta * yv(i) * yv(j) * yv(k) / a5);
    };
    c.at_count(0) = comp(0, 0, 0);
    c.at_count(1) = comp(0, 0, 1);
    c.at_count(2) = comp(0, 1, 1);
    c.at_count(3) = comp(1, 1, 1);
    return c;
}

Covec2 legendre_analytic(const MetricModel& m, Point2 x, Vec2 y) {
    if (m.riemannian()) {
        const double l2 = sq(m.lambda(x));
        return {l2 * y.x, l2 * y.y};
    }
    const double a = norm(y);
    const double f = a + m.drift.x * y.x + m.drift.y * y.y;
    return {f * (y.x / a + m.drift.x), f * (y.y / a + m.drift.y)};
}

double fd_scale(Vec2 y) { return std::max(norm(y), 1e-12); }

Covec2 legendre_fd(const MetricModel& m, Point2 x, Vec2 y) {
    const double h = m.fd_step * fd_scale(y);
    Covec2 xi;
    for (int i = 0; i < 2; ++i) {
        Vec2 yp = y, ym = y;
        yp[i] += h;
        ym[i] -= h;
        xi[i] = 0.25 * (f_squared(m, x, yp) - f_squared(m, x, ym)) / h;
    }
    return xi;
}

Mat2 fundamental_tensor_fd(const MetricModel& m, Point2 x, Vec2 y) {
    const double h = m.fd_step * fd_scale(y);
    const double f0 = f_squared(m, x, y);
    Mat2 g;
    for (int i = 0; i < 2; ++i) {
        Vec2 yp = y, ym = y;
        yp[i] += h;
        ym[i] -= h;
        g.at(i, i) = 0.5 * (f_squared(m, x, yp) - 2.0 * f0 + f_squared(m, x, ym)) / (h * h);
    }
    Vec2 ypp = y, ypm = y, ymp = y, ymm = y;
    ypp.x += h; ypp.y += h;
    ypm.x += h; ypm.y -= h;
    ymp.x -= h; ymp.y += h;
    ymm.x -= h; ymm.y -= h;
    g.a12 = 0.125 * (f_squared(m, x, ypp) + f_squared(m, x, ymm) - f_squared(m, x, ypm) -
                     f_squared(m, x, ymp)) /
            (h * h);
    g.a21 = g.a12;
    return g;
}

Sym3 cartan_tensor_fd(const MetricModel& m, Point2 x, Vec2 y) {
    // Direct third differences of F^2; wider relative step than the Hessian
    // balances truncation against roundoff for third derivatives.
    const double h = 1e-3 * fd_scale(y);
    auto f = [&](double dx, double dy) { return f_squared(m, x, {y.x + dx, y.y + dy}); };
    auto third_pure = [&](int axis) {
        auto e = [&](double t) { return axis == 0 ? f(t, 0.0) : f(0.0, t); };
        return 0.25 * (e(2.0 * h) - 2.0 * e(h) + 2.0 * e(-h) - e(-2.0 * h)) / (h * h * h);
    };
    auto third_mixed = [&](int axis2) {
        // d^2/da^2 d/db with a repeated twice. axis2 = repeated axis.
        auto e = [&](double a, double b) { return axis2 == 0 ? f(a, b) : f(b, a); };
        return 0.25 *
               (e(h, h) - 2.0 * e(0.0, h) + e(-h, h) - e(h, -h) + 2.0 * e(0.0, -h) - e(-h, -h)) /
               (2.0 * h * h * h);
    };
    Sym3 c;
    c.at_count(0) = third_pure(0);
    c.at_count(3) = third_pure(1);
    c.at_count(1) = third_mixed(0);  // T_001: twice axis 0, once axis 1
    c.at_count(2) = third_mixed(1);  // T_011: twice axis 1, once axis 0
    return c;
}

}  // namespace

std::string to_string(MetricKind k) {
    switch (k) {
        case MetricKind::Euclidean: return "euclidean";
        case MetricKind::Randers: return "randers";
        case MetricKind::ConformalRiemann: return "conformal";
        case MetricKind::SpherePatch: return "sphere";
        case MetricKind::HyperbolicPatch: return "hyperbolic";
    }
    return "unknown";
}

double MetricModel::lambda(Point2 x) const {
    switch (kind) {
        case MetricKind::Euclidean:
        case MetricKind::Randers: return 1.0;
        case MetricKind::ConformalRiemann: return std::exp(profile.log_lambda(x));
        case MetricKind::SpherePatch: return 2.0 / (1.0 + x.x * x.x + x.y * x.y);
        case MetricKind::HyperbolicPatch: return 2.0 / (1.0 - x.x * x.x - x.y * x.y);
    }
    return 1.0;
}

Covec2 MetricModel::dlog_lambda(Point2 x) const {
    switch (kind) {
        case MetricKind::Euclidean:
        case MetricKind::Randers: return {0.0, 0.0};
        case MetricKind::ConformalRiemann:
            return {profile.c1 + 2.0 * profile.c3 * x.x + profile.c5 * x.y,
                    profile.c2 + 2.0 * profile.c4 * x.y + profile.c5 * x.x};
        case MetricKind::SpherePatch: {
            const double r2 = x.x * x.x + x.y * x.y;
            const double s = -2.0 / (1.0 + r2);
            return {s * x.x, s * x.y};
        }
        case MetricKind::HyperbolicPatch: {
            const double r2 = x.x * x.x + x.y * x.y;
            const double s = 2.0 / (1.0 - r2);
            return {s * x.x, s * x.y};
        }
    }
    return {0.0, 0.0};
}

bool MetricModel::in_chart(Point2 x) const {
    if (!finite(x)) return false;
    if (kind == MetricKind::HyperbolicPatch) return x.x * x.x + x.y * x.y < 1.0;
    return norm(x) < 1e6;
}

void MetricModel::require_chart(Point2 x) const {
    if (!in_chart(x))
        throw OutOfChartError("point (" + std::to_string(x.x) + ", " + std::to_string(x.y) +
                              ") outside chart of " + to_string(kind));
}

double eval_metric(const MetricModel& m, Point2 x, Vec2 y) {
    m.require_chart(x);
    if (!finite(y)) throw InvalidArgumentError("eval_metric: non-finite direction");
    if (m.kind == MetricKind::Randers) {
        const double f = norm(y) + m.drift.x * y.x + m.drift.y * y.y;
        if (f < 0.0)
            throw NotPositiveDefiniteError("Randers drift |b| >= 1: F(x,y) < 0");
        return f;
    }
    return m.lambda(x) * norm(y);
}

Mat2 fundamental_tensor(const MetricModel& m, Point2 x, Vec2 y) {
    m.require_chart(x);
    if (norm(y) < kTinyNorm) throw DegenerateDirectionError("fundamental_tensor: y = 0");
    Mat2 g = m.mode == DerivativeMode::Analytic ? fundamental_tensor_analytic(m, x, y)
                                                : fundamental_tensor_fd(m, x, y);
    if (!g.positive_definite())
        throw NotPositiveDefiniteError("fundamental tensor not positive definite (|b| >= 1?)");
    return g;
}

Sym3 cartan_tensor(const MetricModel& m, Point2 x, Vec2 y) {
    m.require_chart(x);
    if (norm(y) < kTinyNorm) throw DegenerateDirectionError("cartan_tensor: y = 0");
    return m.mode == DerivativeMode::Analytic ? cartan_tensor_analytic(m, x, y)
                                              : cartan_tensor_fd(m, x, y);
}

Covec2 legendre(const MetricModel& m, Point2 x, Vec2 y) {
    m.require_chart(x);
    if (norm(y) == 0.0) return {0.0, 0.0};
    return m.mode == DerivativeMode::Analytic ? legendre_analytic(m, x, y) : legendre_fd(m, x, y);
}

Vec2 legendre_inverse(const MetricModel& m, Point2 x, Covec2 xi, NewtonOptions opt) {
    m.require_chart(x);
    if (!finite(xi)) throw InvalidArgumentError("legendre_inverse: non-finite covector");
    const double xin = norm(xi);
    if (xin == 0.0) return {0.0, 0.0};

    const double tol = opt.tolerance * std::max(1.0, xin);
    Vec2 y{xi.x, xi.y};  // raised-index Euclidean seed
    Covec2 res = legendre(m, x, y) - xi;
    double merit = sq(norm(res));
    for (int it = 0; it < opt.max_iter; ++it) {
        if (norm(res) <= tol) return y;
        Mat2 g = fundamental_tensor(m, x, y);
        Vec2 step = g.solve(res);
        // Armijo backtracking on |L(y) - xi|^2; g is SPD so the Newton
        // direction descends, damping handles anisotropic starts.
        double t = 1.0;
        for (int ls = 0; ls < 30; ++ls) {
            Vec2 cand = y - t * step;
            if (norm(cand) < 1e-14 * xin) {
                t *= 0.5;
                continue;
            }
            Covec2 rc = legendre(m, x, cand) - xi;
            double mc = sq(norm(rc));
            if (mc <= merit * (1.0 - 1e-4 * t)) {
                y = cand;
                res = rc;
                merit = mc;
                break;
            }
            t *= 0.5;
            if (ls == 29) throw NoConvergenceError("legendre_inverse: line search stalled");
        }
    }
    if (norm(res) <= tol) return y;
    throw NoConvergenceError("legendre_inverse: no convergence after max_iter");
}

double dual_metric(const MetricModel& m, Point2 x, Covec2 xi) {
    if (norm(xi) == 0.0) return 0.0;
    return eval_metric(m, x, legendre_inverse(m, x, xi));
}

double dual_metric_fast(const MetricModel& m, Point2 x, Covec2 xi) {
    if (m.kind == MetricKind::Randers) {
        // Dual of |y| + <b,y>: (sqrt((1-|b|^2)|xi|^2 + <b,xi>^2) - <b,xi>) / (1-|b|^2).
        const double b2 = sq(m.drift.x) + sq(m.drift.y);
        const double one = 1.0 - b2;
        const double bxi = m.drift.x * xi.x + m.drift.y * xi.y;
        return (std::sqrt(one * (sq(xi.x) + sq(xi.y)) + bxi * bxi) - bxi) / one;
    }
    return norm(xi) / m.lambda(x);
}

Vec2 legendre_inverse_fast(const MetricModel& m, Point2 x, Covec2 xi) {
    if (norm(xi) == 0.0) return {0.0, 0.0};
    if (m.riemannian()) {
        const double inv = 1.0 / sq(m.lambda(x));
        return {inv * xi.x, inv * xi.y};
    }
    const double fs = dual_metric_fast(m, x, xi);
    Vec2 u{xi.x / fs - m.drift.x, xi.y / fs - m.drift.y};
    const double alpha = fs / (1.0 + m.drift.x * u.x + m.drift.y * u.y);
    return {alpha * u.x, alpha * u.y};
}

Mat2 dual_tensor(const MetricModel& m, Point2 x, Covec2 xi) {
    if (m.riemannian()) {
        const double inv = 1.0 / sq(m.lambda(x));
        return {inv, 0.0, 0.0, inv};
    }
    Covec2 ref = xi;
    if (norm(ref) < 1e-13) ref = {1.0, 0.0};  // direction at degenerate covectors
    Vec2 y = legendre_inverse_fast(m, x, ref);
    return fundamental_tensor_analytic(m, x, y).inverse();
}

double reversibility(const MetricModel& m, const BallSpec& region, int samples) {
    if (samples < 1) throw InvalidArgumentError("reversibility: samples must be >= 1");
    if (m.riemannian()) return 1.0;  // lambda(x)|y| is even in y
    auto pts = sample_ball(region, samples);
    auto angles = angle_grid(4096);
    double best = 1.0;
    for (const auto& p : pts) {
        if (!m.in_chart(p)) continue;
        for (double th : angles) {
            Vec2 u = unit_dir(th);
            double fwd = eval_metric(m, p, u);
            double bwd = eval_metric(m, p, -u);
            best = std::max(best, fwd / bwd);
        }
    }
    return best;
}

UniformConstants uniform_constants(const MetricModel& m, const BallSpec& region, int samples) {
    if (samples < 1) throw InvalidArgumentError("uniform_constants: samples must be >= 1");
    UniformConstants out;
    out.region = region;
    out.lambda = reversibility(m, region, samples);
    if (m.riemannian()) return out;  // kappa = kappa* = 1 exactly

    auto pts = sample_ball(region, std::min(samples, 64));
    const int n_ref = 512, n_test = 512;
    auto ref_angles = angle_grid(n_ref);
    auto test_angles = angle_grid(n_test);
    double lo = 1e300, hi = 0.0;
    std::vector<double> f2;
    f2.resize(test_angles.size());
    std::vector<Vec2> dirs;
    dirs.reserve(test_angles.size());
    for (double th : test_angles) dirs.push_back(unit_dir(th));
    for (const auto& p : pts) {
        if (!m.in_chart(p)) continue;
        for (size_t j = 0; j < dirs.size(); ++j) f2[j] = sq(eval_metric(m, p, dirs[j]));
        for (double tv : ref_angles) {
            Mat2 g = fundamental_tensor(m, p, unit_dir(tv));
            for (size_t j = 0; j < dirs.size(); ++j) {
                const double ratio = g.quad(dirs[j]) / f2[j];
                lo = std::min(lo, ratio);
                hi = std::max(hi, ratio);
            }
        }
    }
    out.kappa = std::max(1.0, hi);
    out.kappa_star = std::min(1.0, lo);
    return out;
}

}  // namespace finsler
