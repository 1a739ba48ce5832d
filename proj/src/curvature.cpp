#include "finsler/curvature.hpp"

#include <array>
#include <cmath>

#include "finsler/errors.hpp"
#include "finsler/sampling.hpp"

namespace finsler {

namespace {

constexpr double kXStep = 1e-4;
constexpr double kArcStep = 1e-3;

double f_squared(const MetricModel& m, Point2 x, Vec2 y) {
    const double f = eval_metric(m, x, y);
    return f * f;
}

/// (F^2)_{y^l} as a covector: twice the Legendre transform.
Covec2 w_of(const MetricModel& m, Point2 x, Vec2 y) { return 2.0 * legendre(m, x, y); }

Vec2 spray_impl(const MetricModel& m, Point2 x, Vec2 y) {
    if (m.minkowski()) return {0.0, 0.0};  // x-independent norm, straight geodesics
    const double h = kXStep;
    Covec2 a{0.0, 0.0};  // A_l = (F^2)_{x^k y^l} y^k - (F^2)_{x^l}
    for (int k = 0; k < 2; ++k) {
        Point2 xp = x, xm = x;
        (k == 0 ? xp.x : xp.y) += h;
        (k == 0 ? xm.x : xm.y) -= h;
        Covec2 dw = (0.5 / h) * (w_of(m, xp, y) - w_of(m, xm, y));
        double df2 = 0.5 * (f_squared(m, xp, y) - f_squared(m, xm, y)) / h;
        a[0] += dw[0] * y[k];
        a[1] += dw[1] * y[k];
        a[k] -= df2;
    }
    Mat2 ginv = fundamental_tensor(m, x, y).inverse();
    Vec2 g = ginv.apply_up(a);
    return {0.25 * g.x, 0.25 * g.y};
}

/// Spray derivatives about (x, y) at steps (hx, hy): dG/dx, dG/dy, y-Hessian
/// of each component, and the mixed d2G/dx dy contracted with y.
struct SprayJet {
    Mat2 dGdx;              // dG^i/dx^k
    Mat2 dGdy;              // dG^i/dy^k
    std::array<Mat2, 2> d2Gdydy;  // per component i: d2 G^i / dy^j dy^k
    Mat2 mixed_y;           // y^j d2G^i/dx^j dy^k
};

SprayJet spray_jet(const MetricModel& m, Point2 x, Vec2 y, double hx, double hy) {
    SprayJet jet;
    auto G = [&](Point2 xx, Vec2 yy) { return spray_impl(m, xx, yy); };
    const Vec2 g0 = G(x, y);
    for (int k = 0; k < 2; ++k) {
        Point2 xp = x, xm = x;
        (k == 0 ? xp.x : xp.y) += hx;
        (k == 0 ? xm.x : xm.y) -= hx;
        Vec2 d = (0.5 / hx) * (G(xp, y) - G(xm, y));
        jet.dGdx.at(0, k) = d.x;
        jet.dGdx.at(1, k) = d.y;
        // y^j d2G/dx^j dy^k needs d/dy^k of dG/dx^j; build from the same
        // x-shifted sprays differentiated in y below.
    }
    for (int k = 0; k < 2; ++k) {
        Vec2 yp = y, ym = y;
        yp[k] += hy;
        ym[k] -= hy;
        Vec2 d = (0.5 / hy) * (G(x, yp) - G(x, ym));
        jet.dGdy.at(0, k) = d.x;
        jet.dGdy.at(1, k) = d.y;
    }
    for (int j = 0; j < 2; ++j) {
        for (int k = j; k < 2; ++k) {
            Vec2 second;
            if (j == k) {
                Vec2 yp = y, ym = y;
                yp[j] += hy;
                ym[j] -= hy;
                second = (1.0 / (hy * hy)) * (G(x, yp) - 2.0 * g0 + G(x, ym));
            } else {
                Vec2 ypp = y, ypm = y, ymp = y, ymm = y;
                ypp[j] += hy; ypp[k] += hy;
                ypm[j] += hy; ypm[k] -= hy;
                ymp[j] -= hy; ymp[k] += hy;
                ymm[j] -= hy; ymm[k] -= hy;
                second = (0.25 / (hy * hy)) * (G(x, ypp) - G(x, ypm) - G(x, ymp) + G(x, ymm));
            }
            for (int i = 0; i < 2; ++i) {
                jet.d2Gdydy[static_cast<size_t>(i)].at(j, k) = second[i];
                jet.d2Gdydy[static_cast<size_t>(i)].at(k, j) = second[i];
            }
        }
    }
    // y^j d2G^i/dx^j dy^k: central difference in x of dG/dy, contracted with y.
    for (int k = 0; k < 2; ++k) {
        Vec2 yp = y, ym = y;
        yp[k] += hy;
        ym[k] -= hy;
        Vec2 acc{0.0, 0.0};
        for (int j = 0; j < 2; ++j) {
            Point2 xp = x, xm = x;
            (j == 0 ? xp.x : xp.y) += hx;
            (j == 0 ? xm.x : xm.y) -= hx;
            Vec2 dxy = (0.25 / (hx * hy)) * ((G(xp, yp) - G(xp, ym)) - (G(xm, yp) - G(xm, ym)));
            acc = acc + y[j] * dxy;
        }
        jet.mixed_y.at(0, k) = acc.x;
        jet.mixed_y.at(1, k) = acc.y;
    }
    return jet;
}

double ricci_at_steps(const MetricModel& m, Point2 x, Vec2 y, double hx, double hy) {
    SprayJet jet = spray_jet(m, x, y, hx, hy);
    Vec2 g0 = spray_impl(m, x, y);
    double ric = 0.0;
    for (int k = 0; k < 2; ++k) {
        double term = 2.0 * jet.dGdx(k, k) - jet.mixed_y(k, k);
        for (int j = 0; j < 2; ++j) {
            term += 2.0 * g0[j] * jet.d2Gdydy[static_cast<size_t>(k)](j, k);
            term -= jet.dGdy(k, j) * jet.dGdy(j, k);
        }
        ric += term;
    }
    return ric;
}

}  // namespace

GeodesicState geodesic_step(const MetricModel& m, GeodesicState s, double dt) {
    auto rhs = [&](const GeodesicState& st) -> GeodesicState {
        Vec2 g = spray_impl(m, st.x, st.v);
        return {{st.v.x, st.v.y}, {-2.0 * g.x, -2.0 * g.y}};
    };
    auto add = [](GeodesicState a, double c, GeodesicState b) -> GeodesicState {
        return {{a.x.x + c * b.x.x, a.x.y + c * b.x.y}, a.v + c * b.v};
    };
    GeodesicState k1 = rhs(s);
    GeodesicState k2 = rhs(add(s, 0.5 * dt, k1));
    GeodesicState k3 = rhs(add(s, 0.5 * dt, k2));
    GeodesicState k4 = rhs(add(s, dt, k3));
    GeodesicState out = s;
    out.x.x += dt / 6.0 * (k1.x.x + 2.0 * k2.x.x + 2.0 * k3.x.x + k4.x.x);
    out.x.y += dt / 6.0 * (k1.x.y + 2.0 * k2.x.y + 2.0 * k3.x.y + k4.x.y);
    out.v = s.v + (dt / 6.0) * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v);
    return out;
}

namespace {

/// tau along the unit-speed geodesic at arclengths {-2s, -s, 0, s, 2s}.
std::array<double, 5> tau_stencil(const MetricModel& m, const MeasureModel& mu, Point2 x, Vec2 u,
                                  double s) {
    std::array<double, 5> tau;
    tau[2] = distortion(m, mu, x, u);
    GeodesicState fwd{x, u};
    for (int k = 1; k <= 2; ++k) {
        fwd = geodesic_step(m, fwd, s);
        if (!m.in_chart(fwd.x))
            throw GeodesicEscapeError("s_curvature: geodesic left chart in differencing window");
        tau[static_cast<size_t>(2 + k)] = distortion(m, mu, fwd.x, fwd.v);
    }
    GeodesicState bwd{x, u};
    for (int k = 1; k <= 2; ++k) {
        bwd = geodesic_step(m, bwd, -s);
        if (!m.in_chart(bwd.x))
            throw GeodesicEscapeError("s_curvature: geodesic left chart in differencing window");
        tau[static_cast<size_t>(2 - k)] = distortion(m, mu, bwd.x, bwd.v);
    }
    return tau;
}

}  // namespace

Vec2 spray_coefficients(const MetricModel& m, Point2 x, Vec2 y) {
    m.require_chart(x);
    if (norm(y) == 0.0) throw DegenerateDirectionError("spray_coefficients: y = 0");
    return spray_impl(m, x, y);
}

double ricci(const MetricModel& m, Point2 x, Vec2 y) {
    m.require_chart(x);
    const double yn = norm(y);
    if (yn == 0.0) throw DegenerateDirectionError("ricci: y = 0");
    if (m.minkowski()) return 0.0;
    // Relative y-steps keep the 2-homogeneity exact under y-scaling.
    const double hy = kXStep * yn;
    const double r1 = ricci_at_steps(m, x, y, kXStep, hy);
    const double r2 = ricci_at_steps(m, x, y, 0.5 * kXStep, 0.5 * hy);
    return (4.0 * r2 - r1) / 3.0;  // one Richardson level
}

double distortion(const MetricModel& m, const MeasureModel& mu, Point2 x, Vec2 y) {
    if (norm(y) == 0.0) throw DegenerateDirectionError("distortion: y = 0");
    Mat2 g = fundamental_tensor(m, x, y);
    return 0.5 * std::log(g.det()) - mu.phi(x);
}

double s_curvature(const MetricModel& m, const MeasureModel& mu, Point2 x, Vec2 y) {
    const double f = eval_metric(m, x, y);
    if (f == 0.0) throw DegenerateDirectionError("s_curvature: y = 0");
    Vec2 u = (1.0 / f) * y;
    auto tau = tau_stencil(m, mu, x, u, kArcStep);
    const double s_unit =
        (tau[0] - 8.0 * tau[1] + 8.0 * tau[3] - tau[4]) / (12.0 * kArcStep);
    return f * s_unit;  // 1-homogeneous
}

double s_curvature_rate(const MetricModel& m, const MeasureModel& mu, Point2 x, Vec2 y) {
    const double f = eval_metric(m, x, y);
    if (f == 0.0) throw DegenerateDirectionError("s_curvature_rate: y = 0");
    Vec2 u = (1.0 / f) * y;
    auto tau = tau_stencil(m, mu, x, u, kArcStep);
    const double sdot_unit =
        (-tau[0] + 16.0 * tau[1] - 30.0 * tau[2] + 16.0 * tau[3] - tau[4]) /
        (12.0 * kArcStep * kArcStep);
    return f * f * sdot_unit;  // 2-homogeneous
}

double weighted_ricci_inf(const MetricModel& m, const MeasureModel& mu, Point2 x, Vec2 y) {
    return ricci(m, x, y) + s_curvature_rate(m, mu, x, y);
}

double weighted_ricci_n(const MetricModel& m, const MeasureModel& mu, Point2 x, Vec2 y, double N) {
    if (N == 2.0) throw InvalidArgumentError("weighted_ricci_n: N must differ from n = 2");
    const double s = s_curvature(m, mu, x, y);
    return ricci(m, x, y) + s_curvature_rate(m, mu, x, y) - s * s / (N - 2.0);
}

CurvatureBounds curvature_bounds(const MetricModel& m, const MeasureModel& mu,
                                 const BallSpec& region, int samples) {
    if (samples < 1) throw InvalidArgumentError("curvature_bounds: samples must be >= 1");
    CurvatureBounds out;
    out.region = region;
    auto pts = sample_ball(region, samples);
    auto angles = angle_grid(64);
    double kmin = 1e300, dmax = 0.0;
    int used = 0;
    for (const auto& p : pts) {
        if (!m.in_chart(p)) continue;
        ++used;
        for (double th : angles) {
            Vec2 e = unit_dir(th);
            Vec2 u = (1.0 / eval_metric(m, p, e)) * e;  // F(p, u) = 1
            kmin = std::min(kmin, weighted_ricci_inf(m, mu, p, u));
            dmax = std::max(dmax, std::abs(s_curvature(m, mu, p, u)));
        }
    }
    out.k_lower = kmin;
    out.delta = dmax;
    out.samples = used;
    return out;
}

MeasureModel MeasureModel::riemannian_volume(const MetricModel& m) {
    if (!m.riemannian())
        throw InvalidArgumentError("riemannian_volume: metric has no y-independent volume form");
    MeasureModel mu;
    mu.kind = Kind::RiemannianVolume;
    mu.volume_of = m;
    return mu;
}

}  // namespace finsler
