#pragma once

#include <string>

#include "finsler/geom.hpp"

namespace finsler {

enum class MetricKind { Euclidean, Randers, ConformalRiemann, SpherePatch, HyperbolicPatch };

enum class DerivativeMode { Analytic, FiniteDifference };

std::string to_string(MetricKind k);

/// Quadratic log-factor for ConformalRiemann metrics:
/// log lambda(x) = c0 + c1 x + c2 y + c3 x^2 + c4 y^2 + c5 x y.
struct ConformalProfile {
    double c0 = 0.0, c1 = 0.0, c2 = 0.0, c3 = 0.0, c4 = 0.0, c5 = 0.0;

    double log_lambda(Point2 p) const {
        return c0 + c1 * p.x + c2 * p.y + c3 * p.x * p.x + c4 * p.y * p.y + c5 * p.x * p.y;
    }
};

/// A closed-form Finsler metric F(x, y) on a 2-D chart.
///
/// Kinds:
///   Euclidean         F = |y|
///   Randers           F = |y| + <b, y>, constant drift covector with |b| < 1
///   ConformalRiemann  F = lambda(x) |y| with lambda = exp(profile)
///   SpherePatch       F = 2 |y| / (1 + |x|^2)   (round sphere, stereographic chart)
///   HyperbolicPatch   F = 2 |y| / (1 - |x|^2)   (Poincare disk, chart |x| < 1)
///
/// DerivativeMode::FiniteDifference replaces the analytic y-derivatives of F^2
/// with central differences at relative step fd_step; it serves as an oracle
/// against the analytic mode.
struct MetricModel {
    MetricKind kind = MetricKind::Euclidean;
    DerivativeMode mode = DerivativeMode::Analytic;
    Covec2 drift{0.0, 0.0};
    ConformalProfile profile{};
    double fd_step = 1e-4;

    static MetricModel euclidean() { return {}; }
    static MetricModel randers(Covec2 b) {
        MetricModel m;
        m.kind = MetricKind::Randers;
        m.drift = b;
        return m;
    }
    static MetricModel conformal(ConformalProfile p) {
        MetricModel m;
        m.kind = MetricKind::ConformalRiemann;
        m.profile = p;
        return m;
    }
    static MetricModel sphere_patch() {
        MetricModel m;
        m.kind = MetricKind::SpherePatch;
        return m;
    }
    static MetricModel hyperbolic_patch() {
        MetricModel m;
        m.kind = MetricKind::HyperbolicPatch;
        return m;
    }

    MetricModel with_mode(DerivativeMode dm) const {
        MetricModel m = *this;
        m.mode = dm;
        return m;
    }

    bool riemannian() const { return kind != MetricKind::Randers; }
    /// True when F does not depend on x (geodesics are straight lines).
    bool minkowski() const { return kind == MetricKind::Euclidean || kind == MetricKind::Randers; }

    /// Conformal factor lambda(x); 1 for Euclidean/Randers.
    double lambda(Point2 x) const;
    /// d log lambda as a covector; zero for Euclidean/Randers.
    Covec2 dlog_lambda(Point2 x) const;

    bool in_chart(Point2 x) const;
    void require_chart(Point2 x) const;
};

/// Reversibility and uniform smoothness/convexity constants over a region.
struct UniformConstants {
    double lambda = 1.0;      // reversibility
    double kappa = 1.0;       // uniform smoothness
    double kappa_star = 1.0;  // uniform convexity
    BallSpec region;
};

struct NewtonOptions {
    int max_iter = 50;
    double tolerance = 1e-10;
};

double eval_metric(const MetricModel& m, Point2 x, Vec2 y);

/// g_ij(x, y) = (F^2)_{y_i y_j} / 2; symmetric positive definite for y != 0.
Mat2 fundamental_tensor(const MetricModel& m, Point2 x, Vec2 y);

/// Cartan tensor C_ijk = (F^2)_{y_i y_j y_k} / 4.
Sym3 cartan_tensor(const MetricModel& m, Point2 x, Vec2 y);

/// Legendre transform y -> g_y(y, .); maps 0 to 0.
Covec2 legendre(const MetricModel& m, Point2 x, Vec2 y);

/// Inverse Legendre transform by damped Newton iteration seeded at the
/// raised-index Euclidean vector.
Vec2 legendre_inverse(const MetricModel& m, Point2 x, Covec2 xi, NewtonOptions opt = {});

/// Dual metric F*(x, xi) = F(x, inverse-Legendre(xi)).
double dual_metric(const MetricModel& m, Point2 x, Covec2 xi);

/// Closed-form F*; identical values to dual_metric but O(1). Hot-loop path
/// for the eikonal and heat solvers; cross-checked in tests.
double dual_metric_fast(const MetricModel& m, Point2 x, Covec2 xi);

/// Closed-form inverse Legendre transform (same map as legendre_inverse).
Vec2 legendre_inverse_fast(const MetricModel& m, Point2 x, Covec2 xi);

/// Dual fundamental tensor g*(x, xi) = g(x, L^{-1} xi)^{-1}.
/// For xi below the degeneracy threshold the tensor at a fixed reference
/// direction is returned (only meaningful where fluxes vanish anyway).
Mat2 dual_tensor(const MetricModel& m, Point2 x, Covec2 xi);

/// max F(x,y)/F(x,-y) over sampled points and an angle grid.
double reversibility(const MetricModel& m, const BallSpec& region, int samples);

/// kappa / kappa* extrema of g_V(W,W)/F^2(x,W) over sampled (x, V, W).
UniformConstants uniform_constants(const MetricModel& m, const BallSpec& region, int samples);

}  // namespace finsler
