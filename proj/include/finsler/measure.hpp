#pragma once

#include "finsler/geom.hpp"
#include "finsler/metric.hpp"

namespace finsler {

/// Smooth weight Phi(x) defining the measure dm = e^{Phi} dx^1 dx^2.
///
/// Two flavors: a quadratic polynomial Phi (covers Lebesgue Phi = 0 and
/// Gaussian Phi = -a|x|^2), or the Riemannian volume of a Riemannian metric
/// model (Phi = 2 log lambda in dimension 2).
struct MeasureModel {
    enum class Kind { Polynomial, RiemannianVolume };

    Kind kind = Kind::Polynomial;
    // Phi = c0 + c1 x + c2 y + c3 x^2 + c4 y^2 + c5 x y  (Polynomial)
    ConformalProfile poly{};
    MetricModel volume_of{};  // RiemannianVolume

    static MeasureModel lebesgue() { return {}; }

    /// Phi = -a |x - c|^2.
    static MeasureModel gaussian(double a, Point2 c = {0.0, 0.0}) {
        MeasureModel mu;
        mu.poly.c3 = -a;
        mu.poly.c4 = -a;
        mu.poly.c1 = 2.0 * a * c.x;
        mu.poly.c2 = 2.0 * a * c.y;
        mu.poly.c0 = -a * (c.x * c.x + c.y * c.y);
        return mu;
    }

    static MeasureModel polynomial(ConformalProfile p) {
        MeasureModel mu;
        mu.poly = p;
        return mu;
    }

    /// Riemannian volume of a Riemannian metric model: sqrt(det g) = lambda^2.
    static MeasureModel riemannian_volume(const MetricModel& m);

    double phi(Point2 x) const {
        if (kind == Kind::Polynomial) return poly.log_lambda(x);
        return 2.0 * std::log(volume_of.lambda(x));
    }

    Covec2 dphi(Point2 x) const {
        if (kind == Kind::Polynomial)
            return {poly.c1 + 2.0 * poly.c3 * x.x + poly.c5 * x.y,
                    poly.c2 + 2.0 * poly.c4 * x.y + poly.c5 * x.x};
        return 2.0 * volume_of.dlog_lambda(x);
    }

    double density(Point2 x) const { return std::exp(phi(x)); }
};

}  // namespace finsler
