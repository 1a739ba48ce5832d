#pragma once

#include <cstdint>
#include <vector>

#include "finsler/geom.hpp"

namespace finsler {

/// Van der Corput radical inverse for a prime base.
inline double radical_inverse(uint64_t i, uint64_t base) {
    double inv = 1.0 / static_cast<double>(base);
    double f = inv;
    double r = 0.0;
    while (i > 0) {
        r += f * static_cast<double>(i % base);
        i /= base;
        f *= inv;
    }
    return r;
}

/// Deterministic splitmix64; used instead of std::distributions so that
/// sampled values are identical across standard libraries.
struct SplitMix64 {
    uint64_t state;
    explicit SplitMix64(uint64_t seed) : state(seed) {}
    uint64_t next() {
        state += 0x9e3779b97f4a7c15ULL;
        uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    /// Uniform in [a, b).
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
};

/// Halton points inside a Euclidean ball, plus a deterministic boundary ring.
/// The ring makes sampled suprema of boundary-attained quantities exact.
inline std::vector<Point2> sample_ball(const BallSpec& ball, int count, uint64_t seed = 0,
                                       bool include_ring = true) {
    std::vector<Point2> pts;
    pts.reserve(static_cast<size_t>(count));
    int ring = include_ring ? std::max(8, count / 8) : 0;
    int interior = std::max(1, count - ring);
    uint64_t offset = 17 + seed * 131;
    for (int k = 0; k < interior; ++k) {
        // Area-uniform polar map of the (2,3)-Halton sequence.
        double u = radical_inverse(offset + static_cast<uint64_t>(k), 2);
        double v = radical_inverse(offset + static_cast<uint64_t>(k), 3);
        double r = ball.radius * std::sqrt(u);
        double th = 2.0 * M_PI * v;
        pts.push_back({ball.center.x + r * std::cos(th), ball.center.y + r * std::sin(th)});
    }
    for (int k = 0; k < ring; ++k) {
        double th = 2.0 * M_PI * static_cast<double>(k) / static_cast<double>(ring);
        pts.push_back({ball.center.x + ball.radius * std::cos(th),
                       ball.center.y + ball.radius * std::sin(th)});
    }
    return pts;
}

/// Uniform angle grid over [0, 2pi); includes 0 so axis-aligned extrema are hit exactly.
inline std::vector<double> angle_grid(int n) {
    std::vector<double> a(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) a[static_cast<size_t>(k)] = 2.0 * M_PI * k / n;
    return a;
}

inline Vec2 unit_dir(double theta) { return {std::cos(theta), std::sin(theta)}; }

}  // namespace finsler
