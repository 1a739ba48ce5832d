#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace finsler {

/// Chart coordinates of a point on the 2-D chart.
struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

/// Tangent vector at a chart point.
struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    double& operator[](int i) { return i == 0 ? x : y; }
    double operator[](int i) const { return i == 0 ? x : y; }
};

/// Cotangent vector (covector) at a chart point.
struct Covec2 {
    double x = 0.0;
    double y = 0.0;

    double& operator[](int i) { return i == 0 ? x : y; }
    double operator[](int i) const { return i == 0 ? x : y; }
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }
inline Covec2 operator+(Covec2 a, Covec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Covec2 operator-(Covec2 a, Covec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Covec2 operator*(double s, Covec2 a) { return {s * a.x, s * a.y}; }
inline Covec2 operator-(Covec2 a) { return {-a.x, -a.y}; }
inline Point2 operator+(Point2 p, Vec2 v) { return {p.x + v.x, p.y + v.y}; }
inline Vec2 operator-(Point2 p, Point2 q) { return {p.x - q.x, p.y - q.y}; }

/// Natural pairing xi(v).
inline double pair(Covec2 xi, Vec2 v) { return xi.x * v.x + xi.y * v.y; }

inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }
inline double norm(Covec2 xi) { return std::hypot(xi.x, xi.y); }
inline double norm(Point2 p) { return std::hypot(p.x, p.y); }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }

inline bool finite(Vec2 v) { return std::isfinite(v.x) && std::isfinite(v.y); }
inline bool finite(Covec2 v) { return std::isfinite(v.x) && std::isfinite(v.y); }
inline bool finite(Point2 v) { return std::isfinite(v.x) && std::isfinite(v.y); }

/// Dense 2x2 matrix, row major.
struct Mat2 {
    double a11 = 0.0, a12 = 0.0, a21 = 0.0, a22 = 0.0;

    static Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }

    double operator()(int i, int j) const {
        return i == 0 ? (j == 0 ? a11 : a12) : (j == 0 ? a21 : a22);
    }
    double& at(int i, int j) {
        return i == 0 ? (j == 0 ? a11 : a12) : (j == 0 ? a21 : a22);
    }

    double det() const { return a11 * a22 - a12 * a21; }
    double trace() const { return a11 + a22; }

    Mat2 inverse() const {
        const double d = det();
        return {a22 / d, -a12 / d, -a21 / d, a11 / d};
    }

    Vec2 solve(Covec2 rhs) const {
        const double d = det();
        return {(a22 * rhs.x - a12 * rhs.y) / d, (-a21 * rhs.x + a11 * rhs.y) / d};
    }

    /// Quadratic form v^T A v.
    double quad(Vec2 v) const {
        return a11 * v.x * v.x + (a12 + a21) * v.x * v.y + a22 * v.y * v.y;
    }
    double quad(Covec2 v) const {
        return a11 * v.x * v.x + (a12 + a21) * v.x * v.y + a22 * v.y * v.y;
    }

    /// Bilinear form u^T A w.
    double bilinear(Vec2 u, Vec2 w) const {
        return u.x * (a11 * w.x + a12 * w.y) + u.y * (a21 * w.x + a22 * w.y);
    }

    Covec2 apply(Vec2 v) const { return {a11 * v.x + a12 * v.y, a21 * v.x + a22 * v.y}; }
    Vec2 apply_up(Covec2 xi) const { return {a11 * xi.x + a12 * xi.y, a21 * xi.x + a22 * xi.y}; }

    /// Eigenvalues of the symmetric part, ascending.
    std::array<double, 2> sym_eigenvalues() const {
        const double b = 0.5 * (a12 + a21);
        const double tr = a11 + a22;
        const double disc = std::sqrt(std::max(0.0, 0.25 * (a11 - a22) * (a11 - a22) + b * b));
        return {0.5 * tr - disc, 0.5 * tr + disc};
    }

    bool positive_definite() const {
        auto ev = sym_eigenvalues();
        return ev[0] > 0.0;
    }
};

inline Mat2 operator+(Mat2 a, Mat2 b) {
    return {a.a11 + b.a11, a.a12 + b.a12, a.a21 + b.a21, a.a22 + b.a22};
}
inline Mat2 operator-(Mat2 a, Mat2 b) {
    return {a.a11 - b.a11, a.a12 - b.a12, a.a21 - b.a21, a.a22 - b.a22};
}
inline Mat2 operator*(double s, Mat2 a) { return {s * a.a11, s * a.a12, s * a.a21, s * a.a22}; }
inline Mat2 operator*(Mat2 a, Mat2 b) {
    return {a.a11 * b.a11 + a.a12 * b.a21, a.a11 * b.a12 + a.a12 * b.a22,
            a.a21 * b.a11 + a.a22 * b.a21, a.a21 * b.a12 + a.a22 * b.a22};
}

/// Totally symmetric rank-3 tensor in 2-D: four independent components.
struct Sym3 {
    // c[k] holds the component with k indices equal to 1 (0-based second axis),
    // i.e. c[0]=T_000, c[1]=T_001, c[2]=T_011, c[3]=T_111.
    std::array<double, 4> c{0.0, 0.0, 0.0, 0.0};

    double operator()(int i, int j, int k) const { return c[static_cast<size_t>(i + j + k)]; }
    double& at_count(int ones) { return c[static_cast<size_t>(ones)]; }

    /// Contraction T(v, ., .) as a symmetric matrix.
    Mat2 contract(Vec2 v) const {
        Mat2 m;
        m.a11 = c[0] * v.x + c[1] * v.y;
        m.a12 = c[1] * v.x + c[2] * v.y;
        m.a21 = m.a12;
        m.a22 = c[2] * v.x + c[3] * v.y;
        return m;
    }

    double max_abs() const {
        double r = 0.0;
        for (double v : c) r = std::max(r, std::abs(v));
        return r;
    }
};

/// Euclidean ball on the chart; used as a sampling region descriptor.
struct BallSpec {
    Point2 center;
    double radius = 1.0;
};

}  // namespace finsler
