#pragma once

#include <string>
#include <vector>

#include "finsler/errors.hpp"
#include "finsler/geom.hpp"

namespace finsler {

/// Uniform rectangular node grid; node (i, j) sits at origin + (i h, j h).
struct Grid2D {
    Point2 origin{0.0, 0.0};
    double h = 0.0;
    int nx = 0;
    int ny = 0;

    Grid2D() = default;
    Grid2D(Point2 o, double spacing, int nodes_x, int nodes_y)
        : origin(o), h(spacing), nx(nodes_x), ny(nodes_y) {
        if (h <= 0.0) throw InvalidArgumentError("Grid2D: spacing must be positive");
        if (nx < 16 || ny < 16) throw InvalidArgumentError("Grid2D: need >= 16 nodes per axis");
    }

    /// Square grid covering [c - half, c + half]^2 with n nodes per axis.
    static Grid2D centered(Point2 c, double half, int n) {
        return Grid2D({c.x - half, c.y - half}, 2.0 * half / (n - 1), n, n);
    }

    size_t size() const { return static_cast<size_t>(nx) * static_cast<size_t>(ny); }
    size_t idx(int i, int j) const { return static_cast<size_t>(j) * nx + i; }
    Point2 node(int i, int j) const { return {origin.x + i * h, origin.y + j * h}; }
    bool interior(int i, int j) const { return i > 0 && i < nx - 1 && j > 0 && j < ny - 1; }
    bool on_boundary(int i, int j) const { return !interior(i, j); }

    /// Nearest node index pair; throws when p is off the grid.
    std::pair<int, int> nearest(Point2 p) const {
        int i = static_cast<int>(std::lround((p.x - origin.x) / h));
        int j = static_cast<int>(std::lround((p.y - origin.y) / h));
        if (i < 0 || i >= nx || j < 0 || j >= ny)
            throw InvalidArgumentError("Grid2D::nearest: point off grid");
        return {i, j};
    }
    bool contains(Point2 p) const {
        return p.x >= origin.x - 1e-12 && p.y >= origin.y - 1e-12 &&
               p.x <= origin.x + (nx - 1) * h + 1e-12 && p.y <= origin.y + (ny - 1) * h + 1e-12;
    }

    bool same_as(const Grid2D& o) const {
        return nx == o.nx && ny == o.ny && h == o.h && origin.x == o.origin.x &&
               origin.y == o.origin.y;
    }
};

struct ScalarField {
    Grid2D grid;
    std::vector<double> v;

    ScalarField() = default;
    explicit ScalarField(const Grid2D& g, double fill = 0.0) : grid(g), v(g.size(), fill) {}

    double& at(int i, int j) { return v[grid.idx(i, j)]; }
    double at(int i, int j) const { return v[grid.idx(i, j)]; }

    template <class F>
    static ScalarField sample(const Grid2D& g, F&& f) {
        ScalarField out(g);
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) out.at(i, j) = f(g.node(i, j));
        return out;
    }

    double max_abs() const {
        double r = 0.0;
        for (double x : v) r = std::max(r, std::abs(x));
        return r;
    }

    /// Bilinear interpolation; clamps to the grid hull.
    double interp(Point2 p) const;
};

struct VecField {
    Grid2D grid;
    std::vector<Vec2> v;
    VecField() = default;
    explicit VecField(const Grid2D& g) : grid(g), v(g.size()) {}
    Vec2& at(int i, int j) { return v[grid.idx(i, j)]; }
    Vec2 at(int i, int j) const { return v[grid.idx(i, j)]; }
};

struct CovecField {
    Grid2D grid;
    std::vector<Covec2> v;
    CovecField() = default;
    explicit CovecField(const Grid2D& g) : grid(g), v(g.size()) {}
    Covec2& at(int i, int j) { return v[grid.idx(i, j)]; }
    Covec2 at(int i, int j) const { return v[grid.idx(i, j)]; }
};

/// Central differences in the interior, one-sided on the boundary.
CovecField differential(const ScalarField& u);

/// Time-indexed sequence of scalar fields with uniform step.
struct SpaceTimeField {
    Grid2D grid;
    double t0 = 0.0;
    double dt = 0.0;
    std::vector<std::vector<double>> frames;

    size_t steps() const { return frames.size(); }
    double time(size_t k) const { return t0 + static_cast<double>(k) * dt; }
    double tmax() const { return frames.empty() ? t0 : time(frames.size() - 1); }

    ScalarField frame(size_t k) const {
        ScalarField f(grid);
        f.v = frames[k];
        return f;
    }

    /// Index range [k0, k1] covering the time window [a, b] (clipped).
    std::pair<size_t, size_t> window(double a, double b) const;

    void append(const ScalarField& f) { frames.push_back(f.v); }
};

void write_csv_scalar(const ScalarField& f, const std::string& path, const std::string& value_name);
void write_csv_spacetime(const SpaceTimeField& f, const std::string& path, size_t frame_stride = 1);

}  // namespace finsler
