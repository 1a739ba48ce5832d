#include "finsler/grid.hpp"

#include <algorithm>
#include <cstdio>

namespace finsler {

double ScalarField::interp(Point2 p) const {
    const auto& g = grid;
    double fx = (p.x - g.origin.x) / g.h;
    double fy = (p.y - g.origin.y) / g.h;
    fx = std::clamp(fx, 0.0, static_cast<double>(g.nx - 1));
    fy = std::clamp(fy, 0.0, static_cast<double>(g.ny - 1));
    int i = std::min(static_cast<int>(fx), g.nx - 2);
    int j = std::min(static_cast<int>(fy), g.ny - 2);
    double ax = fx - i, ay = fy - j;
    return (1 - ax) * (1 - ay) * at(i, j) + ax * (1 - ay) * at(i + 1, j) +
           (1 - ax) * ay * at(i, j + 1) + ax * ay * at(i + 1, j + 1);
}

CovecField differential(const ScalarField& u) {
    const Grid2D& g = u.grid;
    CovecField du(g);
    const double inv2h = 0.5 / g.h;
    const double invh = 1.0 / g.h;
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            double dx, dy;
            if (i == 0)
                dx = (u.at(1, j) - u.at(0, j)) * invh;
            else if (i == g.nx - 1)
                dx = (u.at(g.nx - 1, j) - u.at(g.nx - 2, j)) * invh;
            else
                dx = (u.at(i + 1, j) - u.at(i - 1, j)) * inv2h;
            if (j == 0)
                dy = (u.at(i, 1) - u.at(i, 0)) * invh;
            else if (j == g.ny - 1)
                dy = (u.at(i, g.ny - 1) - u.at(i, g.ny - 2)) * invh;
            else
                dy = (u.at(i, j + 1) - u.at(i, j - 1)) * inv2h;
            du.at(i, j) = {dx, dy};
        }
    }
    return du;
}

std::pair<size_t, size_t> SpaceTimeField::window(double a, double b) const {
    if (frames.empty()) throw InvalidArgumentError("SpaceTimeField::window: empty field");
    auto clampk = [&](double t) {
        double k = (t - t0) / dt;
        long kk = std::lround(std::ceil(k - 1e-9));
        return static_cast<size_t>(std::clamp<long>(kk, 0, static_cast<long>(frames.size()) - 1));
    };
    size_t k0 = clampk(a);
    double kb = (b - t0) / dt;
    long k1 = std::lround(std::floor(kb + 1e-9));
    size_t k1c = static_cast<size_t>(std::clamp<long>(k1, 0, static_cast<long>(frames.size()) - 1));
    if (k1c < k0) k1c = k0;
    return {k0, k1c};
}

namespace {
FILE* open_or_throw(const std::string& path) {
    FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw Error("cannot open for writing: " + path);
    return f;
}
}  // namespace

void write_csv_scalar(const ScalarField& f, const std::string& path,
                      const std::string& value_name) {
    FILE* out = open_or_throw(path);
    std::fprintf(out, "x,y,%s\n", value_name.c_str());
    for (int j = 0; j < f.grid.ny; ++j)
        for (int i = 0; i < f.grid.nx; ++i) {
            Point2 p = f.grid.node(i, j);
            std::fprintf(out, "%.12g,%.12g,%.12g\n", p.x, p.y, f.at(i, j));
        }
    std::fclose(out);
}

void write_csv_spacetime(const SpaceTimeField& f, const std::string& path, size_t frame_stride) {
    FILE* out = open_or_throw(path);
    std::fprintf(out, "t,x,y,u\n");
    for (size_t k = 0; k < f.frames.size(); k += frame_stride) {
        for (int j = 0; j < f.grid.ny; ++j)
            for (int i = 0; i < f.grid.nx; ++i) {
                Point2 p = f.grid.node(i, j);
                std::fprintf(out, "%.12g,%.12g,%.12g,%.12g\n", f.time(k), p.x, p.y,
                             f.frames[k][f.grid.idx(i, j)]);
            }
    }
    std::fclose(out);
}

}  // namespace finsler
