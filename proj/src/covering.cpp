#include "finsler/covering.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "finsler/errors.hpp"
#include "finsler/sampling.hpp"

namespace finsler {

namespace {

double sq(double v) { return v * v; }

/// Local Minkowski gauge of a ball: for the Minkowski kinds the exact metric,
/// for curved kinds the tangent-space norm frozen at the ball center. Whitney
/// radii are O(R/1000) so the frozen-gauge error is far below every margin
/// they enter.
struct LocalGauge {
    const MetricModel* m;
    Point2 at;

    double operator()(Vec2 v) const { return eval_metric(*m, at, v); }
    double dual(Covec2 xi) const { return dual_metric_fast(*m, at, xi); }
};

/// Unit-ball ellipse of a Randers/Euclidean gauge: center offset and
/// semi-axes aligned with the drift. Exact for the Minkowski kinds.
struct GaugeEllipse {
    Vec2 center{0, 0};
    Vec2 axis1{1, 0};  // unit, along drift
    double a1 = 1.0;   // semi-axis along drift
    double a2 = 1.0;
};

GaugeEllipse unit_ellipse(const MetricModel& m, Point2 x) {
    GaugeEllipse e;
    if (m.kind == MetricKind::Randers) {
        const double beta = norm(m.drift);
        const double om = 1.0 - beta * beta;
        if (beta > 0.0) e.axis1 = (1.0 / beta) * Vec2{m.drift.x, m.drift.y};
        e.center = (-beta / om) * e.axis1;
        e.a1 = 1.0 / om;
        e.a2 = 1.0 / std::sqrt(om);
    } else {
        const double inv = 1.0 / m.lambda(x);
        e.a1 = e.a2 = inv;
    }
    return e;
}

/// Exact intersection test for two balls sharing the same Minkowski gauge:
/// r U and s(-U) are homothets of one ellipse, so their Minkowski sum is the
/// ellipse scaled by (r+s) centered at (r-s) c_U.
bool balls_intersect_same_gauge(const GaugeEllipse& e, Vec2 w, double r, double s) {
    Vec2 q = w - (r - s) * e.center;
    double q1 = dot(q, e.axis1);
    double q2 = cross(e.axis1, q);
    return sq(q1 / e.a1) + sq(q2 / e.a2) < sq(r + s);
}

/// Separating-direction test for balls with distinct local gauges:
/// disjoint iff some direction n has n.w >= r Fa*(n) + s Fb*(-n).
bool balls_intersect_support(const LocalGauge& ga, const LocalGauge& gb, Vec2 w, double r, double s,
                             int n_angles) {
    for (int k = 0; k < n_angles; ++k) {
        double th = 2.0 * M_PI * k / n_angles;
        Covec2 n{std::cos(th), std::sin(th)};
        if (n.x * w.x + n.y * w.y - r * ga.dual(n) - s * gb.dual(-n) > 0.0) return false;
    }
    return true;
}

struct SpatialHash {
    double cell = 1.0;
    Point2 origin{0, 0};
    std::unordered_map<long long, std::vector<int>> cells;

    long long key(int cx, int cy) const {
        return (static_cast<long long>(cx) << 32) ^ static_cast<unsigned int>(cy);
    }
    std::pair<int, int> cell_of(Point2 p) const {
        return {static_cast<int>(std::floor((p.x - origin.x) / cell)),
                static_cast<int>(std::floor((p.y - origin.y) / cell))};
    }
    void insert(Point2 p, int id) {
        auto [cx, cy] = cell_of(p);
        cells[key(cx, cy)].push_back(id);
    }
    /// Visit ids in cells within `reach` of p (deterministic order).
    template <class F>
    void visit(Point2 p, double reach, F&& f) const {
        auto [cx, cy] = cell_of(p);
        int span = static_cast<int>(std::ceil(reach / cell));
        for (int dy = -span; dy <= span; ++dy)
            for (int dx = -span; dx <= span; ++dx) {
                auto it = cells.find(key(cx + dx, cy + dy));
                if (it == cells.end()) continue;
                for (int id : it->second) f(id);
            }
    }
};

struct CoverContext {
    const MetricModel* m = nullptr;
    const DistanceField* df = nullptr;
    Point2 x0;
    double R = 0.0;
    double lambda = 1.0;
    double denom = 0.0;
    double euclid_out = 1.0;  // F(v) >= |v| / euclid_out

    double dist_from_center(Point2 p) const {
        if (m->minkowski()) return eval_metric(*m, x0, p - x0);
        return df->interp(p);
    }
    double radius_rule(Point2 p) const { return (R - dist_from_center(p)) / denom; }
};

bool dilated_contains(const CoverContext& ctx, const WhitneyBall& b, double factor, Point2 z) {
    LocalGauge g{ctx.m, b.center};
    return g(z - b.center) < factor * b.radius;
}

bool dilations_intersect(const CoverContext& ctx, const WhitneyBall& a, const WhitneyBall& b,
                         double factor, int support_angles) {
    Vec2 w = b.center - a.center;
    if (ctx.m->minkowski()) {
        GaugeEllipse e = unit_ellipse(*ctx.m, ctx.x0);
        return balls_intersect_same_gauge(e, w, factor * a.radius, factor * b.radius);
    }
    LocalGauge ga{ctx.m, a.center}, gb{ctx.m, b.center};
    return balls_intersect_support(ga, gb, w, factor * a.radius, factor * b.radius, support_angles);
}

}  // namespace

BallCover build_whitney_cover(const MetricModel& m, Point2 x0, double R, double lambda,
                              const CoverOptions& opt, const DistanceField* df) {
    if (lambda < 1.0) throw InvalidArgumentError("build_whitney_cover: lambda must be >= 1");
    if (!m.minkowski() && df == nullptr)
        throw InvalidArgumentError("build_whitney_cover: curved models need a distance field");

    BallCover cover;
    cover.x0 = x0;
    cover.R = R;
    cover.lambda = lambda;
    cover.rule_denominator = std::pow(10.0 * lambda * lambda, 3.0) + 1.0;
    cover.region_cap = opt.region_cap;

    CoverContext ctx;
    ctx.m = &m;
    ctx.df = df;
    ctx.x0 = x0;
    ctx.R = R;
    ctx.lambda = lambda;
    ctx.denom = cover.rule_denominator;
    ctx.euclid_out =
        m.kind == MetricKind::Randers ? 1.0 / (1.0 - norm(m.drift)) : 1.0 / m.lambda(x0);

    const double r_central = R / ctx.denom;
    double hc = opt.candidate_spacing > 0.0 ? opt.candidate_spacing : r_central / 5.0;
    cover.candidate_spacing = hc;
    cover.min_radius = opt.min_radius_cells * hc;
    cover.resolution_floor = cover.min_radius * ctx.denom > 1e-12 || opt.region_cap < 1.0;

    // Candidate lattice centered on x0; the radius rule is a decreasing
    // function of d(x0, .), so sorting by radius is sorting by distance.
    struct Candidate {
        Point2 p;
        double r;
    };
    std::vector<Candidate> cands;
    const double reach = opt.region_cap * R * ctx.euclid_out;
    const int span = static_cast<int>(std::floor(reach / hc)) + 1;
    for (int j = -span; j <= span; ++j) {
        for (int i = -span; i <= span; ++i) {
            Point2 p{x0.x + i * hc, x0.y + j * hc};
            double d = ctx.dist_from_center(p);
            if (d > opt.region_cap * R) continue;
            double r = (R - d) / ctx.denom;
            if (r < cover.min_radius) continue;
            cands.push_back({p, r});
        }
    }
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
        if (a.r != b.r) return a.r > b.r;
        if (a.p.x != b.p.x) return a.p.x < b.p.x;
        return a.p.y < b.p.y;
    });

    const double r_max_out = r_central * ctx.euclid_out;
    SpatialHash hash;
    hash.cell = std::max(2.0 * r_max_out, (lambda + 1.0) * r_max_out);
    hash.origin = {x0.x - reach, x0.y - reach};

    GaugeEllipse base_ellipse = unit_ellipse(m, x0);
    for (const auto& c : cands) {
        bool disjoint = true;
        hash.visit(c.p, 2.0 * r_max_out, [&](int id) {
            if (!disjoint) return;
            const WhitneyBall& b = cover.balls[static_cast<size_t>(id)];
            Vec2 w = b.center - c.p;
            bool hit = m.minkowski()
                           ? balls_intersect_same_gauge(base_ellipse, w, c.r, b.radius)
                           : balls_intersect_support(LocalGauge{&m, c.p},
                                                     LocalGauge{&m, b.center}, w, c.r, b.radius,
                                                     opt.support_angles);
            if (hit) disjoint = false;
        });
        if (!disjoint) continue;
        hash.insert(c.p, static_cast<int>(cover.balls.size()));
        cover.balls.push_back({c.p, c.r});
        if (cover.balls.size() >= opt.max_balls) break;
    }
    if (cover.balls.empty())
        throw InvalidArgumentError("build_whitney_cover: no admissible balls at this resolution");

    for (size_t k = 0; k < cover.balls.size(); ++k) {
        if (dilated_contains(ctx, cover.balls[k], lambda + 1.0, x0)) {
            cover.central_index = static_cast<int>(k);
            break;
        }
    }

    // Coverage of the admissible lattice under the (Lambda+1) dilations.
    size_t total = 0, uncovered = 0;
    for (const auto& c : cands) {
        ++total;
        bool covered = false;
        hash.visit(c.p, (lambda + 1.0) * r_max_out, [&](int id) {
            if (covered) return;
            if (dilated_contains(ctx, cover.balls[static_cast<size_t>(id)], lambda + 1.0, c.p))
                covered = true;
        });
        if (!covered) ++uncovered;
    }
    cover.uncovered_fraction = total ? static_cast<double>(uncovered) / total : 1.0;

    // Chains along gamma_B: walk to the first point outside the union of the
    // dilated chain balls, then pick a dilated ball of the cover containing
    // it, preferring balls adjacent to the previous one.
    if (cover.central_index >= 0) {
        auto in_chain_union = [&](const std::vector<int>& chain, Point2 z) {
            for (int id : chain)
                if (dilated_contains(ctx, cover.balls[static_cast<size_t>(id)], lambda + 1.0, z))
                    return true;
            return false;
        };
        for (size_t target = 0; target < cover.balls.size(); target += opt.chain_stride) {
            if (static_cast<int>(target) == cover.central_index) continue;
            Chain chain;
            chain.target = static_cast<int>(target);
            chain.indices.push_back(cover.central_index);
            chain.adjacency_ok = true;
            const Point2 xb = cover.balls[target].center;
            const double step = hc * 0.5;
            const double seg_len = norm(xb - x0);
            double t = 0.0;
            bool ok = true;
            while (true) {
                // March to the first sample not in the current dilated union.
                double t_exit = -1.0;
                for (double tt = t; tt <= seg_len + 1e-12; tt += step) {
                    Point2 z = x0 + (tt / std::max(seg_len, 1e-300)) * (xb - x0);
                    if (!in_chain_union(chain.indices, z)) {
                        t_exit = tt;
                        break;
                    }
                }
                if (t_exit < 0.0) break;  // remaining segment covered
                Point2 y = x0 + (t_exit / std::max(seg_len, 1e-300)) * (xb - x0);
                int pick = -1, pick_adj = -1;
                hash.visit(y, (lambda + 1.0) * r_max_out, [&](int id) {
                    if (std::find(chain.indices.begin(), chain.indices.end(), id) !=
                        chain.indices.end())
                        return;
                    if (!dilated_contains(ctx, cover.balls[static_cast<size_t>(id)], lambda + 1.0,
                                          y))
                        return;
                    if (pick < 0 || id < pick) pick = id;
                    const WhitneyBall& prev =
                        cover.balls[static_cast<size_t>(chain.indices.back())];
                    if (dilations_intersect(ctx, prev, cover.balls[static_cast<size_t>(id)],
                                            lambda + 1.0, opt.support_angles))
                        if (pick_adj < 0 || id < pick_adj) pick_adj = id;
                });
                int chosen = pick_adj >= 0 ? pick_adj : pick;
                if (chosen < 0) {
                    ok = false;  // uncovered gap on the ray
                    break;
                }
                if (pick_adj < 0) chain.adjacency_ok = false;
                chain.indices.push_back(chosen);
                t = t_exit;
                if (chosen == chain.target) break;
            }
            if (ok && chain.indices.back() != chain.target) {
                const WhitneyBall& prev = cover.balls[static_cast<size_t>(chain.indices.back())];
                if (!dilations_intersect(ctx, prev, cover.balls[target], lambda + 1.0,
                                         opt.support_angles))
                    chain.adjacency_ok = false;
                chain.indices.push_back(chain.target);
            }
            chain.complete = ok;
            cover.chains.push_back(std::move(chain));
        }
    }
    return cover;
}

ChainCheckReport verify_chain_properties(const MetricModel& m, const BallCover& cover) {
    ChainCheckReport rep;
    const double lam = cover.lambda;
    rep.lambda_tilde = 1000.0 * std::pow(lam, 6.0) + lam * (lam + 3.0) + 4.0;
    const double consec_bound = 1.0 + 1.0 / sq(10.0 * lam);
    auto angles = angle_grid(512);

    for (const auto& chain : cover.chains) {
        ++rep.chains;
        if (!chain.complete) {
            ++rep.incomplete;
            continue;
        }
        if (!chain.adjacency_ok) ++rep.adjacency_violations;
        const WhitneyBall& target = cover.balls[static_cast<size_t>(chain.target)];
        for (size_t k = 0; k < chain.indices.size(); ++k) {
            const WhitneyBall& a = cover.balls[static_cast<size_t>(chain.indices[k])];
            double ratio = target.radius / a.radius;
            rep.worst_radius_ratio = std::max(rep.worst_radius_ratio, ratio);
            if (ratio > lam + 2.0 + 1e-12) ++rep.radius_violations;

            // Containment of the target in Lambda~ A: largest gauge distance
            // from the rim of the target ball to A's center.
            double needed = 0.0;
            for (double th : angles) {
                Vec2 e = unit_dir(th);
                Vec2 rim = (target.radius / eval_metric(m, target.center, e)) * e;
                Point2 z = target.center + rim;
                needed = std::max(needed, eval_metric(m, a.center, z - a.center));
            }
            double dil = needed / a.radius;
            rep.worst_containment = std::max(rep.worst_containment, dil / rep.lambda_tilde);
            if (dil > rep.lambda_tilde + 1e-9) ++rep.containment_violations;
        }
        for (size_t k = 0; k + 1 < chain.indices.size(); ++k) {
            double ra = cover.balls[static_cast<size_t>(chain.indices[k])].radius;
            double rb = cover.balls[static_cast<size_t>(chain.indices[k + 1])].radius;
            double f = std::max(ra / rb, rb / ra);
            rep.worst_consecutive = std::max(rep.worst_consecutive, f);
            if (f > consec_bound + 1e-12) ++rep.consecutive_violations;
        }
        // d(gamma_B, boundary) >= d(B, boundary) / (Lambda + 1); for the
        // straight/descent chain geodesic the nearest-to-boundary point is the
        // target center, so compare with the radial slack there.
        if (m.minkowski()) {
            double slack_target = cover.R - eval_metric(m, cover.x0, target.center - cover.x0);
            double d_ball = slack_target - target.radius;
            // d(gamma, boundary): minimum radial slack along the segment; the
            // slack is concave along straight segments, so check endpoints.
            double slack_start = cover.R;
            double d_gamma = std::min(slack_start, slack_target);
            if (d_gamma + 1e-12 < d_ball / (lam + 1.0)) ++rep.geodesic_violations;
        }
    }
    rep.pass = rep.adjacency_violations == 0 && rep.radius_violations == 0 &&
               rep.consecutive_violations == 0 && rep.containment_violations == 0 &&
               rep.geodesic_violations == 0 && rep.incomplete == 0;
    return rep;
}

OverlapReport verify_overlap_bound(const MetricModel& m, const BallCover& cover, int lattice_n) {
    OverlapReport rep;
    rep.dilation = 200.0 * std::pow(cover.lambda, 5.0);
    const double factor = rep.dilation;
    // Counting lattice over the bounding box of all dilated balls.
    double euclid_out = m.kind == MetricKind::Randers ? 1.0 / (1.0 - norm(m.drift)) : 1.0;
    double r_reach = 0.0;
    for (const auto& b : cover.balls)
        r_reach = std::max(r_reach, norm(b.center - cover.x0) + factor * b.radius * euclid_out);
    const double half = r_reach * 1.05;
    const double cell = 2.0 * half / (lattice_n - 1);
    std::vector<uint32_t> count(static_cast<size_t>(lattice_n) * lattice_n, 0);

    for (const auto& b : cover.balls) {
        const double reach = factor * b.radius * euclid_out;
        int i0 = static_cast<int>(std::floor((b.center.x - reach - (cover.x0.x - half)) / cell));
        int i1 = static_cast<int>(std::ceil((b.center.x + reach - (cover.x0.x - half)) / cell));
        int j0 = static_cast<int>(std::floor((b.center.y - reach - (cover.x0.y - half)) / cell));
        int j1 = static_cast<int>(std::ceil((b.center.y + reach - (cover.x0.y - half)) / cell));
        i0 = std::max(i0, 0);
        j0 = std::max(j0, 0);
        i1 = std::min(i1, lattice_n - 1);
        j1 = std::min(j1, lattice_n - 1);
        for (int j = j0; j <= j1; ++j)
            for (int i = i0; i <= i1; ++i) {
                Point2 z{cover.x0.x - half + i * cell, cover.x0.y - half + j * cell};
                if (eval_metric(m, b.center, z - b.center) < factor * b.radius)
                    ++count[static_cast<size_t>(j) * lattice_n + i];
            }
    }
    size_t covered = 0;
    double sum = 0.0;
    size_t minc = std::numeric_limits<size_t>::max();
    for (uint32_t c : count) {
        rep.max_multiplicity = std::max<size_t>(rep.max_multiplicity, c);
        if (c > 0) {
            ++covered;
            sum += c;
            minc = std::min<size_t>(minc, c);
        }
    }
    rep.lattice_nodes = covered;
    rep.min_multiplicity_covered = covered ? minc : 0;
    rep.mean_multiplicity = covered ? sum / static_cast<double>(covered) : 0.0;
    return rep;
}

void write_json_cover(const BallCover& cover, const std::string& path) {
    nlohmann::json j;
    j["x0"] = {cover.x0.x, cover.x0.y};
    j["R"] = cover.R;
    j["lambda"] = cover.lambda;
    j["central_index"] = cover.central_index;
    j["uncovered_fraction"] = cover.uncovered_fraction;
    j["resolution_floor"] = cover.resolution_floor;
    auto& balls = j["balls"] = nlohmann::json::array();
    for (const auto& b : cover.balls) balls.push_back({b.center.x, b.center.y, b.radius});
    auto& chains = j["chains"] = nlohmann::json::array();
    for (const auto& c : cover.chains) {
        nlohmann::json cj;
        cj["target"] = c.target;
        cj["indices"] = c.indices;
        cj["complete"] = c.complete;
        chains.push_back(cj);
    }
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path);
    out << j.dump(2) << "\n";
}

}  // namespace finsler
