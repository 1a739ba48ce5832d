#pragma once

#include <string>
#include <vector>

#include "finsler/eikonal.hpp"
#include "finsler/metric.hpp"

namespace finsler {

struct WhitneyBall {
    Point2 center;
    double radius = 0.0;
};

struct Chain {
    int target = -1;              // index of the ball the chain leads to
    std::vector<int> indices;     // starts at the central ball, ends at target
    bool complete = false;        // walk found a dilated ball at every step
    bool adjacency_ok = false;    // consecutive dilated balls intersect
};

/// Whitney-type covering of the forward ball B_R(x0): disjoint forward balls
/// with radius d(B, boundary) / (10 Lambda^2)^3, greedy max-radius selection
/// over lattice candidate centers, plus chains joining each ball to the
/// central one along minimizing geodesics.
struct BallCover {
    Point2 x0;
    double R = 0.0;
    double lambda = 1.0;
    double rule_denominator = 0.0;  // (10 Lambda^2)^3 + 1
    std::vector<WhitneyBall> balls;  // greedy order
    int central_index = -1;
    double candidate_spacing = 0.0;
    double min_radius = 0.0;
    double region_cap = 1.0;         // candidates kept where d(x0, x) <= cap * R
    bool resolution_floor = false;   // admissible region smaller than B_R
    double uncovered_fraction = 1.0; // of admissible lattice nodes, under (Lambda+1) dilations
    std::vector<Chain> chains;       // for the sampled targets
};

struct CoverOptions {
    double candidate_spacing = 0.0;  // default: chosen from the central radius
    double region_cap = 0.25;        // restrict candidates to d(x0,x) <= cap * R
    double min_radius_cells = 2.0;   // abandon balls smaller than this many lattice cells
    size_t max_balls = 4000000;
    size_t chain_stride = 1;         // build a chain for every k-th ball
    int support_angles = 512;        // support test resolution for curved models
};

/// df may be null for Minkowski metrics (Euclidean / constant Randers), where
/// all distances are closed-form; curved models need a forward distance field.
BallCover build_whitney_cover(const MetricModel& m, Point2 x0, double R, double lambda,
                              const CoverOptions& opt = {}, const DistanceField* df = nullptr);

/// Chain inequalities from the covering lemmas, checked per constructed chain:
/// r(B) <= (Lambda+2) r(A) and B inside Lambda~ A for every A in the chain,
/// consecutive radii within factor 1 + (10 Lambda)^{-2}, and the geodesic
/// boundary-distance bound d(gamma_B, dB_R) >= d(B, dB_R) / (Lambda+1).
struct ChainCheckReport {
    size_t chains = 0;
    size_t incomplete = 0;
    size_t adjacency_violations = 0;
    size_t radius_violations = 0;        // r(B) <= (Lambda+2) r(A)
    size_t consecutive_violations = 0;   // the (1 + (10 Lambda)^-2)^{+-1} factor
    size_t containment_violations = 0;   // B inside Lambda~ A
    size_t geodesic_violations = 0;
    double worst_radius_ratio = 0.0;     // max r(B)/r(A) observed
    double worst_consecutive = 1.0;      // max consecutive radius factor
    double worst_containment = 0.0;      // max needed dilation / Lambda~
    double lambda_tilde = 0.0;
    bool pass = true;
};

ChainCheckReport verify_chain_properties(const MetricModel& m, const BallCover& cover);

/// Pointwise multiplicity of the 200 Lambda^5 dilations over a counting
/// lattice; the paper asserts a finite bound K without giving one.
struct OverlapReport {
    double dilation = 0.0;
    size_t max_multiplicity = 0;
    size_t min_multiplicity_covered = 0;
    double mean_multiplicity = 0.0;
    size_t lattice_nodes = 0;
};

OverlapReport verify_overlap_bound(const MetricModel& m, const BallCover& cover,
                                   int lattice_n = 96);

void write_json_cover(const BallCover& cover, const std::string& path);

}  // namespace finsler
