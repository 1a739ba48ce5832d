#pragma once

#include <optional>
#include <string>
#include <vector>

#include "finsler/grid.hpp"
#include "finsler/measure.hpp"
#include "finsler/metric.hpp"
#include "finsler/report.hpp"

namespace finsler {

enum class Task {
    Curvature,
    Distance,
    VolumeCompare,
    Heat,
    Poincare,
    Sobolev,
    MeanValue,
    GradientEstimate,
    Harnack,
    Covering,
    All
};

std::string to_string(Task t);

/// Everything a pipeline run needs, parsed from a sectioned key-value file.
struct Scenario {
    std::string name = "scenario";
    Task task = Task::All;
    uint64_t seed = 20240817;

    MetricModel metric;
    MeasureModel measure;

    Point2 grid_center{0.0, 0.0};
    double grid_half = 1.5;
    int grid_nodes = 97;

    // Task parameters (documented in the README config reference).
    double R = 1.0;
    double r1 = 0.5;
    double r2 = 1.0;
    double s = 1.0;
    double p = 2.0;
    double nu = 4.0;
    double delta = 0.6;
    double delta_prime = 0.75;
    double eps = 0.2;
    double tau = 0.4;
    double dt = 5e-4;
    double T = 0.25;
    double t0 = 0.05;
    double f_const = 0.0;
    int samples = 256;
    int snapshot_stride = 8;
    std::string profile = "indicator";  // indicator | taper
    double profile_delta = 0.6;
    std::string initial = "bump";       // kernel | bump | sinsin | constant
    double initial_value = 1.0;
    std::string boundary = "constant";  // kernel | constant | periodic
    double boundary_value = 0.1;
    std::string side = "both";          // sub | super | both
    double cover_cap = 0.1;
    double cover_spacing = 0.0;
    int chain_stride = 1;

    std::string out_dir = "out";

    Grid2D grid() const { return Grid2D::centered(grid_center, grid_half, grid_nodes); }
};

struct ParseIssue {
    std::string key;
    int line = 0;
    std::string reason;
};

struct ParseResult {
    std::optional<Scenario> scenario;
    std::vector<ParseIssue> errors;
    bool ok() const { return scenario.has_value() && errors.empty(); }
};

/// Parses the sectioned key-value configuration; collects precise errors
/// (key, line, reason) instead of failing on the first.
ParseResult parse_config(const std::string& text);
ParseResult parse_config_file(const std::string& path);

struct RunResult {
    int exit_code = 0;
    std::vector<InequalityReport> reports;
};

/// Executes the scenario pipeline and writes report.json, summary.csv and
/// .dat scale-series files into out_dir. Exit code 0 iff no verdict is
/// `violated` and no fatal error occurred.
RunResult run_scenario(const Scenario& s, int threads = 1);

void emit_reports(const Scenario& s, const std::vector<InequalityReport>& reports);

}  // namespace finsler
