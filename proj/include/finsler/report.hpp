#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace finsler {

enum class Verdict { Consistent, Violated, Inconclusive };

std::string to_string(Verdict v);

/// Outcome of one inequality check. The paper's constants are never explicit,
/// so checkers report the minimal constant that makes the inequality hold and
/// its stability across scales; hard pass/fail is reserved for the few bounds
/// with fully explicit constants.
struct InequalityReport {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    std::string rhs_shape;
    double empirical_constant = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::pair<double, double>> scale_series;  // (scale, constant)
    Verdict verdict = Verdict::Inconclusive;
    std::map<std::string, double> details;
    std::string note;
};

nlohmann::json to_json(const InequalityReport& r);
InequalityReport report_from_json(const nlohmann::json& j);

/// Version tag of the report.json schema.
inline constexpr int kReportSchemaVersion = 1;

/// Human-readable JSON schema description for the CLI `schema` command.
std::string report_schema_text();

/// One CSV row: scenario, check, lhs, empirical_constant, verdict.
std::string csv_row(const std::string& scenario, const InequalityReport& r);
inline const char* csv_header() { return "scenario,check,lhs,empirical_constant,verdict\n"; }

/// Fixed-format float used everywhere reports are serialized, so identical
/// runs produce byte-identical files.
std::string format_double(double v);

}  // namespace finsler
