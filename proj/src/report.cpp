#include "finsler/report.hpp"

#include <cmath>
#include <cstdio>

namespace finsler {

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::Consistent: return "consistent";
        case Verdict::Violated: return "violated";
        case Verdict::Inconclusive: return "inconclusive";
    }
    return "inconclusive";
}

namespace {
Verdict verdict_from(const std::string& s) {
    if (s == "consistent") return Verdict::Consistent;
    if (s == "violated") return Verdict::Violated;
    return Verdict::Inconclusive;
}

nlohmann::json number_or_null(double v) {
    if (std::isnan(v)) return nullptr;
    return v;
}
}  // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

nlohmann::json to_json(const InequalityReport& r) {
    nlohmann::json j;
    j["name"] = r.name;
    j["lhs"] = number_or_null(r.lhs);
    j["rhs"] = number_or_null(r.rhs);
    j["rhs_shape"] = r.rhs_shape;
    j["empirical_constant"] = number_or_null(r.empirical_constant);
    auto& series = j["scale_series"] = nlohmann::json::array();
    for (const auto& [scale, c] : r.scale_series) series.push_back({scale, c});
    j["verdict"] = to_string(r.verdict);
    j["details"] = r.details;
    j["note"] = r.note;
    return j;
}

InequalityReport report_from_json(const nlohmann::json& j) {
    InequalityReport r;
    r.name = j.at("name").get<std::string>();
    r.lhs = j.at("lhs").is_null() ? std::nan("") : j.at("lhs").get<double>();
    r.rhs = j.at("rhs").is_null() ? std::nan("") : j.at("rhs").get<double>();
    r.rhs_shape = j.at("rhs_shape").get<std::string>();
    r.empirical_constant = j.at("empirical_constant").is_null()
                               ? std::nan("")
                               : j.at("empirical_constant").get<double>();
    for (const auto& e : j.at("scale_series"))
        r.scale_series.push_back({e.at(0).get<double>(), e.at(1).get<double>()});
    r.verdict = verdict_from(j.at("verdict").get<std::string>());
    for (auto it = j.at("details").begin(); it != j.at("details").end(); ++it)
        r.details[it.key()] = it.value().get<double>();
    r.note = j.at("note").get<std::string>();
    return r;
}

std::string report_schema_text() {
    return R"({
  "schema_version": 1,
  "seed": "uint64, the run seed",
  "scenario": "string, scenario name",
  "reports": [
    {
      "name": "string",
      "lhs": "number|null",
      "rhs": "number|null",
      "rhs_shape": "string, functional form of the bound",
      "empirical_constant": "number|null, minimal constant making the bound hold",
      "scale_series": [["scale", "constant"], "..."],
      "verdict": "consistent|violated|inconclusive",
      "details": {"key": "number"},
      "note": "string"
    }
  ]
}
)";
}

std::string csv_row(const std::string& scenario, const InequalityReport& r) {
    return scenario + "," + r.name + "," + format_double(r.lhs) + "," +
           format_double(r.empirical_constant) + "," + to_string(r.verdict) + "\n";
}

}  // namespace finsler
