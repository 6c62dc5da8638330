#include "gplab/report.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace gplab::stats {

Interval wilson(std::size_t hits, std::size_t n, double z) {
    if (n == 0) return {0.0, 1.0};
    const double nn = static_cast<double>(n);
    const double p = static_cast<double>(hits) / nn;
    const double z2 = z * z;
    const double centre = (p + z2 / (2 * nn)) / (1 + z2 / nn);
    const double half = z / (1 + z2 / nn) * std::sqrt(p * (1 - p) / nn + z2 / (4 * nn * nn));
    // Keep the point estimate inside despite rounding at p = 0 or 1.
    return {std::min(p, std::max(0.0, centre - half)), std::max(p, std::min(1.0, centre + half))};
}

double adjusted_sigma(std::size_t hits, std::size_t n) {
    const double nn = static_cast<double>(n) + 4.0;
    const double p = (static_cast<double>(hits) + 2.0) / nn;
    return std::sqrt(p * (1 - p) / nn);
}

EstimateReport EstimateReport::from_counts(std::size_t hits, std::size_t replicas, std::uint64_t seed,
                                           nlohmann::ordered_json params) {
    EstimateReport r;
    r.hits = hits;
    r.replicas = replicas;
    r.estimate = replicas ? static_cast<double>(hits) / static_cast<double>(replicas) : 0.0;
    r.ci = wilson(hits, replicas);
    r.seed = seed;
    r.params = std::move(params);
    return r;
}

nlohmann::ordered_json EstimateReport::to_json() const {
    nlohmann::ordered_json j;
    j["estimate"] = estimate;
    j["ci_lo"] = ci.lo;
    j["ci_hi"] = ci.hi;
    j["hits"] = hits;
    j["n"] = replicas;
    j["seed"] = seed;
    j["params"] = params;
    return j;
}

std::string csv_field(const nlohmann::ordered_json& value) {
    std::string text = value.is_string() ? value.get<std::string>() : value.dump();
    if (text.find_first_of(",\"\n") == std::string::npos) return text;
    std::string quoted = "\"";
    for (char c : text) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    return quoted + '"';
}

void write_reports_csv(std::ostream& out, const std::vector<EstimateReport>& reports) {
    std::vector<std::string> keys;
    for (const auto& r : reports)
        for (const auto& [k, v] : r.params.items())
            if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
    for (const auto& k : keys) out << k << ',';
    out << "estimate,ci_lo,ci_hi,n\n";
    for (const auto& r : reports) {
        for (const auto& k : keys) out << (r.params.contains(k) ? csv_field(r.params[k]) : "") << ',';
        out << nlohmann::json(r.estimate).dump() << ',' << nlohmann::json(r.ci.lo).dump() << ','
            << nlohmann::json(r.ci.hi).dump() << ',' << r.replicas << '\n';
    }
}

}  // namespace gplab::stats
