#pragma once

#include <cstdint>
#include <iosfwd>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

namespace gplab::stats {

inline constexpr double kZ95 = 1.959963984540054;
inline constexpr double kZ95OneSided = 1.6448536269514722;

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
};

/// Wilson score interval for a binomial proportion.
Interval wilson(std::size_t hits, std::size_t n, double z = kZ95);

/// Standard error from the Agresti-Coull adjusted proportion (hits+2)/(n+4);
/// stays positive when hits is 0 or n.
double adjusted_sigma(std::size_t hits, std::size_t n);

/// Monte Carlo frequency with its interval and the parameters that produced it.
struct EstimateReport {
    double estimate = 0.0;
    Interval ci;
    std::size_t hits = 0;
    std::size_t replicas = 0;
    std::uint64_t seed = 0;
    nlohmann::ordered_json params = nlohmann::ordered_json::object();

    static EstimateReport from_counts(std::size_t hits, std::size_t replicas, std::uint64_t seed,
                                      nlohmann::ordered_json params = nlohmann::ordered_json::object());
    double sigma() const { return adjusted_sigma(hits, replicas); }
    nlohmann::ordered_json to_json() const;
};

/// CSV with one row per report: parameter columns (the union of keys, in
/// first-seen order, nested values as JSON text) then estimate, ci_lo, ci_hi, n.
void write_reports_csv(std::ostream& out, const std::vector<EstimateReport>& reports);

/// Cell text for CSV output; quotes fields containing separators.
std::string csv_field(const nlohmann::ordered_json& value);

}  // namespace gplab::stats
