#pragma once

#include <charconv>
#include <cmath>
#include <string>

namespace gplab {

// Shortest decimal text that parses back to the same double.
inline std::string format_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace gplab
