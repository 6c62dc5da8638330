#include "gplab/error.hpp"

namespace gplab {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::QuadratureNonConvergent: return "QuadratureNonConvergent";
        case ErrorKind::InvalidSchedule: return "InvalidSchedule";
        case ErrorKind::WindowTooLarge: return "WindowTooLarge";
        case ErrorKind::InsufficientPadding: return "InsufficientPadding";
        case ErrorKind::WindowTooSmall: return "WindowTooSmall";
        case ErrorKind::BisectionNonBracketed: return "BisectionNonBracketed";
        case ErrorKind::InsufficientHits: return "InsufficientHits";
        case ErrorKind::NotPSD: return "NotPSD";
        case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    }
    return "Unknown";
}

}  // namespace gplab
