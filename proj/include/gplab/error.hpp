#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gplab {

enum class ErrorKind {
    QuadratureNonConvergent,
    InvalidSchedule,
    WindowTooLarge,
    InsufficientPadding,
    WindowTooSmall,
    BisectionNonBracketed,
    InsufficientHits,
    NotPSD,
    ConfigInvalid,
};

std::string_view to_string(ErrorKind kind);

// Single exception type for the library; the kind drives CLI exit codes.
class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& message, std::string field = {})
        : std::runtime_error(std::string(to_string(kind)) + ": " + message),
          kind_(kind),
          field_(std::move(field)) {}

    ErrorKind kind() const noexcept { return kind_; }
    // Dotted config path of the offending field, when known.
    const std::string& field() const noexcept { return field_; }

  private:
    ErrorKind kind_;
    std::string field_;
};

}  // namespace gplab
