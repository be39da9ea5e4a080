#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace shotsearch {

/// Failure classes surfaced by loaders, indexes and the service layer.
enum class ErrorKind {
    Io,
    Parse,
    Validation,
    Format,
    UnknownKeyframe,
    UnknownShot,
    UnknownLabel,
    OutOfRange,
    Duplicate,
    DimensionMismatch,
    WidthMismatch,
    InvalidArgument,
    ChecksumMismatch,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind)
    {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace shotsearch
