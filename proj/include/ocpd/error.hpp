#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ocpd {

enum class ErrorCode {
    BadMode,
    ShapeMismatch,
    NonFinite,
    InvalidArgument,
    Diverged,
    NuTooSmall,
    KktViolation,
    EmptyMarginSet,
    Immobile,
    TooFewLocations,
    EmptyStream,
    IoError,
    ParseError,
};

/// Kebab-case name used on the CLI and in logs ("bad-mode", "diverged", ...).
std::string_view code_name(ErrorCode code) noexcept;

/// True for failures that come from the numerics rather than from bad input.
bool is_numerical(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(code_name(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// kkt_partition failure; carries the index that violates its row the most.
class KktViolation : public Error {
public:
    KktViolation(std::size_t index, double amount, const std::string& what)
        : Error(ErrorCode::KktViolation, what), index_(index), amount_(amount) {}

    std::size_t index() const noexcept { return index_; }
    double amount() const noexcept { return amount_; }

private:
    std::size_t index_;
    double amount_;
};

inline std::string_view code_name(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::BadMode: return "bad-mode";
    case ErrorCode::ShapeMismatch: return "shape-mismatch";
    case ErrorCode::NonFinite: return "non-finite";
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::Diverged: return "diverged";
    case ErrorCode::NuTooSmall: return "nu-too-small";
    case ErrorCode::KktViolation: return "kkt-violation";
    case ErrorCode::EmptyMarginSet: return "empty-margin-set";
    case ErrorCode::Immobile: return "immobile";
    case ErrorCode::TooFewLocations: return "too-few-locations";
    case ErrorCode::EmptyStream: return "empty-stream";
    case ErrorCode::IoError: return "io-error";
    case ErrorCode::ParseError: return "parse-error";
    }
    return "unknown";
}

inline bool is_numerical(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::Diverged:
    case ErrorCode::KktViolation:
    case ErrorCode::EmptyMarginSet:
    case ErrorCode::Immobile:
        return true;
    default:
        return false;
    }
}

} // namespace ocpd
