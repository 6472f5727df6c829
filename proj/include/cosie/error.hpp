#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace cosie {

enum class ErrorCode {
    invalid_argument,
    dimension_mismatch,
    io,
    parse,
    validation,
    invalid_parameters,
    singular,
    degenerate_covariance,
};

inline const char* to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::dimension_mismatch: return "dimension mismatch";
    case ErrorCode::io: return "i/o error";
    case ErrorCode::parse: return "parse error";
    case ErrorCode::validation: return "validation error";
    case ErrorCode::invalid_parameters: return "invalid parameters";
    case ErrorCode::singular: return "singular matrix";
    case ErrorCode::degenerate_covariance: return "degenerate covariance";
    }
    return "error";
}

/// Base exception for the library. Every throw site carries a code so callers
/// (and the CLI) can branch without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Structural violation in a matrix that should be a graph. When the problem
/// is located at an entry, the offending (row, col) pair is attached.
class ValidationError : public Error {
public:
    using IndexPair = std::pair<std::size_t, std::size_t>;

    explicit ValidationError(const std::string& what,
                             std::optional<IndexPair> where = std::nullopt)
        : Error(ErrorCode::validation, where ? what + " at (" + std::to_string(where->first) +
                                                   ", " + std::to_string(where->second) + ")"
                                             : what),
          where_(where) {}

    const std::optional<IndexPair>& where() const noexcept { return where_; }

private:
    std::optional<IndexPair> where_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
    if (!cond) fail(code, what);
}

} // namespace cosie
