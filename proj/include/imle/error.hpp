#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace imle {

/// Category of a library failure. Callers branch on the code; the message is for humans.
enum class ErrorCode {
    invalid_argument,
    dimension_mismatch,
    non_finite,
    io,
    bad_magic,
    unsupported_type,
    truncated_header,
    truncated_payload,
    parse,
    ragged_rows,
    infeasible,
    divergence,
    config,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::dimension_mismatch: return "dimension mismatch";
    case ErrorCode::non_finite: return "non-finite value";
    case ErrorCode::io: return "i/o error";
    case ErrorCode::bad_magic: return "bad magic";
    case ErrorCode::unsupported_type: return "unsupported element type";
    case ErrorCode::truncated_header: return "truncated header";
    case ErrorCode::truncated_payload: return "truncated payload";
    case ErrorCode::parse: return "parse error";
    case ErrorCode::ragged_rows: return "ragged rows";
    case ErrorCode::infeasible: return "infeasible";
    case ErrorCode::divergence: return "divergence";
    case ErrorCode::config: return "configuration error";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

namespace detail {

inline void require(bool cond, ErrorCode code, const std::string& what) {
    if (!cond) throw Error(code, what);
}

inline void require_dims(std::size_t a, std::size_t b, std::string_view where) {
    if (a != b) {
        throw Error(ErrorCode::dimension_mismatch,
                    std::string(where) + ": " + std::to_string(a) + " vs " + std::to_string(b));
    }
}

} // namespace detail
} // namespace imle
