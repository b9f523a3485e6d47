#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tom {

/// Coarse error classes shared by the CLI and HTTP facades.
enum class ErrorCode {
    InvalidInput,
    NotFound,
    Conflict,
    UpstreamUnavailable,
    Internal,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidInput: return "invalid_input";
        case ErrorCode::NotFound: return "not_found";
        case ErrorCode::Conflict: return "conflict";
        case ErrorCode::UpstreamUnavailable: return "upstream_unavailable";
        case ErrorCode::Internal: return "internal";
    }
    return "internal";
}

constexpr int http_status(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidInput: return 422;
        case ErrorCode::NotFound: return 404;
        case ErrorCode::Conflict: return 409;
        case ErrorCode::UpstreamUnavailable: return 502;
        case ErrorCode::Internal: return 500;
    }
    return 500;
}

/// Domain error. `kind` is a stable machine-readable tag (e.g. "unknown_iu")
/// narrower than `code`; `details` carries per-item violations when present.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string kind, const std::string& message,
          std::vector<std::string> details = {})
        : std::runtime_error(message),
          code_(code),
          kind_(std::move(kind)),
          details_(std::move(details)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& kind() const noexcept { return kind_; }
    const std::vector<std::string>& details() const noexcept { return details_; }

private:
    ErrorCode code_;
    std::string kind_;
    std::vector<std::string> details_;
};

}  // namespace tom
