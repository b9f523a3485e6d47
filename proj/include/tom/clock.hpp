#pragma once

#include <chrono>
#include <functional>
#include <string>

namespace tom {

using UtcClock = std::function<std::chrono::sys_seconds()>;

inline std::chrono::sys_seconds system_now() {
    return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
}

/// ISO-8601 UTC, second precision: 2024-01-31T12:00:00Z
std::string format_utc(std::chrono::sys_seconds t);

/// Inverse of format_utc; throws Error{InvalidInput} on malformed text.
std::chrono::sys_seconds parse_utc(const std::string& text);

}  // namespace tom
