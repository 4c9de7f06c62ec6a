#pragma once

#include <charconv>
#include <string>
#include <system_error>

namespace airfc {

/// Shortest decimal form that round-trips to the same double. Locale independent.
inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    if (res.ec != std::errc{}) return "nan";
    return std::string(buf, res.ptr);
}

}  // namespace airfc
