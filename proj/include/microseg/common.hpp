// Shared error type and small formatting helpers.
#pragma once

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace microseg {

// Thrown whenever an operation receives inputs that violate its contract.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ValidationError(msg);
}

// Fixed-format double for CSV/JSON output: same value -> same bytes.
inline std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", x);
    return buf;
}

inline bool is_finite(double x) { return std::isfinite(x); }

// FNV-1a over a byte string; used as the content hash of scenario files.
inline std::string content_hash(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace microseg
