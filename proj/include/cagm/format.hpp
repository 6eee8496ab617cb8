#pragma once

// Deterministic float/int text formatting shared by every artifact writer
// (CSV metrics, checkpoints, dataset dumps). Doubles use shortest
// round-trip form via std::to_chars, so emitted files are byte-stable for
// identical values and parse back to the exact same bits.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <string>
#include <system_error>

#include "cagm/error.hpp"

namespace cagm {

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string format_u64(std::uint64_t v) { return std::to_string(v); }

inline double parse_double(const std::string& text) {
    if (text == "nan") return std::nan("");
    if (text == "inf") return HUGE_VAL;
    if (text == "-inf") return -HUGE_VAL;
    double value = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
        throw ValidationError("parse_double: bad number '" + text + "'");
    return value;
}

inline long long parse_int(const std::string& text) {
    long long value = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
        throw ValidationError("parse_int: bad integer '" + text + "'");
    return value;
}

inline std::uint64_t parse_u64(const std::string& text) {
    std::uint64_t value = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
        throw ValidationError("parse_u64: bad unsigned integer '" + text + "'");
    return value;
}

// FNV-1a 64-bit, used for config digests and batch-order digests.
inline std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return s;
}

}  // namespace cagm
