#pragma once

#include <cstdint>
#include <cstddef>
#include <string>
#include <string_view>

namespace bplab {

// FNV-1a, used for config fingerprints and frozen-parameter digests.
inline uint64_t fnv1a(const void* data, size_t len, uint64_t h = 0xCBF29CE484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ull;
    }
    return h;
}

inline uint64_t fnv1a(std::string_view s, uint64_t h = 0xCBF29CE484222325ull) {
    return fnv1a(s.data(), s.size(), h);
}

inline std::string hex64(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return out;
}

} // namespace bplab
