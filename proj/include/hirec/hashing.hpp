#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace hirec {

// FNV-1a, 64-bit. Fixed parameters so hashed-embedding buckets and prompt
// digests are identical across platforms and builds.
inline uint64_t fnv1a64(std::string_view data) {
    uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char byte : data) {
        hash ^= static_cast<uint64_t>(byte);
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

inline std::string fnv1a64_hex(std::string_view data) {
    static const char* digits = "0123456789abcdef";
    uint64_t hash = fnv1a64(data);
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = digits[hash & 0xF];
        hash >>= 4;
    }
    return out;
}

namespace detail {

inline const std::array<uint32_t, 256>& crc32_table() {
    static const std::array<uint32_t, 256> table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) {
                c = (c & 1) ? (0xEDB88320u ^ (c >> 1)) : (c >> 1);
            }
            t[i] = c;
        }
        return t;
    }();
    return table;
}

}  // namespace detail

// CRC-32 (IEEE 802.3, reflected), the same polynomial zlib uses.
inline uint32_t crc32(const void* data, size_t length, uint32_t seed = 0) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    const auto& table = detail::crc32_table();
    uint32_t crc = seed ^ 0xFFFFFFFFu;
    for (size_t i = 0; i < length; ++i) {
        crc = table[(crc ^ bytes[i]) & 0xFF] ^ (crc >> 8);
    }
    return crc ^ 0xFFFFFFFFu;
}

inline uint32_t crc32(std::string_view data) {
    return crc32(data.data(), data.size());
}

// Lowercase alphanumeric word splitting. ASCII [A-Za-z0-9] runs become
// tokens (letters lowered); every other byte is a separator. Shared by the
// hashed embedder and the heuristic scorer's history matching.
inline std::vector<std::string> tokenize_lower_alnum(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char ch : text) {
        const bool digit = ch >= '0' && ch <= '9';
        const bool lower = ch >= 'a' && ch <= 'z';
        const bool upper = ch >= 'A' && ch <= 'Z';
        if (digit || lower) {
            current.push_back(ch);
        } else if (upper) {
            current.push_back(static_cast<char>(ch - 'A' + 'a'));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

}  // namespace hirec
