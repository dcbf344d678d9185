#include "mcpipe/jenkins_hash.hpp"

#include <bit>

namespace mcpipe {

namespace {

inline void mix(std::uint32_t& a, std::uint32_t& b, std::uint32_t& c) {
    a -= c; a ^= std::rotl(c, 4);  c += b;
    b -= a; b ^= std::rotl(a, 6);  a += c;
    c -= b; c ^= std::rotl(b, 8);  b += a;
    a -= c; a ^= std::rotl(c, 16); c += b;
    b -= a; b ^= std::rotl(a, 19); a += c;
    c -= b; c ^= std::rotl(b, 4);  b += a;
}

inline void final_mix(std::uint32_t& a, std::uint32_t& b, std::uint32_t& c) {
    c ^= b; c -= std::rotl(b, 14);
    a ^= c; a -= std::rotl(c, 11);
    b ^= a; b -= std::rotl(a, 25);
    c ^= b; c -= std::rotl(b, 16);
    a ^= c; a -= std::rotl(c, 4);
    b ^= a; b -= std::rotl(a, 14);
    c ^= b; c -= std::rotl(b, 24);
}

inline std::uint32_t le32(const std::uint8_t* k, std::size_t n) {
    std::uint32_t v = 0;
    for (std::size_t i = 0; i < n; ++i) v |= static_cast<std::uint32_t>(k[i]) << (8 * i);
    return v;
}

}  // namespace

std::uint32_t bj_hash(std::span<const std::uint8_t> key, std::uint32_t init) {
    std::uint32_t a, b, c;
    a = b = c = 0xdeadbeef + static_cast<std::uint32_t>(key.size()) + init;

    const std::uint8_t* k = key.data();
    std::size_t len = key.size();
    while (len > 12) {
        a += le32(k, 4);
        b += le32(k + 4, 4);
        c += le32(k + 8, 4);
        mix(a, b, c);
        len -= 12;
        k += 12;
    }

    if (len == 0) return c;  // zero-length keys require no mixing
    a += le32(k, len < 4 ? len : 4);
    if (len > 4) b += le32(k + 4, len < 8 ? len - 4 : 4);
    if (len > 8) c += le32(k + 8, len - 8);
    final_mix(a, b, c);
    return c;
}

}  // namespace mcpipe
