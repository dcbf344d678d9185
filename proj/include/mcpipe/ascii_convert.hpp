#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace mcpipe {

enum class ConvError : std::uint8_t { None = 0, Malformed, Overflow };

struct ConvResult {
    std::uint32_t value = 0;
    ConvError error = ConvError::None;
    bool ok() const { return error == ConvError::None; }
};

// Decimal string to 32-bit unsigned: each digit byte minus 48, positionally
// weighted. Rejects non-digit bytes and values that do not fit in 32 bits.
inline ConvResult ascii_to_uint(std::span<const std::uint8_t> digits) {
    if (digits.empty()) return {0, ConvError::Malformed};
    std::uint64_t sum = 0;
    for (std::uint8_t d : digits) {
        if (d < '0' || d > '9') return {0, ConvError::Malformed};
        sum = sum * 10 + (d - '0');
        if (sum > 0xffffffffull) return {0, ConvError::Overflow};
    }
    return {static_cast<std::uint32_t>(sum), ConvError::None};
}

// Shortest decimal representation, inverse of ascii_to_uint.
inline std::string uint_to_ascii(std::uint32_t n) {
    char buf[10];
    std::size_t i = sizeof(buf);
    do {
        buf[--i] = static_cast<char>('0' + n % 10);
        n /= 10;
    } while (n != 0);
    return std::string(buf + i, sizeof(buf) - i);
}

}  // namespace mcpipe
