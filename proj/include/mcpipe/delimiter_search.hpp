#pragma once

#include <array>
#include <cstdint>

namespace mcpipe {

// Four interchangeable ways of locating a delimiter byte inside a data
// word at an arbitrary starting offset. All return the position of the
// first match relative to the offset (i.e. within the shifted view), or 8
// when no byte at or after the offset matches. ShiftReverse is the default;
// the others exist for equivalence testing and can be selected via
// configuration.
enum class SearchVariant : std::uint8_t {
    ShiftReverse = 0,   // shift the offset away, then scan bytes high-to-low
    ForwardNoShift,     // scan low-to-high over absolute positions
    ReverseNoShift,     // scan high-to-low over absolute positions
    ShiftForward,       // shift, then scan low-to-high
};

inline std::uint8_t find_delimiter(const std::array<std::uint8_t, 8>& word, std::uint8_t offset,
                                   std::uint8_t delimiter, SearchVariant variant) {
    const std::uint8_t span = static_cast<std::uint8_t>(8 - offset);  // bytes in the shifted view
    std::uint8_t start_loc = 8;
    switch (variant) {
        case SearchVariant::ShiftReverse: {
            std::array<std::uint8_t, 8> shifted{};
            for (std::uint8_t i = 0; i < span; ++i) shifted[i] = word[offset + i];
            // Overwriting on every match while walking downward leaves the
            // lowest matching index, so no break or tie comparison is needed.
            for (std::uint8_t i = span; i-- > 0;) {
                if (shifted[i] == delimiter) start_loc = i;
            }
            break;
        }
        case SearchVariant::ForwardNoShift: {
            for (std::uint8_t i = offset; i < 8; ++i) {
                if (word[i] == delimiter) {
                    start_loc = static_cast<std::uint8_t>(i - offset);
                    break;
                }
            }
            break;
        }
        case SearchVariant::ReverseNoShift: {
            for (std::uint8_t i = 8; i-- > offset;) {
                if (word[i] == delimiter) start_loc = static_cast<std::uint8_t>(i - offset);
            }
            break;
        }
        case SearchVariant::ShiftForward: {
            std::array<std::uint8_t, 8> shifted{};
            for (std::uint8_t i = 0; i < span; ++i) shifted[i] = word[offset + i];
            for (std::uint8_t i = 0; i < span; ++i) {
                if (shifted[i] == delimiter) {
                    start_loc = i;
                    break;
                }
            }
            break;
        }
    }
    return start_loc;
}

}  // namespace mcpipe
