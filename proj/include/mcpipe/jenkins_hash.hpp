#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace mcpipe {

// Bob Jenkins' lookup3 hash (hashlittle), bit-exact with the published
// reference for byte-string keys. Implemented with byte-at-a-time
// little-endian packing, which is the reference's portable path and
// produces identical values on every platform.
std::uint32_t bj_hash(std::span<const std::uint8_t> key, std::uint32_t init);

inline std::uint32_t bj_hash(std::string_view key, std::uint32_t init) {
    return bj_hash(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(key.data()), key.size()),
                   init);
}

}  // namespace mcpipe
