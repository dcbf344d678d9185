#pragma once

#include <cstdint>
#include <optional>

#include "mcpipe/message.hpp"

namespace mcpipe::binproto {

// memcached binary protocol: 24-byte header, multi-byte fields big-endian.
inline constexpr std::uint8_t kMagicRequest = 0x80;
inline constexpr std::uint8_t kMagicResponse = 0x81;
inline constexpr std::size_t kHeaderBytes = 24;

inline constexpr std::uint16_t kStatusOk = 0x0000;
inline constexpr std::uint16_t kStatusNotFound = 0x0001;
inline constexpr std::uint16_t kStatusTooLarge = 0x0003;
inline constexpr std::uint16_t kStatusInvalidArguments = 0x0004;
inline constexpr std::uint16_t kStatusNotStored = 0x0005;
inline constexpr std::uint16_t kStatusUnknownCommand = 0x0081;
inline constexpr std::uint16_t kStatusOutOfMemory = 0x0082;

inline std::optional<Opcode> opcode_from_byte(std::uint8_t b) {
    switch (b) {
        case 0x00: return Opcode::Get;
        case 0x01: return Opcode::Set;
        case 0x04: return Opcode::Delete;
        case 0x08: return Opcode::Flush;
        default: return std::nullopt;
    }
}

inline std::uint8_t opcode_to_byte(Opcode op) {
    switch (op) {
        case Opcode::Get: return 0x00;
        case Opcode::Set: return 0x01;
        case Opcode::Delete: return 0x04;
        case Opcode::Flush: return 0x08;
    }
    return 0x00;
}

inline std::uint16_t get_u16be(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] << 8 | p[1]);
}

inline std::uint32_t get_u32be(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) << 24 | static_cast<std::uint32_t>(p[1]) << 16 |
           static_cast<std::uint32_t>(p[2]) << 8 | static_cast<std::uint32_t>(p[3]);
}

inline void put_u16be(std::uint8_t* p, std::uint16_t v) {
    p[0] = static_cast<std::uint8_t>(v >> 8);
    p[1] = static_cast<std::uint8_t>(v);
}

inline void put_u32be(std::uint8_t* p, std::uint32_t v) {
    p[0] = static_cast<std::uint8_t>(v >> 24);
    p[1] = static_cast<std::uint8_t>(v >> 16);
    p[2] = static_cast<std::uint8_t>(v >> 8);
    p[3] = static_cast<std::uint8_t>(v);
}

}  // namespace mcpipe::binproto
