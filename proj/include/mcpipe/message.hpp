#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mcpipe/stream_word.hpp"

namespace mcpipe {

enum class Opcode : std::uint8_t { Get = 0, Set = 1, Delete = 2, Flush = 3 };
enum class Protocol : std::uint8_t { Binary = 0, Ascii = 1 };

// Response status. None marks a request still travelling toward the value
// store; everything else is a final outcome.
enum class Status : std::uint8_t {
    None = 0,
    Stored,
    NotStored,
    Found,
    NotFound,
    Deleted,
    Flushed,
    Error,
};

// Refines Status::Error so the formatter can pick the right wire text.
enum class ErrorDetail : std::uint8_t {
    None = 0,
    Unsupported,  // unknown command
    Client,       // malformed field (bad digit, oversized key, ...)
    Framing,      // declared and actual lengths disagree
    Storage,      // table or slab exhausted
};

inline constexpr std::uint32_t kMaxKeyLength = 250;
inline constexpr std::uint32_t kDefaultMaxValue = 8192;

struct RequestMeta {
    Opcode opcode = Opcode::Get;
    Protocol protocol = Protocol::Ascii;
    std::uint16_t key_length = 0;
    std::uint32_t value_length = 0;
    std::uint32_t flags = 0;
    std::uint32_t expiration = 0;
    std::uint32_t opaque = 0;   // binary echo token, 0 for ASCII
    std::uint32_t request_id = 0;

    bool operator==(const RequestMeta&) const = default;
};

// Returns the name of the first violated invariant, or nullopt when the
// meta is well formed.
inline std::optional<std::string_view> validate_meta(const RequestMeta& meta,
                                                     std::uint32_t max_value = kDefaultMaxValue) {
    if (meta.opcode == Opcode::Flush) {
        if (meta.key_length != 0) return "key_length";
    } else {
        if (meta.key_length == 0 || meta.key_length > kMaxKeyLength) return "key_length";
    }
    if (meta.opcode == Opcode::Set) {
        if (meta.value_length > max_value) return "value_length";
    } else {
        if (meta.value_length != 0) return "value_length";
    }
    return std::nullopt;
}

// Fixed 32-byte header leading every message on the inter-stage channels.
// The header words are followed by the key padded to a word boundary and
// then by the value bytes, so the value segment always starts word-aligned
// and can be streamed through a stage untouched.
struct PipeHeader {
    RequestMeta meta;
    Status status = Status::None;
    ErrorDetail error = ErrorDetail::None;
    bool value_attached = false;  // true iff a value segment follows the key
    std::uint32_t address = 0;    // value-store slot, resolved by the hash table

    bool operator==(const PipeHeader&) const = default;
};

inline constexpr std::size_t kPipeHeaderBytes = 32;
inline constexpr std::size_t kPipeHeaderWords = kPipeHeaderBytes / kWordBytes;

namespace detail {
inline void put_u32le(std::uint8_t* p, std::uint32_t v) {
    p[0] = static_cast<std::uint8_t>(v);
    p[1] = static_cast<std::uint8_t>(v >> 8);
    p[2] = static_cast<std::uint8_t>(v >> 16);
    p[3] = static_cast<std::uint8_t>(v >> 24);
}
inline std::uint32_t get_u32le(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}
}  // namespace detail

inline void encode_pipe_header(const PipeHeader& h, std::span<std::uint8_t, kPipeHeaderBytes> out) {
    out[0] = static_cast<std::uint8_t>(h.meta.opcode);
    out[1] = static_cast<std::uint8_t>(h.meta.protocol);
    out[2] = static_cast<std::uint8_t>(h.status);
    out[3] = static_cast<std::uint8_t>(h.error);
    out[4] = static_cast<std::uint8_t>(h.meta.key_length);
    out[5] = static_cast<std::uint8_t>(h.meta.key_length >> 8);
    out[6] = h.value_attached ? 1 : 0;
    out[7] = 0;
    detail::put_u32le(&out[8], h.meta.value_length);
    detail::put_u32le(&out[12], h.meta.flags);
    detail::put_u32le(&out[16], h.meta.expiration);
    detail::put_u32le(&out[20], h.meta.opaque);
    detail::put_u32le(&out[24], h.meta.request_id);
    detail::put_u32le(&out[28], h.address);
}

inline PipeHeader decode_pipe_header(std::span<const std::uint8_t, kPipeHeaderBytes> in) {
    PipeHeader h;
    h.meta.opcode = static_cast<Opcode>(in[0]);
    h.meta.protocol = static_cast<Protocol>(in[1]);
    h.status = static_cast<Status>(in[2]);
    h.error = static_cast<ErrorDetail>(in[3]);
    h.meta.key_length = static_cast<std::uint16_t>(in[4] | in[5] << 8);
    h.value_attached = in[6] != 0;
    h.meta.value_length = detail::get_u32le(&in[8]);
    h.meta.flags = detail::get_u32le(&in[12]);
    h.meta.expiration = detail::get_u32le(&in[16]);
    h.meta.opaque = detail::get_u32le(&in[20]);
    h.meta.request_id = detail::get_u32le(&in[24]);
    h.address = detail::get_u32le(&in[28]);
    return h;
}

inline std::size_t padded_key_bytes(std::size_t key_length) {
    return (key_length + kWordBytes - 1) / kWordBytes * kWordBytes;
}

// Serializes header + key + value into the inter-stage byte layout.
inline std::vector<std::uint8_t> encode_pipe_message(const PipeHeader& h, std::string_view key,
                                                     std::span<const std::uint8_t> value) {
    std::vector<std::uint8_t> bytes(kPipeHeaderBytes + padded_key_bytes(key.size()) + value.size(), 0);
    encode_pipe_header(h, std::span<std::uint8_t, kPipeHeaderBytes>(bytes.data(), kPipeHeaderBytes));
    std::copy(key.begin(), key.end(), bytes.begin() + kPipeHeaderBytes);
    std::copy(value.begin(), value.end(), bytes.begin() + kPipeHeaderBytes + padded_key_bytes(key.size()));
    return bytes;
}

struct PipeMessage {
    PipeHeader header;
    std::string key;
    std::vector<std::uint8_t> value;
};

// Decodes one complete inter-stage message; used by tests and debug taps.
inline PipeMessage decode_pipe_message(std::span<const StreamWord> words) {
    const std::vector<std::uint8_t> bytes = unpack_message(words);
    if (bytes.size() < kPipeHeaderBytes) throw std::invalid_argument("pipe message too short");
    PipeMessage msg;
    msg.header = decode_pipe_header(std::span<const std::uint8_t, kPipeHeaderBytes>(bytes.data(), kPipeHeaderBytes));
    const std::size_t kl = msg.header.meta.key_length;
    const std::size_t vl = msg.header.value_attached ? msg.header.meta.value_length : 0;
    if (bytes.size() != kPipeHeaderBytes + padded_key_bytes(kl) + vl)
        throw std::invalid_argument("pipe message length mismatch");
    msg.key.assign(reinterpret_cast<const char*>(bytes.data()) + kPipeHeaderBytes, kl);
    msg.value.assign(bytes.begin() + kPipeHeaderBytes + padded_key_bytes(kl), bytes.end());
    return msg;
}

}  // namespace mcpipe
