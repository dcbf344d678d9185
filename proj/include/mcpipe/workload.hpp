#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mcpipe/message.hpp"

namespace mcpipe {

struct MixRatios {
    double get = 0.9;
    double set = 0.1;
    double del = 0.0;
    double flush = 0.0;
};

enum class WireProtocol : std::uint8_t { Ascii, Binary, Mixed };

struct Workload {
    std::uint64_t requests = 10000;
    MixRatios mix;
    std::uint32_t key_space = 1024;
    std::uint32_t key_base = 0;  // first key id; lets concurrent clients use disjoint key ranges
    std::uint32_t key_len_min = 11;  // "key%08u" is 11 bytes; longer keys get padded
    std::uint32_t key_len_max = 11;
    std::uint32_t value_len_min = 64;
    std::uint32_t value_len_max = 64;
    WireProtocol protocol = WireProtocol::Ascii;
    std::uint32_t connections = 1;
    std::uint64_t seed = 1;
};

struct GeneratedRequest {
    std::vector<std::uint8_t> bytes;
    Opcode opcode = Opcode::Get;
    Protocol protocol = Protocol::Ascii;
};

// Deterministic: the same workload produces byte-identical sequences. Once
// keys have been set, GETs and DELETEs target previously-set keys with
// probability 0.95.
std::vector<GeneratedRequest> generate_workload(const Workload& w);

// Throws std::invalid_argument naming the offending field.
void validate_workload(const Workload& w);

std::string workload_key(std::uint32_t id, std::uint32_t len_min, std::uint32_t len_max);

// Request byte builders, shared by the generator and by tests.
std::vector<std::uint8_t> build_ascii_request(Opcode op, const std::string& key, std::uint32_t flags,
                                              std::uint32_t expiration,
                                              std::span<const std::uint8_t> value);
std::vector<std::uint8_t> build_binary_request(Opcode op, const std::string& key, std::uint32_t flags,
                                               std::uint32_t expiration, std::uint32_t opaque,
                                               std::span<const std::uint8_t> value);

}  // namespace mcpipe
