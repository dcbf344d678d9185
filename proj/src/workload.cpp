#include "mcpipe/workload.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

#include "mcpipe/ascii_convert.hpp"
#include "mcpipe/binary_protocol.hpp"

namespace mcpipe {

void validate_workload(const Workload& w) {
    const double sum = w.mix.get + w.mix.set + w.mix.del + w.mix.flush;
    if (w.mix.get < 0 || w.mix.set < 0 || w.mix.del < 0 || w.mix.flush < 0 ||
        std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("mix");
    if (w.key_space == 0) throw std::invalid_argument("key_space");
    if (w.key_len_min < 11 || w.key_len_min > w.key_len_max || w.key_len_max > kMaxKeyLength)
        throw std::invalid_argument("key_length");
    if (w.value_len_min > w.value_len_max || w.value_len_max > kDefaultMaxValue)
        throw std::invalid_argument("value_length");
    if (w.connections == 0) throw std::invalid_argument("connections");
}

std::string workload_key(std::uint32_t id, std::uint32_t len_min, std::uint32_t len_max) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "key%08u", id);
    std::string key(buf);
    // Per-key target length, fixed by the id so a key never changes identity.
    const std::uint32_t span = len_max - len_min + 1;
    const std::uint32_t len = len_min + (id * 2654435761u) % span;
    if (key.size() < len) key.append(len - key.size(), 'k');
    return key;
}

std::vector<std::uint8_t> build_ascii_request(Opcode op, const std::string& key, std::uint32_t flags,
                                              std::uint32_t expiration,
                                              std::span<const std::uint8_t> value) {
    std::string head;
    switch (op) {
        case Opcode::Get:
            head = "get " + key + "\r\n";
            break;
        case Opcode::Delete:
            head = "delete " + key + "\r\n";
            break;
        case Opcode::Flush:
            head = "flush_all\r\n";
            break;
        case Opcode::Set:
            head = "set " + key + " " + uint_to_ascii(flags) + " " + uint_to_ascii(expiration) + " " +
                   uint_to_ascii(static_cast<std::uint32_t>(value.size())) + "\r\n";
            break;
    }
    std::vector<std::uint8_t> out(head.begin(), head.end());
    if (op == Opcode::Set) {
        out.insert(out.end(), value.begin(), value.end());
        out.push_back('\r');
        out.push_back('\n');
    }
    return out;
}

std::vector<std::uint8_t> build_binary_request(Opcode op, const std::string& key, std::uint32_t flags,
                                               std::uint32_t expiration, std::uint32_t opaque,
                                               std::span<const std::uint8_t> value) {
    const std::uint8_t extras_length = op == Opcode::Set ? 8 : 0;
    const std::uint16_t key_length = static_cast<std::uint16_t>(op == Opcode::Flush ? 0 : key.size());
    const std::uint32_t total_body = extras_length + key_length + static_cast<std::uint32_t>(value.size());
    std::vector<std::uint8_t> out(binproto::kHeaderBytes + total_body, 0);
    out[0] = binproto::kMagicRequest;
    out[1] = binproto::opcode_to_byte(op);
    binproto::put_u16be(&out[2], key_length);
    out[4] = extras_length;
    binproto::put_u32be(&out[8], total_body);
    binproto::put_u32be(&out[12], opaque);
    std::size_t pos = binproto::kHeaderBytes;
    if (extras_length == 8) {
        binproto::put_u32be(&out[pos], flags);
        binproto::put_u32be(&out[pos + 4], expiration);
        pos += 8;
    }
    if (key_length > 0) {
        std::copy(key.begin(), key.end(), out.begin() + static_cast<std::ptrdiff_t>(pos));
        pos += key_length;
    }
    std::copy(value.begin(), value.end(), out.begin() + static_cast<std::ptrdiff_t>(pos));
    return out;
}

std::vector<GeneratedRequest> generate_workload(const Workload& w) {
    validate_workload(w);
    std::mt19937_64 rng(w.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<std::uint32_t> set_ids;
    std::vector<bool> was_set(w.key_space, false);

    std::vector<GeneratedRequest> out;
    out.reserve(w.requests);
    for (std::uint64_t i = 0; i < w.requests; ++i) {
        const double roll = unit(rng);
        Opcode op;
        if (roll < w.mix.get) {
            op = Opcode::Get;
        } else if (roll < w.mix.get + w.mix.set) {
            op = Opcode::Set;
        } else if (roll < w.mix.get + w.mix.set + w.mix.del) {
            op = Opcode::Delete;
        } else {
            op = Opcode::Flush;
        }

        Protocol proto;
        switch (w.protocol) {
            case WireProtocol::Ascii: proto = Protocol::Ascii; break;
            case WireProtocol::Binary: proto = Protocol::Binary; break;
            default: proto = (rng() & 1) ? Protocol::Ascii : Protocol::Binary; break;
        }

        std::uint32_t id = 0;
        if (op != Opcode::Flush) {
            if (op == Opcode::Set || set_ids.empty() || unit(rng) >= 0.95) {
                id = static_cast<std::uint32_t>(rng() % w.key_space);
            } else {
                id = set_ids[rng() % set_ids.size()];
            }
        }
        const std::string key =
            op == Opcode::Flush ? std::string{} : workload_key(w.key_base + id, w.key_len_min, w.key_len_max);

        std::vector<std::uint8_t> value;
        std::uint32_t flags = 0;
        if (op == Opcode::Set) {
            const std::uint32_t span = w.value_len_max - w.value_len_min + 1;
            const std::uint32_t len = w.value_len_min + static_cast<std::uint32_t>(rng() % span);
            value.resize(len);
            for (std::uint32_t v = 0; v < len; ++v) value[v] = static_cast<std::uint8_t>(rng());
            flags = static_cast<std::uint32_t>(rng() % 1000);
            if (!was_set[id]) {
                was_set[id] = true;
                set_ids.push_back(id);
            }
        } else if (op == Opcode::Flush) {
            // Flushed keys would no longer hit, but re-targeting them keeps the
            // generator simple; hit-rate guarantees only apply without flushes.
        }

        GeneratedRequest gen;
        gen.opcode = op;
        gen.protocol = proto;
        if (proto == Protocol::Ascii) {
            gen.bytes = build_ascii_request(op, key, flags, 0, value);
        } else {
            const std::uint32_t opaque = static_cast<std::uint32_t>(rng());
            gen.bytes = build_binary_request(op, key, flags, 0, opaque, value);
        }
        out.push_back(std::move(gen));
    }
    return out;
}

}  // namespace mcpipe
