#include "mcpipe/model_cache.hpp"

#include <algorithm>
#include <cctype>

namespace mcpipe {

namespace {

constexpr std::size_t kModelMaxKey = 250;
constexpr std::size_t kModelMaxValue = 8192;

std::vector<std::uint8_t> text(const char* s) {
    std::vector<std::uint8_t> out;
    while (*s) out.push_back(static_cast<std::uint8_t>(*s++));
    return out;
}

void append_text(std::vector<std::uint8_t>& out, const std::string& s) {
    out.insert(out.end(), s.begin(), s.end());
}

std::vector<std::string> split_spaces(const std::string& line) {
    std::vector<std::string> tokens;
    std::size_t pos = 0;
    while (pos <= line.size()) {
        const std::size_t sp = line.find(' ', pos);
        if (sp == std::string::npos) {
            tokens.push_back(line.substr(pos));
            break;
        }
        tokens.push_back(line.substr(pos, sp - pos));
        pos = sp + 1;
    }
    return tokens;
}

bool parse_u32(const std::string& s, std::uint32_t& out) {
    if (s.empty() || s.size() > 10) return false;
    std::uint64_t v = 0;
    for (char c : s) {
        if (c < '0' || c > '9') return false;
        v = v * 10 + static_cast<std::uint64_t>(c - '0');
    }
    if (v > 0xffffffffull) return false;
    out = static_cast<std::uint32_t>(v);
    return true;
}

const std::vector<std::uint8_t> kErrorText = text("ERROR\r\n");
const std::vector<std::uint8_t> kClientErrorText = text("CLIENT_ERROR bad command line format\r\n");
const std::vector<std::uint8_t> kBadChunkText = text("CLIENT_ERROR bad data chunk\r\n");

}  // namespace

std::vector<std::uint8_t> ModelCache::apply(std::span<const std::uint8_t> request) {
    if (!request.empty() && request[0] == 0x80) return apply_binary(request);
    return apply_ascii(request);
}

std::vector<std::uint8_t> ModelCache::apply_ascii(std::span<const std::uint8_t> request) {
    // locate the command line
    std::size_t eol = std::string::npos;
    for (std::size_t i = 0; i + 1 < request.size(); ++i) {
        if (request[i] == '\r' && request[i + 1] == '\n') {
            eol = i;
            break;
        }
    }
    if (eol == std::string::npos) return kBadChunkText;

    std::string line(reinterpret_cast<const char*>(request.data()), eol);
    std::string lowered = line;
    std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    const std::vector<std::string> tokens = split_spaces(lowered);
    const std::vector<std::string> raw_tokens = split_spaces(line);
    if (tokens.empty()) return kErrorText;
    const std::string& cmd = tokens[0];
    const std::size_t after_line = eol + 2;

    if (cmd == "get") {
        if (tokens.size() != 2 || raw_tokens[1].empty() || raw_tokens[1].size() > kModelMaxKey)
            return kClientErrorText;
        if (after_line != request.size()) return kBadChunkText;
        auto it = items_.find(raw_tokens[1]);
        if (it == items_.end()) return text("END\r\n");
        std::vector<std::uint8_t> out;
        append_text(out, "VALUE " + raw_tokens[1] + " " + std::to_string(it->second.flags) + " " +
                             std::to_string(it->second.value.size()) + "\r\n");
        out.insert(out.end(), it->second.value.begin(), it->second.value.end());
        append_text(out, "\r\nEND\r\n");
        return out;
    }
    if (cmd == "delete") {
        if (tokens.size() != 2 || raw_tokens[1].empty() || raw_tokens[1].size() > kModelMaxKey)
            return kClientErrorText;
        if (after_line != request.size()) return kBadChunkText;
        return items_.erase(raw_tokens[1]) ? text("DELETED\r\n") : text("NOT_FOUND\r\n");
    }
    if (cmd == "flush_all") {
        if (tokens.size() != 1) return kClientErrorText;
        if (after_line != request.size()) return kBadChunkText;
        items_.clear();
        return text("OK\r\n");
    }
    if (cmd == "set") {
        if (tokens.size() != 5) return kClientErrorText;
        const std::string& key = raw_tokens[1];
        std::uint32_t flags = 0, exptime = 0, length = 0;
        if (key.empty() || key.size() > kModelMaxKey) return kClientErrorText;
        if (!parse_u32(tokens[2], flags) || !parse_u32(tokens[3], exptime) || !parse_u32(tokens[4], length))
            return kClientErrorText;
        if (length > kModelMaxValue) return kClientErrorText;
        if (request.size() != after_line + length + 2) return kBadChunkText;
        if (request[after_line + length] != '\r' || request[after_line + length + 1] != '\n')
            return kBadChunkText;
        Item item;
        item.flags = flags;
        item.value.assign(request.begin() + static_cast<std::ptrdiff_t>(after_line),
                          request.begin() + static_cast<std::ptrdiff_t>(after_line + length));
        items_[key] = std::move(item);
        return text("STORED\r\n");
    }
    return kErrorText;
}

std::vector<std::uint8_t> ModelCache::apply_binary(std::span<const std::uint8_t> request) {
    auto make_response = [](std::uint8_t opcode_byte, std::uint16_t status, std::uint32_t opaque,
                            const std::uint8_t* flags_be, std::span<const std::uint8_t> value) {
        std::vector<std::uint8_t> out(24 + (flags_be ? 4 : 0) + value.size(), 0);
        out[0] = 0x81;
        out[1] = opcode_byte;
        out[4] = flags_be ? 4 : 0;
        out[6] = static_cast<std::uint8_t>(status >> 8);
        out[7] = static_cast<std::uint8_t>(status);
        const std::uint32_t body = static_cast<std::uint32_t>((flags_be ? 4 : 0) + value.size());
        out[8] = static_cast<std::uint8_t>(body >> 24);
        out[9] = static_cast<std::uint8_t>(body >> 16);
        out[10] = static_cast<std::uint8_t>(body >> 8);
        out[11] = static_cast<std::uint8_t>(body);
        out[12] = static_cast<std::uint8_t>(opaque >> 24);
        out[13] = static_cast<std::uint8_t>(opaque >> 16);
        out[14] = static_cast<std::uint8_t>(opaque >> 8);
        out[15] = static_cast<std::uint8_t>(opaque);
        if (flags_be) std::copy_n(flags_be, 4, out.begin() + 24);
        std::copy(value.begin(), value.end(), out.end() - static_cast<std::ptrdiff_t>(value.size()));
        return out;
    };

    if (request.size() < 24) return make_response(0, 0x0004, 0, nullptr, {});
    const std::uint8_t opcode_byte = request[1];
    const std::uint16_t key_length = static_cast<std::uint16_t>(request[2] << 8 | request[3]);
    const std::uint8_t extras_length = request[4];
    const std::uint32_t total_body = static_cast<std::uint32_t>(request[8]) << 24 |
                                     static_cast<std::uint32_t>(request[9]) << 16 |
                                     static_cast<std::uint32_t>(request[10]) << 8 | request[11];
    const std::uint32_t opaque = static_cast<std::uint32_t>(request[12]) << 24 |
                                 static_cast<std::uint32_t>(request[13]) << 16 |
                                 static_cast<std::uint32_t>(request[14]) << 8 | request[15];

    const bool known = opcode_byte == 0x00 || opcode_byte == 0x01 || opcode_byte == 0x04 || opcode_byte == 0x08;
    if (!known) return make_response(0x00, 0x0081, opaque, nullptr, {});
    if (static_cast<std::uint32_t>(extras_length) + key_length > total_body ||
        request.size() != 24 + total_body)
        return make_response(opcode_byte, 0x0004, opaque, nullptr, {});

    const std::uint32_t value_length = total_body - extras_length - key_length;
    const std::uint8_t* extras = request.data() + 24;
    const std::string key(reinterpret_cast<const char*>(request.data()) + 24 + extras_length, key_length);
    std::span<const std::uint8_t> value = request.subspan(24 + extras_length + key_length, value_length);

    switch (opcode_byte) {
        case 0x00: {  // GET
            if (extras_length != 0 || value_length != 0 || key_length == 0 || key_length > kModelMaxKey)
                return make_response(opcode_byte, 0x0004, opaque, nullptr, {});
            auto it = items_.find(key);
            if (it == items_.end()) return make_response(opcode_byte, 0x0001, opaque, nullptr, {});
            std::uint8_t flags_be[4] = {static_cast<std::uint8_t>(it->second.flags >> 24),
                                        static_cast<std::uint8_t>(it->second.flags >> 16),
                                        static_cast<std::uint8_t>(it->second.flags >> 8),
                                        static_cast<std::uint8_t>(it->second.flags)};
            return make_response(opcode_byte, 0x0000, opaque, flags_be, it->second.value);
        }
        case 0x01: {  // SET
            if (extras_length != 8 || key_length == 0 || key_length > kModelMaxKey ||
                value_length > kModelMaxValue)
                return make_response(opcode_byte, 0x0004, opaque, nullptr, {});
            Item item;
            item.flags = static_cast<std::uint32_t>(extras[0]) << 24 |
                         static_cast<std::uint32_t>(extras[1]) << 16 |
                         static_cast<std::uint32_t>(extras[2]) << 8 | extras[3];
            item.value.assign(value.begin(), value.end());
            items_[key] = std::move(item);
            return make_response(opcode_byte, 0x0000, opaque, nullptr, {});
        }
        case 0x04: {  // DELETE
            if (extras_length != 0 || value_length != 0 || key_length == 0 || key_length > kModelMaxKey)
                return make_response(opcode_byte, 0x0004, opaque, nullptr, {});
            return make_response(opcode_byte, items_.erase(key) ? 0x0000 : 0x0001, opaque, nullptr, {});
        }
        case 0x08: {  // FLUSH
            if ((extras_length != 0 && extras_length != 4) || key_length != 0 || value_length != 0)
                return make_response(opcode_byte, 0x0004, opaque, nullptr, {});
            items_.clear();
            return make_response(opcode_byte, 0x0000, opaque, nullptr, {});
        }
    }
    return make_response(opcode_byte, 0x0081, opaque, nullptr, {});
}

}  // namespace mcpipe
