#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace mcpipe {

// Reference model: a plain associative map replayed over the same request
// sequence, producing the exact wire bytes the server must emit. It shares
// no code with the pipeline stages — grammar and header layouts are spelled
// out again here — so it can serve as the expected-response oracle for
// end-to-end tests and for bench validation.
class ModelCache {
public:
    // Applies one raw request and returns the expected raw response.
    std::vector<std::uint8_t> apply(std::span<const std::uint8_t> request);

    std::size_t item_count() const { return items_.size(); }

private:
    struct Item {
        std::uint32_t flags = 0;
        std::vector<std::uint8_t> value;
    };

    std::vector<std::uint8_t> apply_ascii(std::span<const std::uint8_t> request);
    std::vector<std::uint8_t> apply_binary(std::span<const std::uint8_t> request);

    std::unordered_map<std::string, Item> items_;
};

}  // namespace mcpipe
