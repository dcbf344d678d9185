#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mcpipe/message.hpp"

namespace mcpipe {

// A write operation currently inside the hash table's critical section.
struct FilterEntry {
    std::string key;
    Opcode opcode = Opcode::Set;  // write-class: Set or Delete
};

// Queue of in-flight writes with a parallel membership look-up. push marks
// critical-section entry, pop (oldest first) marks exit at the memory-write
// stage, and compare stalls reads that would race a pending write. Free
// running 8-bit pointers implement the ring, so the entry count must divide
// 256.
class ConcurrencyFilter {
public:
    explicit ConcurrencyFilter(std::size_t entries = 16) : entries_(entries) {
        if (entries == 0 || entries > 128 || 256 % entries != 0)
            throw std::invalid_argument("filter_entries");
    }

    bool push(FilterEntry e) {
        if (occupancy() == entries_.size()) return false;
        entries_[wr_ptr_ % entries_.size()] = std::move(e);
        ++wr_ptr_;
        return true;
    }

    bool pop() {
        if (occupancy() == 0) return false;
        ++rd_ptr_;
        return true;
    }

    bool compare(std::string_view key) const {
        const std::size_t live = occupancy();
        bool match = false;
        for (std::size_t i = 0; i < live; ++i) {
            if (entries_[(rd_ptr_ + i) % entries_.size()].key == key) match = true;
        }
        return match;
    }

    std::size_t occupancy() const { return static_cast<std::uint8_t>(wr_ptr_ - rd_ptr_); }
    std::size_t capacity() const { return entries_.size(); }

private:
    std::uint8_t wr_ptr_ = 0;
    std::uint8_t rd_ptr_ = 0;
    std::vector<FilterEntry> entries_;
};

}  // namespace mcpipe
