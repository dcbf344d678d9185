#pragma once

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace mcpipe {

// One 64-bit beat of a word stream. Byte 0 of a message is data[0] of the
// first word. keep is left-packed (bit i set iff data[i] is valid), keep==0
// never occurs, and only the final word of a message (last==true) may carry
// a partial keep.
struct StreamWord {
    std::array<std::uint8_t, 8> data{};
    std::uint8_t keep = 0xff;
    bool last = false;

    std::size_t valid_bytes() const { return static_cast<std::size_t>(std::countr_one(keep)); }

    bool well_formed() const {
        if (keep == 0) return false;
        if ((keep & static_cast<std::uint8_t>(keep + 1)) != 0) return false;  // left-packed
        if (!last && keep != 0xff) return false;
        return true;
    }

    bool operator==(const StreamWord&) const = default;
};

inline constexpr std::size_t kWordBytes = 8;

// keep mask for a word holding n valid bytes, 1 <= n <= 8.
inline std::uint8_t keep_for_bytes(std::size_t n) {
    return static_cast<std::uint8_t>(0xffu >> (kWordBytes - n));
}

// Packs a byte string into a framed message: ceil(n/8) words, zero-filled
// padding, keep/last set per the framing rules. The empty message is not
// representable (every word carries at least one valid byte).
inline std::vector<StreamWord> pack_message(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) throw std::invalid_argument("pack_message: empty message");
    std::vector<StreamWord> words;
    words.reserve((bytes.size() + kWordBytes - 1) / kWordBytes);
    for (std::size_t pos = 0; pos < bytes.size(); pos += kWordBytes) {
        StreamWord w;
        const std::size_t n = std::min(kWordBytes, bytes.size() - pos);
        for (std::size_t i = 0; i < n; ++i) w.data[i] = bytes[pos + i];
        w.keep = keep_for_bytes(n);
        w.last = pos + n == bytes.size();
        words.push_back(w);
    }
    return words;
}

// Inverse of pack_message over one complete message.
inline std::vector<std::uint8_t> unpack_message(std::span<const StreamWord> words) {
    std::vector<std::uint8_t> bytes;
    bytes.reserve(words.size() * kWordBytes);
    for (const StreamWord& w : words) {
        const std::size_t n = w.valid_bytes();
        bytes.insert(bytes.end(), w.data.begin(), w.data.begin() + n);
    }
    return bytes;
}

// Incremental byte-to-word repacker. Producers append byte runs of arbitrary
// length; completed words become available in arrival order with running
// offsets, so no re-alignment pass over the assembled output is needed.
class WordPacker {
public:
    void push(std::span<const std::uint8_t> bytes) {
        for (std::uint8_t b : bytes) push_byte(b);
    }

    void push_byte(std::uint8_t b) {
        cur_.data[fill_++] = b;
        if (fill_ == kWordBytes) {
            cur_.keep = 0xff;
            ready_.push_back(cur_);
            cur_ = StreamWord{};
            fill_ = 0;
        }
    }

    // Marks the end of the message; the final word gets last=true.
    void finish() {
        finished_ = true;
        if (fill_ > 0) {
            cur_.keep = keep_for_bytes(fill_);
            cur_.last = true;
            ready_.push_back(cur_);
            cur_ = StreamWord{};
            fill_ = 0;
        } else if (!ready_.empty()) {
            ready_.back().last = true;
        } else {
            throw std::logic_error("WordPacker: finishing an empty message");
        }
    }

    bool has_word() const {
        // Hold the final complete word back until finish() so last can be set on it.
        if (ready_.empty()) return false;
        if (!finished_ && read_ + 1 == ready_.size() && fill_ == 0) return false;
        return true;
    }

    StreamWord pop_word() {
        StreamWord w = ready_[read_++];
        if (read_ == ready_.size()) {
            ready_.clear();
            read_ = 0;
            if (finished_) finished_ = false;  // message fully drained, reset for reuse
        }
        return w;
    }

    bool idle() const { return ready_.empty() && fill_ == 0 && !finished_; }

private:
    std::vector<StreamWord> ready_;
    std::size_t read_ = 0;
    StreamWord cur_{};
    std::size_t fill_ = 0;
    bool finished_ = false;
};

}  // namespace mcpipe
