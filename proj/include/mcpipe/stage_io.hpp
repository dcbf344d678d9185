#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcpipe/bounded_channel.hpp"
#include "mcpipe/message.hpp"
#include "mcpipe/stream_word.hpp"

namespace mcpipe {

// Raised when adjacent stages disagree about message framing. This never
// happens on well-formed traffic; it indicates a desync bug, so the
// pipeline fails fast instead of limping on.
struct PipelineFault : std::logic_error {
    using std::logic_error::logic_error;
};

// Collects the 32-byte header and the padded key that open every
// inter-stage message. Words in that region are always full, because the
// key is padded to a word boundary.
class HeadKeyReader {
public:
    // Feeds one word; returns true once header and key are complete.
    bool feed(const StreamWord& w) {
        if (complete_) throw PipelineFault("head/key reader fed past completion");
        if (w.keep != 0xff && !w.last) throw PipelineFault("partial word inside head/key region");
        for (std::size_t i = 0; i < w.valid_bytes(); ++i) {
            if (fill_ < kPipeHeaderBytes) {
                hdr_bytes_[fill_] = w.data[i];
                if (fill_ + 1 == kPipeHeaderBytes) {
                    header_ = decode_pipe_header(
                        std::span<const std::uint8_t, kPipeHeaderBytes>(hdr_bytes_.data(), kPipeHeaderBytes));
                    key_.clear();
                    key_padded_ = padded_key_bytes(header_.meta.key_length);
                }
            } else {
                const std::size_t key_pos = fill_ - kPipeHeaderBytes;
                if (key_pos >= key_padded_) throw PipelineFault("bytes past key padding");
                if (key_pos < header_.meta.key_length) key_.push_back(static_cast<char>(w.data[i]));
            }
            ++fill_;
        }
        complete_ = fill_ >= kPipeHeaderBytes && fill_ == kPipeHeaderBytes + key_padded_;
        if (!complete_ && w.last) throw PipelineFault("message ended inside head/key region");
        return complete_;
    }

    const PipeHeader& header() const { return header_; }
    const std::string& key() const { return key_; }
    bool complete() const { return complete_; }

    void reset() {
        fill_ = 0;
        key_padded_ = 0;
        key_.clear();
        complete_ = false;
    }

private:
    std::array<std::uint8_t, kPipeHeaderBytes> hdr_bytes_{};
    std::size_t fill_ = 0;
    PipeHeader header_{};
    std::string key_;
    std::size_t key_padded_ = 0;
    bool complete_ = false;
};

// Byte buffer drained one word per pump. mark_last controls whether the
// final word closes the message or value words will follow it.
struct WordEmitter {
    std::vector<std::uint8_t> bytes;
    std::size_t pos = 0;
    bool mark_last = true;

    void load(std::vector<std::uint8_t> b, bool last) {
        bytes = std::move(b);
        pos = 0;
        mark_last = last;
    }

    bool empty() const { return pos >= bytes.size(); }

    bool pump(BoundedChannel<StreamWord>& out) {
        if (empty()) return false;
        const std::size_t n = std::min(kWordBytes, bytes.size() - pos);
        StreamWord w;
        std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(pos), n, w.data.begin());
        w.keep = keep_for_bytes(n);
        w.last = mark_last && pos + n == bytes.size();
        if (!out.try_write(w)) return false;
        pos += n;
        if (empty()) {
            bytes.clear();
            pos = 0;
        }
        return true;
    }
};

// Builds the header+key prefix of an inter-stage message.
inline std::vector<std::uint8_t> encode_head_key(const PipeHeader& h, std::string_view key) {
    std::vector<std::uint8_t> bytes(kPipeHeaderBytes + padded_key_bytes(key.size()), 0);
    encode_pipe_header(h, std::span<std::uint8_t, kPipeHeaderBytes>(bytes.data(), kPipeHeaderBytes));
    std::copy(key.begin(), key.end(), bytes.begin() + kPipeHeaderBytes);
    return bytes;
}

}  // namespace mcpipe
