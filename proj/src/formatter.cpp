#include "mcpipe/formatter.hpp"

#include <array>
#include <string_view>

#include "mcpipe/binary_protocol.hpp"

namespace mcpipe {

namespace {

std::string_view fixed_ascii_text(const PipeHeader& h) {
    switch (h.status) {
        case Status::Stored:
            return "STORED\r\n";
        case Status::NotStored:
            return "NOT_STORED\r\n";
        case Status::NotFound:
            return h.meta.opcode == Opcode::Delete ? "NOT_FOUND\r\n" : "END\r\n";
        case Status::Deleted:
            return "DELETED\r\n";
        case Status::Flushed:
            return "OK\r\n";
        case Status::Error:
            switch (h.error) {
                case ErrorDetail::Unsupported:
                    return "ERROR\r\n";
                case ErrorDetail::Framing:
                    return "CLIENT_ERROR bad data chunk\r\n";
                case ErrorDetail::Storage:
                    return "SERVER_ERROR out of memory\r\n";
                default:
                    return "CLIENT_ERROR bad command line format\r\n";
            }
        default:
            throw PipelineFault("formatter: no fixed text for this status");
    }
}

std::uint16_t binary_status(const PipeHeader& h) {
    switch (h.status) {
        case Status::Stored:
        case Status::Found:
        case Status::Deleted:
        case Status::Flushed:
            return binproto::kStatusOk;
        case Status::NotFound:
            return binproto::kStatusNotFound;
        case Status::NotStored:
            return binproto::kStatusNotStored;
        case Status::Error:
            switch (h.error) {
                case ErrorDetail::Unsupported:
                    return binproto::kStatusUnknownCommand;
                case ErrorDetail::Storage:
                    return binproto::kStatusOutOfMemory;
                default:
                    return binproto::kStatusInvalidArguments;
            }
        default:
            throw PipelineFault("formatter: response with in-flight status");
    }
}

}  // namespace

FormatterStage::FormatterStage(BoundedChannel<StreamWord>& in, BoundedChannel<StreamWord>& out)
    : in_(in), out_(out) {}

bool FormatterStage::pump_out() {
    bool progress = false;
    if (pending_out_) {
        if (!out_.try_write(*pending_out_)) return progress;
        pending_out_.reset();
        progress = true;
    }
    while (packer_.has_word()) {
        StreamWord w = packer_.pop_word();
        if (!out_.try_write(w)) {
            pending_out_ = w;
            break;
        }
        progress = true;
    }
    return progress;
}

bool FormatterStage::step() {
    bool progress = pump_out();

    switch (phase_) {
        case Phase::Collect: {
            auto w = in_.try_read();
            if (!w) break;
            progress = true;
            if (intake_.feed(*w)) {
                const PipeHeader& h = intake_.header();
                value_words_follow_ = h.value_attached && h.meta.value_length > 0;
                if (w->last == value_words_follow_)
                    throw PipelineFault("formatter: framing does not match header");
                if (id_log_) id_log_->push_back(h.meta.request_id);
                begin_response();
            }
            break;
        }
        case Phase::BuildFixed: {
            const PipeHeader& h = intake_.header();
            if (h.meta.protocol == Protocol::Ascii) {
                const std::string_view text = fixed_ascii_text(h);
                packer_.push({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
            } else {
                append_binary_header();
            }
            progress = true;
            if (value_words_follow_) {
                phase_ = Phase::StreamValue;
            } else {
                packer_.finish();
                phase_ = Phase::Drain;
            }
            break;
        }
        case Phase::BuildSection: {
            append_ascii_section(section_);
            progress = true;
            if (section_ == AsciiSection::ValueAndTerminators) {
                phase_ = value_words_follow_ ? Phase::StreamValue : Phase::Terminators;
            } else {
                section_ = static_cast<AsciiSection>(static_cast<std::uint8_t>(section_) + 1);
            }
            break;
        }
        case Phase::StreamValue: {
            auto w = in_.try_read();
            if (!w) break;
            progress = true;
            packer_.push({w->data.data(), w->valid_bytes()});
            if (w->last) {
                if (intake_.header().meta.protocol == Protocol::Ascii) {
                    phase_ = Phase::Terminators;
                } else {
                    packer_.finish();
                    phase_ = Phase::Drain;
                }
            }
            break;
        }
        case Phase::Terminators: {
            static constexpr std::array<std::uint8_t, 7> tail = {'\r', '\n', 'E', 'N', 'D', '\r', '\n'};
            packer_.push(tail);
            packer_.finish();
            progress = true;
            phase_ = Phase::Drain;
            break;
        }
        case Phase::Drain:
            if (!pending_out_ && !packer_.has_word() && packer_.idle()) {
                intake_.reset();
                phase_ = Phase::Collect;
                progress = true;
            }
            break;
    }
    return progress;
}

void FormatterStage::begin_response() {
    const PipeHeader& h = intake_.header();
    if (h.meta.protocol == Protocol::Ascii && h.status == Status::Found) {
        section_ = AsciiSection::HeaderText;
        phase_ = Phase::BuildSection;
    } else {
        phase_ = Phase::BuildFixed;
    }
}

void FormatterStage::append_ascii_section(AsciiSection s) {
    const PipeHeader& h = intake_.header();
    std::string text;
    switch (s) {
        case AsciiSection::HeaderText:
            text = "VALUE ";
            break;
        case AsciiSection::Key:
            text = intake_.key();
            break;
        case AsciiSection::FlagsText:
            text = " " + uint_to_ascii(h.meta.flags);
            break;
        case AsciiSection::LengthText:
            text = " " + uint_to_ascii(h.meta.value_length) + "\r\n";
            break;
        case AsciiSection::ValueAndTerminators:
            return;  // value bytes stream in; terminators follow them
    }
    packer_.push({reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

void FormatterStage::append_binary_header() {
    const PipeHeader& h = intake_.header();
    const bool with_flags = h.status == Status::Found;
    std::array<std::uint8_t, binproto::kHeaderBytes + 4> buf{};
    buf[0] = binproto::kMagicResponse;
    buf[1] = binproto::opcode_to_byte(h.meta.opcode);
    binproto::put_u16be(&buf[2], 0);  // no key in responses
    buf[4] = with_flags ? 4 : 0;
    buf[5] = 0;  // data type
    binproto::put_u16be(&buf[6], binary_status(h));
    const std::uint32_t body = with_flags ? 4 + h.meta.value_length : 0;
    binproto::put_u32be(&buf[8], body);
    binproto::put_u32be(&buf[12], h.meta.opaque);
    // bytes 16..23: cas, always zero
    if (with_flags) binproto::put_u32be(&buf[binproto::kHeaderBytes], h.meta.flags);
    packer_.push({buf.data(), binproto::kHeaderBytes + (with_flags ? 4u : 0u)});
}

}  // namespace mcpipe
