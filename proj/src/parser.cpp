#include "mcpipe/parser.hpp"

#include <algorithm>
#include <cctype>

#include "mcpipe/binary_protocol.hpp"

namespace mcpipe {

using parser_detail::AsciiScratch;
using parser_detail::BinaryScratch;
using parser_detail::Field;
using parser_detail::kCommand;
using parser_detail::kExpiration;
using parser_detail::kFieldCount;
using parser_detail::kFlags;
using parser_detail::kKey;
using parser_detail::kValue;
using parser_detail::kValueLength;

namespace {

constexpr std::uint8_t kSp = 0x20;
constexpr std::uint8_t kCr = 0x0d;
constexpr std::uint8_t kLf = 0x0a;

std::string to_lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

}  // namespace

ParserStage::ParserStage(BoundedChannel<StreamWord>& in, BoundedChannel<StreamWord>& out, ParserConfig cfg)
    : in_(in), out_(out), cfg_(cfg) {}

bool ParserStage::step() {
    bool progress = pump_emit();

    if (emit_bytes_.empty() && !ready_bytes_.empty()) {
        emit_bytes_ = std::move(ready_bytes_);
        ready_bytes_.clear();
        emit_pos_ = 0;
        progress = true;
    }

    if (request_finished_ && ready_bytes_.empty()) {
        if (mode_ == Mode::Binary) {
            finish_binary_request();
        } else {
            finish_ascii_request();
        }
        reset_request_state();
        progress = true;
    }

    if (!request_finished_ && mode_ == Mode::Ascii) {
        if (pump_ascii_chain()) progress = true;
    }

    if (!request_finished_ && !saw_last_word_) {
        const bool intake_free = mode_ != Mode::Ascii || !chain_[kCommand].inbox.has_value();
        if (intake_free) {
            if (auto w = in_.try_read()) {
                saw_last_word_ = w->last;
                if (consume_word(*w)) progress = true;
            }
        }
    }
    return progress;
}

bool ParserStage::pump_emit() {
    if (emit_bytes_.empty()) return false;
    const std::size_t remaining = emit_bytes_.size() - emit_pos_;
    const std::size_t n = std::min(kWordBytes, remaining);
    StreamWord w;
    std::copy_n(emit_bytes_.begin() + static_cast<std::ptrdiff_t>(emit_pos_), n, w.data.begin());
    w.keep = keep_for_bytes(n);
    w.last = emit_pos_ + n == emit_bytes_.size();
    if (!out_.try_write(w)) return false;
    emit_pos_ += n;
    if (emit_pos_ == emit_bytes_.size()) {
        emit_bytes_.clear();
        emit_pos_ = 0;
    }
    return true;
}

bool ParserStage::consume_word(const StreamWord& w) {
    switch (mode_) {
        case Mode::Dispatch:
            if (detect_protocol(w.data[0]) == Protocol::Binary) {
                mode_ = Mode::Binary;
                binary_.reset();
                feed_binary(w);
            } else {
                mode_ = Mode::Ascii;
                ascii_.reset();
                chain_.fill(FieldStage{});
                chain_[kCommand].inbox = FieldToken{w, 0};
            }
            return true;
        case Mode::Ascii:
            chain_[kCommand].inbox = FieldToken{w, 0};
            return true;
        case Mode::Binary:
            feed_binary(w);
            return true;
        case Mode::DrainError:
            if (w.last) request_finished_ = true;
            return true;
    }
    return false;
}

// ---------------------------------------------------------------------------
// ASCII parsing: six field-extraction stages connected by single-slot
// registers. Every input word flows through the whole chain; each stage
// claims its own field and hands the rest of the word downstream, which is
// how up to three field boundaries inside one word get handled.
// ---------------------------------------------------------------------------

bool ParserStage::pump_ascii_chain() {
    bool progress = false;
    for (int k = kFieldCount - 1; k >= 0; --k) {
        const auto idx = static_cast<std::size_t>(k);
        if (!chain_[idx].inbox) continue;
        if (idx + 1 < kFieldCount && chain_[idx + 1].inbox) continue;
        FieldToken token = *chain_[idx].inbox;
        chain_[idx].inbox.reset();
        progress = true;

        std::optional<FieldToken> forwarded = process_field_stage(idx, token);
        if (ascii_.error == ErrorDetail::None && forwarded) {
            if (idx + 1 < kFieldCount) {
                chain_[idx + 1].inbox = *forwarded;
            } else {
                // Chain exit: nothing may remain unclaimed, and on the final
                // word every stage must have finished its field.
                if (forwarded->begin != 8) {
                    fail(ErrorDetail::Framing);
                } else if (forwarded->word.last) {
                    bool complete = ascii_.opcode_known;
                    for (const FieldStage& st : chain_)
                        complete = complete && (st.phase == FieldPhase::Done || st.phase == FieldPhase::Skip);
                    if (!complete) {
                        fail(ErrorDetail::Framing);
                    } else {
                        request_finished_ = true;
                    }
                }
            }
        }

        if (ascii_.error != ErrorDetail::None) {
            bool saw_last = token.word.last;
            for (FieldStage& st : chain_) {
                if (st.inbox && st.inbox->word.last) saw_last = true;
                st.inbox.reset();
            }
            if (saw_last) {
                request_finished_ = true;
            } else {
                mode_ = Mode::DrainError;
            }
            break;
        }
    }
    return progress;
}

std::optional<ParserStage::FieldToken> ParserStage::process_field_stage(std::size_t k, FieldToken token) {
    FieldStage& st = chain_[k];
    const std::size_t valid = token.word.valid_bytes();
    switch (st.phase) {
        case FieldPhase::Skip:
        case FieldPhase::Done:
            return token;
        case FieldPhase::PendingLf: {
            if (token.begin == 8 || token.word.data[token.begin] != kLf) {
                fail(ErrorDetail::Framing);
                return std::nullopt;
            }
            ascii_.line_bytes += 1;
            st.phase = FieldPhase::Done;
            token.begin = normalize(token.begin + 1u, valid);
            return token;
        }
        case FieldPhase::PendingCr: {
            if (token.begin == 8 || token.word.data[token.begin] != kCr) {
                fail(ErrorDetail::Framing);
                return std::nullopt;
            }
            const std::size_t lf = token.begin + 1u;
            if (lf < valid) {
                if (token.word.data[lf] != kLf) {
                    fail(ErrorDetail::Framing);
                    return std::nullopt;
                }
                st.phase = FieldPhase::Done;
                token.begin = normalize(lf + 1, valid);
                return token;
            }
            if (token.word.last) {
                fail(ErrorDetail::Framing);
                return std::nullopt;
            }
            st.phase = FieldPhase::PendingLf;
            token.begin = 8;
            return token;
        }
        case FieldPhase::Waiting:
            if (token.begin == 8) return token;
            st.phase = FieldPhase::Scanning;
            [[fallthrough]];
        case FieldPhase::Scanning:
            if (k == kValue) {
                collect_value(token);
            } else {
                scan_field(k, token);
            }
            if (ascii_.error != ErrorDetail::None) return std::nullopt;
            return token;
    }
    return token;
}

void ParserStage::scan_field(std::size_t k, FieldToken& token) {
    FieldStage& st = chain_[k];
    const std::size_t valid = token.word.valid_bytes();
    const std::uint8_t begin = token.begin;

    std::uint8_t rel_sp = find_delimiter(token.word.data, begin, kSp, cfg_.search_variant);
    std::uint8_t rel_cr = find_delimiter(token.word.data, begin, kCr, cfg_.search_variant);
    if (rel_sp != 8 && begin + rel_sp >= valid) rel_sp = 8;
    if (rel_cr != 8 && begin + rel_cr >= valid) rel_cr = 8;
    const std::uint8_t rel = std::min(rel_sp, rel_cr);
    const bool found = rel != 8;
    const bool found_cr = found && rel_cr < rel_sp;

    const std::size_t chunk = found ? rel : valid - begin;
    ascii_.line_bytes += static_cast<std::uint32_t>(chunk) + (found ? 1u : 0u);
    if (ascii_.line_bytes > cfg_.max_ascii_line) {
        fail(ErrorDetail::Framing);
        return;
    }

    std::string& buf = k == kCommand   ? ascii_.command
                       : k == kKey     ? ascii_.key
                       : k == kFlags   ? ascii_.digits[0]
                       : k == kExpiration ? ascii_.digits[1]
                                          : ascii_.digits[2];
    // The command buffer is bounded by the line guard above; key and digit
    // fields cap out at their grammar limits.
    const std::size_t limit = k == kCommand ? cfg_.max_ascii_line : k == kKey ? cfg_.max_key : 10;
    if (buf.size() + chunk > limit) {
        fail(ErrorDetail::Client);
        return;
    }
    buf.append(reinterpret_cast<const char*>(token.word.data.data()) + begin, chunk);

    if (!found) {
        if (token.word.last) {
            fail(ErrorDetail::Framing);  // field never terminated
            return;
        }
        token.begin = 8;
        return;
    }

    complete_field(k, found_cr);
    if (ascii_.error != ErrorDetail::None) return;

    const std::size_t abs = begin + rel;
    if (!found_cr) {
        st.phase = FieldPhase::Done;
        token.begin = normalize(abs + 1, valid);
        return;
    }
    const std::size_t lf = abs + 1;
    if (lf < valid) {
        if (token.word.data[lf] != kLf) {
            fail(ErrorDetail::Framing);
            return;
        }
        ascii_.line_bytes += 1;
        st.phase = FieldPhase::Done;
        token.begin = normalize(lf + 1, valid);
        return;
    }
    if (token.word.last) {
        fail(ErrorDetail::Framing);  // CR at message end with no LF
        return;
    }
    st.phase = FieldPhase::PendingLf;
    token.begin = 8;
}

void ParserStage::complete_field(std::size_t k, bool found_cr) {
    switch (k) {
        case kCommand: {
            const std::string cmd = to_lower(ascii_.command);
            bool command_line_final = false;
            if (cmd == "set") {
                ascii_.opcode = Opcode::Set;
            } else if (cmd == "get") {
                ascii_.opcode = Opcode::Get;
            } else if (cmd == "delete") {
                ascii_.opcode = Opcode::Delete;
            } else if (cmd == "flush_all") {
                ascii_.opcode = Opcode::Flush;
                command_line_final = true;
            } else {
                fail(ErrorDetail::Unsupported);
                return;
            }
            ascii_.opcode_known = true;
            if (command_line_final != found_cr) {
                fail(ErrorDetail::Client);
                return;
            }
            switch (ascii_.opcode) {
                case Opcode::Set:
                    chain_[kValueLength].line_final = true;
                    break;
                case Opcode::Get:
                case Opcode::Delete:
                    chain_[kKey].line_final = true;
                    chain_[kFlags].phase = FieldPhase::Skip;
                    chain_[kExpiration].phase = FieldPhase::Skip;
                    chain_[kValueLength].phase = FieldPhase::Skip;
                    chain_[kValue].phase = FieldPhase::Skip;
                    break;
                case Opcode::Flush:
                    for (std::size_t i = kKey; i < kFieldCount; ++i) chain_[i].phase = FieldPhase::Skip;
                    break;
            }
            return;
        }
        case kKey:
            if (chain_[kKey].line_final != found_cr || ascii_.key.empty()) {
                fail(ErrorDetail::Client);
            }
            return;
        case kFlags:
        case kExpiration:
        case kValueLength: {
            const bool line_final = chain_[k].line_final;
            if (line_final != found_cr) {
                fail(ErrorDetail::Client);
                return;
            }
            const std::string& digits = ascii_.digits[k - kFlags];
            const ConvResult conv = ascii_to_uint(
                std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(digits.data()), digits.size()));
            if (!conv.ok()) {
                fail(ErrorDetail::Client);
                return;
            }
            ascii_.numeric[k - kFlags] = conv.value;
            if (k == kValueLength && conv.value > cfg_.max_value) {
                fail(ErrorDetail::Client);
            }
            return;
        }
        default:
            return;
    }
}

void ParserStage::collect_value(FieldToken& token) {
    FieldStage& st = chain_[kValue];
    const std::size_t valid = token.word.valid_bytes();
    const std::size_t begin = token.begin;
    const std::size_t need = ascii_.numeric[2] - ascii_.value.size();
    const std::size_t take = std::min(need, valid - begin);
    const std::uint8_t* p = token.word.data.data();
    ascii_.value.insert(ascii_.value.end(), p + begin, p + begin + take);

    const std::size_t after = begin + take;
    if (ascii_.value.size() < ascii_.numeric[2]) {
        if (token.word.last) {
            fail(ErrorDetail::Framing);  // value shorter than declared
            return;
        }
        token.begin = 8;
        return;
    }
    if (after < valid) {
        if (token.word.data[after] != kCr) {
            fail(ErrorDetail::Framing);  // declared length does not match the chunk
            return;
        }
        const std::size_t lf = after + 1;
        if (lf < valid) {
            if (token.word.data[lf] != kLf) {
                fail(ErrorDetail::Framing);
                return;
            }
            st.phase = FieldPhase::Done;
            token.begin = normalize(lf + 1, valid);
            return;
        }
        if (token.word.last) {
            fail(ErrorDetail::Framing);
            return;
        }
        st.phase = FieldPhase::PendingLf;
        token.begin = 8;
        return;
    }
    if (token.word.last) {
        fail(ErrorDetail::Framing);  // terminator missing entirely
        return;
    }
    st.phase = FieldPhase::PendingCr;
    token.begin = 8;
}

void ParserStage::fail(ErrorDetail detail) {
    if (ascii_.error == ErrorDetail::None) ascii_.error = detail;
}

std::uint8_t ParserStage::normalize(std::size_t next, std::size_t valid) const {
    return next >= valid ? std::uint8_t{8} : static_cast<std::uint8_t>(next);
}

void ParserStage::finish_ascii_request() {
    if (ascii_.error != ErrorDetail::None) {
        PipeHeader h;
        h.meta.opcode = ascii_.opcode_known ? ascii_.opcode : Opcode::Get;
        h.meta.protocol = Protocol::Ascii;
        h.status = Status::Error;
        h.error = ascii_.error;
        stage_message(h, {}, {});
        return;
    }
    PipeHeader h;
    h.meta.opcode = ascii_.opcode;
    h.meta.protocol = Protocol::Ascii;
    h.meta.key_length = static_cast<std::uint16_t>(ascii_.key.size());
    h.meta.flags = ascii_.numeric[0];
    h.meta.expiration = ascii_.numeric[1];
    h.meta.value_length = ascii_.opcode == Opcode::Set ? ascii_.numeric[2] : 0;
    if (validate_meta(h.meta, cfg_.max_value)) {
        h = PipeHeader{};
        h.meta.opcode = ascii_.opcode;
        h.meta.protocol = Protocol::Ascii;
        h.status = Status::Error;
        h.error = ErrorDetail::Client;
        stage_message(h, {}, {});
        return;
    }
    h.value_attached = h.meta.opcode == Opcode::Set;
    stage_message(h, ascii_.key, ascii_.value);
}

// ---------------------------------------------------------------------------
// Binary parsing: a field extractor that routes each byte run into header,
// extras, key or value by its offset, and an output step that re-formats
// the collected fields. All offsets are known once the header is in.
// ---------------------------------------------------------------------------

void ParserStage::feed_binary(const StreamWord& w) {
    const std::size_t valid = w.valid_bytes();
    std::size_t i = 0;
    while (i < valid) {
        const std::size_t pos = binary_.consumed;
        if (!binary_.header_done) {
            binary_.header[pos] = w.data[i];
            ++i;
            ++binary_.consumed;
            if (binary_.consumed == binproto::kHeaderBytes) {
                binary_.header_done = true;
                if (binary_.header[0] != binproto::kMagicRequest) {
                    binary_.error = ErrorDetail::Client;
                }
                const auto op = binproto::opcode_from_byte(binary_.header[1]);
                binary_.key_length = binproto::get_u16be(&binary_.header[2]);
                binary_.extras_length = binary_.header[4];
                binary_.total_body = binproto::get_u32be(&binary_.header[8]);
                binary_.opaque = binproto::get_u32be(&binary_.header[12]);
                if (binary_.error == ErrorDetail::None && !op) {
                    binary_.error = ErrorDetail::Unsupported;
                }
                if (binary_.error == ErrorDetail::None) {
                    binary_.opcode = *op;
                    const std::uint32_t fixed = binary_.extras_length + binary_.key_length;
                    if (fixed > binary_.total_body) {
                        binary_.error = ErrorDetail::Framing;
                    } else {
                        binary_.value_length = binary_.total_body - fixed;
                        binary_.error = validate_binary_layout();
                    }
                }
            }
            continue;
        }
        if (binary_.error != ErrorDetail::None) {
            binary_.consumed += valid - i;
            break;
        }
        const std::size_t extras_end = binproto::kHeaderBytes + binary_.extras_length;
        const std::size_t key_end = extras_end + binary_.key_length;
        const std::size_t value_end = key_end + binary_.value_length;
        std::size_t take = 0;
        if (pos < extras_end) {
            take = std::min(valid - i, extras_end - pos);
            std::copy_n(w.data.begin() + static_cast<std::ptrdiff_t>(i), take,
                        binary_.extras.begin() + static_cast<std::ptrdiff_t>(pos - binproto::kHeaderBytes));
        } else if (pos < key_end) {
            take = std::min(valid - i, key_end - pos);
            binary_.key.append(reinterpret_cast<const char*>(w.data.data()) + i, take);
        } else if (pos < value_end) {
            take = std::min(valid - i, value_end - pos);
            binary_.value.insert(binary_.value.end(), w.data.begin() + static_cast<std::ptrdiff_t>(i),
                                 w.data.begin() + static_cast<std::ptrdiff_t>(i + take));
        } else {
            binary_.error = ErrorDetail::Framing;  // bytes beyond the declared body
            take = valid - i;
        }
        i += take;
        binary_.consumed += take;
    }
    if (w.last) {
        if (binary_.error == ErrorDetail::None &&
            binary_.consumed != binproto::kHeaderBytes + binary_.total_body) {
            binary_.error = ErrorDetail::Framing;  // message shorter than the header claims
        }
        request_finished_ = true;
    }
}

ErrorDetail ParserStage::validate_binary_layout() const {
    switch (binary_.opcode) {
        case Opcode::Get:
        case Opcode::Delete:
            if (binary_.extras_length != 0 || binary_.value_length != 0) return ErrorDetail::Client;
            if (binary_.key_length == 0 || binary_.key_length > cfg_.max_key) return ErrorDetail::Client;
            break;
        case Opcode::Set:
            if (binary_.extras_length != 8) return ErrorDetail::Client;
            if (binary_.key_length == 0 || binary_.key_length > cfg_.max_key) return ErrorDetail::Client;
            if (binary_.value_length > cfg_.max_value) return ErrorDetail::Client;
            break;
        case Opcode::Flush:
            if (binary_.extras_length != 0 && binary_.extras_length != 4) return ErrorDetail::Client;
            if (binary_.key_length != 0 || binary_.value_length != 0) return ErrorDetail::Client;
            break;
    }
    return ErrorDetail::None;
}

void ParserStage::finish_binary_request() {
    PipeHeader h;
    h.meta.protocol = Protocol::Binary;
    if (binary_.header_done) h.meta.opaque = binary_.opaque;
    if (binary_.error != ErrorDetail::None) {
        h.meta.opcode = binary_.header_done && binproto::opcode_from_byte(binary_.header[1])
                            ? binary_.opcode
                            : Opcode::Get;
        h.status = Status::Error;
        h.error = binary_.error;
        stage_message(h, {}, {});
        return;
    }
    h.meta.opcode = binary_.opcode;
    h.meta.key_length = binary_.key_length;
    h.meta.value_length = binary_.value_length;
    if (binary_.opcode == Opcode::Set) {
        h.meta.flags = binproto::get_u32be(&binary_.extras[0]);
        h.meta.expiration = binproto::get_u32be(&binary_.extras[4]);
    } else if (binary_.opcode == Opcode::Flush && binary_.extras_length == 4) {
        h.meta.expiration = binproto::get_u32be(&binary_.extras[0]);
    }
    if (validate_meta(h.meta, cfg_.max_value)) {
        h = PipeHeader{};
        h.meta.opcode = binary_.opcode;
        h.meta.protocol = Protocol::Binary;
        h.meta.opaque = binary_.opaque;
        h.status = Status::Error;
        h.error = ErrorDetail::Client;
        stage_message(h, {}, {});
        return;
    }
    h.value_attached = binary_.opcode == Opcode::Set;
    stage_message(h, binary_.key, binary_.value);
}

void ParserStage::stage_message(const PipeHeader& header, std::string_view key,
                                std::span<const std::uint8_t> value) {
    PipeHeader h = header;
    h.meta.request_id = next_request_id_++;
    ready_bytes_ = encode_pipe_message(h, key, value);
}

void ParserStage::reset_request_state() {
    mode_ = Mode::Dispatch;
    request_finished_ = false;
    saw_last_word_ = false;
    ascii_.reset();
    binary_.reset();
    chain_.fill(FieldStage{});
}

}  // namespace mcpipe
