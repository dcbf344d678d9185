#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mcpipe/ascii_convert.hpp"
#include "mcpipe/bounded_channel.hpp"
#include "mcpipe/delimiter_search.hpp"
#include "mcpipe/message.hpp"
#include "mcpipe/stage.hpp"
#include "mcpipe/stream_word.hpp"

namespace mcpipe {

struct ParserConfig {
    SearchVariant search_variant = SearchVariant::ShiftReverse;
    std::uint32_t max_key = kMaxKeyLength;
    std::uint32_t max_value = kDefaultMaxValue;
    std::uint32_t max_ascii_line = 320;  // command line incl. terminators
};

// Binary requests open with the magic byte, anything else is treated as
// ASCII and rejected later if malformed.
inline Protocol detect_protocol(std::uint8_t first_byte) {
    return first_byte == 0x80 ? Protocol::Binary : Protocol::Ascii;
}

namespace parser_detail {

// One word travelling the ASCII field-extraction chain. begin is the byte
// offset where the not-yet-claimed region of this word starts; 8 means the
// word was consumed entirely by earlier fields.
struct FieldToken {
    StreamWord word;
    std::uint8_t begin = 0;
};

enum class FieldPhase : std::uint8_t { Waiting, Scanning, PendingCr, PendingLf, Done, Skip };

// The six extraction stages in grammar order.
enum Field : std::uint8_t {
    kCommand = 0,
    kKey,
    kFlags,
    kExpiration,
    kValueLength,
    kValue,
    kFieldCount,
};

struct AsciiScratch {
    Opcode opcode = Opcode::Get;
    bool opcode_known = false;
    std::string command;
    std::string key;
    std::string digits[3];  // flags, expiration, value_length as text
    std::uint32_t numeric[3] = {0, 0, 0};
    std::vector<std::uint8_t> value;
    std::uint32_t line_bytes = 0;
    ErrorDetail error = ErrorDetail::None;

    void reset() { *this = AsciiScratch{}; }
};

struct BinaryScratch {
    std::array<std::uint8_t, 24> header{};
    std::array<std::uint8_t, 8> extras{};
    std::string key;
    std::vector<std::uint8_t> value;
    std::size_t consumed = 0;
    bool header_done = false;
    Opcode opcode = Opcode::Get;
    std::uint16_t key_length = 0;
    std::uint8_t extras_length = 0;
    std::uint32_t total_body = 0;
    std::uint32_t value_length = 0;
    std::uint32_t opaque = 0;
    std::uint32_t flags = 0;
    std::uint32_t expiration = 0;
    ErrorDetail error = ErrorDetail::None;

    void reset() { *this = BinaryScratch{}; }
};

}  // namespace parser_detail

// First pipeline stage. Detects the protocol from the leading byte of each
// framed request, runs the matching sub-parser, and emits the request in
// the internal pipeline format. Malformed requests are consumed whole and
// replaced by an error marker so one response always leaves per request.
class ParserStage final : public Stage {
public:
    ParserStage(BoundedChannel<StreamWord>& in, BoundedChannel<StreamWord>& out, ParserConfig cfg = {});

    bool step() override;
    const char* name() const override { return "parser"; }

    std::uint32_t issued_requests() const { return next_request_id_; }

private:
    using FieldToken = parser_detail::FieldToken;
    using FieldPhase = parser_detail::FieldPhase;

    enum class Mode : std::uint8_t { Dispatch, Ascii, Binary, DrainError };

    bool pump_emit();
    bool consume_word(const StreamWord& w);
    void feed_binary(const StreamWord& w);
    ErrorDetail validate_binary_layout() const;
    bool pump_ascii_chain();
    std::optional<FieldToken> process_field_stage(std::size_t k, FieldToken token);
    void scan_field(std::size_t k, FieldToken& token);
    void collect_value(FieldToken& token);
    void complete_field(std::size_t k, bool line_final);
    void fail(ErrorDetail detail);
    std::uint8_t normalize(std::size_t next, std::size_t valid) const;
    void finish_ascii_request();
    void finish_binary_request();
    void stage_message(const PipeHeader& h, std::string_view key, std::span<const std::uint8_t> value);
    void reset_request_state();

    BoundedChannel<StreamWord>& in_;
    BoundedChannel<StreamWord>& out_;
    ParserConfig cfg_;

    Mode mode_ = Mode::Dispatch;
    parser_detail::AsciiScratch ascii_;
    parser_detail::BinaryScratch binary_;

    // ASCII chain registers: phase plus a single-slot inbox per stage.
    struct FieldStage {
        FieldPhase phase = FieldPhase::Waiting;
        bool line_final = false;  // field is terminated by CRLF instead of SP
        std::optional<FieldToken> inbox;
    };
    std::array<FieldStage, parser_detail::kFieldCount> chain_{};
    bool saw_last_word_ = false;  // stop intake at the message boundary
    bool request_finished_ = false;

    // Output side: the message being emitted plus one staged slot so the
    // extractor can keep working while the previous message drains.
    std::vector<std::uint8_t> emit_bytes_;
    std::size_t emit_pos_ = 0;
    std::vector<std::uint8_t> ready_bytes_;

    std::uint32_t next_request_id_ = 0;
};

}  // namespace mcpipe
