#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mcpipe/ascii_convert.hpp"
#include "mcpipe/bounded_channel.hpp"
#include "mcpipe/message.hpp"
#include "mcpipe/stage.hpp"
#include "mcpipe/stage_io.hpp"

namespace mcpipe {

// The five sections of an ASCII value response, assembled strictly in this
// order with running byte offsets.
enum class AsciiSection : std::uint8_t {
    HeaderText = 0,        // "VALUE "
    Key,
    FlagsText,             // " " + flags
    LengthText,            // " " + length + CRLF
    ValueAndTerminators,   // value + CRLF + "END" + CRLF
};

// Final pipeline stage: turns internal responses back into wire bytes. The
// ASCII value path walks the five sections one per step; the binary
// formatter is a simplified subset since all sizes and offsets are known
// from the header alone.
class FormatterStage final : public Stage {
public:
    FormatterStage(BoundedChannel<StreamWord>& in, BoundedChannel<StreamWord>& out);

    bool step() override;
    const char* name() const override { return "formatter"; }

    // Instrumentation: record request ids in the order responses are built.
    void set_id_log(std::vector<std::uint32_t>* log) { id_log_ = log; }

private:
    enum class Phase : std::uint8_t { Collect, BuildFixed, BuildSection, StreamValue, Terminators, Drain };

    bool pump_out();
    void begin_response();
    void append_ascii_section(AsciiSection s);
    void append_binary_header();

    BoundedChannel<StreamWord>& in_;
    BoundedChannel<StreamWord>& out_;

    Phase phase_ = Phase::Collect;
    HeadKeyReader intake_;
    WordPacker packer_;
    std::optional<StreamWord> pending_out_;
    AsciiSection section_ = AsciiSection::HeaderText;
    bool value_words_follow_ = false;
    std::vector<std::uint32_t>* id_log_ = nullptr;
};

}  // namespace mcpipe
