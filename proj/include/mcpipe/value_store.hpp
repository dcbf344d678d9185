#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mcpipe/bounded_channel.hpp"
#include "mcpipe/message.hpp"
#include "mcpipe/stage.hpp"
#include "mcpipe/stage_io.hpp"

namespace mcpipe {

struct SlabConfig {
    std::size_t slot_count = 8192;
    std::size_t slab_size = 8192;  // bytes per slot, equals the value ceiling
};

// Fixed-size slab memory addressed by slot index. Slots are recycled by the
// hash table's free list; stale bytes from earlier occupants are never
// scrubbed, they are simply unreachable.
class SlabStore {
public:
    explicit SlabStore(SlabConfig cfg) : cfg_(cfg) {
        if (cfg.slot_count == 0) throw std::invalid_argument("slot_count");
        if (cfg.slab_size == 0) throw std::invalid_argument("slab_size");
        storage_.resize(cfg.slot_count * cfg.slab_size);
        lengths_.resize(cfg.slot_count, 0);
    }

    // Stores value at the slot. Returns false (writing nothing) when the
    // value exceeds the slab size.
    bool write(std::uint32_t address, std::span<const std::uint8_t> value) {
        check_address(address);
        if (value.size() > cfg_.slab_size) return false;
        ++write_accesses_;
        std::copy(value.begin(), value.end(), storage_.begin() + slot_offset(address));
        lengths_[address] = static_cast<std::uint32_t>(value.size());
        return true;
    }

    // Reads back expected_length bytes. A length disagreement means the
    // hash table and the store have desynchronized, which is a fault.
    std::span<const std::uint8_t> read(std::uint32_t address, std::uint32_t expected_length) {
        check_address(address);
        if (lengths_[address] != expected_length)
            throw PipelineFault("value_store: stored length mismatch");
        ++read_accesses_;
        return {storage_.data() + slot_offset(address), expected_length};
    }

    // read() framed into words per the stream rules.
    std::vector<StreamWord> read_words(std::uint32_t address, std::uint32_t expected_length) {
        auto bytes = read(address, expected_length);
        if (bytes.empty()) return {};
        return pack_message(bytes);
    }

    std::uint32_t stored_length(std::uint32_t address) const {
        check_address(address);
        return lengths_[address];
    }

    std::size_t slot_count() const { return cfg_.slot_count; }
    std::size_t slab_size() const { return cfg_.slab_size; }
    std::uint64_t read_accesses() const { return read_accesses_; }
    std::uint64_t write_accesses() const { return write_accesses_; }

private:
    void check_address(std::uint32_t address) const {
        if (address >= cfg_.slot_count) throw PipelineFault("value_store: address out of range");
    }
    std::size_t slot_offset(std::uint32_t address) const {
        return static_cast<std::size_t>(address) * cfg_.slab_size;
    }

    SlabConfig cfg_;
    std::vector<std::uint8_t> storage_;
    std::vector<std::uint32_t> lengths_;
    std::uint64_t read_accesses_ = 0;
    std::uint64_t write_accesses_ = 0;
};

// Third pipeline stage: decodes the command, moves it into the read or the
// write path, and merges the buffered metadata back in front of any read
// data, in request order.
class ValueStoreStage final : public Stage {
public:
    ValueStoreStage(BoundedChannel<StreamWord>& in, BoundedChannel<StreamWord>& out, SlabConfig cfg = {});

    bool step() override;
    const char* name() const override { return "value_store"; }

    SlabStore& store() { return store_; }
    const SlabStore& store() const { return store_; }

private:
    enum class Phase : std::uint8_t { Collect, Dispatch, CollectValue, EmitHead, EmitValue };

    void dispatch();
    void load_head(const PipeHeader& h, Status status, ErrorDetail error, bool attach_value);

    BoundedChannel<StreamWord>& in_;
    BoundedChannel<StreamWord>& out_;
    SlabStore store_;

    Phase phase_ = Phase::Collect;
    HeadKeyReader intake_;
    WordEmitter emitter_;
    std::vector<std::uint8_t> value_buf_;
    bool drop_value_ = false;
    bool emit_value_after_head_ = false;
    std::span<const std::uint8_t> read_span_;
    std::size_t read_pos_ = 0;
};

}  // namespace mcpipe
