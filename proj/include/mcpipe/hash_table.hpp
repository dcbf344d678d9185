#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mcpipe/bounded_channel.hpp"
#include "mcpipe/concurrency_filter.hpp"
#include "mcpipe/jenkins_hash.hpp"
#include "mcpipe/message.hpp"
#include "mcpipe/stage.hpp"
#include "mcpipe/stage_io.hpp"

namespace mcpipe {

struct HashTableEntry {
    bool valid = false;
    std::string key;
    std::uint32_t address = 0;
    std::uint32_t value_length = 0;
    std::uint32_t flags = 0;
    std::uint32_t expiration = 0;
};

struct HashTableConfig {
    std::size_t bucket_count = 4096;  // power of two
    std::size_t bucket_slots = 8;
    std::size_t filter_entries = 16;
    std::size_t slot_count = 8192;  // value-store addresses handed out by the free list
};

// Second pipeline stage. Per message: split header from payload, hash the
// key, enter concurrency control, read the bucket, compare keys, update the
// bucket, and emit the command for the value store. Writes hold a filter
// entry from concurrency-control entry until the command has fully left
// the stage; reads stall while a matching write is in flight.
class HashTableStage final : public Stage {
public:
    HashTableStage(BoundedChannel<StreamWord>& in, BoundedChannel<StreamWord>& out, HashTableConfig cfg = {});

    bool step() override;
    const char* name() const override { return "hash_table"; }

    std::size_t free_addresses() const { return free_list_.size(); }
    std::size_t valid_entries() const;
    const ConcurrencyFilter& filter() const { return filter_; }

    // One line per valid entry: bucket, slot, key as hex, address, value length.
    void dump(std::ostream& os) const;

private:
    enum class Phase : std::uint8_t { Collect, Decide, Emit, PassValue, DropValue };

    bool decide();
    HashTableEntry* find_entry(std::size_t bucket, std::string_view key);
    HashTableEntry* find_free_slot(std::size_t bucket);
    void emit_response(Status status, ErrorDetail error, std::uint32_t address, std::uint32_t value_length,
                       std::uint32_t flags, std::uint32_t expiration, bool attach_value);
    void finish_message();

    BoundedChannel<StreamWord>& in_;
    BoundedChannel<StreamWord>& out_;
    HashTableConfig cfg_;

    std::vector<HashTableEntry> slots_;  // bucket_count x bucket_slots
    std::vector<std::uint32_t> free_list_;
    ConcurrencyFilter filter_;

    Phase phase_ = Phase::Collect;
    HeadKeyReader intake_;
    WordEmitter emitter_;
    std::optional<StreamWord> pass_pending_;
    bool value_follows_ = false;
    bool pop_after_message_ = false;
};

}  // namespace mcpipe
