#include "mcpipe/hash_table.hpp"

#include <bit>
#include <ostream>

namespace mcpipe {

HashTableStage::HashTableStage(BoundedChannel<StreamWord>& in, BoundedChannel<StreamWord>& out,
                               HashTableConfig cfg)
    : in_(in), out_(out), cfg_(cfg), filter_(cfg.filter_entries) {
    if (cfg.bucket_count == 0 || !std::has_single_bit(cfg.bucket_count))
        throw std::invalid_argument("bucket_count");
    if (cfg.bucket_slots == 0) throw std::invalid_argument("bucket_slots");
    if (cfg.slot_count == 0) throw std::invalid_argument("slot_count");
    slots_.resize(cfg.bucket_count * cfg.bucket_slots);
    free_list_.reserve(cfg.slot_count);
    for (std::size_t a = cfg.slot_count; a-- > 0;) free_list_.push_back(static_cast<std::uint32_t>(a));
}

bool HashTableStage::step() {
    switch (phase_) {
        case Phase::Collect: {
            auto w = in_.try_read();
            if (!w) return false;
            if (intake_.feed(*w)) {
                const PipeHeader& h = intake_.header();
                const bool value_words_follow = h.value_attached && h.meta.value_length > 0;
                if (w->last == value_words_follow)
                    throw PipelineFault("hash_table: framing does not match header");
                phase_ = Phase::Decide;
            }
            return true;
        }
        case Phase::Decide:
            return decide();
        case Phase::Emit: {
            if (!emitter_.pump(out_)) return false;
            if (emitter_.empty()) {
                const PipeHeader& h = intake_.header();
                const bool incoming_value = h.value_attached && h.meta.value_length > 0;
                if (value_follows_) {
                    phase_ = Phase::PassValue;
                } else if (incoming_value) {
                    phase_ = Phase::DropValue;
                } else {
                    finish_message();
                }
            }
            return true;
        }
        case Phase::PassValue: {
            if (pass_pending_) {
                if (!out_.try_write(*pass_pending_)) return false;
                const bool was_last = pass_pending_->last;
                pass_pending_.reset();
                if (was_last) finish_message();
                return true;
            }
            auto w = in_.try_read();
            if (!w) return false;
            if (!out_.try_write(*w)) {
                pass_pending_ = *w;
                return true;
            }
            if (w->last) finish_message();
            return true;
        }
        case Phase::DropValue: {
            auto w = in_.try_read();
            if (!w) return false;
            if (w->last) finish_message();
            return true;
        }
    }
    return false;
}

bool HashTableStage::decide() {
    const PipeHeader& h = intake_.header();
    const std::string& key = intake_.key();

    // Parse errors skip hashing and concurrency control entirely.
    if (h.status == Status::Error) {
        emit_response(Status::Error, h.error, 0, 0, h.meta.flags, h.meta.expiration, false);
        return true;
    }

    const std::uint32_t hash = key.empty() ? 0 : bj_hash(key, 0);
    const std::size_t bucket = hash % cfg_.bucket_count;

    switch (h.meta.opcode) {
        case Opcode::Get: {
            if (filter_.compare(key)) return false;  // conflicting write in flight, retry
            if (HashTableEntry* e = find_entry(bucket, key)) {
                emit_response(Status::Found, ErrorDetail::None, e->address, e->value_length, e->flags,
                              e->expiration, false);
            } else {
                emit_response(Status::NotFound, ErrorDetail::None, 0, 0, h.meta.flags, h.meta.expiration, false);
            }
            return true;
        }
        case Opcode::Set: {
            if (!filter_.push({key, Opcode::Set})) return false;  // filter full, retry
            pop_after_message_ = true;
            HashTableEntry* e = find_entry(bucket, key);
            if (!e) {
                e = find_free_slot(bucket);
                if (!e || free_list_.empty()) {
                    // Out of table or slab space: leave the critical section now,
                    // the write never reaches the memory-write stage.
                    filter_.pop();
                    pop_after_message_ = false;
                    emit_response(Status::Error, ErrorDetail::Storage, 0, 0, h.meta.flags, h.meta.expiration,
                                  false);
                    return true;
                }
                e->valid = true;
                e->key = key;
                e->address = free_list_.back();
                free_list_.pop_back();
            }
            e->value_length = h.meta.value_length;
            e->flags = h.meta.flags;
            e->expiration = h.meta.expiration;
            emit_response(Status::None, ErrorDetail::None, e->address, h.meta.value_length, h.meta.flags,
                          h.meta.expiration, true);
            return true;
        }
        case Opcode::Delete: {
            if (!filter_.push({key, Opcode::Delete})) return false;
            pop_after_message_ = true;
            if (HashTableEntry* e = find_entry(bucket, key)) {
                e->valid = false;
                free_list_.push_back(e->address);
                emit_response(Status::Deleted, ErrorDetail::None, 0, 0, h.meta.flags, h.meta.expiration, false);
            } else {
                emit_response(Status::NotFound, ErrorDetail::None, 0, 0, h.meta.flags, h.meta.expiration, false);
            }
            return true;
        }
        case Opcode::Flush: {
            if (filter_.occupancy() != 0) return false;  // wait for in-flight writes
            for (HashTableEntry& e : slots_) e.valid = false;
            free_list_.clear();
            for (std::size_t a = cfg_.slot_count; a-- > 0;) free_list_.push_back(static_cast<std::uint32_t>(a));
            emit_response(Status::Flushed, ErrorDetail::None, 0, 0, h.meta.flags, h.meta.expiration, false);
            return true;
        }
    }
    throw PipelineFault("hash_table: unknown opcode in pipe header");
}

HashTableEntry* HashTableStage::find_entry(std::size_t bucket, std::string_view key) {
    HashTableEntry* base = &slots_[bucket * cfg_.bucket_slots];
    for (std::size_t s = 0; s < cfg_.bucket_slots; ++s) {
        if (base[s].valid && base[s].key == key) return &base[s];
    }
    return nullptr;
}

HashTableEntry* HashTableStage::find_free_slot(std::size_t bucket) {
    HashTableEntry* base = &slots_[bucket * cfg_.bucket_slots];
    for (std::size_t s = 0; s < cfg_.bucket_slots; ++s) {
        if (!base[s].valid) return &base[s];
    }
    return nullptr;
}

void HashTableStage::emit_response(Status status, ErrorDetail error, std::uint32_t address,
                                   std::uint32_t value_length, std::uint32_t flags, std::uint32_t expiration,
                                   bool attach_value) {
    PipeHeader out = intake_.header();
    out.status = status;
    out.error = error;
    out.address = address;
    out.value_attached = attach_value;
    out.meta.value_length = value_length;
    out.meta.flags = flags;
    out.meta.expiration = expiration;
    value_follows_ = attach_value && value_length > 0;  // zero-length values add no words
    emitter_.load(encode_head_key(out, intake_.key()), !value_follows_);
    phase_ = Phase::Emit;
}

void HashTableStage::finish_message() {
    // Critical-section exit: the write command has now fully passed the
    // memory-write stage.
    if (pop_after_message_) {
        filter_.pop();
        pop_after_message_ = false;
    }
    intake_.reset();
    phase_ = Phase::Collect;
}

std::size_t HashTableStage::valid_entries() const {
    std::size_t n = 0;
    for (const HashTableEntry& e : slots_) n += e.valid ? 1 : 0;
    return n;
}

void HashTableStage::dump(std::ostream& os) const {
    static const char* hex = "0123456789abcdef";
    for (std::size_t b = 0; b < cfg_.bucket_count; ++b) {
        for (std::size_t s = 0; s < cfg_.bucket_slots; ++s) {
            const HashTableEntry& e = slots_[b * cfg_.bucket_slots + s];
            if (!e.valid) continue;
            os << b << ' ' << s << ' ';
            for (unsigned char c : e.key) os << hex[c >> 4] << hex[c & 0xf];
            os << ' ' << e.address << ' ' << e.value_length << '\n';
        }
    }
}

}  // namespace mcpipe
