#include "mcpipe/value_store.hpp"

namespace mcpipe {

ValueStoreStage::ValueStoreStage(BoundedChannel<StreamWord>& in, BoundedChannel<StreamWord>& out,
                                 SlabConfig cfg)
    : in_(in), out_(out), store_(cfg) {}

bool ValueStoreStage::step() {
    switch (phase_) {
        case Phase::Collect: {
            auto w = in_.try_read();
            if (!w) return false;
            if (intake_.feed(*w)) {
                const PipeHeader& h = intake_.header();
                const bool value_words_follow = h.value_attached && h.meta.value_length > 0;
                if (w->last == value_words_follow)
                    throw PipelineFault("value_store: framing does not match header");
                phase_ = value_words_follow && h.meta.opcode == Opcode::Set ? Phase::CollectValue
                                                                            : Phase::Dispatch;
                if (phase_ == Phase::CollectValue) {
                    value_buf_.clear();
                    value_buf_.reserve(h.meta.value_length);
                    // An oversized value can never be written whole, so it is
                    // dropped while it streams past.
                    drop_value_ = h.meta.value_length > store_.slab_size();
                }
            }
            return true;
        }
        case Phase::CollectValue: {
            auto w = in_.try_read();
            if (!w) return false;
            if (!drop_value_) {
                const std::size_t n = w->valid_bytes();
                value_buf_.insert(value_buf_.end(), w->data.begin(), w->data.begin() + n);
            }
            if (w->last) phase_ = Phase::Dispatch;
            return true;
        }
        case Phase::Dispatch:
            dispatch();
            return true;
        case Phase::EmitHead: {
            if (!emitter_.pump(out_)) return false;
            if (emitter_.empty()) {
                if (emit_value_after_head_ && !read_span_.empty()) {
                    phase_ = Phase::EmitValue;
                } else {
                    intake_.reset();
                    phase_ = Phase::Collect;
                }
            }
            return true;
        }
        case Phase::EmitValue: {
            const std::size_t n = std::min(kWordBytes, read_span_.size() - read_pos_);
            StreamWord w;
            std::copy_n(read_span_.begin() + static_cast<std::ptrdiff_t>(read_pos_), n, w.data.begin());
            w.keep = keep_for_bytes(n);
            w.last = read_pos_ + n == read_span_.size();
            if (!out_.try_write(w)) return false;
            read_pos_ += n;
            if (w.last) {
                read_span_ = {};
                read_pos_ = 0;
                intake_.reset();
                phase_ = Phase::Collect;
            }
            return true;
        }
    }
    return false;
}

void ValueStoreStage::dispatch() {
    const PipeHeader& h = intake_.header();

    if (h.status == Status::None && h.meta.opcode == Opcode::Set) {
        if (drop_value_ || !store_.write(h.address, value_buf_)) {
            load_head(h, Status::Error, ErrorDetail::Storage, false);
        } else {
            load_head(h, Status::Stored, ErrorDetail::None, false);
        }
        value_buf_.clear();
        drop_value_ = false;
        return;
    }
    if (h.status == Status::Found && h.meta.opcode == Opcode::Get) {
        read_span_ = store_.read(h.address, h.meta.value_length);
        read_pos_ = 0;
        load_head(h, Status::Found, ErrorDetail::None, true);
        return;
    }
    switch (h.status) {
        case Status::NotFound:
        case Status::Deleted:
        case Status::Flushed:
        case Status::Error:
            load_head(h, h.status, h.error, false);  // pass-through, no storage access
            return;
        default:
            throw PipelineFault("value_store: unexpected command status");
    }
}

void ValueStoreStage::load_head(const PipeHeader& h, Status status, ErrorDetail error, bool attach_value) {
    PipeHeader out = h;
    out.status = status;
    out.error = error;
    out.value_attached = attach_value;
    const bool value_words_follow = attach_value && out.meta.value_length > 0;
    emit_value_after_head_ = value_words_follow;
    emitter_.load(encode_head_key(out, intake_.key()), !value_words_follow);
    phase_ = Phase::EmitHead;
}

}  // namespace mcpipe
