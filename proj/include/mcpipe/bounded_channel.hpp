#pragma once

#include <atomic>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace mcpipe {

// Bounded single-producer single-consumer queue. The producer end and the
// consumer end may live in two different threads; no other sharing is
// allowed. Both operations are non-blocking: emptiness and fullness are
// ordinary results, so callers poll and retry, mirroring the empty()/full()
// guards of a hardware FIFO interface.
template <typename T>
class BoundedChannel {
public:
    explicit BoundedChannel(std::size_t capacity) : capacity_(capacity), slots_(capacity + 1) {
        if (capacity == 0) throw std::invalid_argument("channel_capacity");
    }

    BoundedChannel(const BoundedChannel&) = delete;
    BoundedChannel& operator=(const BoundedChannel&) = delete;

    // Appends item if the channel holds fewer than capacity elements,
    // otherwise returns false and leaves the channel unchanged.
    bool try_write(T item) {
        const std::size_t tail = tail_.load(std::memory_order_relaxed);
        const std::size_t next = advance(tail);
        if (next == head_.load(std::memory_order_acquire)) return false;
        slots_[tail] = std::move(item);
        tail_.store(next, std::memory_order_release);
        const std::size_t occ = occupancy(head_.load(std::memory_order_relaxed), next);
        std::size_t seen = watermark_.load(std::memory_order_relaxed);
        while (occ > seen && !watermark_.compare_exchange_weak(seen, occ, std::memory_order_relaxed)) {
        }
        return true;
    }

    // Removes and returns the oldest element, or an empty result when the
    // channel is empty.
    std::optional<T> try_read() {
        const std::size_t head = head_.load(std::memory_order_relaxed);
        if (head == tail_.load(std::memory_order_acquire)) return std::nullopt;
        std::optional<T> out(std::move(slots_[head]));
        head_.store(advance(head), std::memory_order_release);
        return out;
    }

    std::size_t capacity() const { return capacity_; }

    bool empty() const {
        return head_.load(std::memory_order_acquire) == tail_.load(std::memory_order_acquire);
    }

    // Approximate under concurrency; exact when quiescent.
    std::size_t size() const {
        return occupancy(head_.load(std::memory_order_acquire), tail_.load(std::memory_order_acquire));
    }

    // Highest occupancy observed at any write; never exceeds capacity by
    // construction, recorded so saturation tests can assert it.
    std::size_t high_watermark() const { return watermark_.load(std::memory_order_relaxed); }

private:
    std::size_t advance(std::size_t i) const { return i + 1 == slots_.size() ? 0 : i + 1; }

    std::size_t occupancy(std::size_t head, std::size_t tail) const {
        return tail >= head ? tail - head : tail + slots_.size() - head;
    }

    const std::size_t capacity_;
    std::vector<T> slots_;
    alignas(64) std::atomic<std::size_t> head_{0};
    alignas(64) std::atomic<std::size_t> tail_{0};
    std::atomic<std::size_t> watermark_{0};
};

// Consumes words from `in` until (and including) the first word with
// last==true and returns how many were consumed. Spins when the stream
// runs dry mid-message, so the input must eventually deliver a last word.
template <typename Channel>
std::size_t count_message_words(Channel& in) {
    std::size_t counter = 0;
    for (;;) {
        auto w = in.try_read();
        if (!w) continue;
        ++counter;
        if (w->last) return counter;
    }
}

}  // namespace mcpipe
