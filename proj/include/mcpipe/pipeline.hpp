#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <exception>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "mcpipe/bounded_channel.hpp"
#include "mcpipe/formatter.hpp"
#include "mcpipe/hash_table.hpp"
#include "mcpipe/parser.hpp"
#include "mcpipe/value_store.hpp"

namespace mcpipe {

struct PipelineConfig {
    std::size_t channel_capacity = 64;  // words per channel, unless overridden below
    // per-channel overrides in pipeline order: ingress, parser->ht,
    // ht->store, store->formatter, egress; 0 inherits channel_capacity
    std::array<std::size_t, 5> channel_capacity_override{};
    std::size_t bucket_count = 4096;    // power of two
    std::size_t bucket_slots = 8;
    std::size_t filter_entries = 16;
    std::size_t slot_count = 8192;
    std::size_t store_slot_count = 0;  // 0 = follow slot_count; anything else must match it
    std::size_t slab_size = 8192;
    std::uint32_t max_key = kMaxKeyLength;
    std::uint32_t max_value = kDefaultMaxValue;
    std::uint32_t max_ascii_line = 320;
    SearchVariant search_variant = SearchVariant::ShiftReverse;
    bool log_response_ids = false;  // instrumentation tap at the formatter
};

// The four stages of the dataflow wired in order with bounded channels:
// parser -> hash table -> value store -> formatter. Runs either
// deterministically (round-robin pump, one poll per stage per round) or
// with one thread per stage.
class Pipeline {
public:
    explicit Pipeline(PipelineConfig cfg = {});
    ~Pipeline();

    Pipeline(const Pipeline&) = delete;
    Pipeline& operator=(const Pipeline&) = delete;

    BoundedChannel<StreamWord>& ingress() { return ingress_; }
    BoundedChannel<StreamWord>& egress() { return egress_; }

    // One deterministic scheduling round; true if any stage progressed.
    bool pump();

    // Concurrent mode: spawn one thread per stage. stop() is safe to call
    // at any point; in-flight messages are preserved by the channels.
    void start();
    void stop();
    bool running() const { return !threads_.empty(); }

    // Rethrows a fault raised on a stage thread, if any.
    void check_fault();

    const PipelineConfig& config() const { return cfg_; }
    std::array<const BoundedChannel<StreamWord>*, 5> channels() const;

    ParserStage& parser() { return *parser_; }
    HashTableStage& hash_table() { return *hash_table_; }
    ValueStoreStage& value_store() { return *value_store_; }
    FormatterStage& formatter() { return *formatter_; }
    const std::vector<std::uint32_t>& response_ids() const { return response_ids_; }

private:
    PipelineConfig cfg_;
    BoundedChannel<StreamWord> ingress_;
    BoundedChannel<StreamWord> parser_to_ht_;
    BoundedChannel<StreamWord> ht_to_store_;
    BoundedChannel<StreamWord> store_to_fmt_;
    BoundedChannel<StreamWord> egress_;

    std::unique_ptr<ParserStage> parser_;
    std::unique_ptr<HashTableStage> hash_table_;
    std::unique_ptr<ValueStoreStage> value_store_;
    std::unique_ptr<FormatterStage> formatter_;
    std::array<Stage*, 4> stages_{};
    std::vector<std::uint32_t> response_ids_;

    std::vector<std::thread> threads_;
    std::atomic<bool> stop_{false};
    std::atomic<bool> faulted_{false};
    std::exception_ptr fault_;
};

struct LatencyRecord {
    std::uint32_t request_id = 0;
    Opcode opcode = Opcode::Get;
    Protocol protocol = Protocol::Ascii;
    std::uint64_t ingress_ns = 0;
    std::uint64_t egress_ns = 0;

    std::uint64_t latency_ns() const { return egress_ns - ingress_ns; }
};

struct TraceResult {
    std::vector<std::vector<std::uint8_t>> responses;
    std::vector<LatencyRecord> latencies;
};

// Feeds raw request byte strings through the pipeline, in order, and
// collects one response per request. Backpressure propagates to the feed
// point; nothing is dropped. With threaded=false the caller's thread pumps
// the deterministic scheduler; with threaded=true the stages must keep up
// on their own threads (start() is called if needed).
TraceResult run_trace(Pipeline& pipeline, std::span<const std::vector<std::uint8_t>> requests,
                      bool threaded = false);

// Best-effort classification of a raw request for reporting.
std::pair<Opcode, Protocol> sniff_request(std::span<const std::uint8_t> request);

// Latency CSV: header line "request_id,opcode,protocol,latency_ns".
void write_latency_csv(std::ostream& os, std::span<const LatencyRecord> records);

// Trace files hold length-prefixed records: 4-byte big-endian length, then
// the raw request bytes, so binary requests embed cleanly.
void write_trace_file(const std::string& path, std::span<const std::vector<std::uint8_t>> requests);
std::vector<std::vector<std::uint8_t>> read_trace_file(const std::string& path);

const char* opcode_name(Opcode op);
const char* protocol_name(Protocol p);

}  // namespace mcpipe
