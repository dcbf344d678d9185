#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mcpipe/model_cache.hpp"
#include "mcpipe/pipeline.hpp"
#include "mcpipe/workload.hpp"

namespace mcpipe {

struct BenchOptions {
    Workload workload;
    PipelineConfig pipeline;  // used for the in-process target
    bool in_process = true;
    std::string host = "127.0.0.1";
    std::uint16_t port = 11211;
    bool validate = false;   // compare every response against the model oracle
    bool threaded = false;   // in-process: run stages on their own threads
};

struct OpBucketStats {
    Opcode opcode = Opcode::Get;
    Protocol protocol = Protocol::Ascii;
    std::uint64_t count = 0;
    std::uint64_t p50_ns = 0;
    std::uint64_t p95_ns = 0;
    std::uint64_t p99_ns = 0;
    double mean_ns = 0.0;
};

struct BenchReport {
    std::uint64_t total_requests = 0;
    double seconds = 0.0;
    double ops_per_sec = 0.0;
    std::uint64_t bytes_sent = 0;
    std::uint64_t bytes_received = 0;
    std::uint64_t validation_mismatches = 0;
    std::uint64_t transport_errors = 0;
    std::uint64_t client_error_responses = 0;
    std::uint64_t server_error_responses = 0;
    bool complete = true;
    std::vector<OpBucketStats> buckets;       // one per opcode x protocol seen
    std::vector<LatencyRecord> records;       // per request, for CSV output
};

BenchReport run_bench(const BenchOptions& opts);

void print_report(std::ostream& os, const BenchReport& report);

// True when the response signals a client- or server-side error.
bool is_error_response(std::span<const std::uint8_t> response, bool& server_side);

}  // namespace mcpipe
