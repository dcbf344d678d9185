#include <random>
#include <sstream>

#include "doctest.h"
#include "mcpipe/bench.hpp"
#include "mcpipe/model_cache.hpp"
#include "mcpipe/pipeline.hpp"
#include "mcpipe/workload.hpp"

using namespace mcpipe;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) {
    return {s.begin(), s.end()};
}

std::string as_text(const std::vector<std::uint8_t>& v) {
    return {v.begin(), v.end()};
}

PipelineConfig small_config() {
    PipelineConfig cfg;
    cfg.bucket_count = 256;
    cfg.bucket_slots = 8;
    cfg.slot_count = 1024;
    cfg.slab_size = 8192;
    return cfg;
}

}  // namespace

TEST_CASE("set then get end to end") {
    Pipeline p(small_config());
    const std::vector<std::vector<std::uint8_t>> requests = {
        bytes_of("set k 0 0 1\r\nv\r\n"),
        bytes_of("get k\r\n"),
    };
    const TraceResult result = run_trace(p, requests);
    REQUIRE(result.responses.size() == 2);
    CHECK(as_text(result.responses[0]) == "STORED\r\n");
    CHECK(as_text(result.responses[1]) == "VALUE k 0 1\r\nv\r\nEND\r\n");
}

TEST_CASE("set get delete get sequence") {
    Pipeline p(small_config());
    const std::vector<std::vector<std::uint8_t>> requests = {
        bytes_of("set foo 7 0 3\r\nbar\r\n"),
        bytes_of("get foo\r\n"),
        bytes_of("delete foo\r\n"),
        bytes_of("get foo\r\n"),
    };
    const TraceResult result = run_trace(p, requests);
    REQUIRE(result.responses.size() == 4);
    CHECK(as_text(result.responses[0]) == "STORED\r\n");
    CHECK(as_text(result.responses[1]) == "VALUE foo 7 3\r\nbar\r\nEND\r\n");
    CHECK(as_text(result.responses[2]) == "DELETED\r\n");
    CHECK(as_text(result.responses[3]) == "END\r\n");
}

TEST_CASE("empty trace") {
    Pipeline p(small_config());
    const TraceResult result = run_trace(p, {});
    CHECK(result.responses.empty());
    CHECK(result.latencies.empty());
}

TEST_CASE("malformed requests produce error responses in sequence") {
    Pipeline p(small_config());
    const std::vector<std::vector<std::uint8_t>> requests = {
        bytes_of("set k 0 0 1\r\nv\r\n"),
        bytes_of("bogus cmd\r\n"),
        bytes_of("get k\r\n"),
    };
    const TraceResult result = run_trace(p, requests);
    REQUIRE(result.responses.size() == 3);
    CHECK(as_text(result.responses[0]) == "STORED\r\n");
    CHECK(as_text(result.responses[1]) == "ERROR\r\n");
    CHECK(as_text(result.responses[2]) == "VALUE k 0 1\r\nv\r\nEND\r\n");
}

TEST_CASE("pipeline construction errors name the offending field") {
    PipelineConfig cfg = small_config();
    cfg.channel_capacity = 0;
    CHECK_THROWS_WITH_AS(Pipeline{cfg}, "channel_capacity", std::invalid_argument);

    cfg = small_config();
    cfg.store_slot_count = cfg.slot_count + 1;
    CHECK_THROWS_WITH_AS(Pipeline{cfg}, "slot_count", std::invalid_argument);

    cfg = small_config();
    cfg.bucket_count = 100;
    CHECK_THROWS_WITH_AS(Pipeline{cfg}, "bucket_count", std::invalid_argument);

    cfg = small_config();
    cfg.max_value = cfg.slab_size + 1;
    CHECK_THROWS_WITH_AS(Pipeline{cfg}, "max_value", std::invalid_argument);
}

TEST_CASE("per-channel capacity overrides apply") {
    PipelineConfig cfg = small_config();
    cfg.channel_capacity = 16;
    cfg.channel_capacity_override = {128, 0, 8, 0, 32};
    Pipeline p(cfg);
    const auto chans = p.channels();
    CHECK(chans[0]->capacity() == 128);
    CHECK(chans[1]->capacity() == 16);
    CHECK(chans[2]->capacity() == 8);
    CHECK(chans[3]->capacity() == 16);
    CHECK(chans[4]->capacity() == 32);
    // still functional with lopsided channels
    const TraceResult r = run_trace(p, std::vector<std::vector<std::uint8_t>>{
                                            bytes_of("set k 0 0 3\r\nabc\r\n"),
                                            bytes_of("get k\r\n"),
                                        });
    CHECK(as_text(r.responses[1]) == "VALUE k 0 3\r\nabc\r\nEND\r\n");
}

TEST_CASE("responses byte-match the model over a random mixed trace") {
    Workload w;
    w.requests = 2000;
    w.mix = {0.55, 0.35, 0.09, 0.01};
    w.key_space = 64;
    w.protocol = WireProtocol::Mixed;
    w.value_len_min = 0;
    w.value_len_max = 96;
    w.seed = 0x5eed6001;
    const auto generated = generate_workload(w);
    std::vector<std::vector<std::uint8_t>> requests;
    for (const auto& g : generated) requests.push_back(g.bytes);

    Pipeline p(small_config());
    const TraceResult result = run_trace(p, requests);
    REQUIRE(result.responses.size() == requests.size());

    ModelCache model;
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < requests.size(); ++i) {
        if (model.apply(requests[i]) != result.responses[i]) ++mismatches;
    }
    CHECK(mismatches == 0);
}

TEST_CASE("request ids reach the formatter exactly once, in issue order") {
    PipelineConfig cfg = small_config();
    cfg.log_response_ids = true;
    Pipeline p(cfg);
    std::vector<std::vector<std::uint8_t>> requests;
    for (int i = 0; i < 50; ++i) requests.push_back(bytes_of("set k" + std::to_string(i) + " 0 0 1\r\nx\r\n"));
    for (int i = 0; i < 50; ++i) requests.push_back(bytes_of("get k" + std::to_string(i) + "\r\n"));
    run_trace(p, requests);
    REQUIRE(p.response_ids().size() == 100);
    for (std::uint32_t i = 0; i < 100; ++i) CHECK(p.response_ids()[i] == i);
}

TEST_CASE("responses come back in request order under interleaved traffic") {
    Pipeline p(small_config());
    std::vector<std::vector<std::uint8_t>> requests;
    for (int i = 0; i < 64; ++i) {
        const std::string v = std::to_string(i);
        requests.push_back(
            bytes_of("set key 0 0 " + std::to_string(v.size()) + "\r\n" + v + "\r\n"));
        requests.push_back(bytes_of("get key\r\n"));
    }
    const TraceResult result = run_trace(p, requests);
    for (int i = 0; i < 64; ++i) {
        const std::string v = std::to_string(i);
        CHECK(as_text(result.responses[2 * i]) == "STORED\r\n");
        CHECK(as_text(result.responses[2 * i + 1]) ==
              "VALUE key 0 " + std::to_string(v.size()) + "\r\n" + v + "\r\nEND\r\n");
    }
}

TEST_CASE("threaded scheduler produces the same bytes") {
    Workload w;
    w.requests = 500;
    w.mix = {0.6, 0.4, 0.0, 0.0};
    w.key_space = 32;
    w.protocol = WireProtocol::Mixed;
    w.seed = 0x5eed6002;
    const auto generated = generate_workload(w);
    std::vector<std::vector<std::uint8_t>> requests;
    for (const auto& g : generated) requests.push_back(g.bytes);

    Pipeline deterministic(small_config());
    const TraceResult a = run_trace(deterministic, requests, false);
    Pipeline threaded(small_config());
    const TraceResult b = run_trace(threaded, requests, true);
    CHECK(a.responses == b.responses);
}

TEST_CASE("latency records and csv output") {
    Pipeline p(small_config());
    const std::vector<std::vector<std::uint8_t>> requests = {
        bytes_of("set k 0 0 1\r\nv\r\n"),
        bytes_of("get k\r\n"),
    };
    const TraceResult result = run_trace(p, requests);
    REQUIRE(result.latencies.size() == 2);
    CHECK(result.latencies[0].opcode == Opcode::Set);
    CHECK(result.latencies[1].opcode == Opcode::Get);
    for (const LatencyRecord& r : result.latencies) CHECK(r.egress_ns >= r.ingress_ns);

    std::ostringstream os;
    write_latency_csv(os, result.latencies);
    const std::string csv = os.str();
    CHECK(csv.rfind("request_id,opcode,protocol,latency_ns\n", 0) == 0);
    CHECK(csv.find("0,set,ascii,") != std::string::npos);
    CHECK(csv.find("1,get,ascii,") != std::string::npos);
}

TEST_CASE("trace file round trip") {
    Workload w;
    w.requests = 50;
    w.protocol = WireProtocol::Mixed;
    w.mix = {0.5, 0.5, 0.0, 0.0};
    w.seed = 3;
    const auto generated = generate_workload(w);
    std::vector<std::vector<std::uint8_t>> requests;
    for (const auto& g : generated) requests.push_back(g.bytes);

    const std::string path = "/tmp/mcpipe_trace_test.bin";
    write_trace_file(path, requests);
    CHECK(read_trace_file(path) == requests);
}

TEST_CASE("in-process bench validates cleanly and reports sane stats") {
    BenchOptions opts;
    opts.workload.requests = 1500;
    opts.workload.mix = {0.7, 0.25, 0.05, 0.0};
    opts.workload.key_space = 128;
    opts.workload.protocol = WireProtocol::Mixed;
    opts.workload.seed = 42;
    opts.pipeline = small_config();
    opts.validate = true;
    const BenchReport report = run_bench(opts);
    CHECK(report.total_requests == 1500);
    CHECK(report.validation_mismatches == 0);
    CHECK(report.complete);
    CHECK(report.ops_per_sec > 0);
    std::uint64_t counted = 0;
    for (const OpBucketStats& b : report.buckets) {
        counted += b.count;
        CHECK(b.p50_ns <= b.p95_ns);
        CHECK(b.p95_ns <= b.p99_ns);
    }
    CHECK(counted == report.total_requests);

    std::ostringstream os;
    print_report(os, report);
    CHECK(os.str().find("throughput") != std::string::npos);
}

TEST_CASE("zero-request bench does not crash") {
    BenchOptions opts;
    opts.workload.requests = 0;
    opts.pipeline = small_config();
    const BenchReport report = run_bench(opts);
    CHECK(report.total_requests == 0);
    CHECK(report.complete);
}

TEST_CASE("validation is passive: identical responses with and without it") {
    BenchOptions opts;
    opts.workload.requests = 600;
    opts.workload.mix = {0.6, 0.35, 0.05, 0.0};
    opts.workload.protocol = WireProtocol::Mixed;
    opts.workload.seed = 77;
    opts.pipeline = small_config();

    opts.validate = false;
    const BenchReport plain = run_bench(opts);
    opts.validate = true;
    const BenchReport checked = run_bench(opts);

    CHECK(checked.validation_mismatches == 0);
    CHECK(plain.bytes_sent == checked.bytes_sent);
    CHECK(plain.bytes_received == checked.bytes_received);  // same responses, same state
}

TEST_CASE("reported throughput is requests over wall time") {
    BenchOptions opts;
    opts.workload.requests = 2000;
    opts.workload.mix = {0.8, 0.2, 0.0, 0.0};
    opts.pipeline = small_config();
    const BenchReport report = run_bench(opts);
    const double recomputed = static_cast<double>(report.total_requests) / report.seconds;
    CHECK(report.ops_per_sec == doctest::Approx(recomputed).epsilon(0.01));
}
