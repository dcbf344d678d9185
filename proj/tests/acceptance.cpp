// Acceptance suite: exercises the full pipeline against its reference
// oracles and prints one PASS/FAIL line per criterion. Exits nonzero if
// any criterion fails.

#include <chrono>
#include <cstdio>
#include <deque>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "lookup3_ref.hpp"
#include "mcpipe/bench.hpp"
#include "mcpipe/delimiter_search.hpp"
#include "mcpipe/model_cache.hpp"
#include "mcpipe/pipeline.hpp"
#include "mcpipe/workload.hpp"

using namespace mcpipe;

namespace {

std::uint64_t now_ns() {
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(
            std::chrono::steady_clock::now().time_since_epoch())
            .count());
}

PipelineConfig acceptance_config() {
    PipelineConfig cfg;  // the defaults, which comfortably hold a 512-key space
    return cfg;
}

std::vector<std::vector<std::uint8_t>> workload_bytes(const Workload& w) {
    std::vector<std::vector<std::uint8_t>> requests;
    for (auto& g : generate_workload(w)) requests.push_back(std::move(g.bytes));
    return requests;
}

// 1. Byte-identical responses to the dictionary model over a 10k mixed trace.
bool criterion_oracle_equivalence(std::string& detail) {
    Workload w;
    w.requests = 10000;
    w.mix = {0.60, 0.30, 0.09, 0.01};
    w.key_space = 512;
    w.protocol = WireProtocol::Mixed;
    w.value_len_min = 0;
    w.value_len_max = 256;
    w.seed = 0xacce5501;
    const auto requests = workload_bytes(w);

    Pipeline pipeline(acceptance_config());
    const std::uint64_t t0 = now_ns();
    const TraceResult result = run_trace(pipeline, requests);
    const double secs = static_cast<double>(now_ns() - t0) / 1e9;

    ModelCache model;
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < requests.size(); ++i) {
        if (model.apply(requests[i]) != result.responses[i]) ++mismatches;
    }
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%zu mismatches over %zu requests in %.2fs", mismatches,
                  requests.size(), secs);
    detail = buf;
    return mismatches == 0 && secs < 60.0;
}

// 2. SET(k,vi) immediately followed by GET(k), injected without draining,
// concurrent scheduler: every GET sees its own vi.
bool criterion_read_after_write(std::string& detail) {
    std::vector<std::vector<std::uint8_t>> requests;
    std::vector<std::string> values;
    for (int i = 0; i < 1000; ++i) {
        const std::string v = "value-" + std::to_string(i);
        values.push_back(v);
        const std::string set = "set k 0 0 " + std::to_string(v.size()) + "\r\n" + v + "\r\n";
        requests.emplace_back(set.begin(), set.end());
        const std::string get = "get k\r\n";
        requests.emplace_back(get.begin(), get.end());
    }
    Pipeline pipeline(acceptance_config());
    const TraceResult result = run_trace(pipeline, requests, /*threaded=*/true);

    std::size_t stale = 0;
    for (int i = 0; i < 1000; ++i) {
        const std::string& v = values[static_cast<std::size_t>(i)];
        const std::string expected = "VALUE k 0 " + std::to_string(v.size()) + "\r\n" + v + "\r\nEND\r\n";
        const auto& got = result.responses[static_cast<std::size_t>(2 * i + 1)];
        if (std::string(got.begin(), got.end()) != expected) ++stale;
    }
    detail = std::to_string(stale) + " stale reads over 1000 pairs";
    return stale == 0;
}

// 3. All four delimiter-search variants agree with a byte-scan oracle.
bool criterion_search_variants(std::string& detail) {
    std::mt19937_64 rng(0xacce5503);
    std::size_t disagreements = 0;
    for (int i = 0; i < 100000; ++i) {
        std::array<std::uint8_t, 8> word;
        for (auto& b : word) b = static_cast<std::uint8_t>(rng());
        const std::uint8_t offset = static_cast<std::uint8_t>(rng() % 8);
        const std::uint8_t delim = (rng() & 1) ? static_cast<std::uint8_t>(rng()) : 0x20;
        if (rng() % 4 == 0) word[offset + rng() % (8u - offset)] = delim;

        std::uint8_t expected = 8;
        for (std::uint8_t j = offset; j < 8; ++j) {
            if (word[j] == delim) {
                expected = static_cast<std::uint8_t>(j - offset);
                break;
            }
        }
        for (SearchVariant v : {SearchVariant::ShiftReverse, SearchVariant::ForwardNoShift,
                                SearchVariant::ReverseNoShift, SearchVariant::ShiftForward}) {
            if (find_delimiter(word, offset, delim, v) != expected) ++disagreements;
        }
    }
    detail = std::to_string(disagreements) + " disagreements over 100000 triples x 4 variants";
    return disagreements == 0;
}

// 4. Concurrency filter vs a queue-with-membership model, including
// capacity-16 overflow.
bool criterion_filter_model(std::string& detail) {
    std::mt19937_64 rng(0xacce5504);
    ConcurrencyFilter filter(16);
    std::deque<std::string> model;
    std::size_t divergences = 0;
    for (int i = 0; i < 100000; ++i) {
        const std::string key = "k" + std::to_string(rng() % 24);
        switch (rng() % 3) {
            case 0: {
                const bool got = filter.push({key, Opcode::Set});
                const bool expect = model.size() < 16;
                if (got != expect) ++divergences;
                if (expect) model.push_back(key);
                break;
            }
            case 1: {
                const bool got = filter.pop();
                const bool expect = !model.empty();
                if (got != expect) ++divergences;
                if (expect) model.pop_front();
                break;
            }
            default: {
                const bool got = filter.compare(key);
                const bool expect = std::find(model.begin(), model.end(), key) != model.end();
                if (got != expect) ++divergences;
                break;
            }
        }
        if (filter.occupancy() != model.size()) ++divergences;
    }
    detail = std::to_string(divergences) + " divergences over 100000 ops";
    return divergences == 0;
}

// 5. bj_hash bit-exact with the published lookup3 reference.
bool criterion_hash_exactness(std::string& detail) {
    std::size_t mismatches = 0;
    // the frozen seed vectors
    if (bj_hash(std::string_view(""), 0) != 0xdeadbeefu) ++mismatches;
    if (bj_hash(std::string_view("Four score and seven years ago"), 0) != 0x17770551u) ++mismatches;
    if (bj_hash(std::string_view("foo"), 0) != 0xe18f6896u) ++mismatches;

    std::mt19937_64 rng(0xacce5505);
    for (int i = 0; i < 1000; ++i) {
        const std::size_t len = 1 + rng() % 250;
        std::string key(len, 0);
        for (auto& c : key) c = static_cast<char>(rng());
        const std::uint32_t seed = static_cast<std::uint32_t>(rng());
        if (bj_hash(key, seed) != lookup3_ref::hashlittle(key.data(), key.size(), seed)) ++mismatches;
    }
    detail = std::to_string(mismatches) + " mismatches over 1003 vectors";
    return mismatches == 0;
}

// 6. Protocol golden vectors, byte-exact.
bool criterion_golden_vectors(std::string& detail) {
    std::size_t failures = 0;
    auto to_bytes = [](const std::string& s) { return std::vector<std::uint8_t>(s.begin(), s.end()); };

    Pipeline pipeline(acceptance_config());
    const std::vector<std::vector<std::uint8_t>> ascii_requests = {
        to_bytes("set foo 7 0 3\r\nbar\r\n"),
        to_bytes("get foo\r\n"),
        to_bytes("delete foo\r\n"),
        to_bytes("get foo\r\n"),
        to_bytes("flush_all\r\n"),
    };
    const TraceResult ascii = run_trace(pipeline, ascii_requests);
    const std::vector<std::string> ascii_expected = {
        "STORED\r\n", "VALUE foo 7 3\r\nbar\r\nEND\r\n", "DELETED\r\n", "END\r\n", "OK\r\n"};
    for (std::size_t i = 0; i < ascii_expected.size(); ++i) {
        if (std::string(ascii.responses[i].begin(), ascii.responses[i].end()) != ascii_expected[i])
            ++failures;
    }

    // binary vectors, headers packed by hand
    auto binary_request = [](std::uint8_t opcode, const std::string& key, const std::string& value,
                             std::uint32_t flags, std::uint32_t opaque, bool extras) {
        const std::size_t body = (extras ? 8 : 0) + key.size() + value.size();
        std::vector<std::uint8_t> req(24 + body, 0);
        req[0] = 0x80;
        req[1] = opcode;
        req[2] = static_cast<std::uint8_t>(key.size() >> 8);
        req[3] = static_cast<std::uint8_t>(key.size());
        req[4] = extras ? 8 : 0;
        req[8] = static_cast<std::uint8_t>(body >> 24);
        req[9] = static_cast<std::uint8_t>(body >> 16);
        req[10] = static_cast<std::uint8_t>(body >> 8);
        req[11] = static_cast<std::uint8_t>(body);
        req[12] = static_cast<std::uint8_t>(opaque >> 24);
        req[13] = static_cast<std::uint8_t>(opaque >> 16);
        req[14] = static_cast<std::uint8_t>(opaque >> 8);
        req[15] = static_cast<std::uint8_t>(opaque);
        std::size_t pos = 24;
        if (extras) {
            req[pos] = static_cast<std::uint8_t>(flags >> 24);
            req[pos + 1] = static_cast<std::uint8_t>(flags >> 16);
            req[pos + 2] = static_cast<std::uint8_t>(flags >> 8);
            req[pos + 3] = static_cast<std::uint8_t>(flags);
            pos += 8;
        }
        std::copy(key.begin(), key.end(), req.begin() + static_cast<std::ptrdiff_t>(pos));
        std::copy(value.begin(), value.end(),
                  req.begin() + static_cast<std::ptrdiff_t>(pos + key.size()));
        return req;
    };
    auto binary_response = [](std::uint8_t opcode, std::uint16_t status, std::uint32_t opaque,
                              std::uint32_t flags, const std::string& value, bool extras) {
        const std::size_t body = (extras ? 4 : 0) + value.size();
        std::vector<std::uint8_t> resp(24 + body, 0);
        resp[0] = 0x81;
        resp[1] = opcode;
        resp[4] = extras ? 4 : 0;
        resp[6] = static_cast<std::uint8_t>(status >> 8);
        resp[7] = static_cast<std::uint8_t>(status);
        resp[8] = static_cast<std::uint8_t>(body >> 24);
        resp[9] = static_cast<std::uint8_t>(body >> 16);
        resp[10] = static_cast<std::uint8_t>(body >> 8);
        resp[11] = static_cast<std::uint8_t>(body);
        resp[12] = static_cast<std::uint8_t>(opaque >> 24);
        resp[13] = static_cast<std::uint8_t>(opaque >> 16);
        resp[14] = static_cast<std::uint8_t>(opaque >> 8);
        resp[15] = static_cast<std::uint8_t>(opaque);
        if (extras) {
            resp[24] = static_cast<std::uint8_t>(flags >> 24);
            resp[25] = static_cast<std::uint8_t>(flags >> 16);
            resp[26] = static_cast<std::uint8_t>(flags >> 8);
            resp[27] = static_cast<std::uint8_t>(flags);
        }
        std::copy(value.begin(), value.end(), resp.end() - static_cast<std::ptrdiff_t>(value.size()));
        return resp;
    };

    Pipeline binary_pipeline(acceptance_config());
    const std::vector<std::vector<std::uint8_t>> binary_requests = {
        binary_request(0x01, "k", "bar", 7, 0x11, true),   // SET
        binary_request(0x00, "k", "", 0, 0x22, false),     // GET hit
        binary_request(0x04, "k", "", 0, 0x33, false),     // DELETE
        binary_request(0x00, "k", "", 0, 0x44, false),     // GET miss
    };
    const TraceResult binary = run_trace(binary_pipeline, binary_requests);
    const std::vector<std::vector<std::uint8_t>> binary_expected = {
        binary_response(0x01, 0x0000, 0x11, 0, "", false),
        binary_response(0x00, 0x0000, 0x22, 7, "bar", true),
        binary_response(0x04, 0x0000, 0x33, 0, "", false),
        binary_response(0x00, 0x0001, 0x44, 0, "", false),
    };
    for (std::size_t i = 0; i < binary_expected.size(); ++i) {
        if (binary.responses[i] != binary_expected[i]) ++failures;
    }

    detail = std::to_string(failures) + " vector failures (differential vs a live memcached: skipped, "
             "no server available)";
    return failures == 0;
}

// 7. Qualitative latency ordering: the ASCII path is never cheaper than the
// binary one for the same command type.
bool criterion_latency_ordering(std::string& detail) {
    Workload w;
    w.requests = 10000;
    w.mix = {0.6, 0.4, 0.0, 0.0};
    w.key_space = 512;
    w.protocol = WireProtocol::Mixed;
    w.value_len_min = 64;
    w.value_len_max = 64;
    w.seed = 0xacce5507;
    const auto requests = workload_bytes(w);
    Pipeline pipeline(acceptance_config());
    const TraceResult result = run_trace(pipeline, requests);

    double sums[2][2] = {{0, 0}, {0, 0}};
    std::size_t counts[2][2] = {{0, 0}, {0, 0}};
    for (const LatencyRecord& r : result.latencies) {
        if (r.opcode != Opcode::Get && r.opcode != Opcode::Set) continue;
        const int op = r.opcode == Opcode::Set ? 1 : 0;
        const int proto = r.protocol == Protocol::Ascii ? 1 : 0;
        sums[op][proto] += static_cast<double>(r.latency_ns());
        counts[op][proto] += 1;
    }
    const double get_binary = sums[0][0] / static_cast<double>(counts[0][0]);
    const double get_ascii = sums[0][1] / static_cast<double>(counts[0][1]);
    const double set_binary = sums[1][0] / static_cast<double>(counts[1][0]);
    const double set_ascii = sums[1][1] / static_cast<double>(counts[1][1]);

    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "mean ns: get ascii %.0f vs binary %.0f, set ascii %.0f vs binary %.0f", get_ascii,
                  get_binary, set_ascii, set_binary);
    detail = buf;
    return get_ascii >= get_binary && set_ascii >= set_binary;
}

// 8. Single-context throughput floor.
bool criterion_throughput_floor(std::string& detail) {
    Workload w;
    w.requests = 20000;
    w.mix = {0.7, 0.3, 0.0, 0.0};
    w.key_space = 512;
    w.protocol = WireProtocol::Mixed;
    w.value_len_min = 16;
    w.value_len_max = 128;
    w.seed = 0xacce5508;
    const auto requests = workload_bytes(w);

    Pipeline pipeline(acceptance_config());
    const std::uint64_t t0 = now_ns();
    const TraceResult result = run_trace(pipeline, requests);
    const double secs = static_cast<double>(now_ns() - t0) / 1e9;
    const double ops = static_cast<double>(result.responses.size()) / secs;

    char buf[96];
    std::snprintf(buf, sizeof(buf), "%.0f ops/s single-context", ops);
    detail = buf;
    return ops >= 50000.0;
}

// 9. Saturation: flood the ingress for 10 seconds; nothing deadlocks,
// nothing accepted is lost, channels never exceed capacity.
bool criterion_saturation(std::string& detail) {
    Pipeline pipeline(acceptance_config());
    pipeline.start();

    Workload w;
    w.requests = 2000;  // recycled round-robin as flood fodder
    w.mix = {0.5, 0.5, 0.0, 0.0};
    w.key_space = 256;
    w.protocol = WireProtocol::Mixed;
    w.value_len_min = 8;
    w.value_len_max = 64;
    w.seed = 0xacce5509;
    const auto requests = workload_bytes(w);

    std::atomic<std::uint64_t> accepted{0};
    std::atomic<bool> stop_feeding{false};
    std::atomic<bool> feeder_finished{false};

    std::thread feeder([&] {
        std::size_t idx = 0;
        std::vector<StreamWord> words;
        std::size_t pos = 0;
        // flood at full rate, then finish the in-flight message so no
        // half-fed request sits in the channel
        while (!stop_feeding.load(std::memory_order_relaxed) || (pos != 0 && pos < words.size())) {
            if (pos == words.size()) {
                if (stop_feeding.load(std::memory_order_relaxed)) break;
                words = pack_message(requests[idx % requests.size()]);
                pos = 0;
                ++idx;
            }
            if (pipeline.ingress().try_write(words[pos])) {
                ++pos;
                if (pos == words.size()) accepted.fetch_add(1, std::memory_order_relaxed);
            }
        }
        feeder_finished.store(true, std::memory_order_release);
    });

    std::uint64_t responses = 0;
    std::vector<StreamWord> resp_words;
    const std::uint64_t t0 = now_ns();
    const std::uint64_t feed_deadline = t0 + 10ull * 1000000000ull;
    std::uint64_t last_progress = t0;
    bool deadlocked = false;

    for (;;) {
        const std::uint64_t now = now_ns();
        if (now >= feed_deadline) stop_feeding.store(true, std::memory_order_relaxed);
        bool progressed = false;
        while (auto word = pipeline.egress().try_read()) {
            progressed = true;
            resp_words.push_back(*word);
            if (word->last) {
                ++responses;
                resp_words.clear();
            }
        }
        if (progressed) last_progress = now;
        if (feeder_finished.load(std::memory_order_acquire) && responses >= accepted.load()) break;
        if (now - last_progress > 5ull * 1000000000ull) {
            deadlocked = true;
            break;
        }
    }
    stop_feeding.store(true);
    feeder.join();
    pipeline.stop();

    std::size_t watermark_violations = 0;
    for (const auto* ch : pipeline.channels()) {
        if (ch->high_watermark() > ch->capacity()) ++watermark_violations;
    }

    char buf[160];
    std::snprintf(buf, sizeof(buf), "accepted %llu, answered %llu, %zu watermark violations%s",
                  static_cast<unsigned long long>(accepted.load()),
                  static_cast<unsigned long long>(responses), watermark_violations,
                  deadlocked ? ", deadlock suspected" : "");
    detail = buf;
    return !deadlocked && responses == accepted.load() && watermark_violations == 0;
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<bool(std::string&)> run;
    };
    const std::vector<Criterion> criteria = {
        {"oracle equivalence (10k mixed commands, byte-identical)", criterion_oracle_equivalence},
        {"read-after-write consistency (1k undrained set/get pairs)", criterion_read_after_write},
        {"search-variant equivalence (100k random triples)", criterion_search_variants},
        {"concurrency-filter model equivalence (100k ops)", criterion_filter_model},
        {"bj_hash bit-exactness (reference oracle)", criterion_hash_exactness},
        {"protocol golden vectors (ascii + binary)", criterion_golden_vectors},
        {"latency ordering (ascii >= binary per opcode)", criterion_latency_ordering},
        {"throughput floor (>= 50k ops/s single-context)", criterion_throughput_floor},
        {"saturation safety (10s flood, no loss, bounded channels)", criterion_saturation},
    };

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        std::string detail;
        bool ok = false;
        try {
            ok = criteria[i].run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        std::printf("%s  %zu. %s — %s\n", ok ? "PASS" : "FAIL", i + 1, criteria[i].name,
                    detail.c_str());
        std::fflush(stdout);
        if (!ok) ++failed;
    }
    if (failed > 0) std::printf("%d criterion(s) failed\n", failed);
    return failed == 0 ? 0 : 1;
}
